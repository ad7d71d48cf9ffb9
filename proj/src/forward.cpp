#include "sst/forward.hpp"

#include <cmath>
#include <exception>
#include <random>
#include <string>

#include "sst/errors.hpp"

namespace sst {

DensityMatrix::DensityMatrix(const ComplexMatrix &m) : m_(m)
{
    if (!m.square() || m.rows() == 0)
        throw UnphysicalStateError("density matrix must be square and nonempty");
    if (!m.all_finite())
        throw UnphysicalStateError("density matrix has non-finite entries");
    if (m.hermiticity_error() > 1e-12)
        throw UnphysicalStateError("density matrix is not Hermitian (error " + std::to_string(m.hermiticity_error()) + ")");
    const Complex tr = m.trace();
    if (std::abs(tr - Complex{1.0, 0.0}) > 1e-12)
        throw UnphysicalStateError("density matrix trace is " + std::to_string(tr.real()) + ", expected 1");
    const double lo = min_eigenvalue(m);
    if (lo < -1e-10)
        throw UnphysicalStateError("density matrix has negative eigenvalue " + std::to_string(lo));
    m_ = m.hermitized();
}

DensityMatrix DensityMatrix::pure(std::span<const Complex> psi)
{
    double norm = 0.0;
    for (const auto &c : psi)
        norm += std::norm(c);
    if (!(norm > 0.0))
        throw UnphysicalStateError("pure state vector has zero norm");
    ComplexMatrix m = ComplexMatrix::outer(psi);
    m *= 1.0 / norm;
    return DensityMatrix(m.hermitized(), Unchecked{});
}

DensityMatrix DensityMatrix::maximally_mixed(std::size_t dim)
{
    ComplexMatrix m = ComplexMatrix::identity(dim);
    m *= 1.0 / static_cast<double>(dim);
    return DensityMatrix(std::move(m), Unchecked{});
}

DensityMatrix DensityMatrix::basis(std::size_t dim, std::size_t i)
{
    ComplexMatrix m(dim, dim);
    m(i, i) = 1.0;
    return DensityMatrix(std::move(m), Unchecked{});
}

DensityMatrix mix(const DensityMatrix &a, const DensityMatrix &b, double p)
{
    if (a.dim() != b.dim())
        throw DimensionError("mix: dimension mismatch");
    if (!(p >= 0.0 && p <= 1.0))
        throw InputError("mix: weight must lie in [0, 1]");
    return DensityMatrix(a.matrix() * (1.0 - p) + b.matrix() * p, DensityMatrix::Unchecked{});
}

void ScanRecord::validate() const
{
    if (grid.size() != counts.size())
        throw InputError("scan: grid has " + std::to_string(grid.size()) + " points but " +
                         std::to_string(counts.size()) + " counts");
    for (auto c : counts)
        if (c < 0)
            throw InputError("scan: negative count");
    if (!(exposure > 0.0))
        throw InputError("scan: exposure must be positive");
    validate_grid(grid);
}

std::vector<double> ScanRecord::model_grid() const
{
    std::vector<double> shifted(grid);
    for (auto &x : shifted)
        x += center_offset_um;
    return shifted;
}

std::int64_t ScanRecord::total_counts() const
{
    std::int64_t total = 0;
    for (auto c : counts)
        total += c;
    return total;
}

double detection_probability(const ComplexMatrix &state, const ComplexMatrix &m)
{
    if (!state.square() || !m.square() || state.rows() != m.rows())
        throw DimensionError("detection_probability: state is " + std::to_string(state.rows()) +
                             "-dimensional, operator is " + std::to_string(m.rows()) + "-dimensional");
    const std::size_t d = m.rows();
    Complex p{};
    double magnitude = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const Complex term = m(i, j) * state(j, i);
            p += term;
            magnitude += std::abs(term);
        }
    if (std::abs(p.imag()) > 1e-10 * std::max(magnitude, 1e-300))
        throw NumericalError("detection_probability: Tr[M rho] has a non-negligible imaginary part");
    return p.real();
}

double detection_probability(const DensityMatrix &rho, const ComplexMatrix &m)
{
    return detection_probability(rho.matrix(), m);
}

namespace {

double checked_mean(double probability, double weight, double exposure, std::size_t k)
{
    if (probability < -1e-10)
        throw UnphysicalStateError("model probability " + std::to_string(probability) + " < 0 at grid index " +
                                   std::to_string(k) + " (unphysical state)");
    return exposure * weight * std::max(probability, 0.0);
}

void check_exposure(double exposure)
{
    if (!(exposure > 0.0) || !std::isfinite(exposure))
        throw InputError("exposure must be positive and finite");
}

std::int64_t draw_poisson(double mean, std::uint64_t seed, std::size_t k)
{
    if (mean <= 0.0)
        return 0;
    std::mt19937_64 engine(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(k) + 0x9E3779B97F4A7C15ull)));
    std::poisson_distribution<std::int64_t> dist(mean);
    return dist(engine);
}

} // namespace

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::vector<double> expected_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure)
{
    check_exposure(exposure);
    const auto weights = grid_weights(pat.grid());
    std::vector<double> probability(pat.size());
    const auto n = static_cast<std::ptrdiff_t>(pat.size());
    // Exceptions must not escape the parallel region.
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k) {
        try {
            probability[static_cast<std::size_t>(k)] = detection_probability(state, pat.matrix(static_cast<std::size_t>(k)));
        } catch (...) {
#pragma omp critical(sst_expected_scan)
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);

    std::vector<double> out(pat.size());
    for (std::size_t k = 0; k < pat.size(); ++k)
        out[k] = checked_mean(probability[k], weights[k], exposure, k);
    return out;
}

std::vector<double> expected_scan(const DensityMatrix &rho, const PatternSet &pat, double exposure)
{
    return expected_scan(rho.matrix(), pat, exposure);
}

std::vector<std::int64_t> poisson_counts(std::span<const double> means, std::uint64_t seed)
{
    std::vector<std::int64_t> counts(means.size());
    const auto n = static_cast<std::ptrdiff_t>(means.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k)
        counts[static_cast<std::size_t>(k)] =
            draw_poisson(means[static_cast<std::size_t>(k)], seed, static_cast<std::size_t>(k));
    return counts;
}

ScanRecord simulate_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure, std::uint64_t seed)
{
    const auto means = expected_scan(state, pat, exposure);
    ScanRecord rec;
    rec.grid = pat.grid();
    rec.counts = poisson_counts(means, seed);
    rec.exposure = exposure;
    rec.seed = seed;
    return rec;
}

ScanRecord simulate_scan(const DensityMatrix &rho, const PatternSet &pat, double exposure, std::uint64_t seed)
{
    return simulate_scan(rho.matrix(), pat, exposure, seed);
}

namespace serial {

std::vector<double> expected_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure)
{
    check_exposure(exposure);
    const auto weights = grid_weights(pat.grid());
    std::vector<double> out(pat.size());
    for (std::size_t k = 0; k < pat.size(); ++k)
        out[k] = checked_mean(detection_probability(state, pat.matrix(k)), weights[k], exposure, k);
    return out;
}

std::vector<std::int64_t> poisson_counts(std::span<const double> means, std::uint64_t seed)
{
    std::vector<std::int64_t> counts(means.size());
    for (std::size_t k = 0; k < means.size(); ++k)
        counts[k] = draw_poisson(means[k], seed, k);
    return counts;
}

} // namespace serial

} // namespace sst
