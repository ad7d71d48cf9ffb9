#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sst/numerics.hpp"
#include "sst/patterns.hpp"

namespace sst {

/// Hermitian, unit-trace, positive semidefinite matrix. Construction checks the
/// invariants (Hermitian to 1e-12, trace 1 +- 1e-12, min eigenvalue >= -1e-10).
class DensityMatrix {
public:
    /// Throws UnphysicalStateError if the invariants fail.
    explicit DensityMatrix(const ComplexMatrix &m);

    static DensityMatrix pure(std::span<const Complex> psi);
    static DensityMatrix maximally_mixed(std::size_t dim);
    /// Basis projector |i><i|.
    static DensityMatrix basis(std::size_t dim, std::size_t i);

    std::size_t dim() const noexcept { return m_.rows(); }
    const ComplexMatrix &matrix() const noexcept { return m_; }
    Complex operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

private:
    struct Unchecked {};
    DensityMatrix(ComplexMatrix m, Unchecked) : m_(std::move(m)) {}

    friend DensityMatrix mix(const DensityMatrix &, const DensityMatrix &, double);

    ComplexMatrix m_;
};

/// (1 - p) a + p b
DensityMatrix mix(const DensityMatrix &a, const DensityMatrix &b, double p);

/// Fixed arm-B detector used to condition an arm-A scan.
struct ArmBContext {
    double x_um = 0.0;
    double slit_width_um = 0.0;
};

/// One detector sweep.
struct ScanRecord {
    std::vector<double> grid;          ///< detector positions, um
    std::vector<std::int64_t> counts;
    double exposure = 1.0;             ///< expected counts per unit probability
    double center_offset_um = 0.0;     ///< model is evaluated at grid + offset
    std::optional<ArmBContext> context;
    std::optional<std::uint64_t> seed;

    /// Throws InputError on length mismatch, negative counts or exposure <= 0.
    void validate() const;
    std::vector<double> model_grid() const;
    std::int64_t total_counts() const;
};

/// Tr[M rho] for any Hermitian state-like matrix (need not be normalized).
/// Throws DimensionError on mismatch and NumericalError if the imaginary part
/// exceeds 1e-10 relative.
double detection_probability(const ComplexMatrix &state, const ComplexMatrix &m);
double detection_probability(const DensityMatrix &rho, const ComplexMatrix &m);

/// exposure * dx_k * P(x_k) at each grid point (OpenMP over grid points).
std::vector<double> expected_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure);
std::vector<double> expected_scan(const DensityMatrix &rho, const PatternSet &pat, double exposure);

/// Poisson counts with mean expected_scan. Bin k draws from its own stream,
/// seeded by SplitMix64(seed, k) feeding a 64-bit Mersenne Twister, so results
/// do not depend on thread count. Throws UnphysicalStateError if the model
/// probability drops below -1e-10 anywhere.
ScanRecord simulate_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure, std::uint64_t seed);
ScanRecord simulate_scan(const DensityMatrix &rho, const PatternSet &pat, double exposure, std::uint64_t seed);

/// Poisson draws for given means, bin k from substream (seed, k).
std::vector<std::int64_t> poisson_counts(std::span<const double> means, std::uint64_t seed);

namespace serial {
std::vector<double> expected_scan(const ComplexMatrix &state, const PatternSet &pat, double exposure);
std::vector<std::int64_t> poisson_counts(std::span<const double> means, std::uint64_t seed);
} // namespace serial

std::uint64_t splitmix64(std::uint64_t x);

} // namespace sst
