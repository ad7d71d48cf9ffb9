#include "sst/patterns.hpp"

#include <cmath>
#include <numbers>

#include "sst/errors.hpp"

namespace sst {

void DetectorSpec::validate() const
{
    if (!(slit_width_um >= 0.0) || !std::isfinite(slit_width_um))
        throw InputError("detector slit width must be finite and >= 0");
    if (slit_width_um > 0.0 && quad_points < 8)
        throw InputError("detector quadrature needs at least 8 nodes");
}

Complex ideal_pattern(const Geometry &g, std::size_t i, std::size_t j, double x_um)
{
    if (i >= g.dim() || j >= g.dim())
        throw InputError("ideal_pattern: slit index out of range");
    const SlitWavefunctions phi(g);
    if (i == j)
        return std::norm(phi(i, x_um));
    return std::conj(phi(i, x_um)) * phi(j, x_um);
}

namespace {

Complex averaged_element(const SlitWavefunctions &phi, const GaussLegendreRule &rule, double b, std::size_t i,
                         std::size_t j, double x_um)
{
    Complex sum{};
    for (std::size_t k = 0; k < rule.size(); ++k) {
        const double xp = x_um + 0.5 * b * rule.nodes[k];
        if (i == j)
            sum += 0.5 * rule.weights[k] * std::norm(phi(i, xp));
        else
            sum += 0.5 * rule.weights[k] * std::conj(phi(i, xp)) * phi(j, xp);
    }
    return sum;
}

} // namespace

Complex realistic_pattern(const Geometry &g, const DetectorSpec &det, std::size_t i, std::size_t j, double x_um)
{
    det.validate();
    if (det.ideal())
        throw InputError("realistic_pattern: detector slit width must be positive");
    if (i >= g.dim() || j >= g.dim())
        throw InputError("realistic_pattern: slit index out of range");

    const SlitWavefunctions phi(g);
    const Complex value = averaged_element(phi, gauss_legendre(det.quad_points), det.slit_width_um, i, j, x_um);
    const Complex refined = averaged_element(phi, gauss_legendre(2 * det.quad_points), det.slit_width_um, i, j, x_um);
    const double scale = phi.sinc_scale() / std::numbers::pi;
    if (std::abs(refined - value) > 1e-9 * std::max(std::abs(refined), scale))
        throw NumericalError("realistic_pattern: " + std::to_string(det.quad_points) +
                             " quadrature nodes are not converged for b = " + std::to_string(det.slit_width_um) + " um");
    return value;
}

PatternEvaluator::PatternEvaluator(const Geometry &g, const DetectorSpec &det)
    : phi_(g), det_(det), rule_(det.ideal() ? GaussLegendreRule{} : gauss_legendre(det.quad_points))
{
    det_.validate();
}

ComplexMatrix PatternEvaluator::operator()(double x_um) const
{
    const std::size_t d = phi_.dim();
    ComplexMatrix m(d, d);
    std::vector<Complex> amp(d);

    auto accumulate = [&](double x, double weight) {
        phi_.evaluate_all(x, amp);
        for (std::size_t i = 0; i < d; ++i) {
            const Complex ci = std::conj(amp[i]) * weight;
            for (std::size_t j = i; j < d; ++j)
                m(i, j) += ci * amp[j];
        }
    };

    if (det_.ideal()) {
        accumulate(x_um, 1.0);
    } else {
        const double half = 0.5 * det_.slit_width_um;
        for (std::size_t k = 0; k < rule_.size(); ++k)
            accumulate(x_um + half * rule_.nodes[k], 0.5 * rule_.weights[k]);
    }
    for (std::size_t i = 0; i < d; ++i) {
        m(i, i) = m(i, i).real();
        for (std::size_t j = i + 1; j < d; ++j)
            m(j, i) = std::conj(m(i, j));
    }
    return m;
}

ComplexMatrix measurement_operator(const Geometry &g, const DetectorSpec &det, double x_um)
{
    return PatternEvaluator(g, det)(x_um);
}

void hermitian_channels(const ComplexMatrix &m, std::span<double> out)
{
    const std::size_t d = m.rows();
    if (!m.square() || out.size() != channel_count(d))
        throw DimensionError("hermitian_channels: output size must be dim^2");
    std::size_t c = 0;
    for (std::size_t i = 0; i < d; ++i)
        out[c++] = m(i, i).real();
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            out[c++] = m(i, j).real();
            out[c++] = m(i, j).imag();
        }
}

std::vector<double> hermitian_channels(const ComplexMatrix &m)
{
    std::vector<double> out(channel_count(m.rows()));
    hermitian_channels(m, out);
    return out;
}

ComplexMatrix from_hermitian_channels(std::span<const double> channels, std::size_t dim)
{
    if (channels.size() != channel_count(dim))
        throw DimensionError("from_hermitian_channels: expected dim^2 channels");
    ComplexMatrix m(dim, dim);
    std::size_t c = 0;
    for (std::size_t i = 0; i < dim; ++i)
        m(i, i) = channels[c++];
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim; ++j) {
            m(i, j) = Complex{channels[c], channels[c + 1]};
            m(j, i) = std::conj(m(i, j));
            c += 2;
        }
    return m;
}

std::string slit_label(std::size_t dim, std::size_t i)
{
    if (dim == 3) {
        static const char *labels[] = {"l", "c", "r"};
        return labels[i];
    }
    return std::to_string(i);
}

std::vector<std::string> channel_names(std::size_t dim)
{
    std::vector<std::string> names;
    const std::string sep = dim == 3 ? "" : "_";
    for (std::size_t i = 0; i < dim; ++i)
        names.push_back("M" + slit_label(dim, i) + sep + slit_label(dim, i));
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim; ++j) {
            const std::string tag = "M" + slit_label(dim, i) + sep + slit_label(dim, j);
            names.push_back("Re" + tag);
            names.push_back("Im" + tag);
        }
    return names;
}

PatternSet::PatternSet(std::vector<double> grid, std::vector<ComplexMatrix> matrices, DetectorSpec detector,
                       std::uint64_t geometry_digest)
    : grid_(std::move(grid)), matrices_(std::move(matrices)), detector_(detector), digest_(geometry_digest)
{
    if (grid_.size() != matrices_.size())
        throw DimensionError("PatternSet: one matrix per grid point required");
}

std::vector<double> PatternSet::channel_series(std::size_t c) const
{
    std::vector<double> series(size());
    std::vector<double> buf(channel_count(dim()));
    for (std::size_t k = 0; k < size(); ++k) {
        hermitian_channels(matrices_[k], buf);
        series[k] = buf.at(c);
    }
    return series;
}

void validate_grid(std::span<const double> grid)
{
    if (grid.empty())
        throw InputError("detector grid is empty");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!std::isfinite(grid[k]))
            throw InputError("detector grid has a non-finite position");
        if (k > 0 && !(grid[k] > grid[k - 1]))
            throw InputError("detector grid must be strictly increasing");
    }
}

PatternSet pattern_table(const Geometry &g, const DetectorSpec &det, std::span<const double> grid)
{
    validate_grid(grid);
    const PatternEvaluator eval(g, det);
    std::vector<ComplexMatrix> matrices(grid.size());
    const auto n = static_cast<std::ptrdiff_t>(grid.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t k = 0; k < n; ++k)
        matrices[static_cast<std::size_t>(k)] = eval(grid[static_cast<std::size_t>(k)]);
    return {{grid.begin(), grid.end()}, std::move(matrices), det, g.digest()};
}

namespace serial {

PatternSet pattern_table(const Geometry &g, const DetectorSpec &det, std::span<const double> grid)
{
    validate_grid(grid);
    const PatternEvaluator eval(g, det);
    std::vector<ComplexMatrix> matrices;
    matrices.reserve(grid.size());
    for (double x : grid)
        matrices.push_back(eval(x));
    return {{grid.begin(), grid.end()}, std::move(matrices), det, g.digest()};
}

} // namespace serial

std::vector<double> uniform_grid(double min_um, double max_um, double step_um)
{
    if (!(step_um > 0.0) || !(max_um > min_um))
        throw InputError("grid needs min < max and step > 0");
    const auto n = static_cast<std::size_t>(std::floor((max_um - min_um) / step_um + 1e-6)) + 1;
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k)
        grid[k] = min_um + static_cast<double>(k) * step_um;
    return grid;
}

std::vector<double> grid_weights(std::span<const double> grid)
{
    const std::size_t n = grid.size();
    std::vector<double> w(n, 1.0);
    if (n < 2)
        return w;
    w[0] = grid[1] - grid[0];
    w[n - 1] = grid[n - 1] - grid[n - 2];
    for (std::size_t k = 1; k + 1 < n; ++k)
        w[k] = 0.5 * (grid[k + 1] - grid[k - 1]);
    return w;
}

} // namespace sst
