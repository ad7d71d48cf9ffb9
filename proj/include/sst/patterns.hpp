#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/quadrature.hpp"

namespace sst {

/// Top-hat detector aperture of width b (um); b = 0 is the ideal point detector.
struct DetectorSpec {
    double slit_width_um = 0.0;
    std::size_t quad_points = 32;

    bool ideal() const noexcept { return slit_width_um == 0.0; }
    /// Throws InputError on b < 0 or fewer than 8 quadrature nodes for b > 0.
    void validate() const;
};

/// phi_i^*(x) phi_j(x), units 1/um.
Complex ideal_pattern(const Geometry &g, std::size_t i, std::size_t j, double x_um);

/// (1/b) int_{-b/2}^{b/2} phi_i^*(x+x') phi_j(x+x') dx' by Gauss-Legendre with
/// det.quad_points nodes. Throws NumericalError if doubling the node count moves
/// the value by more than 1e-9 relative to the pattern scale K/pi.
Complex realistic_pattern(const Geometry &g, const DetectorSpec &det, std::size_t i, std::size_t j, double x_um);

/// Evaluates M(x) for a fixed geometry and detector; reusable across grid points.
class PatternEvaluator {
public:
    PatternEvaluator(const Geometry &g, const DetectorSpec &det);

    std::size_t dim() const noexcept { return phi_.dim(); }
    double sinc_scale() const noexcept { return phi_.sinc_scale(); }
    const DetectorSpec &detector() const noexcept { return det_; }

    /// Hermitian by construction: the upper triangle is computed and mirrored.
    ComplexMatrix operator()(double x_um) const;

private:
    SlitWavefunctions phi_;
    DetectorSpec det_;
    GaussLegendreRule rule_;
};

ComplexMatrix measurement_operator(const Geometry &g, const DetectorSpec &det, double x_um);

/// Number of real channels of a d x d Hermitian matrix: d^2.
constexpr std::size_t channel_count(std::size_t dim) { return dim * dim; }

/// Canonical real-channel layout: the d diagonal entries, then Re and Im of each
/// upper off-diagonal (i < j) in row-major order. For a qutrit:
/// (ll, cc, rr, Re lc, Im lc, Re lr, Im lr, Re cr, Im cr).
void hermitian_channels(const ComplexMatrix &m, std::span<double> out);
std::vector<double> hermitian_channels(const ComplexMatrix &m);
/// Inverse of hermitian_channels.
ComplexMatrix from_hermitian_channels(std::span<const double> channels, std::size_t dim);

/// Slit labels: l, c, r for three slits, otherwise decimal indices.
std::string slit_label(std::size_t dim, std::size_t i);
/// Channel names as used in CSV headers, e.g. Mll, ReMlc, ImMlc.
std::vector<std::string> channel_names(std::size_t dim);

/// Tabulated measurement operators on a detector grid.
class PatternSet {
public:
    PatternSet(std::vector<double> grid, std::vector<ComplexMatrix> matrices, DetectorSpec detector,
               std::uint64_t geometry_digest);

    std::size_t size() const noexcept { return grid_.size(); }
    std::size_t dim() const noexcept { return matrices_.empty() ? 0 : matrices_.front().rows(); }
    const std::vector<double> &grid() const noexcept { return grid_; }
    const ComplexMatrix &matrix(std::size_t k) const { return matrices_.at(k); }
    const std::vector<ComplexMatrix> &matrices() const noexcept { return matrices_; }
    const DetectorSpec &detector() const noexcept { return detector_; }
    std::uint64_t geometry_digest() const noexcept { return digest_; }

    /// Real channels at grid point k (see hermitian_channels).
    std::vector<double> channels(std::size_t k) const { return hermitian_channels(matrices_.at(k)); }
    /// Channel c over the whole grid.
    std::vector<double> channel_series(std::size_t c) const;

private:
    std::vector<double> grid_;
    std::vector<ComplexMatrix> matrices_;
    DetectorSpec detector_;
    std::uint64_t digest_;
};

/// Grid points are evaluated concurrently (OpenMP). Throws InputError unless the
/// grid is nonempty and strictly increasing.
PatternSet pattern_table(const Geometry &g, const DetectorSpec &det, std::span<const double> grid);

namespace serial {
/// Single-threaded reference for pattern_table.
PatternSet pattern_table(const Geometry &g, const DetectorSpec &det, std::span<const double> grid);
} // namespace serial

/// min, min+step, ... up to max inclusive (within step/1e6).
std::vector<double> uniform_grid(double min_um, double max_um, double step_um);

/// Local bin widths: one-sided at the ends, centered differences inside; a
/// single-point grid has width 1.
std::vector<double> grid_weights(std::span<const double> grid);

void validate_grid(std::span<const double> grid);

} // namespace sst
