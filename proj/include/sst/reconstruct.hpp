#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sst/forward.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"

namespace sst {

enum class PatternMode { ideal, realistic };

std::string to_string(PatternMode mode);
/// Accepts "ideal" or "realistic"; throws InputError otherwise.
PatternMode parse_mode(const std::string &text);

/// Rows are the real pattern channels at each grid point, scaled by the local bin
/// width, with a factor 2 on the off-diagonal channels so that
/// expected_scan / exposure = rows * theta, theta = hermitian_channels(rho).
struct DesignMatrix {
    RealMatrix rows;
    std::vector<double> grid;
    PatternMode mode = PatternMode::ideal;
    std::size_t dim = 0;
    std::size_t rank = 0;
    double condition = 0.0;
};

/// Design row for one Hermitian operator M and bin width dx.
void design_row(const ComplexMatrix &m, double dx, std::span<double> out);

/// Throws IdentifiabilityError, naming the channels of a null-space
/// combination, if the design has fewer than dim^2 independent columns.
DesignMatrix build_design(const PatternSet &pat);

struct SolveOptions {
    bool poisson_weights = false; ///< weight rows by 1 / max(counts, 1)
    bool background = false;      ///< extra flat column absorbing a constant per-bin offset
};

struct LinearSolution {
    std::vector<double> theta; ///< channels normalized to unit trace
    double scale = 0.0;        ///< fitted exposure x trace
    double background = 0.0;   ///< counts per bin, 0 if disabled
    double rss = 0.0;          ///< unweighted residual sum of squares
    double condition = 0.0;
};

/// Unconstrained least squares of counts against design rows; the first `dim`
/// entries of the solution are the diagonal channels whose sum is the scale.
LinearSolution solve_design(const RealMatrix &rows, std::span<const double> counts, std::size_t dim,
                            SolveOptions options = {});

/// Unconstrained linear least squares of counts against the design. The design
/// grid must equal the scan grid shifted by the scan's center offset.
/// Throws DegenerateFitError if the fitted trace is not positive.
LinearSolution solve_linear(const DesignMatrix &design, const ScanRecord &scan, SolveOptions options = {});

struct Projection {
    DensityMatrix rho;
    double distance = 0.0; ///< Frobenius distance from the trace-normalized input
    bool fallback = false; ///< input had no positive eigenvalue; returned I/d
};

/// Frobenius-nearest unit-trace PSD matrix. The input is Hermitized and scaled
/// to unit trace, then negative eigenvalues are zeroed one at a time with their
/// deficit spread evenly over the surviving eigenvalues.
Projection project_physical_detailed(const ComplexMatrix &h);
DensityMatrix project_physical(const ComplexMatrix &h);

struct OffsetSearch {
    double halfwidth_um = 5.0;
    double center_um = 0.0;
    double coarse_step_um = 0.5;
    double tolerance_um = 0.01;
};

struct OffsetFit {
    double offset_um = 0.0;
    double rss = 0.0;
    bool at_boundary = false;
};

/// Builds the design for a given model grid (scan grid + trial offset).
using DesignBuilder = std::function<DesignMatrix(std::span<const double> model_grid)>;

/// Coarse scan over the offset window, then golden-section refinement,
/// minimizing the linear-fit RSS.
OffsetFit fit_offset(const DesignBuilder &builder, const ScanRecord &scan, OffsetSearch search,
                     SolveOptions options = {});

struct ReconstructOptions {
    PatternMode mode = PatternMode::realistic;
    std::optional<OffsetSearch> offset_search;
    SolveOptions solve;
};

struct FitReport {
    DensityMatrix rho;
    ComplexMatrix unprojected; ///< unit-trace Hermitian estimate before projection
    double scale = 0.0;
    double background = 0.0;
    double rss_pre = 0.0;
    double rss_post = 0.0;
    double condition = 0.0;
    double offset_um = 0.0;
    double projection_distance = 0.0;
    PatternMode mode = PatternMode::realistic;
    std::vector<std::string> warnings;
};

/// Residual sum of squares of counts against the best rescaled model of a fixed
/// state (and flat background when enabled).
double rescaled_rss(const RealMatrix &rows, std::span<const double> counts, const ComplexMatrix &rho, bool background);
double rescaled_rss(const DesignMatrix &design, const ScanRecord &scan, const ComplexMatrix &rho, bool background);

/// pattern_table -> build_design -> [fit_offset] -> solve_linear -> project_physical.
/// Ideal mode ignores the detector width; realistic mode uses it.
FitReport reconstruct_single(const ScanRecord &scan, const Geometry &g, const DetectorSpec &det,
                             const ReconstructOptions &options = {});

/// Fit report assembled from a linear solution (shared with joint reconstruction).
FitReport finish_fit(const LinearSolution &solution, std::size_t dim, PatternMode mode);

/// <psi|rho|psi> for normalized psi.
double fidelity(const ComplexMatrix &rho, std::span<const Complex> psi);
double fidelity(const DensityMatrix &rho, std::span<const Complex> psi);
/// Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2; equals <psi|a|psi> when b is pure.
double uhlmann_fidelity(const ComplexMatrix &a, const ComplexMatrix &b);
double purity(const ComplexMatrix &rho);
double trace_distance(const ComplexMatrix &a, const ComplexMatrix &b);

} // namespace sst
