#include "sst/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sst/errors.hpp"

namespace sst {

std::string to_string(PatternMode mode)
{
    return mode == PatternMode::ideal ? "ideal" : "realistic";
}

PatternMode parse_mode(const std::string &text)
{
    if (text == "ideal")
        return PatternMode::ideal;
    if (text == "realistic")
        return PatternMode::realistic;
    throw InputError("mode must be 'ideal' or 'realistic', got '" + text + "'");
}

void design_row(const ComplexMatrix &m, double dx, std::span<double> out)
{
    hermitian_channels(m, out);
    const std::size_t d = m.rows();
    for (std::size_t c = 0; c < out.size(); ++c)
        out[c] *= (c < d ? 1.0 : 2.0) * dx;
}

DesignMatrix build_design(const PatternSet &pat)
{
    if (pat.size() == 0)
        throw InputError("build_design: pattern set is empty");
    const std::size_t d = pat.dim();
    const std::size_t n = channel_count(d);
    const auto weights = grid_weights(pat.grid());

    DesignMatrix design;
    design.rows = RealMatrix(pat.size(), n);
    design.grid = pat.grid();
    design.mode = pat.detector().ideal() ? PatternMode::ideal : PatternMode::realistic;
    design.dim = d;
    for (std::size_t k = 0; k < pat.size(); ++k)
        design_row(pat.matrix(k), weights[k], design.rows.row(k));

    if (pat.size() < n)
        throw IdentifiabilityError("design has " + std::to_string(pat.size()) + " rows, fewer than the " +
                                       std::to_string(n) + " channels",
                                   static_cast<int>(pat.size()));
    const PivotedQr qr(design.rows);
    design.rank = qr.rank();
    if (design.rank < n) {
        const auto null = qr.null_vector();
        const auto names = channel_names(d);
        const double peak = std::abs(*std::max_element(null.begin(), null.end(), [](double a, double b) {
            return std::abs(a) < std::abs(b);
        }));
        std::ostringstream msg;
        msg << "pattern channels are linearly dependent (rank " << design.rank << " of " << n
            << "); null-space combination:";
        for (std::size_t c = 0; c < n; ++c)
            if (std::abs(null[c]) > 0.1 * peak)
                msg << ' ' << (null[c] >= 0 ? '+' : '-') << std::abs(null[c]) << '*' << names[c];
        throw IdentifiabilityError(msg.str(), static_cast<int>(design.rank));
    }
    design.condition = qr.condition();
    return design;
}

namespace {

void check_grid_match(const DesignMatrix &design, const ScanRecord &scan)
{
    if (design.grid.size() != scan.grid.size())
        throw InputError("design grid has " + std::to_string(design.grid.size()) + " points, scan has " +
                         std::to_string(scan.grid.size()));
    for (std::size_t k = 0; k < scan.grid.size(); ++k) {
        const double expected = scan.grid[k] + scan.center_offset_um;
        if (std::abs(design.grid[k] - expected) > 1e-9 * std::max(1.0, std::abs(expected)))
            throw InputError("design grid does not match the offset scan grid at index " + std::to_string(k));
    }
}

} // namespace

LinearSolution solve_design(const RealMatrix &rows, std::span<const double> counts, std::size_t dim,
                            SolveOptions options)
{
    const std::size_t m = rows.rows();
    const std::size_t n = rows.cols();
    if (counts.size() != m)
        throw DimensionError("solve_design: counts length does not match design rows");
    const std::size_t cols = n + (options.background ? 1 : 0);

    RealMatrix a(m, cols);
    std::vector<double> y(m);
    for (std::size_t k = 0; k < m; ++k) {
        const double w = options.poisson_weights ? 1.0 / std::sqrt(std::max(counts[k], 1.0)) : 1.0;
        for (std::size_t c = 0; c < n; ++c)
            a(k, c) = w * rows(k, c);
        if (options.background)
            a(k, n) = w;
        y[k] = w * counts[k];
    }

    const auto lsq = lsq_solve(a, y);

    LinearSolution sol;
    sol.condition = lsq.condition;
    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        trace += lsq.x[i];
    if (!(trace > 0.0) || !std::isfinite(trace))
        throw DegenerateFitError("fitted trace scale is " + std::to_string(trace) + "; the scan carries no signal");

    sol.scale = trace;
    sol.background = options.background ? lsq.x[n] : 0.0;
    sol.theta.assign(lsq.x.begin(), lsq.x.begin() + static_cast<std::ptrdiff_t>(n));
    for (auto &t : sol.theta)
        t /= trace;

    const auto model = rows.multiply(sol.theta);
    for (std::size_t k = 0; k < m; ++k) {
        const double r = counts[k] - sol.scale * model[k] - sol.background;
        sol.rss += r * r;
    }
    return sol;
}

LinearSolution solve_linear(const DesignMatrix &design, const ScanRecord &scan, SolveOptions options)
{
    scan.validate();
    check_grid_match(design, scan);
    std::vector<double> counts(scan.counts.begin(), scan.counts.end());
    return solve_design(design.rows, counts, design.dim, options);
}

Projection project_physical_detailed(const ComplexMatrix &h)
{
    if (!h.square() || h.rows() == 0)
        throw DimensionError("project_physical: matrix must be square");
    const std::size_t d = h.rows();
    ComplexMatrix herm = h.hermitized();
    if (!herm.all_finite())
        throw UnphysicalStateError("project_physical: non-finite input");
    const double tr = herm.trace().real();
    if (!(tr > 0.0) || hermitian_eig(herm).values.back() <= 0.0) {
        // No direction carries positive weight; unit-trace scaling is meaningless.
        const auto mixed = DensityMatrix::maximally_mixed(d);
        return {mixed, (herm - mixed.matrix()).frobenius_norm(), true};
    }
    herm *= 1.0 / tr;

    auto eig = hermitian_eig(herm);
    auto &lambda = eig.values; // ascending

    std::vector<bool> active(d, true);
    std::size_t n_active = d;
    for (;;) {
        std::size_t worst = d;
        for (std::size_t k = 0; k < d; ++k)
            if (active[k] && lambda[k] < 0.0 && (worst == d || lambda[k] < lambda[worst]))
                worst = k;
        if (worst == d)
            break;
        const double deficit = lambda[worst];
        lambda[worst] = 0.0;
        active[worst] = false;
        --n_active;
        for (std::size_t k = 0; k < d; ++k)
            if (active[k])
                lambda[k] += deficit / static_cast<double>(n_active);
    }

    // Remove rounding drift so the trace is 1 to machine precision.
    const double sum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
    for (auto &l : lambda)
        l /= sum;

    ComplexMatrix rho = reassemble(eig).hermitized();
    const Complex t = rho.trace();
    rho *= 1.0 / t.real();
    const double distance = (herm - rho).frobenius_norm();
    return {DensityMatrix(rho), distance, false};
}

DensityMatrix project_physical(const ComplexMatrix &h)
{
    return project_physical_detailed(h).rho;
}

OffsetFit fit_offset(const DesignBuilder &builder, const ScanRecord &scan, OffsetSearch search, SolveOptions options)
{
    if (!(search.halfwidth_um > 0.0))
        throw InputError("fit_offset: search half-width must be positive");
    if (!(search.coarse_step_um > 0.0) || !(search.tolerance_um > 0.0))
        throw InputError("fit_offset: step and tolerance must be positive");

    auto rss_at = [&](double offset) {
        ScanRecord shifted = scan;
        shifted.center_offset_um = offset;
        try {
            const auto design = builder(shifted.model_grid());
            return solve_linear(design, shifted, options).rss;
        } catch (const IdentifiabilityError &) {
            return std::numeric_limits<double>::infinity();
        } catch (const DegenerateFitError &) {
            return std::numeric_limits<double>::infinity();
        }
    };

    const double lo = search.center_um - search.halfwidth_um;
    const double hi = search.center_um + search.halfwidth_um;
    const auto steps = static_cast<std::size_t>(std::floor((hi - lo) / search.coarse_step_um + 1e-9));
    std::vector<double> trial(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k)
        trial[k] = lo + static_cast<double>(k) * search.coarse_step_um;
    if (trial.back() < hi - 1e-9)
        trial.push_back(hi);

    std::vector<double> rss(trial.size());
    for (std::size_t k = 0; k < trial.size(); ++k)
        rss[k] = rss_at(trial[k]);
    const auto best = static_cast<std::size_t>(std::min_element(rss.begin(), rss.end()) - rss.begin());
    if (!std::isfinite(rss[best]))
        throw DegenerateFitError("fit_offset: no trial offset produced a valid fit");

    // Golden-section refinement on the bracket around the coarse minimum.
    double a = trial[best > 0 ? best - 1 : 0];
    double b = trial[std::min(best + 1, trial.size() - 1)];
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = rss_at(c);
    double fd = rss_at(d);
    while (b - a > search.tolerance_um) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = rss_at(d);
        }
    }
    OffsetFit fit;
    fit.offset_um = 0.5 * (a + b);
    fit.rss = rss_at(fit.offset_um);
    if (rss[best] < fit.rss) {
        fit.offset_um = trial[best];
        fit.rss = rss[best];
    }
    fit.at_boundary = fit.offset_um - lo < search.coarse_step_um * 0.5 || hi - fit.offset_um < search.coarse_step_um * 0.5;
    return fit;
}

double rescaled_rss(const RealMatrix &rows, std::span<const double> counts, const ComplexMatrix &rho, bool background)
{
    const auto model = rows.multiply(hermitian_channels(rho));
    const std::size_t m = model.size();
    RealMatrix a(m, background ? 2 : 1);
    for (std::size_t k = 0; k < m; ++k) {
        a(k, 0) = model[k];
        if (background)
            a(k, 1) = 1.0;
    }
    return lsq_solve(a, counts).residual_ss;
}

double rescaled_rss(const DesignMatrix &design, const ScanRecord &scan, const ComplexMatrix &rho, bool background)
{
    std::vector<double> counts(scan.counts.begin(), scan.counts.end());
    return rescaled_rss(design.rows, counts, rho, background);
}

FitReport finish_fit(const LinearSolution &solution, std::size_t dim, PatternMode mode)
{
    const ComplexMatrix raw = from_hermitian_channels(solution.theta, dim);
    auto projection = project_physical_detailed(raw);
    FitReport report{projection.rho, raw.hermitized(), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, mode, {}};
    report.scale = solution.scale;
    report.background = solution.background;
    report.rss_pre = solution.rss;
    report.condition = solution.condition;
    report.projection_distance = projection.distance;
    report.mode = mode;
    if (projection.fallback)
        report.warnings.push_back("estimate had no positive eigenvalue; returned the maximally mixed state");
    if (projection.distance > 0.2)
        report.warnings.push_back("large unphysicality: projection moved the estimate by " +
                                  std::to_string(projection.distance) + " (Frobenius)");
    return report;
}

FitReport reconstruct_single(const ScanRecord &scan, const Geometry &g, const DetectorSpec &det,
                             const ReconstructOptions &options)
{
    scan.validate();
    const DetectorSpec model_det = options.mode == PatternMode::ideal ? DetectorSpec{0.0, det.quad_points} : det;

    const DesignBuilder builder = [&](std::span<const double> model_grid) {
        return build_design(pattern_table(g, model_det, model_grid));
    };

    ScanRecord working = scan;
    std::vector<std::string> warnings;
    if (options.offset_search) {
        OffsetSearch search = *options.offset_search;
        search.center_um += scan.center_offset_um;
        const auto fit = fit_offset(builder, scan, search, options.solve);
        working.center_offset_um = fit.offset_um;
        if (fit.at_boundary)
            warnings.push_back("center offset minimizer " + std::to_string(fit.offset_um) +
                               " um lies at the search boundary");
    }

    DesignMatrix design = builder(working.model_grid());
    design.mode = options.mode;
    const auto solution = solve_linear(design, working, options.solve);

    FitReport report = finish_fit(solution, design.dim, options.mode);
    report.offset_um = working.center_offset_um;
    report.condition = design.condition;
    report.rss_post = rescaled_rss(design, working, report.rho.matrix(), options.solve.background);
    report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
    return report;
}

double fidelity(const ComplexMatrix &rho, std::span<const Complex> psi)
{
    if (!rho.square() || rho.rows() != psi.size())
        throw DimensionError("fidelity: state vector has " + std::to_string(psi.size()) + " entries, matrix is " +
                             std::to_string(rho.rows()) + "-dimensional");
    Complex f{};
    for (std::size_t i = 0; i < psi.size(); ++i)
        for (std::size_t j = 0; j < psi.size(); ++j)
            f += std::conj(psi[i]) * rho(i, j) * psi[j];
    return f.real();
}

double fidelity(const DensityMatrix &rho, std::span<const Complex> psi)
{
    return std::clamp(fidelity(rho.matrix(), psi), 0.0, 1.0);
}

namespace {

ComplexMatrix psd_sqrt(const ComplexMatrix &m)
{
    auto eig = hermitian_eig(m);
    for (auto &l : eig.values)
        l = std::sqrt(std::max(l, 0.0));
    return reassemble(eig);
}

} // namespace

double uhlmann_fidelity(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.rows() != b.rows() || !a.square() || !b.square())
        throw DimensionError("uhlmann_fidelity: dimension mismatch");
    const ComplexMatrix s = psd_sqrt(a);
    const auto eig = hermitian_eig(s * b * s);
    double root = 0.0;
    for (double l : eig.values)
        root += std::sqrt(std::max(l, 0.0));
    return root * root;
}

double purity(const ComplexMatrix &rho)
{
    if (!rho.square())
        throw DimensionError("purity: matrix is not square");
    return (rho * rho).trace().real();
}

double trace_distance(const ComplexMatrix &a, const ComplexMatrix &b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("trace_distance: dimension mismatch");
    const auto eig = hermitian_eig(a - b);
    double s = 0.0;
    for (double l : eig.values)
        s += std::abs(l);
    return 0.5 * s;
}

} // namespace sst
