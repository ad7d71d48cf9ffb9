#include "sst/bipartite.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <set>
#include <sstream>

#include "sst/errors.hpp"

namespace sst {

std::vector<Complex> max_entangled_state(std::size_t d)
{
    if (d < 2)
        throw InputError("max_entangled_state: dimension must be at least 2");
    std::vector<Complex> psi(d * d);
    const double amp = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < d; ++i)
        psi[i * d + (d - 1 - i)] = amp;
    return psi;
}

DensityMatrix werner_state(double p, std::size_t d)
{
    const auto psi = max_entangled_state(d);
    return mix(DensityMatrix::pure(psi), DensityMatrix::maximally_mixed(d * d), p);
}

namespace {

std::size_t arm_dim(const ComplexMatrix &rho_ab, const ComplexMatrix &m)
{
    const std::size_t d = m.rows();
    if (!m.square() || !rho_ab.square() || rho_ab.rows() != d * d)
        throw DimensionError("bipartite: joint state is " + std::to_string(rho_ab.rows()) +
                             "-dimensional, single-arm operator is " + std::to_string(d) + "-dimensional");
    return d;
}

} // namespace

double coincidence_probability(const ComplexMatrix &rho_ab, const ComplexMatrix &m_a, const ComplexMatrix &m_b)
{
    const std::size_t d = arm_dim(rho_ab, m_a);
    if (m_b.rows() != d)
        throw DimensionError("coincidence_probability: arm operators differ in dimension");
    return detection_probability(rho_ab, kron(m_a, m_b));
}

ComplexMatrix conditional_state(const ComplexMatrix &rho_ab, const ComplexMatrix &m_b)
{
    const std::size_t d = arm_dim(rho_ab, m_b);
    // sigma_ij = sum_{k,m} M_b(k, m) rho_{(i,m),(j,k)}
    ComplexMatrix sigma(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            Complex s{};
            for (std::size_t k = 0; k < d; ++k)
                for (std::size_t m = 0; m < d; ++m)
                    s += m_b(k, m) * rho_ab(i * d + m, j * d + k);
            sigma(i, j) = s;
        }
    return sigma.hermitized();
}

void ConditionalScanSet::validate() const
{
    if (scans.empty())
        throw InputError("conditional scan set is empty");
    for (std::size_t s = 0; s < scans.size(); ++s) {
        if (!scans[s].context)
            throw InputError("conditional scan " + std::to_string(s) + " has no arm-B context");
        scans[s].validate();
    }
    det_a.validate();
    det_b.validate();
}

std::vector<double> default_xb_positions(std::size_t count, double halfwidth_um)
{
    if (count == 0)
        throw InputError("default_xb_positions: count must be positive");
    if (count == 1)
        return {0.0};
    std::vector<double> xs(count);
    for (std::size_t s = 0; s < count; ++s)
        xs[s] = -halfwidth_um + 2.0 * halfwidth_um * static_cast<double>(s) / static_cast<double>(count - 1);
    return xs;
}

std::vector<std::vector<double>> expected_conditional_counts(const DensityMatrix &rho_ab, const Geometry &g,
                                                             const DetectorSpec &det_a, const DetectorSpec &det_b,
                                                             std::span<const double> xb_list,
                                                             std::span<const double> grid, double exposure)
{
    if (xb_list.empty())
        throw InputError("conditional scans need at least one arm-B position");
    if (rho_ab.dim() != g.dim() * g.dim())
        throw DimensionError("joint state dimension does not match the slit count squared");
    const PatternSet arm_a = pattern_table(g, det_a, grid);
    const PatternEvaluator arm_b(g, det_b);

    std::vector<std::vector<double>> out(xb_list.size());
    for (std::size_t s = 0; s < xb_list.size(); ++s) {
        const ComplexMatrix sigma = conditional_state(rho_ab.matrix(), arm_b(xb_list[s]));
        out[s] = expected_scan(sigma, arm_a, exposure);
    }
    return out;
}

ConditionalScanSet simulate_conditional_set(const DensityMatrix &rho_ab, const Geometry &g, const DetectorSpec &det_a,
                                            const DetectorSpec &det_b, std::span<const double> xb_list,
                                            std::span<const double> grid, double exposure, std::uint64_t seed)
{
    const auto means = expected_conditional_counts(rho_ab, g, det_a, det_b, xb_list, grid, exposure);

    ConditionalScanSet set{{}, g, det_a, det_b, exposure};
    set.scans.resize(xb_list.size());
    const auto n = static_cast<std::ptrdiff_t>(xb_list.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        const auto us = static_cast<std::size_t>(s);
        ScanRecord &rec = set.scans[us];
        rec.grid.assign(grid.begin(), grid.end());
        rec.seed = splitmix64(seed + static_cast<std::uint64_t>(us));
        rec.counts = serial::poisson_counts(means[us], *rec.seed);
        rec.exposure = exposure;
        rec.context = ArmBContext{xb_list[us], det_b.slit_width_um};
    }
    return set;
}

namespace {

DetectorSpec mode_detector(const DetectorSpec &det, PatternMode mode)
{
    return mode == PatternMode::ideal ? DetectorSpec{0.0, det.quad_points} : det;
}

void fill_scan_rows(const ConditionalScanSet &set, PatternMode mode, std::size_t s, std::size_t row0, RealMatrix &rows)
{
    const ScanRecord &scan = set.scans[s];
    const PatternEvaluator arm_a(set.geometry, mode_detector(set.det_a, mode));
    const PatternEvaluator arm_b(set.geometry, mode_detector(set.det_b, mode));
    const ComplexMatrix mb = arm_b(scan.context->x_um);
    const auto model_grid = scan.model_grid();
    const auto weights = grid_weights(model_grid);
    for (std::size_t k = 0; k < model_grid.size(); ++k)
        design_row(kron(arm_a(model_grid[k]), mb), weights[k], rows.row(row0 + k));
}

std::vector<std::size_t> row_offsets(const ConditionalScanSet &set)
{
    std::vector<std::size_t> offsets(set.scans.size() + 1, 0);
    for (std::size_t s = 0; s < set.scans.size(); ++s)
        offsets[s + 1] = offsets[s] + set.scans[s].grid.size();
    return offsets;
}

} // namespace

RealMatrix joint_design(const ConditionalScanSet &set, PatternMode mode)
{
    set.validate();
    const std::size_t d = set.geometry.dim();
    const auto offsets = row_offsets(set);
    RealMatrix rows(offsets.back(), channel_count(d * d));
    const auto n = static_cast<std::ptrdiff_t>(set.scans.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        try {
            fill_scan_rows(set, mode, static_cast<std::size_t>(s), offsets[static_cast<std::size_t>(s)], rows);
        } catch (...) {
#pragma omp critical(sst_joint_design)
            if (!failure)
                failure = std::current_exception();
        }
    }
    if (failure)
        std::rethrow_exception(failure);
    return rows;
}

namespace serial {

RealMatrix joint_design(const ConditionalScanSet &set, PatternMode mode)
{
    set.validate();
    const std::size_t d = set.geometry.dim();
    const auto offsets = row_offsets(set);
    RealMatrix rows(offsets.back(), channel_count(d * d));
    for (std::size_t s = 0; s < set.scans.size(); ++s)
        fill_scan_rows(set, mode, s, offsets[s], rows);
    return rows;
}

} // namespace serial

namespace {

double suggest_extra_xb(const ConditionalScanSet &set)
{
    std::set<double> xs;
    for (const auto &scan : set.scans)
        xs.insert(scan.context->x_um);
    const double pitch = set.geometry.dim() > 1
                             ? set.geometry.slit_offsets()[1] - set.geometry.slit_offsets()[0]
                             : set.geometry.slit_width();
    if (xs.size() < 2)
        return *xs.begin() + 0.25 * pitch;
    double best_gap = 0.0;
    double suggestion = *xs.rbegin() + 0.25 * pitch;
    for (auto it = std::next(xs.begin()); it != xs.end(); ++it) {
        const double gap = *it - *std::prev(it);
        if (gap > best_gap) {
            best_gap = gap;
            suggestion = 0.5 * (*it + *std::prev(it));
        }
    }
    return suggestion;
}

// Gauss-Newton over the unnormalized channels t, per-scan scales c (c_0 = 1
// fixes the gauge) and the optional background. Model: c_s (A t)_k + b.
LinearSolution solve_per_scan_scales(const RealMatrix &rows, const std::vector<double> &counts,
                                     const std::vector<std::size_t> &offsets, std::size_t dim,
                                     const JointOptions &options, const LinearSolution &start,
                                     std::vector<double> &scales)
{
    const std::size_t m = rows.rows();
    const std::size_t n = rows.cols();
    const std::size_t n_scans = offsets.size() - 1;
    const bool bg = options.solve.background;
    const std::size_t cols = n + (n_scans - 1) + (bg ? 1 : 0);

    std::vector<double> t(start.theta);
    for (double &v : t)
        v *= start.scale;
    std::vector<double> c(n_scans, 1.0);
    double background = start.background;
    std::vector<double> weight(m, 1.0);
    if (options.solve.poisson_weights)
        for (std::size_t k = 0; k < m; ++k)
            weight[k] = 1.0 / std::sqrt(std::max(counts[k], 1.0));

    double condition = start.condition;
    RealMatrix jac(m, cols);
    std::vector<double> resid(m);
    for (int iter = 0; iter < options.scale_iterations; ++iter) {
        const auto at = rows.multiply(t);
        for (std::size_t s = 0; s < n_scans; ++s)
            for (std::size_t k = offsets[s]; k < offsets[s + 1]; ++k) {
                const double w = weight[k];
                for (std::size_t j = 0; j < n; ++j)
                    jac(k, j) = w * c[s] * rows(k, j);
                for (std::size_t j = n; j < cols; ++j)
                    jac(k, j) = 0.0;
                if (s > 0)
                    jac(k, n + s - 1) = w * at[k];
                if (bg)
                    jac(k, cols - 1) = w;
                resid[k] = w * (counts[k] - c[s] * at[k] - background);
            }
        std::vector<double> norm(cols, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < cols; ++j)
                norm[j] += jac(k, j) * jac(k, j);
        for (double &v : norm)
            v = v > 0.0 ? std::sqrt(v) : 1.0;
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t j = 0; j < cols; ++j)
                jac(k, j) /= norm[j];
        auto step = lsq_solve(jac, resid);
        for (std::size_t j = 0; j < cols; ++j)
            step.x[j] /= norm[j];
        condition = step.condition;
        double change = 0.0;
        double size = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            t[j] += step.x[j];
            change = std::max(change, std::abs(step.x[j]));
            size = std::max(size, std::abs(t[j]));
        }
        double scale_change = 0.0;
        for (std::size_t s = 1; s < n_scans; ++s) {
            c[s] += step.x[n + s - 1];
            scale_change = std::max(scale_change, std::abs(step.x[n + s - 1]));
        }
        if (bg)
            background += step.x[cols - 1];
        if (change <= 1e-12 * size && scale_change <= 1e-12)
            break;
    }

    double mean = 0.0;
    for (double v : c)
        mean += v;
    mean /= static_cast<double>(n_scans);
    if (!(mean > 0.0))
        throw DegenerateFitError("per-scan scales have a non-positive mean");
    for (std::size_t s = 0; s < n_scans; ++s)
        scales[s] = c[s] / mean;

    LinearSolution sol;
    sol.condition = condition;
    sol.background = background;
    double trace = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        trace += t[i] * mean;
    if (!(trace > 0.0) || !std::isfinite(trace))
        throw DegenerateFitError("fitted trace scale is " + std::to_string(trace) + "; the scans carry no signal");
    sol.scale = trace;
    sol.theta.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        sol.theta[j] = t[j] * mean / trace;
    const auto model = rows.multiply(sol.theta);
    for (std::size_t s = 0; s < n_scans; ++s)
        for (std::size_t k = offsets[s]; k < offsets[s + 1]; ++k) {
            const double r = counts[k] - scales[s] * sol.scale * model[k] - background;
            sol.rss += r * r;
        }
    return sol;
}

} // namespace

JointFit reconstruct_joint(const ConditionalScanSet &set, const JointOptions &options)
{
    set.validate();
    const std::size_t d = set.geometry.dim();
    const std::size_t dd = d * d;
    const std::size_t n_params = channel_count(dd);

    const RealMatrix rows = joint_design(set, options.mode);
    const auto offsets = row_offsets(set);
    std::vector<double> counts;
    counts.reserve(rows.rows());
    for (const auto &scan : set.scans)
        counts.insert(counts.end(), scan.counts.begin(), scan.counts.end());

    std::size_t rank = 0;
    if (rows.rows() >= n_params) {
        const PivotedQr qr(rows);
        rank = qr.rank();
    } else {
        rank = rows.rows();
    }
    if (rank < n_params) {
        std::ostringstream msg;
        msg << "joint design has rank " << rank << " < " << n_params << " parameters ("
            << set.scans.size() << " scans); add a conditional scan near x_B = " << suggest_extra_xb(set) << " um";
        throw IdentifiabilityError(msg.str(), static_cast<int>(rank));
    }

    std::vector<double> scales(set.scans.size(), 1.0);
    LinearSolution solution = solve_design(rows, counts, dd, options.solve);

    if (options.per_scan_scale)
        solution = solve_per_scan_scales(rows, counts, offsets, dd, options, solution, scales);

    JointFit fit{finish_fit(solution, dd, options.mode), rank, scales};
    RealMatrix effective = rows;
    for (std::size_t s = 0; s < set.scans.size(); ++s)
        for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r)
            for (std::size_t c = 0; c < n_params; ++c)
                effective(r, c) = scales[s] * rows(r, c);
    fit.report.rss_post = rescaled_rss(effective, counts, fit.report.rho.matrix(), options.solve.background);
    return fit;
}

double focal_xb_for_phase(const Geometry &g, double phase)
{
    if (g.dim() < 2)
        throw InputError("focal_xb_for_phase: need at least two slits");
    const double k = 2.0 * (g.slit_offsets()[1] - g.slit_offsets()[0]) * sinc_scale(g) / g.slit_width();
    return -phase / k;
}

std::vector<FringeSummary> verification_scans(const DensityMatrix &rho_ab, const Geometry &g,
                                              std::span<const double> xb_list, const FringeOptions &options)
{
    if (g.lens_to_detector() != g.lens_focal())
        throw GeometryError("verification_scans: the fringe check needs the focal plane (z = f)");
    if (g.dim() < 2)
        throw InputError("verification_scans: need at least two slits");
    const std::size_t d = g.dim();
    if (rho_ab.dim() != d * d)
        throw DimensionError("verification_scans: joint state dimension does not match the geometry");

    const double kscale = sinc_scale(g);
    const double k = 2.0 * (g.slit_offsets()[1] - g.slit_offsets()[0]) * kscale / g.slit_width();
    const double window = options.window_um > 0.0 ? options.window_um : 0.5 * std::numbers::pi / kscale;
    const auto grid = uniform_grid(-window, window, options.step_um);

    const PatternSet arm_a = pattern_table(g, options.det_a, grid);
    const PatternEvaluator arm_b(g, options.det_b);

    // Envelope: at z = f every slit has the same intensity profile.
    std::vector<double> envelope(grid.size());
    for (std::size_t k_idx = 0; k_idx < grid.size(); ++k_idx)
        envelope[k_idx] = arm_a.matrix(k_idx).trace().real() / static_cast<double>(d);

    RealMatrix basis(grid.size(), 5);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = k * grid[i];
        const double e = envelope[i];
        basis(i, 0) = e;
        basis(i, 1) = e * std::cos(t);
        basis(i, 2) = e * std::sin(t);
        basis(i, 3) = e * std::cos(2.0 * t);
        basis(i, 4) = e * std::sin(2.0 * t);
    }
    const PivotedQr qr(basis);

    std::vector<FringeSummary> out;
    double previous_phase = 0.0;
    for (std::size_t s = 0; s < xb_list.size(); ++s) {
        const ComplexMatrix sigma = conditional_state(rho_ab.matrix(), arm_b(xb_list[s]));
        std::vector<double> curve(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i)
            curve[i] = detection_probability(sigma, arm_a.matrix(i));
        const auto c = qr.solve(curve);

        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (int j = 0; j < 720; ++j) {
            const double t = 2.0 * std::numbers::pi * j / 720.0;
            const double v = c[0] + c[1] * std::cos(t) + c[2] * std::sin(t) + c[3] * std::cos(2 * t) + c[4] * std::sin(2 * t);
            hi = std::max(hi, v);
            lo = std::min(lo, v);
        }
        FringeSummary summary;
        summary.xb_um = xb_list[s];
        summary.visibility = hi + lo > 0.0 ? (hi - lo) / (hi + lo) : 0.0;
        summary.phase_defined = summary.visibility >= 0.05;
        double phase = std::atan2(-c[2], c[1]);
        if (s > 0) {
            while (phase - previous_phase > std::numbers::pi)
                phase -= 2.0 * std::numbers::pi;
            while (phase - previous_phase < -std::numbers::pi)
                phase += 2.0 * std::numbers::pi;
        }
        summary.phase = phase;
        previous_phase = phase;
        out.push_back(summary);
    }
    return out;
}

} // namespace sst
