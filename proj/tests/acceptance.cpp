// End-to-end acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sst/bipartite.hpp"
#include "sst/forward.hpp"
#include "sst/io.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"
#include "sst/quadrature.hpp"
#include "sst/reconstruct.hpp"

#ifndef SST_TEST_DATA_DIR
#define SST_TEST_DATA_DIR "tests/data"
#endif

using namespace sst;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string &name, bool ok, const std::string &detail)
{
    std::printf("[%s] criterion %d: %s -- %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok)
        ++failures;
}

std::string fmt(const char *format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char *format, ...)
{
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof buf, format, args);
    va_end(args);
    return buf;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Ginibre construction G G^dag / Tr with a random rank between 1 and d.
DensityMatrix random_state(std::mt19937_64 &rng, std::size_t d)
{
    std::normal_distribution<double> normal;
    std::uniform_int_distribution<std::size_t> rank_dist(1, d);
    const std::size_t r = rank_dist(rng);
    ComplexMatrix g(d, r);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < r; ++j)
            g(i, j) = Complex{normal(rng), normal(rng)};
    ComplexMatrix m = g * g.adjoint();
    m *= Complex{1.0 / m.trace().real(), 0.0};
    return DensityMatrix(m.hermitized());
}

// Criteria 1 and 2 share the same 50 truth states and 1e7 datasets.
struct SingleScanRun {
    std::vector<double> f_real_1e7, f_ideal_1e7, f_real_1e8, f_ideal_1e8;
    std::size_t ideal_worse = 0;
    double seconds_1e7 = 0.0;
};

SingleScanRun run_single_scans()
{
    SingleScanRun run;
    const Geometry g = reference_geometry();
    const DetectorSpec det{20.0, 32};
    const auto grid = uniform_grid(-500.0, 500.0, 5.0);
    const auto pat = pattern_table(g, det, grid);

    std::mt19937_64 rng(20240611);
    std::vector<DensityMatrix> truths;
    for (int s = 0; s < 50; ++s)
        truths.push_back(random_state(rng, 3));

    ReconstructOptions realistic;
    realistic.mode = PatternMode::realistic;
    ReconstructOptions ideal;
    ideal.mode = PatternMode::ideal;

    const auto t0 = Clock::now();
    for (std::size_t s = 0; s < truths.size(); ++s) {
        const auto scan = simulate_scan(truths[s], pat, 1e7, 1000 + s);
        const auto fr = reconstruct_single(scan, g, det, realistic);
        run.f_real_1e7.push_back(uhlmann_fidelity(fr.rho.matrix(), truths[s].matrix()));
        const auto fi = reconstruct_single(scan, g, det, ideal);
        run.f_ideal_1e7.push_back(uhlmann_fidelity(fi.rho.matrix(), truths[s].matrix()));
        if (fi.rss_post > fr.rss_post)
            ++run.ideal_worse;
    }
    run.seconds_1e7 = seconds_since(t0);

    for (std::size_t s = 0; s < truths.size(); ++s) {
        const auto scan = simulate_scan(truths[s], pat, 1e8, 5000 + s);
        run.f_real_1e8.push_back(
            uhlmann_fidelity(reconstruct_single(scan, g, det, realistic).rho.matrix(), truths[s].matrix()));
        run.f_ideal_1e8.push_back(
            uhlmann_fidelity(reconstruct_single(scan, g, det, ideal).rho.matrix(), truths[s].matrix()));
    }
    return run;
}

void criteria_1_and_2()
{
    const auto t0 = Clock::now();
    const auto run = run_single_scans();
    const double total = seconds_since(t0);

    const double med = median(run.f_real_1e7);
    const double mn = *std::min_element(run.f_real_1e7.begin(), run.f_real_1e7.end());
    report(1, "round-trip tomography (50 states, b=20um, 1e7 counts, realistic)",
           med >= 0.99 && mn >= 0.97 && run.seconds_1e7 <= 60.0,
           fmt("median F=%.5f (>=0.99), min F=%.5f (>=0.97), %.2f s (<=60)", med, mn, run.seconds_1e7));

    const double frac = static_cast<double>(run.ideal_worse) / run.f_real_1e7.size();
    const double plateau_real = median(run.f_real_1e8);
    const double plateau_ideal = median(run.f_ideal_1e8);
    report(2, "finite-resolution bias (ideal vs realistic patterns)", frac >= 0.95 && plateau_ideal < plateau_real,
           fmt("ideal rss_post larger in %zu/%zu (>=95%%); median F at 1e8: ideal %.5f < realistic %.5f; "
               "median F at 1e7: ideal %.5f; %.2f s",
               run.ideal_worse, run.f_real_1e7.size(), plateau_ideal, plateau_real, median(run.f_ideal_1e7), total));
}

void criterion_3()
{
    const Geometry g = reference_geometry();
    const std::size_t d = g.dim();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> xs(-500.0, 500.0);
    std::uniform_real_distribution<double> bs(0.0, 60.0);

    bool hermitian = true;
    double min_eig = 1.0;
    for (int n = 0; n < 1000; ++n) {
        const double x = xs(rng);
        const DetectorSpec det{bs(rng), 32};
        const auto m = measurement_operator(g, det, x);
        for (std::size_t i = 0; i < d; ++i) {
            if (m(i, i).imag() != 0.0)
                hermitian = false;
            for (std::size_t j = 0; j < d; ++j)
                if (m(i, j) != std::conj(m(j, i)))
                    hermitian = false;
        }
        min_eig = std::min(min_eig, min_eigenvalue(m));
    }

    // Completeness over |x| <= 20 pi / K, ideal and b = 20 um.
    const double k = sinc_scale(g);
    const double xmax = 20.0 * M_PI / k;
    const auto rule = gauss_legendre(16);
    double diag_err = 0.0;
    double off_err = 0.0;
    for (double b : {0.0, 20.0}) {
        const PatternEvaluator eval(g, DetectorSpec{b, 32});
        ComplexMatrix total(d, d);
        const std::size_t panels = 4000;
        const double h = 2.0 * xmax / panels;
        for (std::size_t p = 0; p < panels; ++p) {
            const double lo = -xmax + p * h;
            for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
                const double x = lo + 0.5 * h * (rule.nodes[q] + 1.0);
                ComplexMatrix m = eval(x);
                m *= Complex{0.5 * h * rule.weights[q], 0.0};
                total += m;
            }
        }
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) {
                const double e = std::abs(total(i, j) - (i == j ? 1.0 : 0.0));
                (i == j ? diag_err : off_err) = std::max(i == j ? diag_err : off_err, e);
            }
    }

    // b -> 0 convergence.
    double conv = 0.0;
    for (int n = 0; n < 200; ++n) {
        const double x = xs(rng);
        const auto mr = measurement_operator(g, DetectorSpec{0.01, 32}, x);
        const auto mi = measurement_operator(g, DetectorSpec{0.0, 32}, x);
        conv = std::max(conv, (mr - mi).frobenius_norm());
    }

    report(3, "pattern invariants", hermitian && min_eig >= -1e-12 && diag_err <= 1e-2 && off_err <= 1e-3 && conv <= 1e-6,
           fmt("hermitian exact=%s, min eig=%.3e (>=-1e-12), completeness diag err=%.2e (<=1e-2) off err=%.2e "
               "(<=1e-3), |real(b=0.01)-ideal|=%.2e (<=1e-6)",
               hermitian ? "yes" : "no", min_eig, diag_err, off_err, conv));
}

void criterion_4()
{
    const Geometry g = reference_geometry();
    const SlitWavefunctions phi(g);
    const auto v = validity_check(g);
    const auto grid = uniform_grid(-1500.0, 1500.0, 2.0);

    double worst = 0.0;
    std::vector<double> incoherent_f(grid.size(), 0.0);
    std::vector<double> incoherent_s(grid.size(), 0.0);
    for (std::size_t slit = 0; slit < g.dim(); ++slit) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double i_f = std::norm(fresnel_oracle(g, slit, grid[k]).amplitude);
            const double i_s = std::norm(phi(slit, grid[k]));
            num += (i_f - i_s) * (i_f - i_s);
            den += i_f * i_f;
            incoherent_f[k] += i_f;
            incoherent_s[k] += i_s;
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        num += std::pow(incoherent_f[k] - incoherent_s[k], 2);
        den += std::pow(incoherent_f[k], 2);
    }
    worst = std::max(worst, std::sqrt(num / den));

    const bool ok = worst <= 0.05 && v.level == ValidityLevel::pass && std::abs(v.ratio - 0.46) < 0.01;
    report(4, "sinc approximation vs Fresnel oracle at z=1.81f", ok,
           fmt("worst relative L2 intensity error=%.4f (<=0.05); validity %s, a/sqrt(R lambda)=%.4f (~0.46)", worst,
               to_string(v.level).c_str(), v.ratio));
}

// Eigenvalues of a 3x3 Hermitian matrix from the trigonometric solution of its characteristic cubic.
std::array<double, 3> cubic_eigenvalues(const ComplexMatrix &a)
{
    const double q = a.trace().real() / 3.0;
    ComplexMatrix b = a;
    for (int i = 0; i < 3; ++i)
        b(i, i) -= q;
    const double p = std::sqrt((b * b).trace().real() / 6.0);
    if (p < 1e-300)
        return {q, q, q};
    ComplexMatrix c = b;
    c *= Complex{1.0 / p, 0.0};
    const Complex det = c(0, 0) * (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1)) -
                        c(0, 1) * (c(1, 0) * c(2, 2) - c(1, 2) * c(2, 0)) +
                        c(0, 2) * (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0));
    const double r = std::clamp(det.real() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    return {q + 2.0 * p * std::cos(phi), q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0),
            q + 2.0 * p * std::cos(phi + 4.0 * M_PI / 3.0)};
}

// Brute-force squared distance from eigenvalues lam to the probability simplex:
// dense grid over (mu0, mu1) at resolution 1e-3, then pattern-search refinement.
double simplex_oracle(const std::array<double, 3> &lam)
{
    auto cost = [&](double m0, double m1) {
        if (m0 < 0.0 || m1 < 0.0 || m0 + m1 > 1.0)
            return std::numeric_limits<double>::infinity();
        const double m2 = 1.0 - m0 - m1;
        return std::pow(lam[0] - m0, 2) + std::pow(lam[1] - m1, 2) + std::pow(lam[2] - m2, 2);
    };
    double best = std::numeric_limits<double>::infinity();
    double b0 = 0.0;
    double b1 = 0.0;
    const int n = 1000;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            const double c = cost(i / double(n), j / double(n));
            if (c < best) {
                best = c;
                b0 = i / double(n);
                b1 = j / double(n);
            }
        }
    double step = 1.0 / n;
    while (step > 1e-13) {
        bool moved = false;
        for (auto [d0, d1] : std::array<std::pair<double, double>, 6>{
                 {{1, 0}, {-1, 0}, {0, 1}, {0, -1}, {1, -1}, {-1, 1}}}) {
            const double c = cost(b0 + step * d0, b1 + step * d1);
            if (c < best) {
                best = c;
                b0 += step * d0;
                b1 += step * d1;
                moved = true;
            }
        }
        if (!moved)
            step *= 0.5;
    }
    return best;
}

void criterion_5()
{
    std::mt19937_64 rng(4242);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    double worst_vi = -1.0;
    for (int n = 0; n < 100; ++n) {
        // Physical state plus a Hermitian perturbation large enough to leave the PSD cone.
        ComplexMatrix h = random_state(rng, 3).matrix();
        const double eps = 0.1 + 0.3 * (n % 4);
        for (std::size_t i = 0; i < 3; ++i) {
            h(i, i) += eps * normal(rng);
            for (std::size_t j = i + 1; j < 3; ++j) {
                const Complex z{eps * normal(rng), eps * normal(rng)};
                h(i, j) += z;
                h(j, i) += std::conj(z);
            }
        }
        double tr = h.trace().real();
        if (tr <= 0.1) {
            for (std::size_t i = 0; i < 3; ++i)
                h(i, i) += (0.5 - tr) / 3.0;
            tr = h.trace().real();
        }
        ComplexMatrix target = h;
        target *= Complex{1.0 / tr, 0.0};

        const auto x = project_physical(h).matrix();
        const double d_ours = (target - x).frobenius_norm();
        const double d_oracle_sq = simplex_oracle(cubic_eigenvalues(target));
        // Strong convexity of the projection: |x - x*|^2 <= |t - x|^2 - |t - x*|^2.
        const double gap = std::sqrt(std::max(0.0, d_ours * d_ours - d_oracle_sq));
        worst = std::max(worst, gap);

        // Optimality certificate: <t - x, y - x> <= 0 for random physical y.
        for (int m = 0; m < 50; ++m) {
            const auto y = random_state(rng, 3).matrix();
            const ComplexMatrix u = target - x;
            const ComplexMatrix w = y - x;
            worst_vi = std::max(worst_vi, inner_product(u.data(), w.data()).real());
        }
    }
    report(5, "physicality projection vs brute-force nearest state", worst <= 1e-6 && worst_vi <= 1e-9,
           fmt("max Frobenius gap to oracle=%.2e (<=1e-6), max <H-X,Y-X>=%.2e (<=0)", worst, worst_vi));
}

ConditionalScanSet rounded_set(const DensityMatrix &rho, const Geometry &g, const DetectorSpec &det,
                               const std::vector<double> &xb, const std::vector<double> &grid, double exposure)
{
    const auto expected = expected_conditional_counts(rho, g, det, det, xb, grid, exposure);
    ConditionalScanSet set{{}, g, det, det, exposure};
    for (std::size_t s = 0; s < xb.size(); ++s) {
        ScanRecord scan;
        scan.grid = grid;
        scan.exposure = exposure;
        scan.context = ArmBContext{xb[s], det.slit_width_um};
        for (double m : expected[s])
            scan.counts.push_back(std::llround(m));
        set.scans.push_back(std::move(scan));
    }
    return set;
}

void criterion_6()
{
    const auto t0 = Clock::now();
    const Geometry g = reference_geometry();
    const DetectorSpec det{20.0, 32};
    const auto grid = uniform_grid(-500.0, 500.0, 5.0);
    const auto xb = default_xb_positions(29, 140.0);
    const auto psi = max_entangled_state(3);
    const auto pure = DensityMatrix::pure(psi);

    // Noiseless: expected counts at a very large exposure, rounded to integers.
    const auto noiseless = rounded_set(pure, g, det, xb, grid, 1e13);
    const auto fit0 = reconstruct_joint(noiseless);
    const double f0 = fidelity(fit0.report.rho, psi);

    // Werner p = 0.2 with 1e7 expected counts per scan on average.
    const auto werner = werner_state(0.2, 3);
    const auto unit = expected_conditional_counts(werner, g, det, det, xb, grid, 1.0);
    double mean_total = 0.0;
    for (const auto &s : unit)
        for (double m : s)
            mean_total += m;
    mean_total /= unit.size();
    const double exposure = 1e7 / mean_total;
    const auto noisy = simulate_conditional_set(werner, g, det, det, xb, grid, exposure, 99);
    const auto fit1 = reconstruct_joint(noisy);
    const double f1 = fidelity(fit1.report.rho, psi);
    const double analytic = 0.8 + 0.2 / 9.0;
    const double secs = seconds_since(t0);

    const bool ok = f0 >= 1.0 - 1e-4 && std::abs(f1 - analytic) <= 0.02 && fit0.rank == 81 && fit1.rank == 81 &&
                    secs <= 300.0;
    report(6, "joint bipartite reconstruction (29 conditional scans)", ok,
           fmt("noiseless F=%.7f (>=0.9999), Werner p=0.2 F=%.5f vs %.5f (+-0.02), rank %zu/%zu (=81), %.2f s "
               "(<=300)",
               f0, f1, analytic, fit0.rank, fit1.rank, secs));
}

void criterion_7()
{
    const auto path = std::filesystem::path(SST_TEST_DATA_DIR) / "printed_rho_ab.txt";
    const auto m = io::read_matrix(path);
    const double f = fidelity(m, max_entangled_state(3));
    report(7, "fixture regression (printed two-qutrit matrix vs maximally entangled state)",
           std::abs(f - 0.819) <= 0.002, fmt("F=%.5f (0.819 +- 0.002), trace=%.4f", f, m.trace().real()));
}

void criterion_8()
{
    const Geometry g = reference_geometry(1.0);
    const auto psi = max_entangled_state(3);
    const auto rho = DensityMatrix::pure(psi);
    std::vector<double> xb;
    for (int j = -2; j <= 2; ++j)
        xb.push_back(focal_xb_for_phase(g, j * M_PI / 6.0));
    const auto fringes = verification_scans(rho, g, xb);

    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const double n = fringes.size();
    bool defined = true;
    for (const auto &f : fringes) {
        sx += f.xb_um;
        sy += f.phase;
        sxx += f.xb_um * f.xb_um;
        sxy += f.xb_um * f.phase;
        syy += f.phase * f.phase;
        defined = defined && f.phase_defined;
    }
    const double cov = sxy - sx * sy / n;
    const double vx = sxx - sx * sx / n;
    const double vy = syy - sy * sy / n;
    const double r2 = vy > 0.0 ? cov * cov / (vx * vy) : 0.0;
    std::string phases;
    for (const auto &f : fringes)
        phases += fmt(" %.1fum:%.3f", f.xb_um, f.phase);
    report(8, "focal-plane fringe phase linear in x_B", r2 >= 0.999 && defined && std::abs(cov) > 0.0,
           fmt("R^2=%.6f (>=0.999), slope=%.5f rad/um, phases%s", r2, cov / vx, phases.c_str()));
}

template <typename F>
void guarded(int id, const std::string &name, F body)
{
    try {
        body();
    } catch (const std::exception &e) {
        report(id, name, false, std::string("exception: ") + e.what());
    }
}

} // namespace

int main()
{
    const auto t0 = Clock::now();
    guarded(1, "round-trip tomography / finite-resolution bias", criteria_1_and_2);
    guarded(3, "pattern invariants", criterion_3);
    guarded(4, "sinc approximation vs Fresnel oracle", criterion_4);
    guarded(5, "physicality projection", criterion_5);
    guarded(6, "joint bipartite reconstruction", criterion_6);
    guarded(7, "fixture regression", criterion_7);
    guarded(8, "focal-plane fringes", criterion_8);
    std::printf("acceptance: %s (%d failing) in %.1f s\n", failures ? "FAIL" : "PASS", failures, seconds_since(t0));
    return failures ? 1 : 0;
}
