// Serial reference vs OpenMP timings for the parallel kernels.
// Usage: sst_bench [repeats]

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#include "sst/bipartite.hpp"
#include "sst/forward.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"

using namespace sst;

namespace {

double best_ms(int repeats, const std::function<void()> &fn)
{
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char *name, double serial_ms, double parallel_ms, bool same)
{
    std::printf("%-28s %10.2f %10.2f %8.2fx  %s\n", name, serial_ms, parallel_ms, serial_ms / parallel_ms,
                same ? "identical" : "MISMATCH");
}

} // namespace

int main(int argc, char **argv)
{
    const int repeats = argc > 1 ? std::max(1, std::atoi(argv[1])) : 3;
    const auto g = reference_geometry();
    const DetectorSpec det{20.0, 32};
    const auto grid = uniform_grid(-500.0, 500.0, 1.0);

    std::printf("threads %d, grid %zu points, best of %d\n", omp_get_max_threads(), grid.size(), repeats);
    std::printf("%-28s %10s %10s %9s\n", "kernel", "serial ms", "openmp ms", "speedup");

    PatternSet ps = serial::pattern_table(g, det, grid);
    PatternSet pp = pattern_table(g, det, grid);
    const double t_ps = best_ms(repeats, [&] { ps = serial::pattern_table(g, det, grid); });
    const double t_pp = best_ms(repeats, [&] { pp = pattern_table(g, det, grid); });
    bool same = true;
    for (std::size_t k = 0; k < grid.size(); ++k)
        same = same && (ps.matrix(k) - pp.matrix(k)).frobenius_norm() == 0.0;
    row("pattern_table", t_ps, t_pp, same);

    const auto rho = DensityMatrix::maximally_mixed(3);
    std::vector<double> es;
    std::vector<double> ep;
    const double t_es = best_ms(repeats * 20, [&] { es = serial::expected_scan(rho.matrix(), pp, 1e7); });
    const double t_ep = best_ms(repeats * 20, [&] { ep = expected_scan(rho, pp, 1e7); });
    row("expected_scan", t_es, t_ep, es == ep);

    std::vector<std::int64_t> cs;
    std::vector<std::int64_t> cp;
    const double t_cs = best_ms(repeats * 20, [&] { cs = serial::poisson_counts(ep, 7); });
    const double t_cp = best_ms(repeats * 20, [&] { cp = poisson_counts(ep, 7); });
    row("poisson_counts", t_cs, t_cp, cs == cp);

    const auto set = simulate_conditional_set(werner_state(0.2), g, det, det, default_xb_positions(),
                                              uniform_grid(-500.0, 500.0, 5.0), 1e9, 3);
    RealMatrix js;
    RealMatrix jp;
    const double t_js = best_ms(repeats, [&] { js = serial::joint_design(set, PatternMode::realistic); });
    const double t_jp = best_ms(repeats, [&] { jp = joint_design(set, PatternMode::realistic); });
    bool jsame = js.rows() == jp.rows() && js.cols() == jp.cols();
    for (std::size_t r = 0; jsame && r < js.rows(); ++r)
        for (std::size_t c = 0; c < js.cols(); ++c)
            jsame = jsame && js(r, c) == jp(r, c);
    row("joint_design", t_js, t_jp, jsame);
    return same && es == ep && cs == cp && jsame ? 0 : 1;
}
