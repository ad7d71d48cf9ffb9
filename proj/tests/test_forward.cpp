#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sst/errors.hpp"
#include "sst/forward.hpp"
#include "sst/numerics.hpp"
#include "sst/optics.hpp"
#include "sst/patterns.hpp"
#include "sst/quadrature.hpp"

using namespace sst;

namespace {

DensityMatrix random_state(std::mt19937_64 &rng, std::size_t d = 3)
{
    std::normal_distribution<double> normal;
    ComplexMatrix g(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            g(i, j) = Complex{normal(rng), normal(rng)};
    ComplexMatrix m = g * g.adjoint();
    m *= Complex{1.0 / m.trace().real(), 0.0};
    return DensityMatrix(m.hermitized());
}

// The nine-term expansion of the detection probability, written out per term.
double nine_term_sum(const ComplexMatrix &rho, const ComplexMatrix &m)
{
    const auto re = [](Complex z) { return z.real(); };
    const auto im = [](Complex z) { return z.imag(); };
    return re(rho(0, 0)) * re(m(0, 0)) + 2 * re(rho(0, 1)) * re(m(0, 1)) + 2 * im(rho(0, 1)) * im(m(0, 1)) +
           2 * re(rho(0, 2)) * re(m(0, 2)) + 2 * im(rho(0, 2)) * im(m(0, 2)) + re(rho(1, 1)) * re(m(1, 1)) +
           2 * re(rho(1, 2)) * re(m(1, 2)) + 2 * im(rho(1, 2)) * im(m(1, 2)) + re(rho(2, 2)) * re(m(2, 2));
}

struct Fixture {
    Geometry g = reference_geometry();
    DetectorSpec det{20.0, 32};
    std::vector<double> grid = uniform_grid(-500.0, 500.0, 5.0);
    PatternSet pat = pattern_table(g, det, grid);
};

} // namespace

TEST_CASE("density matrix invariants are enforced")
{
    ComplexMatrix m(2, 2);
    m(0, 0) = 0.5;
    m(1, 1) = 0.5;
    CHECK_NOTHROW(DensityMatrix{m});
    auto bad = m;
    bad(0, 1) = Complex{0.1, 0.0};
    CHECK_THROWS_AS(DensityMatrix{bad}, UnphysicalStateError);
    bad = m;
    bad(0, 0) = 0.6;
    CHECK_THROWS_AS(DensityMatrix{bad}, UnphysicalStateError);
    bad = m;
    bad(0, 0) = 1.2;
    bad(1, 1) = -0.2;
    CHECK_THROWS_AS(DensityMatrix{bad}, UnphysicalStateError);
    CHECK_THROWS_AS(DensityMatrix{ComplexMatrix(2, 3)}, UnphysicalStateError);

    const std::vector<Complex> psi{Complex{1, 0}, Complex{0, 1}, Complex{1, 1}};
    const auto p = DensityMatrix::pure(psi);
    CHECK(p.matrix().trace().real() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p(0, 1) == Complex{0.0, -0.25});
    CHECK(p(0, 2) == Complex{0.25, -0.25});
    CHECK(DensityMatrix::maximally_mixed(3)(1, 1) == Complex{1.0 / 3.0, 0.0});
    CHECK(DensityMatrix::basis(3, 2)(2, 2) == Complex{1.0, 0.0});
    const auto mixed = mix(DensityMatrix::basis(3, 0), DensityMatrix::basis(3, 1), 0.25);
    CHECK(mixed(0, 0).real() == doctest::Approx(0.75));
    CHECK(mixed(1, 1).real() == doctest::Approx(0.25));
}

TEST_CASE("detection probability examples")
{
    const auto g = reference_geometry();
    const auto m = measurement_operator(g, {20.0, 32}, 63.0);
    CHECK(detection_probability(DensityMatrix::basis(3, 1), m) == doctest::Approx(m(1, 1).real()).epsilon(1e-15));
    CHECK(detection_probability(DensityMatrix::maximally_mixed(3), m) ==
          doctest::Approx((m(0, 0) + m(1, 1) + m(2, 2)).real() / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(detection_probability(DensityMatrix::maximally_mixed(2), m), DimensionError);
}

TEST_CASE("trace formula equals the nine-term expansion")
{
    const auto g = reference_geometry();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> xs(-500.0, 500.0);
    for (int n = 0; n < 200; ++n) {
        const auto rho = random_state(rng);
        const auto m = measurement_operator(g, {20.0, 32}, xs(rng));
        const double p = detection_probability(rho, m);
        CHECK(std::abs(p - nine_term_sum(rho.matrix(), m)) <= 1e-12 * (std::abs(p) + 1e-3));
        CHECK(p >= -1e-10);
    }
}

TEST_CASE("probability integrates to one over a wide window")
{
    const auto g = reference_geometry();
    const double xmax = 20.0 * M_PI / sinc_scale(g);
    const auto grid = uniform_grid(-xmax, xmax, xmax / 4000.0);
    const auto pat = pattern_table(g, {20.0, 32}, grid);
    std::mt19937_64 rng(12);
    for (int n = 0; n < 5; ++n) {
        const auto p = expected_scan(random_state(rng), pat, 1.0);
        double total = 0.0;
        for (double v : p)
            total += v;
        CHECK(std::abs(total - 1.0) <= 1e-2);
    }
}

TEST_CASE("expected scan is linear in the state and in the exposure")
{
    Fixture f;
    std::mt19937_64 rng(13);
    const auto r1 = random_state(rng);
    const auto r2 = random_state(rng);
    const auto e1 = expected_scan(r1, f.pat, 1e6);
    const auto e2 = expected_scan(r2, f.pat, 1e6);
    const auto em = expected_scan(mix(r1, r2, 0.5), f.pat, 1e6);
    const auto e1x2 = expected_scan(r1, f.pat, 2e6);
    const auto w = grid_weights(f.grid);
    for (std::size_t k = 0; k < f.grid.size(); ++k) {
        CHECK(std::abs(em[k] - 0.5 * (e1[k] + e2[k])) <= 1e-12 * std::max(1.0, em[k]));
        CHECK(e1x2[k] == doctest::Approx(2.0 * e1[k]).epsilon(1e-14));
        CHECK(e1[k] == doctest::Approx(1e6 * w[k] * detection_probability(r1, f.pat.matrix(k))).epsilon(1e-13));
    }
}

TEST_CASE("simulation is deterministic and matches the serial reference")
{
    Fixture f;
    std::mt19937_64 rng(14);
    const auto rho = random_state(rng);
    const auto a = simulate_scan(rho, f.pat, 1e7, 42);
    const auto b = simulate_scan(rho, f.pat, 1e7, 42);
    const auto c = simulate_scan(rho, f.pat, 1e7, 43);
    CHECK(a.counts == b.counts);
    CHECK(a.counts != c.counts);
    CHECK(a.seed == std::optional<std::uint64_t>{42});
    CHECK(a.grid == f.grid);
    const auto means = expected_scan(rho, f.pat, 1e7);
    CHECK(serial::poisson_counts(means, 42) == a.counts);
    CHECK(serial::expected_scan(rho.matrix(), f.pat, 1e7) == means);
}

TEST_CASE("vanishing exposure gives zero counts")
{
    Fixture f;
    const auto scan = simulate_scan(DensityMatrix::maximally_mixed(3), f.pat, 1e-12, 1);
    for (auto c : scan.counts)
        CHECK(c == 0);
    CHECK_THROWS_AS(simulate_scan(DensityMatrix::maximally_mixed(3), f.pat, 0.0, 1), InputError);
}

TEST_CASE("centre-slit scan follows M_cc bin by bin")
{
    Fixture f;
    const auto scan = simulate_scan(DensityMatrix::basis(3, 1), f.pat, 1e7, 7);
    const auto w = grid_weights(f.grid);
    std::size_t within = 0;
    for (std::size_t k = 0; k < f.grid.size(); ++k) {
        const double mean = 1e7 * w[k] * f.pat.matrix(k)(1, 1).real();
        const double sigma = std::sqrt(std::max(mean, 1.0));
        if (std::abs(scan.counts[k] - mean) < 5.0 * sigma)
            ++within;
    }
    CHECK(within >= static_cast<std::size_t>(std::ceil(0.99 * f.grid.size())));
}

TEST_CASE("mean over many seeds converges to the expected scan")
{
    const auto g = reference_geometry();
    const auto grid = uniform_grid(-500.0, 500.0, 10.0);
    const auto pat = pattern_table(g, {20.0, 32}, grid);
    std::mt19937_64 rng(15);
    const auto rho = random_state(rng);
    const auto means = expected_scan(rho, pat, 1e5);
    const int seeds = 10000;
    std::vector<double> sum(grid.size(), 0.0);
    for (int s = 0; s < seeds; ++s) {
        const auto counts = poisson_counts(means, 1000 + s);
        for (std::size_t k = 0; k < grid.size(); ++k)
            sum[k] += counts[k];
    }
    std::size_t within3 = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double z = (sum[k] / seeds - means[k]) / (std::sqrt(means[k]) / std::sqrt(double(seeds)));
        worst = std::max(worst, std::abs(z));
        if (std::abs(z) <= 3.0)
            ++within3;
    }
    // About 0.3% of bins may legitimately exceed 3 sigma.
    CHECK(within3 >= static_cast<std::size_t>(std::floor(0.99 * grid.size())));
    CHECK(worst < 4.5);
}

TEST_CASE("unphysical model states are rejected during simulation")
{
    Fixture f;
    ComplexMatrix bad(3, 3);
    bad(0, 0) = 2.0;
    bad(1, 1) = -1.0;
    CHECK_THROWS_AS(expected_scan(bad, f.pat, 1.0), UnphysicalStateError);
    CHECK_THROWS_AS(simulate_scan(bad, f.pat, 1.0, 1), UnphysicalStateError);
}

TEST_CASE("scan record validation")
{
    ScanRecord s;
    s.grid = {0.0, 1.0};
    s.counts = {1};
    CHECK_THROWS_AS(s.validate(), InputError);
    s.counts = {1, -1};
    CHECK_THROWS_AS(s.validate(), InputError);
    s.counts = {1, 2};
    s.exposure = 0.0;
    CHECK_THROWS_AS(s.validate(), InputError);
    s.exposure = 5.0;
    s.center_offset_um = 2.0;
    CHECK_NOTHROW(s.validate());
    CHECK(s.model_grid() == std::vector<double>{2.0, 3.0});
    CHECK(s.total_counts() == 3);
}

TEST_CASE("splitmix64 reference values")
{
    // Known outputs of the SplitMix64 sequence seeded with 0: the first draw mixes 0x9E3779B97F4A7C15.
    CHECK(splitmix64(0) == 0xE220A8397B1DCDAFull);
}
