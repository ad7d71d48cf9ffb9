#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace sst {

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
struct GaussLegendreRule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
};

GaussLegendreRule gauss_legendre(std::size_t n);

/// Integrate f over [lo, hi] with `panels` equal sub-intervals, each using `rule`.
template <class F, class T = decltype(std::declval<F>()(0.0))>
T integrate_composite(const GaussLegendreRule &rule, double lo, double hi, std::size_t panels, F &&f)
{
    T sum{};
    const double width = (hi - lo) / static_cast<double>(panels);
    const double half = 0.5 * width;
    for (std::size_t p = 0; p < panels; ++p) {
        const double mid = lo + (static_cast<double>(p) + 0.5) * width;
        for (std::size_t k = 0; k < rule.size(); ++k)
            sum += rule.weights[k] * half * f(mid + half * rule.nodes[k]);
    }
    return sum;
}

} // namespace sst
