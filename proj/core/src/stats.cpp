#include "offdrive/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "offdrive/error.hpp"

namespace offdrive {

double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw ContractError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Quartiles iqr_summary(std::span<const double> values) {
    if (values.empty()) throw ContractError("iqr_summary: empty input");
    std::vector<double> v(values.begin(), values.end());
    return Quartiles{quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75)};
}

double mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_stddev(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double x : values) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace offdrive
