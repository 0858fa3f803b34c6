#include "pnl/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pnl/error.hpp"

namespace pnl {

double Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0.0);
}

double Histogram::mean() const {
    double sum = 0.0;
    double weight = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        sum += counts[i] * center(i);
        weight += counts[i];
    }
    return weight > 0.0 ? sum / weight : 0.0;
}

Histogram Histogram::from_samples(std::span<const double> values, double lo,
                                  double hi, std::size_t bins) {
    require(bins >= 1, "histogram needs at least one bin");
    require(hi > lo, "histogram range must be non-empty");
    Histogram h;
    h.lo = lo;
    h.width = (hi - lo) / static_cast<double>(bins);
    h.counts.assign(bins, 0.0);
    for (double v : values) {
        auto idx = static_cast<long long>(std::floor((v - lo) / h.width));
        idx = std::clamp<long long>(idx, 0, static_cast<long long>(bins) - 1);
        h.counts[static_cast<std::size_t>(idx)] += 1.0;
    }
    return h;
}

}  // namespace pnl
