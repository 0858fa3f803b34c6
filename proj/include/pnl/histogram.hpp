#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pnl {

// Uniform-bin histogram. Bin i covers [lo + i*width, lo + (i+1)*width).
struct Histogram {
    double lo = 0.0;
    double width = 1.0;
    std::vector<double> counts;

    std::size_t size() const { return counts.size(); }
    double hi() const { return lo + width * static_cast<double>(counts.size()); }
    double center(std::size_t i) const {
        return lo + width * (static_cast<double>(i) + 0.5);
    }
    double total() const;
    double mean() const;

    // Samples outside [lo, hi) are clamped into the edge bins.
    static Histogram from_samples(std::span<const double> values, double lo,
                                  double hi, std::size_t bins);
};

}  // namespace pnl
