#include "pnl/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnl/error.hpp"

namespace pnl {

double NoiseDecomposition::db_gap() const {
    if (sigma_proj <= 0.0)
        return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(sigma_proj / sigma_shot_prime);
}

double sample_mean(std::span<const double> values) {
    require(!values.empty(), "mean of an empty sample");
    return std::accumulate(values.begin(), values.end(), 0.0) /
           static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
    require(values.size() >= 2, "standard deviation needs >= 2 samples");
    const double mean = sample_mean(values);
    double ss = 0.0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double std_error_of_std(double sigma, std::size_t count) {
    require(count >= 2, "standard error needs >= 2 samples");
    return sigma / std::sqrt(2.0 * static_cast<double>(count - 1));
}

double mean_baseline(std::span<const ReadoutRecord> records) {
    require(!records.empty(), "no readout records");
    double sum = 0.0;
    for (const auto& r : records)
        sum += r.baseline();
    return sum / static_cast<double>(records.size());
}

double estimate_contrast(std::span<const ReadoutRecord> records) {
    const double n = mean_baseline(records);
    if (!(n > 0.0))
        throw NumericalError("mean reference count is zero; contrast undefined");
    double sum = 0.0;
    for (const auto& r : records)
        sum += r.a + r.b;
    return 2.0 - sum / (static_cast<double>(records.size()) * n);
}

double shot_noise_prime(double n, double c) {
    if (!(n > 0.0) || !(c > 0.0))
        throw NumericalError("shot noise needs n > 0 and c > 0");
    return std::sqrt(1.0 - 0.5 * c) * std::sqrt(2.0 * n) / (2.0 * n * c);
}

NoiseDecomposition decompose(std::span<const ReadoutRecord> records,
                             const DecomposeOptions& options) {
    require(records.size() >= 2, "decomposition needs >= 2 records");
    require(options.k > 0.0, "k must be > 0");
    NoiseDecomposition d;
    d.count = records.size();
    d.k = options.k;
    d.n = mean_baseline(records);
    if (!(d.n > 0.0))
        throw NumericalError("mean reference count is zero");
    d.c = options.contrast ? *options.contrast : estimate_contrast(records);
    if (!(d.c > 0.0))
        throw NumericalError("estimated contrast is not positive (c = " +
                             std::to_string(d.c) + ")");

    std::vector<double> signal(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        signal[i] = records[i].signal();
    const double scale = 2.0 * d.n * d.c;
    d.mean_jz = sample_mean(signal) / scale;
    d.sigma_total = sample_std(signal);
    d.degenerate = d.sigma_total == 0.0;
    d.sigma_prime = d.sigma_total / scale;
    d.sigma_prime_err = std_error_of_std(d.sigma_prime, d.count);
    d.sigma_shot_prime = shot_noise_prime(d.n, d.c);

    const double k2 = d.k * d.k;
    const double excess =
        d.sigma_prime * d.sigma_prime / k2 - d.sigma_shot_prime * d.sigma_shot_prime;
    if (excess > 0.0) {
        d.sigma_proj = std::sqrt(excess);
        d.sigma_proj_err = d.sigma_prime * d.sigma_prime_err / (k2 * d.sigma_proj);
    } else {
        d.clipped = true;
        d.sigma_proj = 0.0;
        d.sigma_proj_err = std::sqrt(2.0 * d.sigma_prime * d.sigma_prime_err) / d.k;
    }
    return d;
}

KCalibration calibrate_k(std::span<const std::vector<ReadoutRecord>> batches) {
    require(!batches.empty(), "k calibration needs at least one batch");
    KCalibration cal;
    for (const auto& batch : batches) {
        require(batch.size() >= 2, "k calibration batch needs >= 2 records");
        CalibrationPoint p;
        p.n = mean_baseline(batch);
        if (!(p.n > 0.0))
            throw NumericalError("k calibration batch has zero reference counts");
        std::vector<double> diff(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i)
            diff[i] = batch[i].r1 - batch[i].r2;
        p.x = std::sqrt(2.0 / p.n);
        p.y = sample_std(diff) / p.n;
        p.err = std_error_of_std(p.y, batch.size());
        if (!(p.err > 0.0))
            throw NumericalError("k calibration batch has no reference noise");
        cal.points.push_back(p);
    }

    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : cal.points) {
        const double w = 1.0 / (p.err * p.err);
        sxx += w * p.x * p.x;
        sxy += w * p.x * p.y;
    }
    cal.k = sxy / sxx;
    cal.err = 1.0 / std::sqrt(sxx);
    for (const auto& p : cal.points) {
        const double r = (p.y - cal.k * p.x) / p.err;
        cal.chi2 += r * r;
    }
    if (cal.points.size() == 1) {
        cal.single_point = true;
        cal.err *= 2.0;
    }
    if (cal.k > 1.1) {
        cal.k = 1.1;
        cal.clamped = true;
    }
    return cal;
}

double CrossoverCurve::contrast() const {
    require(!points.empty(), "empty crossover curve");
    double sum = 0.0;
    for (const auto& p : points)
        sum += p.detail.c;
    return sum / static_cast<double>(points.size());
}

void CrossoverCurve::validate() const {
    require(!points.empty(), "crossover curve has no points");
    for (const auto& p : points) {
        require(p.n > 0.0 && std::isfinite(p.n), "crossover n must be > 0");
        require(p.sigma_prime > 0.0 && std::isfinite(p.sigma_prime),
                "crossover sigma' must be > 0");
        require(p.err > 0.0 && std::isfinite(p.err),
                "crossover error bars must be > 0");
    }
}

CrossoverCurve sweep_crossover(const SimulationPlan& plan,
                               std::span<const std::uint64_t> m_values,
                               const DecomposeOptions& options,
                               Execution exec) {
    require(!m_values.empty(), "crossover sweep needs at least one m");
    std::vector<std::vector<ReadoutRecord>> batches;
    batches.reserve(m_values.size());
    for (std::size_t i = 0; i < m_values.size(); ++i) {
        SimulationPlan p = plan;
        p.sequence = SequenceKind::crossover;
        p.m = m_values[i];
        p.stream = plan.stream + i;
        batches.push_back(simulate_experiment(p, exec));
    }

    // One contrast for the whole dataset, pooled over all photons.
    DecomposeOptions opts = options;
    if (!opts.contrast) {
        double window_sum = 0.0, baseline_sum = 0.0;
        for (const auto& batch : batches)
            for (const auto& r : batch) {
                window_sum += r.a + r.b;
                baseline_sum += r.baseline();
            }
        if (!(baseline_sum > 0.0))
            throw NumericalError("crossover sweep recorded no reference photons");
        opts.contrast = 2.0 - window_sum / baseline_sum;
    }

    CrossoverCurve curve;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        CrossoverPoint pt;
        pt.m = m_values[i];
        pt.detail = decompose(batches[i], opts);
        pt.n = pt.detail.n;
        pt.sigma_prime = pt.detail.sigma_prime;
        pt.err = pt.detail.sigma_prime_err;
        curve.points.push_back(pt);
    }
    return curve;
}

}  // namespace pnl
