#pragma once

// Variance decomposition of repetitive-readout data into photon shot noise
// and spin projection noise:
//
//   sigma'       = std(b - a) / (2 n c)
//   sigma'_shot  = sqrt(1 - c/2) sqrt(2 n) / (2 n c)
//   sigma'       = k sqrt(sigma'_shot^2 + sigma_proj^2)

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pnl/readout_sim.hpp"

namespace pnl {

struct NoiseDecomposition {
    std::size_t count = 0;
    double n = 0.0;
    double c = 0.0;
    double k = 1.0;
    double mean_jz = 0.0;
    double sigma_total = 0.0;
    double sigma_prime = 0.0;
    double sigma_prime_err = 0.0;
    double sigma_shot_prime = 0.0;
    double sigma_proj = 0.0;
    double sigma_proj_err = 0.0;
    // sigma'^2/k^2 fell below sigma'_shot^2 and sigma_proj was clipped to 0.
    bool clipped = false;
    // All signals identical; error bars are meaningless.
    bool degenerate = false;

    // 20 log10(sigma_proj / sigma'_shot); -inf when sigma_proj is 0.
    double db_gap() const;
};

struct DecomposeOptions {
    // Batch contrast; estimated as 2 - <a + b>/n when absent.
    std::optional<double> contrast;
    double k = 1.0;
};

double sample_mean(std::span<const double> values);
// Bessel-corrected standard deviation.
double sample_std(std::span<const double> values);
// Standard error of a sample standard deviation (chi approximation).
double std_error_of_std(double sigma, std::size_t count);

double estimate_contrast(std::span<const ReadoutRecord> records);
double mean_baseline(std::span<const ReadoutRecord> records);
double shot_noise_prime(double n, double c);

NoiseDecomposition decompose(std::span<const ReadoutRecord> records,
                             const DecomposeOptions& options = {});

struct CalibrationPoint {
    double n = 0.0;
    double x = 0.0;  // sqrt(2/n)
    double y = 0.0;  // std(r1 - r2) / n
    double err = 0.0;
};

struct KCalibration {
    double k = 1.0;
    double err = 0.0;
    double chi2 = 0.0;
    bool single_point = false;
    bool clamped = false;
    std::vector<CalibrationPoint> points;
};

// Weighted least-squares fit of std(r1 - r2)/n = k sqrt(2/n) across batches
// taken at different n. A single batch yields the plain ratio with a
// doubled error and `single_point` set.
KCalibration calibrate_k(std::span<const std::vector<ReadoutRecord>> batches);

struct CrossoverPoint {
    std::uint64_t m = 0;
    double n = 0.0;
    double sigma_prime = 0.0;
    double err = 0.0;
    NoiseDecomposition detail;
};

struct CrossoverCurve {
    std::vector<CrossoverPoint> points;

    // Contrast used to normalize the points (shared across the curve when
    // sweep_crossover pooled it).
    double contrast() const;
    void validate() const;
};

CrossoverCurve sweep_crossover(const SimulationPlan& plan,
                               std::span<const std::uint64_t> m_values,
                               const DecomposeOptions& options = {},
                               Execution exec = Execution::parallel);

}  // namespace pnl
