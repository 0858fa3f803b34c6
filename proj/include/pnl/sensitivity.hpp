#pragma once

// Magnetic sensitivity of a single conventional readout versus repetitive
// nuclear-assisted readout (with optional projection-noise squeezing).
// Durations are in microseconds; sensitivities in T/sqrt(Hz).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnl/parallel.hpp"

namespace pnl {

enum class ContrastDecay { relaxation, literal };
enum class SqueezingConvention { db_amplitude, literal };

struct SensitivityParams {
    double tau_r = 1.0;        // conventional readout
    double tau_r_rep = 7.5;    // one repetitive readout
    double tau_init = 5236.0;  // nuclear initialization
    double tau_rf = 600.0;     // mapping gate
    double tau_sq = 3.0;       // squeezing preparation
    double n1_per_nv = 0.036;  // photons per readout per emitter
    double c = 0.15;
    double m_t1 = 50000.0;
    double n_nv = 100.0;
    double gamma_e = 28.04e9;  // Hz / T
    ContrastDecay decay = ContrastDecay::relaxation;

    double n1() const { return n1_per_nv * n_nv; }
    // Contrast retained after m repetitions.
    double contrast_decay(double m) const;
    void validate() const;
};

struct SqueezingSpec {
    double xi_sq_db = 0.0;
    SqueezingConvention convention = SqueezingConvention::db_amplitude;

    // Multiplier on the projection-noise standard deviation.
    double amplitude_factor() const;
    void validate() const;
};

double eta_conventional(const SensitivityParams& p, double tau_sens);

double eta_repetitive(const SensitivityParams& p, double tau_sens, double m,
                      const std::optional<SqueezingSpec>& squeezing = std::nullopt);

struct RepetitionOptimum {
    std::uint64_t m = 1;
    double eta = 0.0;
};

// Integer minimizer of eta_repetitive over m in [1, 10 m_t1]: golden
// section on log m followed by a neighbourhood scan.
RepetitionOptimum optimize_repetitions(
    const SensitivityParams& p, double tau_sens,
    const std::optional<SqueezingSpec>& squeezing = std::nullopt);

// Sensing time where the optimized repetitive readout starts to beat the
// conventional one (bisection on log tau_sens in [lo, hi]).
double breakeven_sensing_time(const SensitivityParams& p,
                              const std::optional<SqueezingSpec>& squeezing = std::nullopt,
                              double lo = 1e-2, double hi = 1e7);

struct SensitivityCell {
    double tau_sens = 0.0;
    double m = 0.0;
    double eta_conv = 0.0;
    double eta_rep = 0.0;
    double ratio = 0.0;  // eta_conv / eta_rep; > 1 favours repetitive readout
};

// Row-major over tau_grid, then m_grid.
std::vector<SensitivityCell> sensitivity_map(
    const SensitivityParams& p, std::span<const double> tau_grid,
    std::span<const double> m_grid,
    const std::optional<SqueezingSpec>& squeezing = std::nullopt,
    Execution exec = Execution::parallel);

std::string to_string(ContrastDecay d);
ContrastDecay contrast_decay_from_string(const std::string& s);
std::string to_string(SqueezingConvention c);
SqueezingConvention squeezing_convention_from_string(const std::string& s);

}  // namespace pnl
