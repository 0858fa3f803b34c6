#include "pnl/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnl/error.hpp"

namespace pnl {

SpinSpecies SpinSpecies::from_value(double spin) {
    if (spin == 0.5)
        return half();
    if (spin == 1.0)
        return one();
    throw ConfigError("spin I must be 0.5 or 1 (got " + std::to_string(spin) +
                      ")");
}

void EnsembleConfig::validate() const {
    require(n_nv >= 1, "ensemble.n_nv must be >= 1");
    require(contrast > 0.0 && contrast < 1.0,
            "ensemble.contrast must lie in (0, 1)");
    require(photons_per_unit > 0.0, "ensemble.photons_per_unit must be > 0");
    require(decay_counts > 0.0, "ensemble.decay_counts must be > 0");
    require(p0 >= -1.0 && p0 <= 1.0, "ensemble.p0 must lie in [-1, 1]");
}

double CorrelationFunction::operator()(double tau) const {
    return sigma0_sq * std::exp(-std::abs(tau) / t1);
}

double thermal_sigma0(SpinSpecies species, std::size_t n_nv) {
    require(n_nv >= 1, "n_nv must be >= 1");
    const double i = species.value();
    return std::sqrt(i * (i + 1.0) / (3.0 * static_cast<double>(n_nv)));
}

double binning_factor(SpinSpecies species) {
    return species.twice_spin() == 2 ? std::sqrt(1.0 / 3.0) : 1.0;
}

namespace {

// (2/x^2)(x + e^{-x} - 1) via its Taylor series; used where the closed form
// cancels badly.
double averaged_variance_series(double x) {
    double term = 1.0;  // k = 2 term: 2 / 2!
    double sum = term;
    for (int k = 3; k < 40; ++k) {
        term *= -x / k;
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum))
            break;
    }
    return sum;
}

}  // namespace

double decay_factor(double duration, double t1, DecayBracket bracket) {
    require(duration >= 0.0, "readout duration must be >= 0");
    require(t1 > 0.0, "relaxation time must be > 0");
    const double x = duration / t1;
    if (bracket == DecayBracket::main_text) {
        if (x == 0.0)
            return std::numeric_limits<double>::infinity();
        return std::sqrt(2.0 / (x * x) * (2.0 * x + std::expm1(-x)));
    }
    if (x < 0.1)
        return std::sqrt(averaged_variance_series(x));
    return std::sqrt(2.0 / (x * x) * (x + std::expm1(-x)));
}

double mean_decay_factor(double duration, double t1) {
    require(duration >= 0.0, "readout duration must be >= 0");
    require(t1 > 0.0, "relaxation time must be > 0");
    const double x = duration / t1;
    if (x < 1e-8)
        return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

double projection_noise(const EnsembleConfig& cfg, double duration,
                        DecayBracket bracket) {
    cfg.validate();
    return binning_factor(cfg.species) * thermal_sigma0(cfg.species, cfg.n_nv) *
           decay_factor(duration, cfg.decay_counts, bracket);
}

double projection_noise_total(const EnsembleConfig& cfg, double duration,
                              DecayBracket bracket) {
    return projection_noise(cfg, duration, bracket) *
           static_cast<double>(cfg.n_nv);
}

SpinMoments table1_statistics(SpinSpecies species, std::size_t n_nv, double p,
                              double duration, double t1,
                              Averaging averaging) {
    require(p >= -1.0 && p <= 1.0, "polarization must lie in [-1, 1]");
    require(duration >= 0.0, "duration must be >= 0");
    require(t1 > 0.0, "t1 must be > 0");
    const double sigma0 = thermal_sigma0(species, n_nv);
    const double spin = species.value();

    if (averaging == Averaging::instantaneous) {
        const double pol = p * std::exp(-duration / t1);
        return {pol * spin, sigma0 * std::sqrt(std::max(0.0, 1.0 - pol * pol))};
    }
    const double mean_pol = p * mean_decay_factor(duration, t1);
    const double d = decay_factor(duration, t1);
    const double var = d * d - mean_pol * mean_pol;
    return {mean_pol * spin, sigma0 * std::sqrt(std::max(0.0, var))};
}

double polarization_under_readout(double p0, double m, double m_t1,
                                  DecayForm form) {
    require(m >= 0.0, "repetition count must be >= 0");
    require(m_t1 > 0.0, "decay count must be > 0");
    const double p_ss = kSteadyStatePolarization;
    const double d = mean_decay_factor(m, m_t1);
    if (form == DecayForm::literal)
        return p0 * (1.0 - p_ss) * d + p_ss;
    return (p0 - p_ss) * d + p_ss;
}

std::string to_string(DecayBracket b) {
    return b == DecayBracket::derived ? "derived" : "main_text";
}

std::string to_string(DecayForm f) {
    return f == DecayForm::relaxation ? "relaxation" : "literal";
}

}  // namespace pnl
