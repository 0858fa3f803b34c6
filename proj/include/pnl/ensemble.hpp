#pragma once

// Closed-form statistics of a spin ensemble read out through a two-outcome
// optical channel: thermal projection noise, the three-level binning factor,
// variance reduction from time-averaging a relaxing spin, and polarization
// decay under repeated readout.
//
// All quantities are normalized per spin (J~z = Jz / N). Times are in
// arbitrary but consistent units (readout repetitions or accumulated photons).

#include <cstddef>
#include <string>

namespace pnl {

// Nuclear spin quantum number. Only I = 1/2 and I = 1 are supported.
class SpinSpecies {
  public:
    static SpinSpecies half() { return SpinSpecies(1); }
    static SpinSpecies one() { return SpinSpecies(2); }
    // Accepts 0.5 or 1.0; anything else throws ConfigError.
    static SpinSpecies from_value(double spin);

    double value() const { return 0.5 * twice_spin_; }
    int twice_spin() const { return twice_spin_; }
    int levels() const { return twice_spin_ + 1; }
    bool operator==(const SpinSpecies&) const = default;

  private:
    explicit SpinSpecies(int twice) : twice_spin_(twice) {}
    int twice_spin_;
};

struct EnsembleConfig {
    std::size_t n_nv = 31;
    SpinSpecies species = SpinSpecies::one();
    double contrast = 0.15;
    // Baseline photons per readout repetition, summed over the ensemble.
    double photons_per_unit = 0.273;
    // Relaxation expressed in accumulated photons (n_T1); the equivalent
    // repetition count is decay_counts / photons_per_unit.
    double decay_counts = 1.6e6;
    double p0 = 0.0;

    double decay_repetitions() const { return decay_counts / photons_per_unit; }
    // Throws ConfigError naming the first offending field.
    void validate() const;
};

// Steady-state polarization of the binned pseudo-spin when all three
// nuclear levels are equally populated.
inline constexpr double kSteadyStatePolarization = -1.0 / 3.0;

struct PolarizationState {
    double p = 0.0;
    double p_ss = kSteadyStatePolarization;
};

// Stationary exponential autocorrelation C(tau) = sigma0^2 exp(-|tau|/t1).
struct CorrelationFunction {
    double sigma0_sq = 1.0;
    double t1 = 1.0;
    double operator()(double tau) const;
};

// Which bracket the time-averaging factor uses. `derived` integrates the
// exponential correlation exactly (T/T1 inside the bracket); `main_text`
// reproduces the 2T/T1 variant for comparison runs and diverges at T -> 0.
enum class DecayBracket { derived, main_text };

// Observed-polarization model under readout. `relaxation` decays p0 towards
// p_ss; `literal` is p0 (1 - p_ss) D + p_ss, which coincides at p0 = 1.
enum class DecayForm { relaxation, literal };

enum class Averaging { instantaneous, time_averaged };

double thermal_sigma0(SpinSpecies species, std::size_t n_nv);

double binning_factor(SpinSpecies species);

// sqrt((2 T1^2 / T^2)(T/T1 + e^{-T/T1} - 1)); 1 at T = 0, ~sqrt(2 T1 / T)
// for T >> T1.
double decay_factor(double duration, double t1,
                    DecayBracket bracket = DecayBracket::derived);

// (T1/T)(1 - e^{-T/T1}): time average of e^{-t/T1} over [0, T].
double mean_decay_factor(double duration, double t1);

double projection_noise(const EnsembleConfig& cfg, double duration,
                        DecayBracket bracket = DecayBracket::derived);

// Un-normalized counterpart: projection_noise * N_NV.
double projection_noise_total(const EnsembleConfig& cfg, double duration,
                              DecayBracket bracket = DecayBracket::derived);

struct SpinMoments {
    double expectation = 0.0;
    double sigma = 0.0;
};

// Expectation and projection noise of the spin distribution at time T
// (instantaneous) or averaged over [0, T], for an ensemble with polarization
// p at T = 0 relaxing with t1.
SpinMoments table1_statistics(SpinSpecies species, std::size_t n_nv, double p,
                              double duration, double t1, Averaging averaging);

double polarization_under_readout(double p0, double m, double m_t1,
                                  DecayForm form = DecayForm::relaxation);

std::string to_string(DecayBracket b);
std::string to_string(DecayForm f);

}  // namespace pnl
