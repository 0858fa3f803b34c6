#pragma once

// Monte Carlo generator of repetitive-readout experiments.
//
// Each shot initializes N_NV nuclear spins, lets every spin follow a random
// telegraph process over m readout repetitions, and draws Poisson photon
// counts for the spin-selective windows a, b and two reference windows.
// Because a sum of independent Poisson counts is Poisson, only the time each
// spin spends in |up> is needed: photon windows are drawn once per shot
// from the accumulated means.
//
// Photon model, per spin and repetition with n_s = photons_per_unit / N_NV:
//   window a: n_s (1 - c [level == up])
//   window b: n_s (1 - c [level != up])
//   r1, r2:   n_s
// so (b - a) spans 2 n c between all-down and all-up ensembles.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pnl/ensemble.hpp"
#include "pnl/histogram.hpp"
#include "pnl/parallel.hpp"

namespace pnl {

// For I = 1/2 only `up` and `down` are used.
enum class Level : std::uint8_t { up = 0, zero = 1, down = 2 };

struct ReadoutRecord {
    double a = 0.0;
    double b = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    std::uint64_t m = 0;

    double signal() const { return b - a; }
    double baseline() const { return 0.5 * (r1 + r2); }
    // Per-record contrast estimate 2 - (a + b) / n.
    double contrast() const { return 2.0 - (a + b) / baseline(); }
};

// Per-repetition probability that a spin in a given level is redrawn
// uniformly over all levels (it may land on the same level). With equal
// probabilities q the pseudo-spin autocorrelation is exactly (1 - q)^tau and
// the stationary state is the uniform thermal mixture.
struct TelegraphRates {
    double up = 0.0;
    double zero = 0.0;
    double down = 0.0;

    static TelegraphRates pinned() { return {}; }
    // Equal rates giving an autocorrelation of exp(-tau / m_t1).
    static TelegraphRates symmetric(double m_t1);
    // Per-level 1/e lifetimes in repetitions; infinity pins a level.
    static TelegraphRates from_lifetimes(double m_up, double m_zero,
                                         double m_down);

    double for_level(Level level) const;
    void validate() const;
};

struct TelegraphSpin {
    Level level = Level::up;
    TelegraphRates rates;
    SpinSpecies species = SpinSpecies::one();

    // Row-stochastic per-repetition transition matrix (levels up, zero,
    // down; the zero row/column is unused for I = 1/2).
    std::array<std::array<double, 3>, 3> transition_matrix() const;

    // Advances `m` repetitions and returns how many of them the spin spent
    // in |up>. Jumps are drawn event by event (geometric waiting times).
    std::uint64_t evolve(std::uint64_t m, Engine& engine);
};

enum class ApdMode { linear, multiplicative_k, dead_time };

struct ApdModel {
    ApdMode mode = ApdMode::linear;
    double k = 1.0;
    // Nonparalyzable dead time in units of the mean inter-photon interval.
    double dead_time = 0.0;

    static ApdModel linear() { return {}; }
    static ApdModel multiplicative(double k) {
        return {ApdMode::multiplicative_k, k, 0.0};
    }
    static ApdModel with_dead_time(double rho) {
        return {ApdMode::dead_time, 1.0, rho};
    }
    void validate() const;
};

enum class SequenceKind { crossover, rabi, t1_decay, custom };

struct Initialization {
    enum class Kind { thermal, polarized };
    Kind kind = Kind::thermal;
    Level level = Level::up;
    // Probability that a spin starts in `level`; the remainder is spread
    // uniformly over the other levels.
    double fidelity = 1.0;
    // Probability that a spin responds to the RF rotation. Inactive spins
    // keep their initialized level.
    double active_fraction = 1.0;
    // RF rotation angle between |up> and its partner level (|0> for I = 1,
    // |down> for I = 1/2), applied after initialization.
    double rotation_angle = 0.0;

    void validate() const;
};

struct SimulationPlan {
    EnsembleConfig cfg;
    std::uint64_t m = 1250;
    std::uint64_t shots = 3000;
    std::uint64_t seed = 1;
    // Distinguishes independent experiments sharing a seed (sweep points).
    std::uint64_t stream = 0;
    SequenceKind sequence = SequenceKind::crossover;
    Initialization init;
    // Defaults to TelegraphRates::symmetric(cfg.decay_repetitions()).
    std::optional<TelegraphRates> rates;
    ApdModel apd;

    TelegraphRates effective_rates() const;
    void validate() const;
};

std::vector<ReadoutRecord> simulate_experiment(
    const SimulationPlan& plan, Execution exec = Execution::parallel);

// Spin-level view of the same shots without photon noise: time-averaged
// and final pseudo-spin J~z per shot.
struct SpinShot {
    double mean_jz = 0.0;
    double final_jz = 0.0;
};
std::vector<SpinShot> simulate_spin_shots(const SimulationPlan& plan,
                                          Execution exec = Execution::parallel);

// Applies the detector model to a batch of records. multiplicative_k
// compresses every column about its batch mean by k; dead_time thins each
// count with a nonparalyzable dead time, treating the column's batch mean
// as the exposure in mean inter-photon intervals.
std::vector<ReadoutRecord> apply_apd(std::vector<ReadoutRecord> records,
                                     const ApdModel& model,
                                     std::uint64_t seed = 0,
                                     Execution exec = Execution::parallel);

// Number of photons surviving a nonparalyzable dead time `rho` when `raw`
// photons arrive uniformly over an exposure `exposure` (both in mean
// inter-photon intervals).
std::uint64_t dead_time_accept(std::uint64_t raw, double exposure, double rho,
                               Engine& engine);

struct RabiPoint {
    double angle = 0.0;
    double mean_jz = 0.0;
    double sigma_jz = 0.0;
    double sigma_jz_err = 0.0;
    Histogram histogram;
};

std::vector<RabiPoint> run_rabi_sequence(const SimulationPlan& plan,
                                         std::span<const double> angles,
                                         Execution exec = Execution::parallel);

struct PolarizationPoint {
    double m = 0.0;
    double p_obs = 0.0;
    double err = 0.0;
};

// Initializes every spin in `level` and reads out for each m in `m_grid`
// (independent experiments). p_obs = (b - a) / (n c), averaged over shots.
std::vector<PolarizationPoint> run_t1_sequence(
    const SimulationPlan& plan, Level level,
    std::span<const std::uint64_t> m_grid,
    Execution exec = Execution::parallel);

std::string to_string(Level level);
Level level_from_string(const std::string& s);
std::string to_string(ApdMode mode);
ApdMode apd_mode_from_string(const std::string& s);
std::string to_string(SequenceKind kind);

}  // namespace pnl
