#include "pnl/readout_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pnl/error.hpp"
#include "pnl/noise.hpp"

namespace pnl {

namespace {

constexpr std::uint64_t kNever = std::numeric_limits<std::uint64_t>::max();

Level partner_level(SpinSpecies species) {
    return species.twice_spin() == 2 ? Level::zero : Level::down;
}

Level level_from_index(SpinSpecies species, int idx) {
    if (species.twice_spin() == 1)
        return idx == 0 ? Level::up : Level::down;
    return static_cast<Level>(idx);
}

int level_index(SpinSpecies species, Level level) {
    if (species.twice_spin() == 1)
        return level == Level::up ? 0 : 1;
    return static_cast<int>(level);
}

Level draw_uniform_level(SpinSpecies species, Engine& engine) {
    std::uniform_int_distribution<int> pick(0, species.levels() - 1);
    return level_from_index(species, pick(engine));
}

Level draw_initial_level(const Initialization& init, SpinSpecies species,
                         Engine& engine) {
    if (init.kind == Initialization::Kind::thermal)
        return draw_uniform_level(species, engine);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(engine) < init.fidelity)
        return init.level;
    // Uniform over the remaining levels.
    const int target = level_index(species, init.level);
    std::uniform_int_distribution<int> pick(0, species.levels() - 2);
    int idx = pick(engine);
    if (idx >= target)
        ++idx;
    return level_from_index(species, idx);
}

Level apply_rotation(Level level, const Initialization& init,
                     SpinSpecies species, Engine& engine) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool active = u(engine) < init.active_fraction;
    const double flip = u(engine);
    if (!active || init.rotation_angle == 0.0)
        return level;
    const double s = std::sin(0.5 * init.rotation_angle);
    const Level partner = partner_level(species);
    if (flip < s * s) {
        if (level == Level::up)
            return partner;
        if (level == partner)
            return Level::up;
    }
    return level;
}

struct ShotSpins {
    std::uint64_t up_reps = 0;  // spin-repetitions spent in |up>
    std::uint64_t final_up = 0;
};

ShotSpins run_shot_spins(const SimulationPlan& plan, const TelegraphRates& rates,
                         Engine& engine) {
    ShotSpins out;
    const SpinSpecies species = plan.cfg.species;
    for (std::size_t i = 0; i < plan.cfg.n_nv; ++i) {
        TelegraphSpin spin{draw_initial_level(plan.init, species, engine), rates,
                           species};
        spin.level = apply_rotation(spin.level, plan.init, species, engine);
        out.up_reps += spin.evolve(plan.m, engine);
        if (spin.level == Level::up)
            ++out.final_up;
    }
    return out;
}

double poisson(double mean, Engine& engine) {
    std::poisson_distribution<long long> dist(mean);
    return static_cast<double>(dist(engine));
}

ReadoutRecord run_shot(const SimulationPlan& plan, const TelegraphRates& rates,
                       std::uint64_t shot) {
    Engine engine = make_engine(plan.seed, streams::readout + 16 * plan.stream,
                                shot);
    const ShotSpins spins = run_shot_spins(plan, rates, engine);
    const double n_nv = static_cast<double>(plan.cfg.n_nv);
    const double m = static_cast<double>(plan.m);
    const double per_spin_rep = plan.cfg.photons_per_unit / n_nv;
    const double c = plan.cfg.contrast;
    const double spin_reps = n_nv * m;
    const double up = static_cast<double>(spins.up_reps);

    ReadoutRecord rec;
    rec.m = plan.m;
    rec.a = poisson(per_spin_rep * (spin_reps - c * up), engine);
    rec.b = poisson(per_spin_rep * (spin_reps - c * (spin_reps - up)), engine);
    rec.r1 = poisson(per_spin_rep * spin_reps, engine);
    rec.r2 = poisson(per_spin_rep * spin_reps, engine);
    return rec;
}

}  // namespace

TelegraphRates TelegraphRates::symmetric(double m_t1) {
    require(m_t1 > 0.0, "telegraph lifetime must be > 0");
    const double q = std::isinf(m_t1) ? 0.0 : -std::expm1(-1.0 / m_t1);
    return {q, q, q};
}

TelegraphRates TelegraphRates::from_lifetimes(double m_up, double m_zero,
                                              double m_down) {
    auto q = [](double life) {
        require(life > 0.0, "telegraph lifetime must be > 0");
        return std::isinf(life) ? 0.0 : -std::expm1(-1.0 / life);
    };
    return {q(m_up), q(m_zero), q(m_down)};
}

double TelegraphRates::for_level(Level level) const {
    switch (level) {
        case Level::up: return up;
        case Level::zero: return zero;
        case Level::down: return down;
    }
    return 0.0;
}

void TelegraphRates::validate() const {
    for (double q : {up, zero, down})
        require(q >= 0.0 && q <= 1.0,
                "telegraph redraw probabilities must lie in [0, 1]");
}

std::array<std::array<double, 3>, 3> TelegraphSpin::transition_matrix() const {
    std::array<std::array<double, 3>, 3> t{};
    const int levels = species.levels();
    for (int from = 0; from < levels; ++from) {
        const double q = rates.for_level(level_from_index(species, from));
        for (int to = 0; to < levels; ++to)
            t[from][to] = q / levels + (from == to ? 1.0 - q : 0.0);
    }
    return t;
}

std::uint64_t TelegraphSpin::evolve(std::uint64_t m, Engine& engine) {
    std::uint64_t up_reps = 0;
    std::uint64_t t = 0;
    while (t < m) {
        const double q = rates.for_level(level);
        std::uint64_t wait = kNever;  // repetitions until the next redraw
        if (q >= 1.0) {
            wait = 1;
        } else if (q > 0.0) {
            std::geometric_distribution<std::uint64_t> geo(q);
            wait = 1 + geo(engine);
        }
        const std::uint64_t stay = std::min(wait - 1, m - t);
        if (level == Level::up)
            up_reps += stay;
        t += stay;
        if (t >= m)
            break;
        level = draw_uniform_level(species, engine);
        ++t;
        if (level == Level::up)
            ++up_reps;
    }
    return up_reps;
}

void ApdModel::validate() const {
    switch (mode) {
        case ApdMode::linear:
            require(k == 1.0, "apd.k must be 1 in linear mode");
            break;
        case ApdMode::multiplicative_k:
            require(k > 0.0 && k <= 1.0, "apd.k must lie in (0, 1]");
            break;
        case ApdMode::dead_time:
            require(dead_time >= 0.0, "apd.dead_time must be >= 0");
            break;
    }
}

void Initialization::validate() const {
    require(fidelity >= 0.0 && fidelity <= 1.0,
            "init.fidelity must lie in [0, 1]");
    require(active_fraction >= 0.0 && active_fraction <= 1.0,
            "init.active_fraction must lie in [0, 1]");
    require(std::isfinite(rotation_angle), "init.rotation_angle must be finite");
}

TelegraphRates SimulationPlan::effective_rates() const {
    return rates ? *rates : TelegraphRates::symmetric(cfg.decay_repetitions());
}

void SimulationPlan::validate() const {
    cfg.validate();
    require(m >= 1, "plan.m must be >= 1");
    require(shots >= 1, "plan.shots must be >= 1");
    init.validate();
    effective_rates().validate();
    apd.validate();
    if (cfg.species.twice_spin() == 1)
        require(init.level != Level::zero, "I = 1/2 has no |0> level");
    // Window-a mean with every spin up; must stay positive.
    require(cfg.photons_per_unit * (1.0 - cfg.contrast) > 0.0,
            "photon mean must be > 0 (check contrast)");
}

std::vector<ReadoutRecord> simulate_experiment(const SimulationPlan& plan,
                                               Execution exec) {
    plan.validate();
    const TelegraphRates rates = plan.effective_rates();
    const auto shots = static_cast<long long>(plan.shots);
    std::vector<ReadoutRecord> records(plan.shots);

    if (exec == Execution::serial) {
        for (long long s = 0; s < shots; ++s)
            records[s] = run_shot(plan, rates, static_cast<std::uint64_t>(s));
    } else {
#pragma omp parallel for schedule(static)
        for (long long s = 0; s < shots; ++s)
            records[s] = run_shot(plan, rates, static_cast<std::uint64_t>(s));
    }
    if (plan.apd.mode != ApdMode::linear)
        records = apply_apd(std::move(records), plan.apd,
                            splitmix64(plan.seed) + plan.stream, exec);
    return records;
}

std::vector<SpinShot> simulate_spin_shots(const SimulationPlan& plan,
                                          Execution exec) {
    plan.validate();
    const TelegraphRates rates = plan.effective_rates();
    const auto shots = static_cast<long long>(plan.shots);
    const double n_nv = static_cast<double>(plan.cfg.n_nv);
    const double spin_reps = n_nv * static_cast<double>(plan.m);
    std::vector<SpinShot> out(plan.shots);

    auto one = [&](long long s) {
        Engine engine = make_engine(
            plan.seed, streams::telegraph + 16 * plan.stream,
            static_cast<std::uint64_t>(s));
        const ShotSpins spins = run_shot_spins(plan, rates, engine);
        out[s].mean_jz = static_cast<double>(spins.up_reps) / spin_reps - 0.5;
        out[s].final_jz = static_cast<double>(spins.final_up) / n_nv - 0.5;
    };
    if (exec == Execution::serial) {
        for (long long s = 0; s < shots; ++s)
            one(s);
    } else {
#pragma omp parallel for schedule(static)
        for (long long s = 0; s < shots; ++s)
            one(s);
    }
    return out;
}

std::uint64_t dead_time_accept(std::uint64_t raw, double exposure, double rho,
                               Engine& engine) {
    if (raw == 0 || rho <= 0.0)
        return raw;
    require(exposure > 0.0, "dead-time exposure must be > 0");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uint64_t remaining = raw;
    std::uint64_t accepted = 0;
    double pos = 0.0;
    // Remaining arrivals are always i.i.d. uniform on [pos, exposure].
    while (remaining > 0) {
        const double w = 1.0 - u(engine);  // (0, 1]
        const double next =
            pos + (exposure - pos) *
                      (1.0 - std::pow(w, 1.0 / static_cast<double>(remaining)));
        --remaining;
        ++accepted;
        const double dead_end = next + rho;
        if (dead_end >= exposure || remaining == 0)
            break;
        std::binomial_distribution<std::uint64_t> lost(
            remaining, rho / (exposure - next));
        remaining -= lost(engine);
        pos = dead_end;
    }
    return accepted;
}

std::vector<ReadoutRecord> apply_apd(std::vector<ReadoutRecord> records,
                                     const ApdModel& model, std::uint64_t seed,
                                     Execution exec) {
    model.validate();
    if (model.mode == ApdMode::linear || records.empty())
        return records;

    const double count = static_cast<double>(records.size());
    double mean_a = 0.0, mean_b = 0.0, mean_r1 = 0.0, mean_r2 = 0.0;
    for (const auto& r : records) {
        mean_a += r.a;
        mean_b += r.b;
        mean_r1 += r.r1;
        mean_r2 += r.r2;
    }
    mean_a /= count;
    mean_b /= count;
    mean_r1 /= count;
    mean_r2 /= count;

    if (model.mode == ApdMode::multiplicative_k) {
        for (auto& r : records) {
            r.a = mean_a + model.k * (r.a - mean_a);
            r.b = mean_b + model.k * (r.b - mean_b);
            r.r1 = mean_r1 + model.k * (r.r1 - mean_r1);
            r.r2 = mean_r2 + model.k * (r.r2 - mean_r2);
        }
        return records;
    }

    const double rho = model.dead_time;
    auto thin = [&](long long i) {
        Engine engine =
            make_engine(seed, streams::apd, static_cast<std::uint64_t>(i));
        auto& r = records[i];
        auto one = [&](double x, double exposure) {
            const auto raw = static_cast<std::uint64_t>(std::llround(x));
            return static_cast<double>(
                dead_time_accept(raw, exposure, rho, engine));
        };
        r.a = one(r.a, mean_a);
        r.b = one(r.b, mean_b);
        r.r1 = one(r.r1, mean_r1);
        r.r2 = one(r.r2, mean_r2);
    };
    const auto n = static_cast<long long>(records.size());
    if (exec == Execution::serial) {
        for (long long i = 0; i < n; ++i)
            thin(i);
    } else {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i)
            thin(i);
    }
    return records;
}

std::vector<RabiPoint> run_rabi_sequence(const SimulationPlan& plan,
                                         std::span<const double> angles,
                                         Execution exec) {
    require(!angles.empty(), "rabi angle grid must not be empty");
    std::vector<RabiPoint> out;
    out.reserve(angles.size());
    DecomposeOptions opts;
    if (plan.apd.mode == ApdMode::multiplicative_k)
        opts.k = plan.apd.k;

    for (std::size_t i = 0; i < angles.size(); ++i) {
        SimulationPlan p = plan;
        p.sequence = SequenceKind::rabi;
        p.init.rotation_angle = angles[i];
        p.stream = plan.stream + i;
        const auto records = simulate_experiment(p, exec);
        const NoiseDecomposition d = decompose(records, opts);

        std::vector<double> jz(records.size());
        for (std::size_t s = 0; s < records.size(); ++s)
            jz[s] = records[s].signal() / (2.0 * d.n * d.c);
        RabiPoint pt;
        pt.angle = angles[i];
        pt.mean_jz = d.mean_jz;
        pt.sigma_jz = d.sigma_proj;
        pt.sigma_jz_err = d.sigma_proj_err;
        pt.histogram = Histogram::from_samples(jz, -1.0, 1.0, 200);
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<PolarizationPoint> run_t1_sequence(
    const SimulationPlan& plan, Level level,
    std::span<const std::uint64_t> m_grid, Execution exec) {
    require(!m_grid.empty(), "t1 m grid must not be empty");
    require(std::is_sorted(m_grid.begin(), m_grid.end()),
            "t1 m grid must be ascending");
    std::vector<PolarizationPoint> out;
    out.reserve(m_grid.size());
    for (std::size_t i = 0; i < m_grid.size(); ++i) {
        SimulationPlan p = plan;
        p.sequence = SequenceKind::t1_decay;
        p.m = m_grid[i];
        p.stream = plan.stream + i;
        p.init.kind = Initialization::Kind::polarized;
        p.init.level = level;
        p.init.rotation_angle = 0.0;
        const auto records = simulate_experiment(p, exec);
        const double n = mean_baseline(records);
        const double c = estimate_contrast(records);
        std::vector<double> pol(records.size());
        for (std::size_t s = 0; s < records.size(); ++s)
            pol[s] = records[s].signal() / (n * c);
        PolarizationPoint pt;
        pt.m = static_cast<double>(m_grid[i]);
        pt.p_obs = sample_mean(pol);
        pt.err = pol.size() > 1
                     ? sample_std(pol) / std::sqrt(static_cast<double>(pol.size()))
                     : 0.0;
        out.push_back(pt);
    }
    return out;
}

std::string to_string(Level level) {
    switch (level) {
        case Level::up: return "up";
        case Level::zero: return "zero";
        case Level::down: return "down";
    }
    return "up";
}

Level level_from_string(const std::string& s) {
    if (s == "up")
        return Level::up;
    if (s == "zero")
        return Level::zero;
    if (s == "down")
        return Level::down;
    throw ConfigError("unknown level '" + s + "' (expected up|zero|down)");
}

std::string to_string(ApdMode mode) {
    switch (mode) {
        case ApdMode::linear: return "linear";
        case ApdMode::multiplicative_k: return "multiplicative_k";
        case ApdMode::dead_time: return "dead_time";
    }
    return "linear";
}

ApdMode apd_mode_from_string(const std::string& s) {
    if (s == "linear")
        return ApdMode::linear;
    if (s == "multiplicative_k")
        return ApdMode::multiplicative_k;
    if (s == "dead_time")
        return ApdMode::dead_time;
    throw ConfigError("unknown apd mode '" + s +
                      "' (expected linear|multiplicative_k|dead_time)");
}

std::string to_string(SequenceKind kind) {
    switch (kind) {
        case SequenceKind::crossover: return "crossover";
        case SequenceKind::rabi: return "rabi";
        case SequenceKind::t1_decay: return "t1_decay";
        case SequenceKind::custom: return "custom";
    }
    return "custom";
}

}  // namespace pnl
