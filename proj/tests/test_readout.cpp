#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "oracles.hpp"
#include "pnl/error.hpp"
#include "pnl/readout_sim.hpp"

using namespace pnl;

namespace {

bool same_bits(const std::vector<ReadoutRecord>& x, const std::vector<ReadoutRecord>& y) {
    if (x.size() != y.size())
        return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u[] = {x[i].a, x[i].b, x[i].r1, x[i].r2};
        const double v[] = {y[i].a, y[i].b, y[i].r1, y[i].r2};
        if (std::memcmp(u, v, sizeof u) != 0 || x[i].m != y[i].m)
            return false;
    }
    return true;
}

SimulationPlan small_plan() {
    SimulationPlan plan;
    plan.shots = 400;
    plan.m = 3000;
    plan.seed = 99;
    return plan;
}

}  // namespace

TEST_SUITE("readout") {

TEST_CASE("serial and parallel paths are bit-identical for every thread count") {
    for (auto apd : {ApdModel::linear(), ApdModel::multiplicative(0.9),
                     ApdModel::with_dead_time(0.002)}) {
        SimulationPlan plan = small_plan();
        plan.apd = apd;
        plan.rates = TelegraphRates::symmetric(800.0);
        const auto ref = simulate_experiment(plan, Execution::serial);
        for (int threads : {1, 2, 3, 4}) {
            set_thread_count(threads);
            CHECK(same_bits(ref, simulate_experiment(plan, Execution::parallel)));
        }
    }
    SimulationPlan plan = small_plan();
    const auto a = simulate_spin_shots(plan, Execution::serial);
    set_thread_count(3);
    const auto b = simulate_spin_shots(plan, Execution::parallel);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].mean_jz == b[i].mean_jz);
        CHECK(a[i].final_jz == b[i].final_jz);
    }
    set_thread_count(1);
}

TEST_CASE("different seeds and streams give different records") {
    SimulationPlan plan = small_plan();
    const auto a = simulate_experiment(plan);
    plan.stream = 1;
    const auto b = simulate_experiment(plan);
    plan.stream = 0;
    plan.seed = 100;
    const auto c = simulate_experiment(plan);
    CHECK_FALSE(same_bits(a, b));
    CHECK_FALSE(same_bits(a, c));
}

TEST_CASE("one-step telegraph transitions follow the transition matrix") {
    TelegraphSpin proto;
    proto.species = SpinSpecies::one();
    proto.rates = TelegraphRates::from_lifetimes(3.0, 1.5, std::numeric_limits<double>::infinity());
    const auto matrix = proto.transition_matrix();
    const Level levels[] = {Level::up, Level::zero, Level::down};
    for (int from = 0; from < 3; ++from) {
        double row_sum = 0.0;
        for (double v : matrix[from])
            row_sum += v;
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-14));

        const int trials = 60000;
        int counts[3] = {0, 0, 0};
        Engine engine = make_engine(3, 0, static_cast<std::uint64_t>(from));
        for (int t = 0; t < trials; ++t) {
            TelegraphSpin s = proto;
            s.level = levels[from];
            s.evolve(1, engine);
            ++counts[static_cast<int>(s.level)];
        }
        double chi2 = 0.0;
        int dof = -1;
        for (int to = 0; to < 3; ++to) {
            const double expected = trials * matrix[from][to];
            if (expected == 0.0) {
                CHECK(counts[to] == 0);
                continue;
            }
            chi2 += (counts[to] - expected) * (counts[to] - expected) / expected;
            ++dof;
        }
        INFO("from level " << from << " chi2 " << chi2 << " dof " << dof);
        // 0.1% critical values for 1..2 degrees of freedom; a pinned level
        // has none and is covered by the zero-count checks.
        const double crit[] = {0.0, 10.83, 13.82};
        if (dof > 0)
            CHECK(chi2 < crit[dof]);
    }
}

TEST_CASE("symmetric telegraph autocorrelation decays as exp(-tau/m_t1)") {
    const double m_t1 = 50.0;
    TelegraphSpin proto;
    proto.species = SpinSpecies::half();
    proto.rates = TelegraphRates::symmetric(m_t1);
    for (std::uint64_t tau : {10u, 50u, 150u}) {
        const int trials = 40000;
        int up = 0;
        Engine engine = make_engine(4, 0, tau);
        for (int t = 0; t < trials; ++t) {
            TelegraphSpin s = proto;
            s.level = Level::up;
            s.evolve(tau, engine);
            up += s.level == Level::up;
        }
        const double p = 0.5 * (1.0 + std::exp(-static_cast<double>(tau) / m_t1));
        const double se = std::sqrt(p * (1.0 - p) / trials);
        CHECK(std::abs(up / double(trials) - p) < 4.0 * se);
    }
}

TEST_CASE("pinned spins never move and count every repetition") {
    TelegraphSpin s;
    s.rates = TelegraphRates::pinned();
    s.level = Level::up;
    Engine engine = make_engine(1, 0, 0);
    CHECK(s.evolve(12345, engine) == 12345);
    s.level = Level::zero;
    CHECK(s.evolve(100, engine) == 0);
    CHECK(s.level == Level::zero);
}

TEST_CASE("photon windows have the configured means") {
    SimulationPlan plan = small_plan();
    plan.shots = 3000;
    plan.rates = TelegraphRates::pinned();
    plan.init.kind = Initialization::Kind::polarized;
    plan.init.level = Level::up;
    const auto recs = simulate_experiment(plan);
    const double n = plan.cfg.photons_per_unit * static_cast<double>(plan.m);
    const double c = plan.cfg.contrast;
    std::vector<double> a, b, r1, diff;
    for (const auto& r : recs) {
        a.push_back(r.a);
        b.push_back(r.b);
        r1.push_back(r.r1);
        diff.push_back(r.r1 - r.r2);
    }
    const auto ma = oracle::moments(a), mb = oracle::moments(b), mr = oracle::moments(r1);
    CHECK(std::abs(ma.mean - n * (1.0 - c)) < 4.0 * ma.mean_se);
    CHECK(std::abs(mb.mean - n) < 4.0 * mb.mean_se);
    CHECK(std::abs(mr.mean - n) < 4.0 * mr.mean_se);
    // Skellam: Var(r1 - r2) = 2 n.
    const auto md = oracle::moments(diff);
    const double var_se = 2.0 * md.sigma * md.sigma_se;
    CHECK(std::abs(md.sigma * md.sigma - 2.0 * n) < 4.0 * var_se);
}

TEST_CASE("dead-time thinning matches brute-force sorted arrivals") {
    const double rho = 0.3;
    const std::uint64_t raw = 40;
    const double exposure = 40.0;
    const int trials = 20000;
    std::vector<double> fast(trials), slow(trials);
    Engine e1 = make_engine(8, 0, 0), e2 = make_engine(8, 0, 1);
    std::uniform_real_distribution<double> u(0.0, exposure);
    for (int t = 0; t < trials; ++t) {
        fast[t] = static_cast<double>(dead_time_accept(raw, exposure, rho, e1));
        std::vector<double> arrivals(raw);
        for (auto& x : arrivals)
            x = u(e2);
        std::sort(arrivals.begin(), arrivals.end());
        double free_at = -1.0;
        int kept = 0;
        for (double x : arrivals)
            if (x >= free_at) {
                ++kept;
                free_at = x + rho;
            }
        slow[t] = kept;
    }
    const auto mf = oracle::moments(fast), ms = oracle::moments(slow);
    CHECK(std::abs(mf.mean - ms.mean) < 4.0 * std::hypot(mf.mean_se, ms.mean_se));
    CHECK(std::abs(mf.sigma - ms.sigma) < 4.0 * std::hypot(mf.sigma_se, ms.sigma_se));
    CHECK(mf.mean < static_cast<double>(raw));
    Engine e3 = make_engine(8, 0, 2);
    CHECK(dead_time_accept(17, 5.0, 0.0, e3) == 17);
}

TEST_CASE("multiplicative detector model compresses columns about their mean") {
    SimulationPlan plan = small_plan();
    const auto raw = simulate_experiment(plan);
    const auto out = apply_apd(raw, ApdModel::multiplicative(0.8));
    std::vector<double> x, y;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        x.push_back(raw[i].r1);
        y.push_back(out[i].r1);
    }
    const auto mx = oracle::moments(x), my = oracle::moments(y);
    CHECK(my.mean == doctest::Approx(mx.mean).epsilon(1e-12));
    CHECK(my.sigma == doctest::Approx(0.8 * mx.sigma).epsilon(1e-12));
}

TEST_CASE("rabi rotation moves the pseudo-spin as cos(theta)/2") {
    SimulationPlan plan = small_plan();
    plan.shots = 1500;
    plan.rates = TelegraphRates::pinned();
    plan.init.kind = Initialization::Kind::polarized;
    const double pi = std::numbers::pi;
    const std::vector<double> angles{0.0, pi / 3.0, pi / 2.0, pi};
    const auto pts = run_rabi_sequence(plan, angles, Execution::parallel);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double expect = 0.5 * std::cos(angles[i]);
        // Per-shot spread: binomial spins plus photon noise.
        const double n = plan.cfg.photons_per_unit * static_cast<double>(plan.m);
        const double c = plan.cfg.contrast;
        const double shot = std::sqrt(2.0 * n) / (2.0 * n * c);
        const double se = std::hypot(shot, 0.5 / std::sqrt(31.0)) / std::sqrt(1500.0);
        INFO("angle " << angles[i]);
        CHECK(std::abs(pts[i].mean_jz - expect) < 5.0 * se + 0.02);
        CHECK(pts[i].histogram.total() == doctest::Approx(1500.0));
    }
}

TEST_CASE("t1 sequence with pinned spins keeps full polarization") {
    SimulationPlan plan = small_plan();
    plan.shots = 1000;
    plan.rates = TelegraphRates::pinned();
    const std::vector<std::uint64_t> ms{500, 2000};
    for (const auto& p : run_t1_sequence(plan, Level::up, ms))
        CHECK(std::abs(p.p_obs - 1.0) < 4.0 * p.err + 0.01);
    const std::vector<std::uint64_t> unsorted{2000, 500};
    CHECK_THROWS_AS(run_t1_sequence(plan, Level::up, unsorted), ConfigError);
}

TEST_CASE("plan validation") {
    SimulationPlan plan;
    plan.shots = 0;
    CHECK_THROWS_AS(plan.validate(), ConfigError);
    plan = {};
    plan.cfg.species = SpinSpecies::half();
    plan.init.level = Level::zero;
    CHECK_THROWS_AS(plan.validate(), ConfigError);
    plan = {};
    plan.apd = ApdModel::multiplicative(1.3);
    CHECK_THROWS_AS(plan.validate(), ConfigError);
    CHECK(apd_mode_from_string(to_string(ApdMode::dead_time)) == ApdMode::dead_time);
    CHECK_THROWS_AS(level_from_string("sideways"), ConfigError);
}

}
