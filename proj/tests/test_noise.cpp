#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pnl/error.hpp"
#include "pnl/noise.hpp"

using namespace pnl;

TEST_SUITE("noise") {

TEST_CASE("sample statistics on hand-computed data") {
    const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    CHECK(sample_mean(v) == 5.0);
    CHECK(sample_std(v) == doctest::Approx(std::sqrt(32.0 / 7.0)).epsilon(1e-14));
}

TEST_CASE("standard error of a standard deviation matches its sampling spread") {
    Engine engine = make_engine(21, 0, 0);
    std::normal_distribution<double> g(0.0, 2.0);
    const std::size_t n = 60;
    std::vector<double> stds(20000);
    for (auto& s : stds) {
        std::vector<double> x(n);
        for (auto& v : x)
            v = g(engine);
        s = sample_std(x);
    }
    const auto m = oracle::moments(stds);
    CHECK(std_error_of_std(2.0, n) == doctest::Approx(m.sigma).epsilon(0.04));
}

TEST_CASE("contrast and baseline estimates on constructed records") {
    std::vector<ReadoutRecord> recs{{85.0, 100.0, 100.0, 100.0, 1},
                                    {95.0, 90.0, 110.0, 90.0, 1}};
    CHECK(mean_baseline(recs) == 100.0);
    CHECK(estimate_contrast(recs) == doctest::Approx(2.0 - 185.0 / 100.0));
    CHECK(shot_noise_prime(1000.0, 0.15) ==
          doctest::Approx(std::sqrt(1000.0 * 1.85) / (2000.0 * 0.15)).epsilon(1e-14));
}

TEST_CASE("frozen spins leave only photon shot noise") {
    SimulationPlan plan;
    plan.shots = 4000;
    plan.m = 5000;
    plan.rates = TelegraphRates::pinned();
    plan.init.kind = Initialization::Kind::polarized;
    const auto recs = simulate_experiment(plan);
    const auto d = decompose(recs);
    CHECK(std::abs(d.sigma_prime - d.sigma_shot_prime) < 4.0 * d.sigma_prime_err);
    CHECK(d.mean_jz == doctest::Approx(0.5).epsilon(0.02));
    CHECK(d.sigma_proj < 3.0 * d.sigma_proj_err + 1e-12);
}

TEST_CASE("thermal ensemble excess matches binned projection noise at short readout") {
    SimulationPlan plan;
    plan.shots = 6000;
    plan.m = 25000;
    plan.rates = TelegraphRates::pinned();
    const auto d = decompose(simulate_experiment(plan));
    const double expect = std::sqrt(2.0 / 9.0 / 31.0);
    CHECK(std::abs(d.sigma_proj - expect) < 4.0 * d.sigma_proj_err);
    CHECK_FALSE(d.clipped);
    CHECK(d.db_gap() == doctest::Approx(20.0 * std::log10(d.sigma_proj / d.sigma_shot_prime)));
}

TEST_CASE("negative excess is clipped with a flag") {
    std::vector<ReadoutRecord> recs;
    for (int i = 0; i < 100; ++i)
        recs.push_back({1000.0 - 150.0 * 0.5 + (i % 2), 1000.0 - 150.0 * 0.5, 1000.0, 1000.0, 1});
    const auto d = decompose(recs);
    CHECK(d.clipped);
    CHECK(d.sigma_proj == 0.0);
    CHECK(std::isinf(d.db_gap()));
    std::vector<ReadoutRecord> flat(10, ReadoutRecord{900.0, 950.0, 1000.0, 1000.0, 1});
    CHECK(decompose(flat).degenerate);
    CHECK_THROWS_AS(decompose(std::span<const ReadoutRecord>(flat.data(), 1)), ConfigError);
}

TEST_CASE("k scales the projection estimate") {
    SimulationPlan plan;
    plan.shots = 2000;
    plan.m = 20000;
    const auto recs = simulate_experiment(plan);
    DecomposeOptions opts;
    opts.k = 0.95;
    const auto a = decompose(recs);
    const auto b = decompose(recs, opts);
    CHECK(b.sigma_prime == a.sigma_prime);
    CHECK(b.sigma_proj > a.sigma_proj);
    CHECK(b.k * b.k * (b.sigma_proj * b.sigma_proj + b.sigma_shot_prime * b.sigma_shot_prime) ==
          doctest::Approx(b.sigma_prime * b.sigma_prime).epsilon(1e-12));
}

TEST_CASE("detector width calibration") {
    auto batches = [](const ApdModel& apd, std::vector<std::uint64_t> ms) {
        std::vector<std::vector<ReadoutRecord>> out;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            SimulationPlan p;
            p.shots = 3000;
            p.m = ms[i];
            p.apd = apd;
            p.stream = i;
            out.push_back(simulate_experiment(p));
        }
        return out;
    };
    const auto lin = calibrate_k(batches(ApdModel::linear(), {1250, 5000, 20000}));
    CHECK(std::abs(lin.k - 1.0) < 0.02);
    CHECK(std::abs(lin.k - 1.0) < 4.0 * lin.err);
    CHECK(lin.points.size() == 3);

    const auto mul = calibrate_k(batches(ApdModel::multiplicative(0.9), {1250, 5000, 20000}));
    CHECK(std::abs(mul.k - 0.9) < 4.0 * mul.err);

    const auto one = calibrate_k(batches(ApdModel::linear(), {5000}));
    CHECK(one.single_point);
    CHECK(one.err == doctest::Approx(2.0 * one.points[0].err / one.points[0].x));

    const auto dead = calibrate_k(batches(ApdModel::with_dead_time(0.05), {5000, 20000}));
    CHECK(dead.k < 1.0);
}

TEST_CASE("crossover sweep pools one contrast across the curve") {
    SimulationPlan plan;
    plan.shots = 500;
    const std::vector<std::uint64_t> ms{1250, 5000, 25000};
    const auto curve = sweep_crossover(plan, ms);
    REQUIRE(curve.points.size() == 3);
    for (const auto& p : curve.points) {
        CHECK(p.detail.c == curve.points[0].detail.c);
        CHECK(p.err > 0.0);
    }
    CHECK(curve.points[0].n < curve.points[2].n);
    CHECK(curve.contrast() == doctest::Approx(plan.cfg.contrast).epsilon(0.05));
    CHECK_NOTHROW(curve.validate());
}

}
