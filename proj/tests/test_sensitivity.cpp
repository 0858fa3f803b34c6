#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "pnl/error.hpp"
#include "pnl/sensitivity.hpp"

using namespace pnl;

namespace {

std::uint64_t brute_force_optimum(const SensitivityParams& p, double tau,
                                  const std::optional<SqueezingSpec>& sq) {
    std::uint64_t best = 1;
    double best_eta = eta_repetitive(p, tau, 1.0, sq);
    for (std::uint64_t m = 2; m <= 60000; ++m) {
        const double eta = eta_repetitive(p, tau, static_cast<double>(m), sq);
        if (eta < best_eta) {
            best_eta = eta;
            best = m;
        }
    }
    return best;
}

}  // namespace

TEST_SUITE("sensitivity") {

TEST_CASE("conventional sensitivity golden value and scaling") {
    const SensitivityParams p;
    CHECK(eta_conventional(p, 1000.0) == doctest::Approx(6.3098153701e-10).epsilon(1e-9));
    // Photon shot noise over signal slope: sqrt(n1)/(2 pi gamma c n1 sqrt(t)).
    const double n1 = 3.6;
    const double expect = std::sqrt(1001.0 / 1000.0) * std::sqrt(n1) /
                          (2.0 * std::numbers::pi * 28.04e9 * 0.15 * n1 * std::sqrt(1e-3));
    CHECK(eta_conventional(p, 1000.0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("optimized repetition count matches a brute-force scan") {
    const SensitivityParams p;
    for (double tau : {1.0, 100.0, 1e5}) {
        const auto opt = optimize_repetitions(p, tau);
        CHECK(opt.m == brute_force_optimum(p, tau, std::nullopt));
    }
    CHECK(optimize_repetitions(p, 1.0).m == 968);
    CHECK(optimize_repetitions(p, 1e5).m == 4114);
}

TEST_CASE("breakeven and long-time advantage") {
    const SensitivityParams p;
    const double tb = breakeven_sensing_time(p);
    CHECK(tb == doctest::Approx(11.2108).epsilon(1e-4));
    const double ratio = eta_conventional(p, 1e5) / optimize_repetitions(p, 1e5).eta;
    CHECK(ratio == doctest::Approx(36.914).epsilon(1e-4));

    SensitivityParams lit = p;
    lit.decay = ContrastDecay::literal;
    const double tl = breakeven_sensing_time(lit);
    CHECK(tl == doctest::Approx(138.6).epsilon(1e-3));
}

TEST_CASE("repetitive sensitivity is unimodal in m") {
    const SensitivityParams p;
    for (double tau : {1.0, 1e3, 1e5}) {
        int sign_changes = 0;
        double prev = eta_repetitive(p, tau, 1.0);
        int prev_sign = 0;
        for (int i = 1; i <= 200; ++i) {
            const double m = std::pow(10.0, 5.0 * i / 200.0);
            const double eta = eta_repetitive(p, tau, m);
            const int sign = eta > prev ? 1 : -1;
            if (prev_sign != 0 && sign != prev_sign)
                ++sign_changes;
            prev_sign = sign;
            prev = eta;
        }
        CHECK(sign_changes == 1);
    }
}

TEST_CASE("long sensing times scale as one over root tau") {
    const SensitivityParams p;
    const double m = 4000.0;
    const double overhead = p.tau_init + p.tau_rf + m * p.tau_r_rep;
    const double t1 = 1e4 * overhead, t2 = 4e4 * overhead;
    CHECK(eta_repetitive(p, t1, m) / eta_repetitive(p, t2, m) ==
          doctest::Approx(2.0).epsilon(0.01));
    CHECK(eta_conventional(p, 1e6) / eta_conventional(p, 4e6) ==
          doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("squeezing lowers the optimized sensitivity") {
    const SensitivityParams p;
    double prev = optimize_repetitions(p, 1e4, SqueezingSpec{0.0}).eta;
    for (double db : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double eta = optimize_repetitions(p, 1e4, SqueezingSpec{db}).eta;
        CHECK(eta < prev);
        prev = eta;
    }
    const double base = optimize_repetitions(p, 1e5, SqueezingSpec{0.0}).eta;
    const double half = optimize_repetitions(p, 1e5, SqueezingSpec{0.5}).eta;
    const double gain = 1.0 - half / base;
    CHECK(gain > 0.0);
    CHECK(gain < 0.10);
    CHECK(SqueezingSpec{6.0, SqueezingConvention::literal}.amplitude_factor() ==
          doctest::Approx(std::pow(10.0, -0.6)));
    CHECK(SqueezingSpec{6.0}.amplitude_factor() == doctest::Approx(std::pow(10.0, -0.3)));
}

TEST_CASE("squeezing moves the optimum to more repetitions") {
    const SensitivityParams p;
    for (double tau : {1.0, 1e3, 1e5}) {
        const auto plain = brute_force_optimum(p, tau, std::nullopt);
        const auto squeezed = brute_force_optimum(p, tau, SqueezingSpec{4.0});
        CHECK(optimize_repetitions(p, tau, SqueezingSpec{4.0}).m == squeezed);
        CHECK(squeezed > plain);
    }
}

TEST_CASE("map layout and parallel determinism") {
    const SensitivityParams p;
    const std::vector<double> taus{1.0, 10.0, 100.0};
    const std::vector<double> ms{1.0, 50.0, 500.0, 5000.0};
    const auto serial = sensitivity_map(p, taus, ms, std::nullopt, Execution::serial);
    const auto par = sensitivity_map(p, taus, ms, std::nullopt, Execution::parallel);
    REQUIRE(serial.size() == 12);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].tau_sens == taus[i / 4]);
        CHECK(serial[i].m == ms[i % 4]);
        CHECK(serial[i].eta_rep == par[i].eta_rep);
        CHECK(serial[i].ratio == doctest::Approx(serial[i].eta_conv / serial[i].eta_rep));
    }
}

TEST_CASE("parameter validation") {
    SensitivityParams p;
    p.c = 1.2;
    CHECK_THROWS_AS(eta_conventional(p, 1.0), ConfigError);
    CHECK_THROWS_AS(eta_repetitive(SensitivityParams{}, 1.0, 0.5), ConfigError);
    CHECK_THROWS_AS(eta_repetitive(SensitivityParams{}, 1.0, 10.0, SqueezingSpec{-1.0}),
                    ConfigError);
    CHECK_THROWS_AS(contrast_decay_from_string("linear"), ConfigError);
    CHECK(p.contrast_decay(0.0) == 1.0);
}

}
