#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "oracles.hpp"
#include "pnl/dd.hpp"
#include "pnl/error.hpp"

using namespace pnl;

namespace {

constexpr double kPi = std::numbers::pi;

// Average of f(lambda) over a uniform phase by adaptive quadrature.
template <class F>
double phase_average(F f) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 61>::integrate(f, 0.0, 2.0 * kPi, 15, 1e-13) / (2.0 * kPi);
}

}  // namespace

TEST_SUITE("dd") {

TEST_CASE("marginal moments equal phase-averaged projections") {
    for (double a : {0.0, 0.3, 1.0, 2.4048, 3.3, 7.0}) {
        const auto mm = marginal_moments(a);
        const double ex = phase_average([a](double l) { return 0.5 * std::sin(a * std::sin(l)); });
        const double ey = phase_average([a](double l) { return 0.5 * std::cos(a * std::sin(l)); });
        const double ex2 = phase_average([a](double l) { return 0.25 * std::pow(std::sin(a * std::sin(l)), 2); });
        const double ey2 = phase_average([a](double l) { return 0.25 * std::pow(std::cos(a * std::sin(l)), 2); });
        CHECK(mm.mean_x == doctest::Approx(ex).epsilon(1e-10));
        CHECK(mm.mean_y == doctest::Approx(ey).scale(1.0).epsilon(1e-10));
        CHECK(mm.sigma_x == doctest::Approx(std::sqrt(ex2 - ex * ex)).scale(1.0).epsilon(1e-9));
        CHECK(mm.sigma_y == doctest::Approx(std::sqrt(std::max(0.0, ey2 - ey * ey))).scale(1.0).epsilon(1e-9));
    }
}

TEST_CASE("marginal moments agree with a phase Monte Carlo") {
    Engine engine = make_engine(31, 0, 0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    for (double a : {0.5, 2.0, 5.0}) {
        std::vector<double> x(200000), y(200000);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = a * std::sin(phase(engine));
            x[i] = 0.5 * std::sin(t);
            y[i] = 0.5 * std::cos(t);
        }
        const auto mx = oracle::moments(x), my = oracle::moments(y);
        const auto mm = marginal_moments(a);
        CHECK(std::abs(mx.mean - mm.mean_x) < 3.5 * mx.mean_se);
        CHECK(std::abs(my.mean - mm.mean_y) < 3.5 * my.mean_se);
        CHECK(std::abs(mx.sigma - mm.sigma_x) < 3.5 * mx.sigma_se);
        CHECK(std::abs(my.sigma - mm.sigma_y) < 3.5 * my.sigma_se);
    }
}

TEST_CASE("mean along Y first vanishes at the first Bessel zero") {
    double lo = 2.0, hi = 3.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (marginal_moments(mid).mean_y > 0.0 ? lo : hi) = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(2.404825557695773).epsilon(1e-12));
}

TEST_CASE("sinc and interaction strength") {
    CHECK(sinc(0.0) == 1.0);
    CHECK(sinc(kPi) == doctest::Approx(0.0).scale(1.0));
    CHECK(sinc(1e-5) == doctest::Approx(std::sin(1e-5) / 1e-5).epsilon(1e-15));
    CHECK(sinc(-0.7) == sinc(0.7));

    AcSignal sig;
    const auto on = DdSequence::resonant(sig);
    CHECK(on.tau == doctest::Approx(2.0));
    const auto s = interaction_strength(on, sig);
    CHECK(s.alpha_prime == s.alpha);
    CHECK(s.alpha == doctest::Approx(4.0 * 1.84e-6 * 28.04e9 * 16e-6).epsilon(1e-12));
    CHECK(s.alpha == doctest::Approx(3.302).epsilon(1e-3));

    // The detuning response of the resonant-spacing convention is even in
    // the detuning; alpha itself grows with the sequence length.
    auto response = [&](const DdSequence& seq, SincConvention conv) {
        const auto st = interaction_strength(seq, sig, conv);
        return st.alpha_prime / st.alpha;
    };
    for (double d : {0.05, 0.2, 0.4}) {
        DdSequence lo{8, 2.0 - d}, hi{8, 2.0 + d};
        CHECK(response(lo, SincConvention::resonant_spacing) ==
              doctest::Approx(response(hi, SincConvention::resonant_spacing)).epsilon(1e-12));
        CHECK(response(lo, SincConvention::literal) !=
              doctest::Approx(response(hi, SincConvention::literal)).epsilon(1e-6));
        CHECK(std::abs(interaction_strength(lo, sig).alpha_prime) <= s.alpha);
    }
    CHECK(accumulated_phase(on, sig, kPi / 2) == doctest::Approx(s.alpha_prime));
    CHECK_THROWS_AS(interaction_strength(DdSequence{6, 2.0}, sig), ConfigError);
}

TEST_CASE("tomography variance matches a generative Monte Carlo") {
    const std::size_t n = 26;
    Engine engine = make_engine(32, 0, 0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    const ReadoutAxis axes[] = {ReadoutAxis::x(), ReadoutAxis::y(), ReadoutAxis::z(),
                                {"D", kPi / 3.0, kPi / 5.0}};
    for (const auto& axis : axes) {
        for (double k1 : {1.0, 0.6}) {
            const double a = 2.1;
            const double dx = std::sin(axis.polar) * std::cos(axis.azimuth);
            const double dy = std::sin(axis.polar) * std::sin(axis.azimuth);
            std::vector<double> v(100000);
            for (auto& x : v) {
                const double t = a * std::sin(phase(engine));
                const double p = 0.5 + 0.5 * std::sqrt(k1) * (dx * std::sin(t) + dy * std::cos(t));
                std::binomial_distribution<int> b(static_cast<int>(n), p);
                x = b(engine) / double(n) - 0.5;
            }
            const auto m = oracle::moments(v);
            const double var_se = 2.0 * m.sigma * m.sigma_se;
            INFO(axis.label << " k1=" << k1);
            CHECK(std::abs(m.sigma * m.sigma - tomography_variance(axis, a, n, k1)) < 4.0 * var_se);
        }
    }
}

TEST_CASE("simulated tomography: Y destroyed on resonance, equator elevated, Z thermal") {
    TomographyPlan plan;
    plan.cfg.n_nv = 31;
    plan.seq = DdSequence::resonant(plan.signal);
    plan.shots = 3000;
    const auto res = simulate_tomography(plan);
    REQUIRE(res.size() == 3);
    const auto& x = res[0];
    const auto& y = res[1];
    const auto& z = res[2];
    const double thermal = std::sqrt(0.25 / 31.0);
    CHECK(std::abs(y.mean) < 0.2);
    CHECK(std::abs(z.mean) < 4.0 * z.sigma_prime / std::sqrt(3000.0));
    CHECK(std::abs(z.sigma_proj - thermal) < 4.0 * z.sigma_proj_err);
    CHECK(x.sigma_proj > thermal + 5.0 * x.sigma_proj_err);
    CHECK(y.sigma_proj > thermal + 5.0 * y.sigma_proj_err);
    CHECK(x.histogram.total() == doctest::Approx(3000.0));

    // Far off resonance the sensor stays polarized along Y.
    plan.seq.tau = 1.0;
    const auto off = simulate_tomography(plan);
    CHECK(off[1].mean > 0.4);
}

TEST_CASE("tomography is thread-count independent and k1 is recoverable") {
    TomographyPlan plan;
    plan.seq = DdSequence::resonant(plan.signal);
    plan.shots = 4000;
    plan.k1 = 0.7;
    plan.axes = {ReadoutAxis::x(), ReadoutAxis::y(), ReadoutAxis::z()};
    const auto serial = simulate_tomography(plan, Execution::serial);
    set_thread_count(4);
    const auto parallel = simulate_tomography(plan, Execution::parallel);
    set_thread_count(1);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].mean == parallel[i].mean);
        CHECK(serial[i].sigma_prime == parallel[i].sigma_prime);
        CHECK(serial[i].histogram.counts == parallel[i].histogram.counts);
    }
    std::vector<AxisResult> all = serial;
    for (double tau : {1.8, 2.2}) {
        plan.seq.tau = tau;
        for (const auto& r : simulate_tomography(plan))
            all.push_back(r);
    }
    const auto fit = fit_k1(all, plan.cfg.n_nv);
    CHECK(std::abs(fit.k1 - 0.7) < 4.0 * fit.err);
}

TEST_CASE("common drive matches the independent decay of the mean at one decay time") {
    const double v = common_drive_rate() / std::sqrt(5.0);
    CHECK(std::cyl_bessel_j(0.0, v) == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));
    CHECK(relaxation_mean(DriveNoise::common_drive, 1.0) ==
          doctest::Approx(relaxation_mean(DriveNoise::independent, 1.0)).epsilon(1e-12));
    CHECK(relaxation_mean(DriveNoise::independent, 0.0) == 0.5);

    const std::vector<double> times{0.0, 0.5, 1.0, 2.0};
    for (DriveNoise noise : {DriveNoise::common_drive, DriveNoise::independent}) {
        const auto pts = correlated_vs_uncorrelated_t1(31, noise, times, 4000, 9);
        for (const auto& p : pts) {
            INFO(to_string(noise) << " t=" << p.t);
            CHECK(std::abs(p.mean - relaxation_mean(noise, p.t)) < 4.0 * p.mean_err + 1e-12);
        }
    }
}

TEST_CASE("convention strings round-trip") {
    CHECK(sinc_convention_from_string(to_string(SincConvention::resonant_spacing)) ==
          SincConvention::resonant_spacing);
    CHECK_THROWS_AS(sinc_convention_from_string("other"), ConfigError);
    CHECK(ReadoutAxis::from_label("y").azimuth == doctest::Approx(kPi / 2));
    CHECK_THROWS_AS(ReadoutAxis::from_label("W"), ConfigError);
}

}
