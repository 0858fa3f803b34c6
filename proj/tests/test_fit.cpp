#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pnl/error.hpp"
#include "pnl/fit.hpp"
#include "pnl/levmar.hpp"

using namespace pnl;

namespace {

CrossoverCurve model_curve(const CrossoverModel& model, double n_nv, double n_t1, double k,
                           double rel_err = 0.01) {
    CrossoverCurve curve;
    for (int i = 0; i < 12; ++i) {
        const double n = 300.0 * std::pow(2.0, i * 0.6);
        CrossoverPoint p;
        p.n = n;
        p.sigma_prime = model.sigma_prime(n, n_nv, n_t1, k);
        p.err = rel_err * p.sigma_prime;
        curve.points.push_back(p);
    }
    return curve;
}

}  // namespace

TEST_SUITE("fit") {

TEST_CASE("levenberg-marquardt solves an exponential model exactly") {
    std::vector<double> t, y;
    for (int i = 0; i < 20; ++i) {
        t.push_back(0.25 * i);
        y.push_back(3.0 * std::exp(-0.7 * t.back()) + 0.5);
    }
    LmProblem prob;
    prob.residuals = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(t.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            r[static_cast<Eigen::Index>(i)] = x[0] * std::exp(-x[1] * t[i]) + x[2] - y[i];
        return r;
    };
    prob.lower = Eigen::Vector3d(-10, 0, -10);
    prob.upper = Eigen::Vector3d(10, 10, 10);
    const auto res = levenberg_marquardt(prob, Eigen::Vector3d(1.0, 2.0, 0.0));
    CHECK(res.converged);
    CHECK(res.x[0] == doctest::Approx(3.0).epsilon(1e-7));
    CHECK(res.x[1] == doctest::Approx(0.7).epsilon(1e-7));
    CHECK(res.x[2] == doctest::Approx(0.5).epsilon(1e-7));
    for (std::size_t i = 1; i < res.cost_history.size(); ++i)
        CHECK(res.cost_history[i] <= res.cost_history[i - 1]);
}

TEST_CASE("bounded solutions are flagged and excluded from the covariance") {
    LmProblem prob;
    prob.residuals = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(3);
        r << x[0] - 5.0, x[1] - 1.0, 0.5 * (x[1] - 1.0);
        return r;
    };
    prob.lower = Eigen::Vector2d(-1.0, -1.0);
    prob.upper = Eigen::Vector2d(2.0, 4.0);
    const auto res = levenberg_marquardt(prob, Eigen::Vector2d(0.0, 0.0));
    CHECK(res.x[0] == doctest::Approx(2.0));
    CHECK(res.at_bound[0]);
    CHECK_FALSE(res.at_bound[1]);
    const auto cov = covariance_from_jacobian(res.jacobian, res.at_bound);
    REQUIRE(cov);
    CHECK(std::isinf((*cov)(0, 0)));
    CHECK((*cov)(1, 1) == doctest::Approx(1.0 / 1.25));
}

TEST_CASE("covariance of a straight-line fit equals (X^T X)^-1") {
    Eigen::MatrixXd x(4, 2);
    x << 1, 1, 2, 1, 4, 1, 7, 1;
    const auto cov = covariance_from_jacobian(x, {false, false});
    REQUIRE(cov);
    const Eigen::MatrixXd ref = (x.transpose() * x).inverse();
    CHECK((*cov - ref).norm() < 1e-12);
    Eigen::MatrixXd singular(3, 2);
    singular << 1, 2, 2, 4, 3, 6;
    CHECK_FALSE(covariance_from_jacobian(singular, {false, false}));
}

TEST_CASE("numeric jacobian agrees with the analytic derivative") {
    auto f = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(2);
        r << std::sin(x[0]) * x[1], x[0] * x[0];
        return r;
    };
    const Eigen::Vector2d x(0.3, 2.0);
    const auto j = numeric_jacobian(f, x, Eigen::Vector2d(-5, -5), Eigen::Vector2d(5, 5));
    CHECK(j(0, 0) == doctest::Approx(std::cos(0.3) * 2.0).epsilon(1e-7));
    CHECK(j(0, 1) == doctest::Approx(std::sin(0.3)).epsilon(1e-7));
    CHECK(j(1, 0) == doctest::Approx(0.6).epsilon(1e-7));
    CHECK(j(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("crossover fit recovers exact model parameters") {
    CrossoverModel model;
    const auto curve = model_curve(model, 31.0, 2e5, 0.99);
    const auto fit = fit_crossover(curve, model);
    CHECK(fit.converged);
    CHECK(fit.value("n_nv") == doctest::Approx(31.0).epsilon(1e-5));
    CHECK(fit.value("n_t1") == doctest::Approx(2e5).epsilon(1e-4));
    CHECK(fit.value("k") == doctest::Approx(0.99).epsilon(1e-6));
    CHECK(fit.chi2 < 1e-8);
    CHECK(fit.all_identifiable());
    // Covariance is symmetric positive semidefinite.
    CHECK((fit.covariance - fit.covariance.transpose()).norm() < 1e-12 * fit.covariance.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= 0.0);
}

TEST_CASE("crossover fit is invariant under reordering and error scaling") {
    CrossoverModel model;
    auto curve = model_curve(model, 40.0, 5e4, 0.95);
    Engine engine = make_engine(5, 0, 0);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& p : curve.points)
        p.sigma_prime += p.err * g(engine);
    const auto a = fit_crossover(curve, model);

    auto shuffled = curve;
    std::reverse(shuffled.points.begin(), shuffled.points.end());
    std::swap(shuffled.points[2], shuffled.points[7]);
    const auto b = fit_crossover(shuffled, model);
    for (const char* name : {"n_nv", "n_t1", "k"})
        CHECK(b.value(name) == doctest::Approx(a.value(name)).epsilon(1e-6));

    auto scaled = curve;
    for (auto& p : scaled.points)
        p.err *= 3.0;
    const auto c = fit_crossover(scaled, model);
    for (const char* name : {"n_nv", "n_t1", "k"}) {
        CHECK(c.value(name) == doctest::Approx(a.value(name)).epsilon(1e-6));
        CHECK(c.error(name) == doctest::Approx(3.0 * a.error(name)).epsilon(1e-4));
    }
}

TEST_CASE("shot-limited curve leaves the emitter count unidentifiable") {
    CrossoverModel model;
    auto curve = model_curve(model, 1e9, 1e6, 0.97);
    const auto fit = fit_crossover(curve, model);
    CHECK(fit.value("k") == doctest::Approx(0.97).epsilon(1e-3));
    const auto& n = fit.param("n_nv");
    CHECK_FALSE(n.identifiable);
    CHECK((n.at_bound || n.error > n.value));
}

TEST_CASE("crossover fit rejects short curves") {
    CrossoverModel model;
    auto curve = model_curve(model, 31.0, 2e5, 0.99);
    curve.points.resize(3);
    CHECK_THROWS_AS(fit_crossover(curve, model), ConfigError);
}

TEST_CASE("decay fit recovers exact parameters for both forms") {
    for (DecayForm form : {DecayForm::relaxation, DecayForm::literal}) {
        std::vector<DecayPoint> data;
        for (int i = 0; i < 12; ++i) {
            const double m = 200.0 * std::pow(1.6, i);
            data.push_back({m, polarization_under_readout(0.9, m, 19430.0, form), 0.005});
        }
        DecayFitOptions opts;
        opts.form = form;
        const auto fit = fit_polarization_decay(data, opts);
        CHECK(fit.converged);
        CHECK(fit.value("m_t1") == doctest::Approx(19430.0).epsilon(1e-5));
        CHECK(fit.value("p0") == doctest::Approx(0.9).epsilon(1e-6));
    }
}

TEST_CASE("decay fit on flat data pushes the lifetime to its bound") {
    std::vector<DecayPoint> data;
    for (int i = 0; i < 6; ++i)
        data.push_back({100.0 * (i + 1), 0.8, 0.01});
    const auto fit = fit_polarization_decay(data);
    CHECK_FALSE(fit.param("m_t1").identifiable);
    CHECK(fit.value("p0") == doctest::Approx(0.8).epsilon(1e-3));
}

TEST_CASE("emission fit against the normal equations") {
    const std::vector<EmissionPoint> pts{{170, 5700}, {31, 1100}, {14, 850}};
    const auto fit = fit_emission_linear(pts);
    // Normal equations solved by hand.
    Eigen::Matrix2d a;
    Eigen::Vector2d b;
    a << 170 * 170 + 31 * 31 + 14 * 14, 170 + 31 + 14, 170 + 31 + 14, 3;
    b << 170 * 5700.0 + 31 * 1100.0 + 14 * 850.0, 5700.0 + 1100.0 + 850.0;
    const Eigen::Vector2d sol = a.ldlt().solve(b);
    CHECK(fit.value("slope") == doctest::Approx(sol[0]).epsilon(1e-12));
    CHECK(fit.value("intercept") == doctest::Approx(sol[1]).epsilon(1e-12));
    CHECK(std::abs(fit.value("slope") - 32.0) < 2.0);
    CHECK(fit.dof == 1);

    const std::vector<EmissionPoint> two{{10, 500}, {20, 800}};
    const auto exact = fit_emission_linear(two);
    CHECK(exact.residual_norm == doctest::Approx(0.0));
    CHECK(std::isinf(exact.error("slope")));
    const std::vector<EmissionPoint> one{{10, 500}, {10, 800}};
    CHECK_THROWS_AS(fit_emission_linear(one), NumericalError);
}

TEST_CASE("emission slope on noisy synthetic lines covers the truth") {
    Engine engine = make_engine(6, 0, 0);
    std::normal_distribution<double> g(0.0, 50.0);
    int covered = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EmissionPoint> pts;
        for (double n : {5.0, 20.0, 40.0, 80.0, 120.0, 170.0})
            pts.push_back({n, 30.0 * n + 300.0 + g(engine)});
        const auto fit = fit_emission_linear(pts);
        covered += std::abs(fit.value("slope") - 30.0) <= 2.0 * fit.error("slope");
    }
    // t-distributed with 4 dof: about 88% of 2-sigma intervals cover.
    CHECK(covered >= 160);
}

TEST_CASE("geometric emitter estimate") {
    const auto g = geometric_nv_estimate(532.0, 1.35, 277.0, 11.0, 0.003);
    CHECK(g.spot_diameter_nm == doctest::Approx(532.0 / (0.84 * 1.35)));
    const double r_cm = g.spot_diameter_nm / (2.0 * std::sqrt(2.0)) * 1e-7;
    CHECK(g.n_nitrogen ==
          doctest::Approx(3.14159265358979 * r_cm * r_cm * 277e-7 * 1.76e23 * 11e-6).epsilon(1e-10));
    CHECK(g.n_nv == doctest::Approx(140.0).epsilon(0.05));
    CHECK(geometric_nv_estimate(532.0, 1.35, 277.0, 11.0, 0.0).n_nv == 0.0);
}

}
