#include "pnl/levmar.hpp"

#include <cmath>
#include <limits>

#include "pnl/error.hpp"

namespace pnl {

namespace {

Eigen::VectorXd clamp_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                          const Eigen::VectorXd& hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

std::vector<bool> bound_flags(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi) {
    std::vector<bool> out(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double tol = 1e-9 * std::max(1.0, std::abs(x[i]));
        out[static_cast<std::size_t>(i)] =
            x[i] - lo[i] <= tol || hi[i] - x[i] <= tol;
    }
    return out;
}

}  // namespace

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
    const Eigen::VectorXd& upper) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Eigen::VectorXd xp = x, xm = x;
        xp[j] = std::min(x[j] + h, upper[j]);
        xm[j] = std::max(x[j] - h, lower[j]);
        const double span = xp[j] - xm[j];
        if (span <= 0.0) {
            jac.col(j).setZero();
            continue;
        }
        jac.col(j) = (f(xp) - f(xm)) / span;
    }
    return jac;
}

LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd x0,
                             const LmOptions& options) {
    const Eigen::Index dim = x0.size();
    require(dim > 0, "fit has no parameters");
    Eigen::VectorXd lo = problem.lower.size() == dim
                             ? problem.lower
                             : Eigen::VectorXd::Constant(
                                   dim, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = problem.upper.size() == dim
                             ? problem.upper
                             : Eigen::VectorXd::Constant(
                                   dim, std::numeric_limits<double>::infinity());
    auto jac_of = [&](const Eigen::VectorXd& x) {
        return problem.jacobian ? problem.jacobian(x)
                                : numeric_jacobian(problem.residuals, x, lo, hi);
    };

    LmResult res;
    res.x = clamp_box(x0, lo, hi);
    Eigen::VectorXd r = problem.residuals(res.x);
    if (!all_finite(r))
        throw NumericalError("fit residuals are not finite at the start point");
    require(r.size() >= dim, "fit has fewer residuals than parameters");
    res.cost = 0.5 * r.squaredNorm();
    res.cost_history.push_back(res.cost);

    double lambda = options.initial_damping;
    for (res.iterations = 0; res.iterations < options.max_iterations;
         ++res.iterations) {
        const Eigen::MatrixXd jac = jac_of(res.x);
        const Eigen::VectorXd grad = jac.transpose() * r;
        // Projected gradient: ignore components pushing into an active bound.
        Eigen::VectorXd pg = grad;
        for (Eigen::Index i = 0; i < dim; ++i) {
            if ((res.x[i] <= lo[i] && grad[i] > 0.0) ||
                (res.x[i] >= hi[i] && grad[i] < 0.0))
                pg[i] = 0.0;
        }
        if (pg.lpNorm<Eigen::Infinity>() <=
            options.gradient_tolerance * std::max(1.0, res.cost)) {
            res.converged = true;
            res.message = "gradient below tolerance";
            break;
        }

        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd diag =
            jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));
        bool accepted = false;
        double step_norm = 0.0;
        double prev_cost = res.cost;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::MatrixXd m = jtj;
            m.diagonal() += lambda * diag;
            const Eigen::VectorXd dx = m.ldlt().solve(-grad);
            const Eigen::VectorXd xn = clamp_box(res.x + dx, lo, hi);
            const Eigen::VectorXd rn = problem.residuals(xn);
            const double cn = all_finite(rn)
                                  ? 0.5 * rn.squaredNorm()
                                  : std::numeric_limits<double>::infinity();
            if (cn < res.cost) {
                step_norm = (xn - res.x).norm();
                res.x = xn;
                r = rn;
                res.cost = cn;
                res.cost_history.push_back(cn);
                lambda = std::max(lambda / 3.0, 1e-15);
                accepted = true;
                break;
            }
            lambda *= 4.0;
            if (lambda > 1e16)
                break;
        }
        if (!accepted) {
            // No descent direction left at machine precision: a minimum.
            res.converged = true;
            res.message = "no further decrease possible";
            break;
        }
        const double rel_cost = (prev_cost - res.cost) / std::max(prev_cost, 1e-300);
        if (rel_cost < options.cost_tolerance) {
            res.converged = true;
            res.message = "relative cost change below tolerance";
            break;
        }
        if (step_norm <= options.step_tolerance *
                             (res.x.norm() + options.step_tolerance)) {
            res.converged = true;
            res.message = "step below tolerance";
            break;
        }
    }
    if (!res.converged)
        res.message = "iteration limit reached";
    res.jacobian = jac_of(res.x);
    res.at_bound = bound_flags(res.x, lo, hi);
    return res;
}

std::optional<Eigen::MatrixXd> covariance_from_jacobian(
    const Eigen::MatrixXd& jacobian, const std::vector<bool>& pinned) {
    const Eigen::Index dim = jacobian.cols();
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (!pinned[static_cast<std::size_t>(i)])
            free.push_back(i);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        if (pinned[static_cast<std::size_t>(i)])
            cov(i, i) = std::numeric_limits<double>::infinity();
    if (free.empty())
        return cov;

    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd jf(jacobian.rows(), nf);
    for (Eigen::Index k = 0; k < nf; ++k)
        jf.col(k) = jacobian.col(free[static_cast<std::size_t>(k)]);
    const Eigen::MatrixXd info = jf.transpose() * jf;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    if (eig.info() != Eigen::Success)
        return std::nullopt;
    const double top = eig.eigenvalues().maxCoeff();
    if (!(top > 0.0) || eig.eigenvalues().minCoeff() <= 1e-14 * top)
        return std::nullopt;
    const Eigen::MatrixXd inv = eig.eigenvectors() *
                                eig.eigenvalues().cwiseInverse().asDiagonal() *
                                eig.eigenvectors().transpose();
    for (Eigen::Index a = 0; a < nf; ++a)
        for (Eigen::Index b = 0; b < nf; ++b)
            cov(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]) =
                inv(a, b);
    return cov;
}

}  // namespace pnl
