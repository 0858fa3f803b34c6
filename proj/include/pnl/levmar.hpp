#pragma once

// Bounded Levenberg-Marquardt for small dense problems.
//
// The caller supplies whitened residuals r(x) (already divided by their
// standard errors); the solver minimizes 0.5 |r|^2 inside a box. Steps that
// would leave the box are projected back onto it. Only steps that lower the
// cost are accepted, so the accepted cost sequence is non-increasing.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pnl {

struct LmOptions {
    int max_iterations = 300;
    double cost_tolerance = 1e-12;   // relative
    double step_tolerance = 1e-10;   // relative to |x| + step_tolerance
    double gradient_tolerance = 1e-10;
    double initial_damping = 1e-3;
};

struct LmProblem {
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> residuals;
    // Central differences are used when absent.
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct LmResult {
    Eigen::VectorXd x;
    Eigen::MatrixXd jacobian;  // at x
    double cost = 0.0;         // 0.5 |r|^2
    int iterations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> cost_history;  // accepted steps only
    std::vector<bool> at_bound;
};

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, const Eigen::VectorXd& lower,
    const Eigen::VectorXd& upper);

LmResult levenberg_marquardt(const LmProblem& problem, Eigen::VectorXd x0,
                             const LmOptions& options = {});

// (J^T J)^-1 restricted to the free (not at bound) coordinates; rows and
// columns of pinned coordinates are filled with +inf on the diagonal and 0
// elsewhere. Returns nullopt when the free block is singular.
std::optional<Eigen::MatrixXd> covariance_from_jacobian(
    const Eigen::MatrixXd& jacobian, const std::vector<bool>& pinned);

}  // namespace pnl
