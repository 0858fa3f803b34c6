#include "pnl/wigner.hpp"

#include <cmath>

#include "pnl/error.hpp"

namespace pnl {

namespace {

void check_j(double j) {
    require(j >= 0.0 && std::abs(2.0 * j - std::round(2.0 * j)) < 1e-12,
            "J must be a non-negative multiple of 1/2");
}

}  // namespace

DickeBasis DickeBasis::for_particles(std::size_t n) {
    require(n >= 1, "Dicke basis needs at least one particle");
    return {0.5 * static_cast<double>(n)};
}

Eigen::MatrixXcd spin_jy(double j) {
    check_j(j);
    const DickeBasis basis{j};
    const auto dim = static_cast<Eigen::Index>(basis.dimension());
    Eigen::MatrixXcd jy = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i = 0; i + 1 < dim; ++i) {
        const double m = basis.m(static_cast<std::size_t>(i));
        const double raise = 0.5 * std::sqrt(j * (j + 1.0) - m * (m + 1.0));
        jy(i + 1, i) = std::complex<double>(0.0, -raise);
        jy(i, i + 1) = std::complex<double>(0.0, raise);
    }
    return jy;
}

Eigen::MatrixXd wigner_small_d(double j, double beta) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(spin_jy(j));
    if (eig.info() != Eigen::Success)
        throw NumericalError("J_y eigendecomposition failed");
    const Eigen::Index dim = eig.eigenvalues().size();
    Eigen::VectorXcd phases(dim);
    for (Eigen::Index k = 0; k < dim; ++k) {
        // Eigenvalues are exactly -j..j; use the exact values.
        const double lambda = -j + static_cast<double>(k);
        phases[k] = std::polar(1.0, -beta * lambda);
    }
    const Eigen::MatrixXcd& v = eig.eigenvectors();
    return (v * phases.asDiagonal() * v.adjoint()).real();
}

SpinCoherentState SpinCoherentState::make(const DickeBasis& basis, double theta,
                                          double phi) {
    check_j(basis.j);
    SpinCoherentState s;
    s.j = basis.j;
    s.theta = theta;
    s.phi = phi;
    const auto dim = basis.dimension();
    const double two_j = 2.0 * basis.j;
    const double ch = std::cos(0.5 * theta);
    const double sh = std::sin(0.5 * theta);
    s.amplitudes.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < dim; ++i) {
        const double up = static_cast<double>(i);  // j + m
        const double down = two_j - up;            // j - m
        const double log_binom =
            std::lgamma(two_j + 1.0) - std::lgamma(up + 1.0) - std::lgamma(down + 1.0);
        const double mag = std::exp(0.5 * log_binom) * std::pow(std::abs(ch), up) *
                           std::pow(std::abs(sh), down);
        const double sign = ((ch < 0.0 && static_cast<long>(up) % 2) ? -1.0 : 1.0) *
                            ((sh < 0.0 && static_cast<long>(down) % 2) ? -1.0 : 1.0);
        s.amplitudes[static_cast<Eigen::Index>(i)] = std::polar(sign * mag, down * phi);
    }
    return s;
}

std::complex<double> coherent_overlap(const SpinCoherentState& a,
                                      const SpinCoherentState& b) {
    require(std::abs(a.j - b.j) < 1e-12, "coherent overlap needs equal J");
    const std::complex<double> base =
        std::cos(0.5 * a.theta) * std::cos(0.5 * b.theta) +
        std::polar(1.0, b.phi - a.phi) * std::sin(0.5 * a.theta) *
            std::sin(0.5 * b.theta);
    return std::pow(base, 2.0 * a.j);
}

Eigen::VectorXd rotated_populations(double j, const Eigen::VectorXcd& amplitudes,
                                    double polar, double azimuth) {
    const DickeBasis basis{j};
    require(static_cast<std::size_t>(amplitudes.size()) == basis.dimension(),
            "amplitude vector does not match J");
    Eigen::VectorXcd phased = amplitudes;
    for (Eigen::Index i = 0; i < phased.size(); ++i)
        phased[i] *= std::polar(1.0, basis.m(static_cast<std::size_t>(i)) * azimuth);
    const Eigen::VectorXcd rotated =
        wigner_small_d(j, polar).transpose().cast<std::complex<double>>() * phased;
    return rotated.cwiseAbs2();
}

}  // namespace pnl
