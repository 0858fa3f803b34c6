#pragma once

// Collective spin algebra in the Dicke basis |J, m>, m = -J..J. Vectors and
// matrices are indexed by m + J.

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace pnl {

struct DickeBasis {
    double j = 0.5;

    // J = n/2 for n pseudo-spin-1/2 particles.
    static DickeBasis for_particles(std::size_t n);
    std::size_t dimension() const { return static_cast<std::size_t>(2.0 * j + 0.5) + 1; }
    double m(std::size_t index) const { return static_cast<double>(index) - j; }
    std::size_t particles() const { return dimension() - 1; }
};

// J_y in the Dicke basis (Hermitian, purely imaginary).
Eigen::MatrixXcd spin_jy(double j);

// d^j_{m' m}(beta) = <j m'| exp(-i beta J_y) |j m>, via the eigenbasis of J_y.
Eigen::MatrixXd wigner_small_d(double j, double beta);

struct SpinCoherentState {
    double j = 0.5;
    double theta = 0.0;
    double phi = 0.0;
    Eigen::VectorXcd amplitudes;

    static SpinCoherentState make(const DickeBasis& basis, double theta, double phi);
    double norm() const { return amplitudes.norm(); }
};

// <theta1 phi1 | theta2 phi2> in closed form.
std::complex<double> coherent_overlap(const SpinCoherentState& a,
                                      const SpinCoherentState& b);

// Population of |J, m> along the axis (polar, azimuth) for `amplitudes`,
// computed by rotating into the axis frame.
Eigen::VectorXd rotated_populations(double j, const Eigen::VectorXcd& amplitudes,
                                    double polar, double azimuth);

}  // namespace pnl
