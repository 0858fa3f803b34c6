#pragma once

// Collective-state reconstruction from per-axis readout histograms:
// photon-noise deconvolution, a low-dimensional coherent-state-mixture
// likelihood fit, and the Husimi Q function of the result.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pnl/histogram.hpp"
#include "pnl/wigner.hpp"

namespace pnl {

// Distribution over m = -J..J along (polar, azimuth), radians.
struct MarginalDistribution {
    double j = 0.5;
    double polar = 0.0;
    double azimuth = 0.0;
    std::vector<double> probabilities;
    // Effective sample count used to weight this axis in likelihood fits.
    double samples = 1.0;

    void validate() const;
};

struct MixtureComponent {
    double weight = 0.0;
    double theta = 0.0;
    double phi = 0.0;
};

// Equal-weight coherent states spread uniformly over
// [pi/2 - delta_phi, pi/2 + delta_phi] at polar angle `theta`, plus a
// fully mixed part over all 2^(2J) pseudo-spin configurations.
struct CoherentStateMixture {
    double j = 0.5;
    double delta_phi = 0.0;
    double theta = 1.5707963267948966;
    double thermal_weight = 0.0;
    std::vector<MixtureComponent> components;

    static CoherentStateMixture ansatz(double j, double delta_phi, double theta,
                                       double thermal_weight,
                                       std::size_t count = 51);
    double coherent_weight() const;
    void validate() const;
};

enum class MarginalMethod { binomial, wigner };

MarginalDistribution marginal_of_mixture(const CoherentStateMixture& mixture,
                                         double polar, double azimuth,
                                         MarginalMethod method = MarginalMethod::binomial);

// Marginal of the fully mixed state: Binomial(2J, 1/2) over m + J.
std::vector<double> thermal_marginal(double j);

enum class KernelKind { automatic, gaussian, skellam };

struct DeconvolutionOptions {
    int max_iterations = 20000;
    double tolerance = 1e-8;  // relative log-likelihood change
    KernelKind kernel = KernelKind::automatic;
};

struct Deconvolution {
    MarginalDistribution marginal;
    int iterations = 0;
    bool converged = false;
    bool low_confidence = false;
    double log_likelihood = 0.0;
    std::vector<double> mass_history;  // total probability per iteration
};

// Expectation-maximization deconvolution of a histogram of (b - a)/(2 n c)
// (per-spin scale) into a distribution over the spin count. `k` is the
// detector width compression about the histogram mean.
Deconvolution deconvolve_skellam(const Histogram& histogram, std::size_t n_spins,
                                 double n, double c, double k = 1.0,
                                 const DeconvolutionOptions& options = {});

// Affine map of the signal axis that sends [lower, upper] onto [-1/2, 1/2].
Histogram rescale_axis(const Histogram& histogram, double lower, double upper);

struct MixtureFitOptions {
    std::size_t components = 51;
    double delta_phi_step_deg = 1.0;
    double theta_min_deg = 45.0;
    double theta_max_deg = 135.0;
    double theta_step_deg = 1.0;
    double thermal_step = 0.01;
    bool refine = true;
};

struct MixtureFit {
    CoherentStateMixture mixture;
    double log_likelihood = 0.0;
    bool identifiable = true;
    std::string message;
};

// Grid search over (delta_phi, theta, thermal weight) maximizing the
// multinomial log-likelihood, then local refinement. Ties resolve to the
// smallest delta_phi, then the smallest |theta - 90 deg|.
MixtureFit fit_mixture(std::span<const MarginalDistribution> marginals,
                       const MixtureFitOptions& options = {});

double mixture_log_likelihood(const CoherentStateMixture& mixture,
                              std::span<const MarginalDistribution> marginals);

// Q(theta, phi) = <theta phi| rho |theta phi> / pi.
double husimi_q(const CoherentStateMixture& mixture, double theta, double phi,
                bool include_thermal = false);

struct HusimiSample {
    double theta = 0.0;
    double phi = 0.0;
    double q = 0.0;
};

std::vector<HusimiSample> husimi_grid(const CoherentStateMixture& mixture,
                                      std::size_t n_theta, std::size_t n_phi,
                                      bool include_thermal = false);

// (2J + 1)/4 times the sphere integral of Q. This equals the coherent weight;
// an included thermal part adds thermal_weight * (2J + 1) / 2^(2J). Gauss-Legendre in
// cos(theta) and a uniform rule in phi.
double husimi_sphere_integral(const CoherentStateMixture& mixture,
                              std::size_t n_theta, std::size_t n_phi,
                              bool include_thermal = false);

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
QuadratureRule gauss_legendre(std::size_t order);

std::string to_string(MarginalMethod m);

}  // namespace pnl
