#pragma once

// Parameter estimation for the readout models: crossover curve, polarization
// decay under readout, emission rate vs emitter count, and the geometric
// emitter-count estimate.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pnl/ensemble.hpp"
#include "pnl/levmar.hpp"
#include "pnl/noise.hpp"
#include "pnl/readout_sim.hpp"

namespace pnl {

struct FitParameter {
    std::string name;
    double value = 0.0;
    double error = 0.0;
    bool at_bound = false;
    bool identifiable = true;
};

struct FitResult {
    std::vector<FitParameter> params;
    Eigen::MatrixXd covariance;  // natural (not internal) parameters
    double residual_norm = 0.0;  // |whitened residuals|
    double chi2 = 0.0;
    std::size_t dof = 0;
    bool converged = false;
    int iterations = 0;
    std::string message;
    std::vector<double> cost_history;

    const FitParameter& param(const std::string& name) const;
    double value(const std::string& name) const { return param(name).value; }
    double error(const std::string& name) const { return param(name).error; }
    bool all_identifiable() const;
};

// sigma'(n) = k sqrt(sigma'_shot(n)^2 + sigma_proj(n)^2) with
// sigma_proj(n) = binning * sigma0(N) * decay_factor(n, n_T1).
struct CrossoverModel {
    SpinSpecies species = SpinSpecies::one();
    double contrast = 0.15;
    DecayBracket bracket = DecayBracket::derived;

    double sigma_prime(double n, double n_nv, double n_t1, double k) const;
    double sigma_proj(double n, double n_nv, double n_t1) const;
};

struct CrossoverFitOptions {
    double n_nv_min = 0.1;
    double n_nv_max = 1e7;
    double n_t1_min = 1.0;
    double n_t1_max = 1e12;
    LmOptions lm;
};

// Free parameters: n_nv, n_t1, k (0 < k < 1.1).
FitResult fit_crossover(const CrossoverCurve& curve, const CrossoverModel& model,
                        const CrossoverFitOptions& options = {});

struct DecayPoint {
    double m = 0.0;
    double p_obs = 0.0;
    double err = 0.0;
};

struct DecayFitOptions {
    DecayForm form = DecayForm::relaxation;
    // Upper bound on m_T1 as a multiple of the largest m in the data.
    double m_t1_max_factor = 1e4;
    LmOptions lm;
};

// Free parameters: p0, m_t1; steady state fixed at -1/3.
FitResult fit_polarization_decay(std::span<const DecayPoint> data,
                                 const DecayFitOptions& options = {});
std::vector<DecayPoint> to_decay_points(std::span<const PolarizationPoint> points);

struct EmissionPoint {
    double n_nv = 0.0;
    double rate = 0.0;  // kcps
};

// Ordinary least squares rate = slope * n_nv + intercept.
FitResult fit_emission_linear(std::span<const EmissionPoint> points);

struct GeometricEstimate {
    double spot_diameter_nm = 0.0;
    double volume_cm3 = 0.0;
    double n_nitrogen = 0.0;
    double n_nv = 0.0;
};

inline constexpr double kDiamondCarbonDensity = 1.76e23;  // atoms / cm^3

// Cylinder of the confocal spot (diameter lambda / (0.84 NA), 1-sigma radius
// d / (2 sqrt 2)) through the doped layer.
GeometricEstimate geometric_nv_estimate(double wavelength_nm,
                                        double numerical_aperture,
                                        double layer_thickness_nm,
                                        double nitrogen_ppm,
                                        double conversion_rate);

}  // namespace pnl
