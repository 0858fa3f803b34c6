#include "pnl/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnl/error.hpp"

namespace pnl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxK = 1.1;

double sigmoid(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double logit(double s) { return std::log(s / (1.0 - s)); }

// Fills values, errors and flags from an internal-space LM result.
// `to_natural` maps internal x to natural parameters and `dnat` gives the
// diagonal derivative d(natural)/d(internal).
FitResult assemble(const LmResult& lm, const std::vector<std::string>& names,
                   const Eigen::VectorXd& natural, const Eigen::VectorXd& dnat,
                   std::size_t n_residuals) {
    FitResult out;
    out.converged = lm.converged;
    out.iterations = lm.iterations;
    out.message = lm.message;
    out.cost_history = lm.cost_history;
    out.chi2 = 2.0 * lm.cost;
    out.residual_norm = std::sqrt(out.chi2);
    const auto dim = static_cast<std::size_t>(natural.size());
    out.dof = n_residuals > dim ? n_residuals - dim : 0;

    const auto cov_int = covariance_from_jacobian(lm.jacobian, lm.at_bound);
    out.covariance = Eigen::MatrixXd::Constant(natural.size(), natural.size(),
                                               std::numeric_limits<double>::quiet_NaN());
    if (cov_int) {
        out.covariance = dnat.asDiagonal() * (*cov_int) * dnat.asDiagonal();
        for (Eigen::Index i = 0; i < natural.size(); ++i)
            if (lm.at_bound[static_cast<std::size_t>(i)]) {
                out.covariance.row(i).setZero();
                out.covariance.col(i).setZero();
                out.covariance(i, i) = kInf;
            }
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        FitParameter p;
        p.name = names[i];
        p.value = natural[ii];
        p.at_bound = lm.at_bound[i];
        const double var = cov_int ? out.covariance(ii, ii) : kInf;
        p.error = std::isfinite(var) && var >= 0.0 ? std::sqrt(var) : kInf;
        p.identifiable = !p.at_bound && std::isfinite(p.error) &&
                         p.error < std::abs(p.value);
        out.params.push_back(p);
    }
    return out;
}

double weight_of(double err) { return err > 0.0 && std::isfinite(err) ? err : 1.0; }

}  // namespace

const FitParameter& FitResult::param(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name)
            return p;
    throw std::out_of_range("no fit parameter named '" + name + "'");
}

bool FitResult::all_identifiable() const {
    return std::all_of(params.begin(), params.end(),
                       [](const FitParameter& p) { return p.identifiable; });
}

double CrossoverModel::sigma_proj(double n, double n_nv, double n_t1) const {
    const double s0 = binning_factor(species) *
                      std::sqrt(species.value() * (species.value() + 1.0) /
                                (3.0 * n_nv));
    return s0 * decay_factor(n, n_t1, bracket);
}

double CrossoverModel::sigma_prime(double n, double n_nv, double n_t1,
                                   double k) const {
    const double shot = shot_noise_prime(n, contrast);
    const double proj = sigma_proj(n, n_nv, n_t1);
    return k * std::sqrt(shot * shot + proj * proj);
}

FitResult fit_crossover(const CrossoverCurve& curve, const CrossoverModel& model,
                        const CrossoverFitOptions& options) {
    curve.validate();
    require(curve.points.size() >= 4, "crossover fit needs >= 4 points");
    require(model.contrast > 0.0 && model.contrast < 1.0,
            "crossover fit contrast must lie in (0, 1)");
    const auto& pts = curve.points;
    const auto count = static_cast<Eigen::Index>(pts.size());

    auto natural = [](const Eigen::VectorXd& x) {
        Eigen::VectorXd v(3);
        v << std::exp(x[0]), std::exp(x[1]), kMaxK * sigmoid(x[2]);
        return v;
    };
    LmProblem problem;
    problem.residuals = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd v = natural(x);
        Eigen::VectorXd r(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            const auto& p = pts[static_cast<std::size_t>(i)];
            r[i] = (model.sigma_prime(p.n, v[0], v[1], v[2]) - p.sigma_prime) /
                   weight_of(p.err);
        }
        return r;
    };
    problem.lower = Eigen::Vector3d(std::log(options.n_nv_min),
                                    std::log(options.n_t1_min), -30.0);
    problem.upper = Eigen::Vector3d(std::log(options.n_nv_max),
                                    std::log(options.n_t1_max), 30.0);

    // Start values from the two ends of the curve.
    const auto lo_it = std::min_element(pts.begin(), pts.end(),
        [](const auto& a, const auto& b) { return a.n < b.n; });
    const auto hi_it = std::max_element(pts.begin(), pts.end(),
        [](const auto& a, const auto& b) { return a.n < b.n; });
    const double k0 = std::clamp(
        lo_it->sigma_prime / shot_noise_prime(lo_it->n, model.contrast), 0.3, 1.05);
    const double s0sq = std::pow(binning_factor(model.species), 2) *
                        model.species.value() * (model.species.value() + 1.0) / 3.0;
    const double excess = std::pow(hi_it->sigma_prime / k0, 2) -
                          std::pow(shot_noise_prime(hi_it->n, model.contrast), 2);
    const double n0 = std::clamp(excess > 0.0 ? s0sq / excess : 1e5,
                                 2.0 * options.n_nv_min, 0.5 * options.n_nv_max);

    LmResult best;
    bool have = false;
    for (double t1_scale : {1e4, 1e2, 1e1, 1.0}) {
        const double t10 = std::clamp(t1_scale * hi_it->n, 2.0 * options.n_t1_min,
                                      0.5 * options.n_t1_max);
        Eigen::Vector3d x0(std::log(n0), std::log(t10), logit(k0 / kMaxK));
        LmResult lm = levenberg_marquardt(problem, x0, options.lm);
        if (!have || lm.cost < best.cost) {
            best = std::move(lm);
            have = true;
        }
    }
    const Eigen::VectorXd v = natural(best.x);
    const double s = sigmoid(best.x[2]);
    Eigen::Vector3d dnat(v[0], v[1], kMaxK * s * (1.0 - s));
    return assemble(best, {"n_nv", "n_t1", "k"}, v, dnat, pts.size());
}

std::vector<DecayPoint> to_decay_points(std::span<const PolarizationPoint> points) {
    std::vector<DecayPoint> out;
    out.reserve(points.size());
    for (const auto& p : points)
        out.push_back({p.m, p.p_obs, p.err});
    return out;
}

FitResult fit_polarization_decay(std::span<const DecayPoint> data,
                                 const DecayFitOptions& options) {
    require(data.size() >= 3, "polarization decay fit needs >= 3 points");
    double m_max = 0.0;
    double m_min = kInf;
    for (const auto& d : data) {
        require(d.m >= 0.0 && std::isfinite(d.p_obs), "invalid decay point");
        m_max = std::max(m_max, d.m);
        if (d.m > 0.0)
            m_min = std::min(m_min, d.m);
    }
    require(m_max > 0.0, "decay fit needs some m > 0");
    const auto count = static_cast<Eigen::Index>(data.size());

    LmProblem problem;
    problem.residuals = [&](const Eigen::VectorXd& x) {
        const double m_t1 = std::exp(x[1]);
        Eigen::VectorXd r(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            const auto& d = data[static_cast<std::size_t>(i)];
            r[i] = (polarization_under_readout(x[0], d.m, m_t1, options.form) -
                    d.p_obs) /
                   weight_of(d.err);
        }
        return r;
    };
    problem.lower = Eigen::Vector2d(-1.5, std::log(1e-3 * m_min));
    problem.upper = Eigen::Vector2d(1.5, std::log(options.m_t1_max_factor * m_max));

    const auto first = std::min_element(data.begin(), data.end(),
        [](const auto& a, const auto& b) { return a.m < b.m; });
    LmResult best;
    bool have = false;
    for (double scale : {1.0, 0.1, 10.0, 100.0}) {
        Eigen::Vector2d x0(std::clamp(first->p_obs, -1.0, 1.0),
                           std::log(scale * m_max));
        LmResult lm = levenberg_marquardt(problem, x0, options.lm);
        if (!have || lm.cost < best.cost) {
            best = std::move(lm);
            have = true;
        }
    }
    Eigen::Vector2d v(best.x[0], std::exp(best.x[1]));
    Eigen::Vector2d dnat(1.0, v[1]);
    return assemble(best, {"p0", "m_t1"}, v, dnat, data.size());
}

FitResult fit_emission_linear(std::span<const EmissionPoint> points) {
    require(!points.empty(), "emission fit needs points");
    const double count = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& p : points) {
        mx += p.n_nv;
        my += p.rate;
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& p : points) {
        sxx += (p.n_nv - mx) * (p.n_nv - mx);
        sxy += (p.n_nv - mx) * (p.rate - my);
    }
    if (points.size() < 2 || !(sxx > 0.0))
        throw NumericalError("emission fit is underdetermined (need >= 2 distinct N)");
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double rss = 0.0;
    for (const auto& p : points) {
        const double r = p.rate - (slope * p.n_nv + intercept);
        rss += r * r;
    }

    FitResult out;
    out.converged = true;
    out.message = "closed form";
    out.dof = points.size() - 2;
    out.chi2 = rss;
    out.residual_norm = std::sqrt(rss);
    out.covariance = Eigen::Matrix2d::Constant(kInf);
    double slope_err = kInf, intercept_err = kInf;
    if (out.dof > 0) {
        const double s2 = rss / static_cast<double>(out.dof);
        double sum_x2 = 0.0;
        for (const auto& p : points)
            sum_x2 += p.n_nv * p.n_nv;
        out.covariance(0, 0) = s2 / sxx;
        out.covariance(1, 1) = s2 * sum_x2 / (count * sxx);
        out.covariance(0, 1) = out.covariance(1, 0) = -mx * s2 / sxx;
        slope_err = std::sqrt(out.covariance(0, 0));
        intercept_err = std::sqrt(out.covariance(1, 1));
    }
    out.params.push_back({"slope", slope, slope_err, false, out.dof > 0});
    out.params.push_back({"intercept", intercept, intercept_err, false, out.dof > 0});
    return out;
}

GeometricEstimate geometric_nv_estimate(double wavelength_nm,
                                        double numerical_aperture,
                                        double layer_thickness_nm,
                                        double nitrogen_ppm,
                                        double conversion_rate) {
    require(wavelength_nm > 0.0, "wavelength must be > 0");
    require(numerical_aperture > 0.0, "numerical aperture must be > 0");
    require(layer_thickness_nm > 0.0, "layer thickness must be > 0");
    require(nitrogen_ppm >= 0.0, "nitrogen density must be >= 0");
    require(conversion_rate >= 0.0 && conversion_rate <= 1.0,
            "conversion rate must lie in [0, 1]");
    GeometricEstimate g;
    g.spot_diameter_nm = wavelength_nm / (0.84 * numerical_aperture);
    const double radius_cm = g.spot_diameter_nm / (2.0 * std::numbers::sqrt2) * 1e-7;
    g.volume_cm3 = std::numbers::pi * radius_cm * radius_cm * layer_thickness_nm * 1e-7;
    g.n_nitrogen = g.volume_cm3 * kDiamondCarbonDensity * nitrogen_ppm * 1e-6;
    g.n_nv = g.n_nitrogen * conversion_rate;
    return g;
}

}  // namespace pnl
