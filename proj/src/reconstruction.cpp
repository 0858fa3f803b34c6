#include "pnl/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnl/error.hpp"

namespace pnl {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double cos_between(double t1, double p1, double t2, double p2) {
    return std::cos(t1) * std::cos(t2) +
           std::sin(t1) * std::sin(t2) * std::cos(p1 - p2);
}

std::vector<double> log_binomials(std::size_t n) {
    std::vector<double> out(n + 1);
    const double nn = static_cast<double>(n);
    for (std::size_t k = 0; k <= n; ++k) {
        const double kk = static_cast<double>(k);
        out[k] = std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) -
                 std::lgamma(nn - kk + 1.0);
    }
    return out;
}

// Adds weight * Binomial(n, p) to `out`.
void add_binomial(std::vector<double>& out, const std::vector<double>& log_c,
                  double p, double weight) {
    const std::size_t n = out.size() - 1;
    if (p <= 0.0) {
        out[0] += weight;
        return;
    }
    if (p >= 1.0) {
        out[n] += weight;
        return;
    }
    const double lp = std::log(p);
    const double lq = std::log1p(-p);
    for (std::size_t k = 0; k <= n; ++k)
        out[k] += weight * std::exp(log_c[k] + static_cast<double>(k) * lp +
                                    static_cast<double>(n - k) * lq);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

bool is_pole(const MarginalDistribution& m) {
    return std::abs(std::sin(m.polar)) < 1e-9;
}
bool is_equatorial(const MarginalDistribution& m) {
    return std::abs(std::cos(m.polar)) < 1e-9;
}

// Coherent (non-thermal, unit total weight) marginal of the ansatz along
// one axis, using the binomial closed form.
void coherent_marginal(std::vector<double>& out, const std::vector<double>& log_c,
                       double delta_phi, double theta, std::size_t count,
                       double polar, double azimuth) {
    std::fill(out.begin(), out.end(), 0.0);
    const double w = 1.0 / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double phi =
            count == 1 ? 0.5 * std::numbers::pi
                       : 0.5 * std::numbers::pi - delta_phi +
                             2.0 * delta_phi * static_cast<double>(i) /
                                 static_cast<double>(count - 1);
        const double p = 0.5 * (1.0 + cos_between(theta, phi, polar, azimuth));
        add_binomial(out, log_c, p, w);
    }
}

struct AxisData {
    std::vector<double> p;
    std::vector<double> thermal;
    double samples;
    double polar, azimuth;
};

// Log-likelihood per thermal weight on a grid, for a fixed coherent part.
double best_thermal(const std::vector<AxisData>& axes,
                    const std::vector<std::vector<double>>& coherent,
                    double step, double& best_a) {
    const int steps = static_cast<int>(std::lround(1.0 / step));
    double best = kNegInf;
    best_a = 0.0;
    for (int s = 0; s <= steps; ++s) {
        const double a = std::min(1.0, s * step);
        double ll = 0.0;
        for (std::size_t ax = 0; ax < axes.size() && ll > kNegInf; ++ax) {
            const auto& d = axes[ax];
            for (std::size_t k = 0; k < d.p.size(); ++k) {
                if (d.p[k] <= 0.0)
                    continue;
                const double q = (1.0 - a) * coherent[ax][k] + a * d.thermal[k];
                if (q <= 0.0) {
                    ll = kNegInf;
                    break;
                }
                ll += d.samples * d.p[k] * std::log(q);
            }
        }
        if (ll > best) {
            best = ll;
            best_a = a;
        }
    }
    return best;
}

}  // namespace

void MarginalDistribution::validate() const {
    const DickeBasis basis{j};
    require(probabilities.size() == basis.dimension(),
            "marginal size must be 2J + 1");
    double sum = 0.0;
    for (double p : probabilities) {
        require(p >= 0.0 && std::isfinite(p), "marginal probabilities must be >= 0");
        sum += p;
    }
    require(std::abs(sum - 1.0) < 1e-9, "marginal probabilities must sum to 1");
    require(samples > 0.0, "marginal sample weight must be > 0");
}

CoherentStateMixture CoherentStateMixture::ansatz(double j, double delta_phi,
                                                  double theta,
                                                  double thermal_weight,
                                                  std::size_t count) {
    require(count >= 1, "mixture needs at least one component");
    CoherentStateMixture mix;
    mix.j = j;
    mix.delta_phi = delta_phi;
    mix.theta = theta;
    mix.thermal_weight = thermal_weight;
    const double w = (1.0 - thermal_weight) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double phi =
            count == 1 ? 0.5 * std::numbers::pi
                       : 0.5 * std::numbers::pi - delta_phi +
                             2.0 * delta_phi * static_cast<double>(i) /
                                 static_cast<double>(count - 1);
        mix.components.push_back({w, theta, phi});
    }
    mix.validate();
    return mix;
}

double CoherentStateMixture::coherent_weight() const {
    double sum = 0.0;
    for (const auto& c : components)
        sum += c.weight;
    return sum;
}

void CoherentStateMixture::validate() const {
    require(j > 0.0, "mixture J must be > 0");
    require(thermal_weight >= 0.0 && thermal_weight <= 1.0,
            "thermal weight must lie in [0, 1]");
    for (const auto& c : components)
        require(c.weight >= 0.0, "mixture weights must be >= 0");
    require(std::abs(coherent_weight() + thermal_weight - 1.0) < 1e-9,
            "mixture weights must sum to 1");
}

std::vector<double> thermal_marginal(double j) {
    const DickeBasis basis{j};
    std::vector<double> out(basis.dimension(), 0.0);
    add_binomial(out, log_binomials(basis.particles()), 0.5, 1.0);
    return out;
}

MarginalDistribution marginal_of_mixture(const CoherentStateMixture& mixture,
                                         double polar, double azimuth,
                                         MarginalMethod method) {
    mixture.validate();
    const DickeBasis basis{mixture.j};
    MarginalDistribution out;
    out.j = mixture.j;
    out.polar = polar;
    out.azimuth = azimuth;
    out.probabilities.assign(basis.dimension(), 0.0);

    if (method == MarginalMethod::binomial) {
        const auto log_c = log_binomials(basis.particles());
        for (const auto& c : mixture.components) {
            const double p = 0.5 * (1.0 + cos_between(c.theta, c.phi, polar, azimuth));
            add_binomial(out.probabilities, log_c, p, c.weight);
        }
    } else {
        const Eigen::MatrixXd d = wigner_small_d(mixture.j, polar);
        for (const auto& c : mixture.components) {
            const auto state = SpinCoherentState::make(basis, c.theta, c.phi);
            Eigen::VectorXcd phased = state.amplitudes;
            for (Eigen::Index i = 0; i < phased.size(); ++i)
                phased[i] *= std::polar(
                    1.0, basis.m(static_cast<std::size_t>(i)) * azimuth);
            const Eigen::VectorXd pop =
                (d.transpose().cast<std::complex<double>>() * phased).cwiseAbs2();
            for (Eigen::Index i = 0; i < pop.size(); ++i)
                out.probabilities[static_cast<std::size_t>(i)] += c.weight * pop[i];
        }
    }
    if (mixture.thermal_weight > 0.0) {
        const auto th = thermal_marginal(mixture.j);
        for (std::size_t i = 0; i < th.size(); ++i)
            out.probabilities[i] += mixture.thermal_weight * th[i];
    }
    return out;
}

Deconvolution deconvolve_skellam(const Histogram& histogram, std::size_t n_spins,
                                 double n, double c, double k,
                                 const DeconvolutionOptions& options) {
    require(n_spins >= 1, "deconvolution needs >= 1 spin");
    require(!histogram.counts.empty() && histogram.total() > 0.0,
            "deconvolution needs a non-empty histogram");
    require(n > 0.0 && c > 0.0 && c < 1.0, "deconvolution needs n > 0, 0 < c < 1");
    require(k > 0.0, "deconvolution needs k > 0");

    const std::size_t bins = histogram.size();
    const std::size_t states = n_spins + 1;
    const double spins = static_cast<double>(n_spins);
    const double sd = k * std::sqrt(n * (2.0 - c)) / (2.0 * n * c);
    const double xbar = histogram.mean();

    bool use_skellam = options.kernel == KernelKind::skellam;
    if (options.kernel == KernelKind::automatic)
        use_skellam = k == 1.0 && 2.0 * n * std::sqrt(1.0 - c) < 600.0;
    if (use_skellam)
        require(k == 1.0, "the exact Skellam kernel needs k = 1");

    // kernel[i * states + s]: probability that spin count s lands in bin i.
    std::vector<double> kernel(bins * states, 0.0);
    for (std::size_t s = 0; s < states; ++s) {
        const double frac = static_cast<double>(s) / spins;
        if (use_skellam) {
            const double mu_a = n * (1.0 - c * frac);
            const double mu_b = n * (1.0 - c + c * frac);
            const double scale = 2.0 * n * c;
            const double arg = 2.0 * std::sqrt(mu_a * mu_b);
            for (std::size_t i = 0; i < bins; ++i) {
                const double lo = histogram.lo + histogram.width * static_cast<double>(i);
                const auto d_lo = static_cast<long long>(std::ceil(lo * scale));
                const auto d_hi = static_cast<long long>(
                    std::ceil((lo + histogram.width) * scale));
                double mass = 0.0;
                for (long long d = d_lo; d < d_hi; ++d) {
                    const double bessel =
                        std::cyl_bessel_i(static_cast<double>(std::llabs(d)), arg);
                    if (bessel <= 0.0)
                        continue;
                    mass += std::exp(-(mu_a + mu_b) +
                                     0.5 * static_cast<double>(d) * std::log(mu_b / mu_a) +
                                     std::log(bessel));
                }
                kernel[i * states + s] = mass;
            }
        } else {
            const double centre = xbar + k * ((frac - 0.5) - xbar);
            for (std::size_t i = 0; i < bins; ++i) {
                const double lo = histogram.lo + histogram.width * static_cast<double>(i);
                const double hi = lo + histogram.width;
                double mass;
                if (sd > 0.0)
                    mass = normal_cdf((hi - centre) / sd) - normal_cdf((lo - centre) / sd);
                else
                    mass = (centre >= lo && centre < hi) ? 1.0 : 0.0;
                kernel[i * states + s] = mass;
            }
        }
    }

    std::vector<double> efficiency(states, 0.0);
    for (std::size_t i = 0; i < bins; ++i)
        for (std::size_t s = 0; s < states; ++s)
            efficiency[s] += kernel[i * states + s];

    Deconvolution out;
    out.low_confidence = sd >= histogram.hi() - histogram.lo;
    std::vector<double> f(states, 1.0 / static_cast<double>(states));
    std::vector<double> pred(bins), ratio(bins);
    double prev_ll = kNegInf;
    for (out.iterations = 1; out.iterations <= options.max_iterations;
         ++out.iterations) {
        double ll = 0.0;
        for (std::size_t i = 0; i < bins; ++i) {
            double p = 0.0;
            for (std::size_t s = 0; s < states; ++s)
                p += kernel[i * states + s] * f[s];
            pred[i] = p;
            const double h = histogram.counts[i];
            if (h > 0.0) {
                ll += h * std::log(std::max(p, 1e-300));
                ratio[i] = p > 0.0 ? h / p : 0.0;
            } else {
                ratio[i] = 0.0;
            }
        }
        out.log_likelihood = ll;
        if (std::abs(ll - prev_ll) <= options.tolerance * std::abs(ll)) {
            out.converged = true;
            break;
        }
        prev_ll = ll;

        double total = 0.0;
        for (std::size_t s = 0; s < states; ++s) {
            if (efficiency[s] <= 0.0) {
                f[s] = 0.0;
                continue;
            }
            double back = 0.0;
            for (std::size_t i = 0; i < bins; ++i)
                back += kernel[i * states + s] * ratio[i];
            f[s] *= back / efficiency[s];
            total += f[s];
        }
        if (!(total > 0.0))
            throw NumericalError("deconvolution lost all probability mass");
        double mass = 0.0;
        for (double& v : f) {
            v /= total;
            mass += v;
        }
        out.mass_history.push_back(mass);
    }
    if (out.iterations > options.max_iterations)
        out.iterations = options.max_iterations;

    out.marginal.j = 0.5 * spins;
    out.marginal.probabilities = std::move(f);
    out.marginal.samples = histogram.total();
    return out;
}

Histogram rescale_axis(const Histogram& histogram, double lower, double upper) {
    require(upper > lower, "rescale bounds must satisfy upper > lower");
    Histogram out = histogram;
    const double span = upper - lower;
    out.lo = (histogram.lo - lower) / span - 0.5;
    out.width = histogram.width / span;
    return out;
}

double mixture_log_likelihood(const CoherentStateMixture& mixture,
                              std::span<const MarginalDistribution> marginals) {
    double ll = 0.0;
    for (const auto& m : marginals) {
        const auto model = marginal_of_mixture(mixture, m.polar, m.azimuth);
        for (std::size_t k = 0; k < m.probabilities.size(); ++k) {
            if (m.probabilities[k] <= 0.0)
                continue;
            if (model.probabilities[k] <= 0.0)
                return kNegInf;
            ll += m.samples * m.probabilities[k] * std::log(model.probabilities[k]);
        }
    }
    return ll;
}

MixtureFit fit_mixture(std::span<const MarginalDistribution> marginals,
                       const MixtureFitOptions& options) {
    require(!marginals.empty(), "mixture fit needs at least one marginal");
    require(options.components >= 1, "mixture fit needs >= 1 component");
    require(options.delta_phi_step_deg > 0.0 && options.theta_step_deg > 0.0 &&
                options.thermal_step > 0.0 && options.thermal_step <= 1.0,
            "mixture fit grid steps must be > 0");
    require(options.theta_max_deg >= options.theta_min_deg,
            "mixture fit theta range is empty");
    const double j = marginals.front().j;
    for (const auto& m : marginals) {
        m.validate();
        require(std::abs(m.j - j) < 1e-12, "all marginals must share J");
    }

    MixtureFit fit;
    const bool has_pole = std::any_of(marginals.begin(), marginals.end(), is_pole);
    const bool has_equator =
        std::any_of(marginals.begin(), marginals.end(), is_equatorial);
    if (marginals.size() < 2 || !has_pole || !has_equator) {
        fit.identifiable = false;
        fit.message = "need Z plus at least one equatorial axis";
    }

    const DickeBasis basis{j};
    const auto log_c = log_binomials(basis.particles());
    std::vector<AxisData> axes;
    for (const auto& m : marginals)
        axes.push_back({m.probabilities, thermal_marginal(j), m.samples, m.polar,
                        m.azimuth});

    const int n_dphi =
        static_cast<int>(std::floor(90.0 / options.delta_phi_step_deg + 1e-9)) + 1;
    const int n_theta = static_cast<int>(std::floor(
                            (options.theta_max_deg - options.theta_min_deg) /
                                options.theta_step_deg +
                            1e-9)) +
                        1;
    const long long cells = static_cast<long long>(n_dphi) * n_theta;
    std::vector<double> cell_ll(static_cast<std::size_t>(cells));
    std::vector<double> cell_a(static_cast<std::size_t>(cells));

#pragma omp parallel
    {
        std::vector<std::vector<double>> coherent(
            axes.size(), std::vector<double>(basis.dimension()));
#pragma omp for schedule(dynamic, 16)
        for (long long cell = 0; cell < cells; ++cell) {
            const double dphi = (cell / n_theta) * options.delta_phi_step_deg * kDeg;
            const double theta = (options.theta_min_deg +
                                  (cell % n_theta) * options.theta_step_deg) *
                                 kDeg;
            for (std::size_t ax = 0; ax < axes.size(); ++ax)
                coherent_marginal(coherent[ax], log_c, dphi, theta, options.components,
                                  axes[ax].polar, axes[ax].azimuth);
            double a = 0.0;
            cell_ll[static_cast<std::size_t>(cell)] =
                best_thermal(axes, coherent, options.thermal_step, a);
            cell_a[static_cast<std::size_t>(cell)] = a;
        }
    }

    // Deterministic argmax with the documented tie-break.
    long long best = -1;
    for (long long cell = 0; cell < cells; ++cell) {
        const double ll = cell_ll[static_cast<std::size_t>(cell)];
        if (best < 0 || ll > cell_ll[static_cast<std::size_t>(best)]) {
            best = cell;
            continue;
        }
        if (ll == cell_ll[static_cast<std::size_t>(best)]) {
            const long long dp = cell / n_theta, bp = best / n_theta;
            const double dt = std::abs(options.theta_min_deg +
                                       (cell % n_theta) * options.theta_step_deg - 90.0);
            const double bt = std::abs(options.theta_min_deg +
                                       (best % n_theta) * options.theta_step_deg - 90.0);
            if (dp < bp || (dp == bp && dt < bt))
                best = cell;
        }
    }
    if (!std::isfinite(cell_ll[static_cast<std::size_t>(best)]))
        throw NumericalError("mixture likelihood is -inf on the whole grid");

    double x[3] = {(best / n_theta) * options.delta_phi_step_deg * kDeg,
                   (options.theta_min_deg + (best % n_theta) * options.theta_step_deg) *
                       kDeg,
                   cell_a[static_cast<std::size_t>(best)]};
    auto objective = [&](const double* p) {
        return mixture_log_likelihood(
            CoherentStateMixture::ansatz(j, p[0], p[1], p[2], options.components),
            marginals);
    };
    double best_ll = objective(x);

    if (options.refine) {
        const double lo[3] = {0.0, options.theta_min_deg * kDeg, 0.0};
        const double hi[3] = {0.5 * std::numbers::pi, options.theta_max_deg * kDeg, 1.0};
        const double radius[3] = {options.delta_phi_step_deg * kDeg,
                                  options.theta_step_deg * kDeg, options.thermal_step};
        const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
        for (int round = 0; round < 4; ++round) {
            for (int d = 0; d < 3; ++d) {
                double a = std::max(lo[d], x[d] - radius[d]);
                double b = std::min(hi[d], x[d] + radius[d]);
                double p[3] = {x[0], x[1], x[2]};
                auto at = [&](double v) {
                    p[d] = v;
                    return objective(p);
                };
                double c1 = b - golden * (b - a), c2 = a + golden * (b - a);
                double f1 = at(c1), f2 = at(c2);
                for (int it = 0; it < 40; ++it) {
                    if (f1 >= f2) {
                        b = c2;
                        c2 = c1;
                        f2 = f1;
                        c1 = b - golden * (b - a);
                        f1 = at(c1);
                    } else {
                        a = c1;
                        c1 = c2;
                        f1 = f2;
                        c2 = a + golden * (b - a);
                        f2 = at(c2);
                    }
                }
                const double cand = 0.5 * (a + b);
                const double fc = at(cand);
                if (fc > best_ll) {
                    best_ll = fc;
                    x[d] = cand;
                }
            }
        }
    }
    fit.mixture = CoherentStateMixture::ansatz(j, x[0], x[1], x[2], options.components);
    fit.log_likelihood = best_ll;
    if (fit.message.empty())
        fit.message = "ok";
    return fit;
}

double husimi_q(const CoherentStateMixture& mixture, double theta, double phi,
                bool include_thermal) {
    const double two_j = 2.0 * mixture.j;
    double q = 0.0;
    for (const auto& c : mixture.components) {
        const double overlap =
            0.5 * (1.0 + cos_between(c.theta, c.phi, theta, phi));
        q += c.weight * std::pow(std::max(overlap, 0.0), two_j);
    }
    if (include_thermal)
        q += mixture.thermal_weight * std::exp2(-two_j);
    return q / std::numbers::pi;
}

std::vector<HusimiSample> husimi_grid(const CoherentStateMixture& mixture,
                                      std::size_t n_theta, std::size_t n_phi,
                                      bool include_thermal) {
    require(n_theta >= 2 && n_phi >= 1, "Husimi grid needs n_theta >= 2, n_phi >= 1");
    std::vector<HusimiSample> out(n_theta * n_phi);
    const auto total = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
    for (long long idx = 0; idx < total; ++idx) {
        const auto i = static_cast<std::size_t>(idx) / n_phi;
        const auto k = static_cast<std::size_t>(idx) % n_phi;
        HusimiSample& s = out[static_cast<std::size_t>(idx)];
        s.theta = std::numbers::pi * static_cast<double>(i) /
                  static_cast<double>(n_theta - 1);
        s.phi = 2.0 * std::numbers::pi * static_cast<double>(k) /
                static_cast<double>(n_phi);
        s.q = husimi_q(mixture, s.theta, s.phi, include_thermal);
    }
    return out;
}

QuadratureRule gauss_legendre(std::size_t order) {
    require(order >= 1, "quadrature order must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(order);
    rule.weights.resize(order);
    const double n = static_cast<double>(order);
    for (std::size_t i = 0; i < order; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= order; ++k) {
                const double kk = static_cast<double>(k);
                const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-15)
                break;
        }
        rule.nodes[i] = x;
        rule.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return rule;
}

double husimi_sphere_integral(const CoherentStateMixture& mixture,
                              std::size_t n_theta, std::size_t n_phi,
                              bool include_thermal) {
    require(n_phi >= 1, "phi rule needs >= 1 point");
    const QuadratureRule rule = gauss_legendre(n_theta);
    const double dphi = 2.0 * std::numbers::pi / static_cast<double>(n_phi);
    double integral = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double theta = std::acos(rule.nodes[i]);
        double ring = 0.0;
        for (std::size_t k = 0; k < n_phi; ++k)
            ring += husimi_q(mixture, theta, dphi * static_cast<double>(k),
                             include_thermal);
        integral += rule.weights[i] * ring * dphi;
    }
    return (2.0 * mixture.j + 1.0) / 4.0 * integral;
}

std::string to_string(MarginalMethod m) {
    return m == MarginalMethod::binomial ? "binomial" : "wigner";
}

}  // namespace pnl
