#include "pnl/dd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pnl/error.hpp"
#include "pnl/noise.hpp"
#include "pnl/readout_sim.hpp"

namespace pnl {

namespace {

struct Direction {
    double x, y, z;
};

Direction unit(const ReadoutAxis& a) {
    return {std::sin(a.polar) * std::cos(a.azimuth),
            std::sin(a.polar) * std::sin(a.azimuth), std::cos(a.polar)};
}

double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::abs(x)); }

// E[cos^2 theta] and E[sin^2 theta] for theta = a sin(lambda).
double mean_cos_sq(double a) { return 0.5 * (1.0 + bessel_j0(2.0 * a)); }
double mean_sin_sq(double a) { return 0.5 * (1.0 - bessel_j0(2.0 * a)); }

Histogram spin_histogram(std::span<const double> values, std::size_t n_nv,
                         double shot_sigma, std::size_t bins) {
    const double n = static_cast<double>(n_nv);
    if (bins > 0) {
        const double half = 0.5 + 5.0 * shot_sigma;
        return Histogram::from_samples(values, -half, half, bins);
    }
    // One bin per spin-count value, padded by five shot-noise widths.
    const auto pad = static_cast<std::size_t>(std::ceil(5.0 * shot_sigma * n));
    const double lo = -0.5 - (static_cast<double>(pad) + 0.5) / n;
    const double hi = 0.5 + (static_cast<double>(pad) + 0.5) / n;
    return Histogram::from_samples(values, lo, hi, n_nv + 1 + 2 * pad);
}

}  // namespace

void AcSignal::validate() const {
    require(b_osc >= 0.0 && std::isfinite(b_osc), "signal.b_osc must be >= 0");
    require(frequency > 0.0 && std::isfinite(frequency),
            "signal.frequency must be > 0");
}

DdSequence DdSequence::resonant(const AcSignal& signal, unsigned n_pulses) {
    return {n_pulses, signal.resonant_spacing()};
}

void DdSequence::validate() const {
    require(n_pulses >= 8 && n_pulses % 8 == 0,
            "sequence.n_pulses must be a positive multiple of 8");
    require(tau > 0.0 && std::isfinite(tau), "sequence.tau must be > 0");
}

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

InteractionStrength interaction_strength(const DdSequence& seq,
                                         const AcSignal& signal,
                                         SincConvention convention) {
    seq.validate();
    signal.validate();
    InteractionStrength s;
    const double tau_sens_s = seq.tau_sens() * 1e-6;
    s.alpha = 2.0 * std::numbers::pi * (2.0 / std::numbers::pi) * signal.b_osc *
              kElectronGyromagnetic * tau_sens_s;
    const double tau0 = signal.resonant_spacing();
    const double spacing = convention == SincConvention::literal ? seq.tau : tau0;
    const double arg = (seq.tau - tau0) * seq.n_pulses * spacing * std::numbers::pi;
    s.alpha_prime = s.alpha * sinc(arg);
    return s;
}

double accumulated_phase(const DdSequence& seq, const AcSignal& signal,
                         double lambda, SincConvention convention) {
    return interaction_strength(seq, signal, convention).alpha_prime *
           std::sin(lambda);
}

MarginalMoments marginal_moments(double alpha_prime) {
    MarginalMoments mm;
    const double j0 = bessel_j0(alpha_prime);
    const double j0_2 = bessel_j0(2.0 * alpha_prime);
    mm.mean_x = 0.0;
    mm.mean_y = 0.5 * j0;
    mm.sigma_x = 0.5 * std::sqrt(std::max(0.0, 0.5 * (1.0 - j0_2)));
    mm.sigma_y = 0.5 * std::sqrt(std::max(0.0, 0.5 * (1.0 + j0_2) - j0 * j0));
    return mm;
}

ReadoutAxis ReadoutAxis::from_label(const std::string& label) {
    if (label == "X" || label == "x")
        return x();
    if (label == "Y" || label == "y")
        return y();
    if (label == "Z" || label == "z")
        return z();
    throw ConfigError("unknown readout axis '" + label + "' (expected X|Y|Z)");
}

void TomographyPlan::validate() const {
    cfg.validate();
    seq.validate();
    signal.validate();
    require(!axes.empty(), "tomography needs at least one axis");
    require(shots >= 2, "tomography needs >= 2 shots");
    require(m >= 1, "tomography m must be >= 1");
    require(k1 >= 0.0 && k1 <= 1.0, "k1 must lie in [0, 1]");
}

double tomography_variance(const ReadoutAxis& axis, double alpha_prime,
                           std::size_t n_nv, double k1) {
    const Direction d = unit(axis);
    const double e1 = d.y * bessel_j0(alpha_prime);
    const double e2 = d.x * d.x * mean_sin_sq(alpha_prime) +
                      d.y * d.y * mean_cos_sq(alpha_prime);
    const double n = static_cast<double>(n_nv);
    return 0.25 / n + 0.25 * k1 * (e2 - e1 * e1 - e2 / n);
}

std::vector<AxisResult> simulate_tomography(const TomographyPlan& plan,
                                            Execution exec) {
    plan.validate();
    const double alpha_prime =
        interaction_strength(plan.seq, plan.signal, plan.convention).alpha_prime;
    const std::size_t n_nv = plan.cfg.n_nv;
    const double n_spins = static_cast<double>(n_nv);
    const double c = plan.cfg.contrast;
    const double per_spin = plan.cfg.photons_per_unit * static_cast<double>(plan.m) /
                            n_spins;
    const double root_k1 = std::sqrt(plan.k1);
    const auto shots = static_cast<long long>(plan.shots);

    std::vector<AxisResult> out;
    for (std::size_t ai = 0; ai < plan.axes.size(); ++ai) {
        const ReadoutAxis& axis = plan.axes[ai];
        const Direction dir = unit(axis);
        std::vector<ReadoutRecord> records(plan.shots);
        auto one = [&](long long s) {
            Engine engine = make_engine(
                plan.seed, streams::tomography + 16 * (plan.stream * 64 + ai),
                static_cast<std::uint64_t>(s));
            std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
            const double theta = alpha_prime * std::sin(phase(engine));
            const double proj = dir.x * std::sin(theta) + dir.y * std::cos(theta);
            const double p = 0.5 + root_k1 * 0.5 * proj;
            std::binomial_distribution<std::uint64_t> spins(n_nv, std::clamp(p, 0.0, 1.0));
            const double up = static_cast<double>(spins(engine));
            auto poisson = [&](double mean) {
                std::poisson_distribution<long long> d(mean);
                return static_cast<double>(d(engine));
            };
            ReadoutRecord& r = records[static_cast<std::size_t>(s)];
            r.m = plan.m;
            r.a = poisson(per_spin * (n_spins - c * up));
            r.b = poisson(per_spin * (n_spins * (1.0 - c) + c * up));
            r.r1 = poisson(per_spin * n_spins);
            r.r2 = poisson(per_spin * n_spins);
        };
        if (exec == Execution::serial) {
            for (long long s = 0; s < shots; ++s)
                one(s);
        } else {
#pragma omp parallel for schedule(static)
            for (long long s = 0; s < shots; ++s)
                one(s);
        }

        const NoiseDecomposition d = decompose(records);
        AxisResult res;
        res.axis = axis;
        res.alpha_prime = alpha_prime;
        res.mean = d.mean_jz;
        res.sigma_prime = d.sigma_prime;
        res.err = d.sigma_prime_err;
        res.sigma_shot_prime = d.sigma_shot_prime;
        res.sigma_proj = d.sigma_proj;
        res.sigma_proj_err = d.sigma_proj_err;
        res.n = d.n;
        res.c = d.c;
        std::vector<double> jz(records.size());
        for (std::size_t s = 0; s < records.size(); ++s)
            jz[s] = records[s].signal() / (2.0 * d.n * d.c);
        res.histogram = spin_histogram(jz, n_nv, d.sigma_shot_prime,
                                       plan.histogram_bins);
        out.push_back(std::move(res));
    }
    return out;
}

K1Fit fit_k1(std::span<const AxisResult> results, std::size_t n_nv) {
    require(!results.empty(), "k1 fit needs tomography results");
    double swbb = 0.0, swby = 0.0;
    for (const auto& r : results) {
        const double a = tomography_variance(r.axis, r.alpha_prime, n_nv, 0.0);
        const double b = tomography_variance(r.axis, r.alpha_prime, n_nv, 1.0) - a;
        const double y = r.sigma_proj * r.sigma_proj - a;
        const double e = 2.0 * r.sigma_proj * r.sigma_proj_err;
        if (!(e > 0.0))
            continue;
        const double w = 1.0 / (e * e);
        swbb += w * b * b;
        swby += w * b * y;
    }
    if (!(swbb > 0.0))
        throw NumericalError("k1 is not identifiable from the given axes");
    K1Fit fit;
    fit.k1 = swby / swbb;
    fit.err = 1.0 / std::sqrt(swbb);
    for (const auto& r : results) {
        const double model = tomography_variance(r.axis, r.alpha_prime, n_nv, fit.k1);
        const double e = 2.0 * r.sigma_proj * r.sigma_proj_err;
        if (e > 0.0)
            fit.chi2 += std::pow((r.sigma_proj * r.sigma_proj - model) / e, 2);
    }
    return fit;
}

double common_drive_rate() {
    // J0(v)^10 = 1/e  <=>  J0(v) = exp(-1/10); J0 is decreasing on (0, 2.4).
    const double target = std::exp(-1.0 / kDriveSources);
    double lo = 0.0, hi = 2.4;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (bessel_j0(mid) > target ? lo : hi) = mid;
    }
    return std::sqrt(kDriveSources / 2.0) * 0.5 * (lo + hi);
}

double relaxation_mean(DriveNoise noise, double t) {
    if (noise == DriveNoise::independent)
        return 0.5 * std::exp(-t);
    const double v = common_drive_rate() * t / std::sqrt(kDriveSources / 2.0);
    return 0.5 * std::pow(bessel_j0(v), kDriveSources);
}

std::vector<RelaxationPoint> correlated_vs_uncorrelated_t1(
    std::size_t n_nv, DriveNoise noise, std::span<const double> times,
    std::uint64_t shots, std::uint64_t seed, Execution exec) {
    require(n_nv >= 1, "n_nv must be >= 1");
    require(shots >= 2, "relaxation needs >= 2 shots");
    require(!times.empty(), "relaxation time grid must not be empty");
    for (double t : times)
        require(t >= 0.0 && std::isfinite(t), "relaxation times must be >= 0");
    const double rate = common_drive_rate();
    const double norm = std::sqrt(kDriveSources / 2.0);
    const double n = static_cast<double>(n_nv);
    const auto count = static_cast<long long>(shots);

    std::vector<RelaxationPoint> out;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const double t = times[ti];
        std::vector<double> jz(shots);
        auto one = [&](long long s) {
            Engine engine = make_engine(seed, streams::relaxometry + 16 * ti,
                                        static_cast<std::uint64_t>(s));
            double p = 0.5 * (1.0 + std::exp(-t));
            if (noise == DriveNoise::common_drive) {
                std::uniform_real_distribution<double> phase(0.0,
                                                             2.0 * std::numbers::pi);
                double amp = 0.0;
                for (int j = 0; j < kDriveSources; ++j)
                    amp += std::sin(phase(engine));
                p = 0.5 * (1.0 + std::cos(rate * t * amp / norm));
            }
            std::binomial_distribution<std::uint64_t> spins(n_nv, std::clamp(p, 0.0, 1.0));
            jz[static_cast<std::size_t>(s)] = static_cast<double>(spins(engine)) / n - 0.5;
        };
        if (exec == Execution::serial) {
            for (long long s = 0; s < count; ++s)
                one(s);
        } else {
#pragma omp parallel for schedule(static)
            for (long long s = 0; s < count; ++s)
                one(s);
        }
        RelaxationPoint pt;
        pt.t = t;
        pt.mean = sample_mean(jz);
        pt.sigma = sample_std(jz);
        pt.mean_err = pt.sigma / std::sqrt(static_cast<double>(shots));
        pt.sigma_err = std_error_of_std(pt.sigma, shots);
        out.push_back(pt);
    }
    return out;
}

std::string to_string(SincConvention c) {
    return c == SincConvention::literal ? "literal" : "resonant_spacing";
}

SincConvention sinc_convention_from_string(const std::string& s) {
    if (s == "literal")
        return SincConvention::literal;
    if (s == "resonant_spacing")
        return SincConvention::resonant_spacing;
    throw ConfigError("unknown sinc convention '" + s +
                      "' (expected literal|resonant_spacing)");
}

std::string to_string(DriveNoise n) {
    return n == DriveNoise::common_drive ? "common_drive" : "independent";
}

}  // namespace pnl
