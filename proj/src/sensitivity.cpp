#include "pnl/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnl/error.hpp"

namespace pnl {

namespace {

constexpr double kMicro = 1e-6;

double duty(double tau_sens, double overhead) {
    return std::sqrt((tau_sens + overhead) / tau_sens);
}

}  // namespace

double SensitivityParams::contrast_decay(double m) const {
    const double x = m / m_t1;
    if (decay == ContrastDecay::literal)
        return x * -std::expm1(-x);
    if (x < 1e-8)
        return 1.0 - 0.5 * x;
    return -std::expm1(-x) / x;
}

void SensitivityParams::validate() const {
    for (double t : {tau_r, tau_r_rep, tau_init, tau_rf, tau_sq})
        require(t >= 0.0 && std::isfinite(t), "durations must be >= 0");
    require(n1_per_nv > 0.0, "n1_per_nv must be > 0");
    require(c > 0.0 && c < 1.0, "contrast must lie in (0, 1)");
    require(m_t1 > 0.0, "m_t1 must be > 0");
    require(n_nv >= 1.0, "n_nv must be >= 1");
    require(gamma_e > 0.0, "gamma_e must be > 0");
}

double SqueezingSpec::amplitude_factor() const {
    const double denom = convention == SqueezingConvention::db_amplitude ? 20.0 : 10.0;
    return std::pow(10.0, -xi_sq_db / denom);
}

void SqueezingSpec::validate() const {
    require(xi_sq_db >= 0.0 && std::isfinite(xi_sq_db),
            "squeezing xi_sq_db must be >= 0");
}

double eta_conventional(const SensitivityParams& p, double tau_sens) {
    p.validate();
    require(tau_sens > 0.0, "tau_sens must be > 0");
    const double n1 = p.n1();
    const double slope =
        2.0 * std::numbers::pi * p.gamma_e * p.c * n1 * std::sqrt(tau_sens * kMicro);
    return duty(tau_sens, p.tau_r) * std::sqrt(n1) / slope;
}

double eta_repetitive(const SensitivityParams& p, double tau_sens, double m,
                      const std::optional<SqueezingSpec>& squeezing) {
    p.validate();
    require(tau_sens > 0.0, "tau_sens must be > 0");
    require(m >= 1.0, "m must be >= 1");
    double amp = 1.0;
    double overhead = p.tau_init + p.tau_rf + m * p.tau_r_rep;
    if (squeezing) {
        squeezing->validate();
        amp = squeezing->amplitude_factor();
        overhead += p.tau_sq;
    }
    const double n1 = p.n1();
    const double c_eff = 2.0 * p.c * p.contrast_decay(m);
    const double signal = c_eff * n1 * m;
    const double proj = signal * std::sqrt(1.0 / (2.0 * p.n_nv)) * amp;
    const double noise = std::sqrt(2.0 * n1 * m + proj * proj);
    const double slope =
        2.0 * std::numbers::pi * p.gamma_e * signal * std::sqrt(tau_sens * kMicro);
    return duty(tau_sens, overhead) * noise / slope;
}

RepetitionOptimum optimize_repetitions(const SensitivityParams& p, double tau_sens,
                                       const std::optional<SqueezingSpec>& squeezing) {
    p.validate();
    const double m_max = std::max(1.0, std::floor(10.0 * p.m_t1));
    auto eta_log = [&](double u) {
        return eta_repetitive(p, tau_sens, std::exp(u), squeezing);
    };
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = std::log(m_max);
    double c1 = b - golden * (b - a), c2 = a + golden * (b - a);
    double f1 = eta_log(c1), f2 = eta_log(c2);
    while (b - a > 1e-9) {
        if (f1 <= f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - golden * (b - a);
            f1 = eta_log(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + golden * (b - a);
            f2 = eta_log(c2);
        }
    }
    const double centre = std::exp(0.5 * (a + b));
    RepetitionOptimum best;
    best.eta = std::numeric_limits<double>::infinity();
    const auto lo = static_cast<long long>(std::max(1.0, std::floor(centre) - 3.0));
    const auto hi = static_cast<long long>(std::min(m_max, std::ceil(centre) + 3.0));
    for (long long m = lo; m <= hi; ++m) {
        const double eta = eta_repetitive(p, tau_sens, static_cast<double>(m), squeezing);
        if (eta < best.eta) {
            best.eta = eta;
            best.m = static_cast<std::uint64_t>(m);
        }
    }
    return best;
}

double breakeven_sensing_time(const SensitivityParams& p,
                              const std::optional<SqueezingSpec>& squeezing,
                              double lo, double hi) {
    require(lo > 0.0 && hi > lo, "breakeven bracket must satisfy 0 < lo < hi");
    auto advantage = [&](double tau) {
        return std::log(eta_conventional(p, tau) /
                        optimize_repetitions(p, tau, squeezing).eta);
    };
    double a = std::log(lo), b = std::log(hi);
    double fa = advantage(lo), fb = advantage(hi);
    if (fa > 0.0 || fb < 0.0)
        throw NumericalError("no breakeven sensing time inside the bracket");
    for (int i = 0; i < 200 && b - a > 1e-12; ++i) {
        const double mid = 0.5 * (a + b);
        const double fm = advantage(std::exp(mid));
        if (fm < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
            fb = fm;
        }
    }
    return std::exp(0.5 * (a + b));
}

std::vector<SensitivityCell> sensitivity_map(
    const SensitivityParams& p, std::span<const double> tau_grid,
    std::span<const double> m_grid, const std::optional<SqueezingSpec>& squeezing,
    Execution exec) {
    p.validate();
    require(!tau_grid.empty() && !m_grid.empty(), "sensitivity grids must not be empty");
    for (double t : tau_grid)
        require(t > 0.0, "tau_sens grid values must be > 0");
    for (double m : m_grid)
        require(m >= 1.0, "m grid values must be >= 1");

    const std::size_t cols = m_grid.size();
    std::vector<SensitivityCell> out(tau_grid.size() * cols);
    const auto total = static_cast<long long>(out.size());
    auto fill = [&](long long idx) {
        const auto i = static_cast<std::size_t>(idx) / cols;
        const auto k = static_cast<std::size_t>(idx) % cols;
        SensitivityCell& cell = out[static_cast<std::size_t>(idx)];
        cell.tau_sens = tau_grid[i];
        cell.m = m_grid[k];
        cell.eta_conv = eta_conventional(p, cell.tau_sens);
        cell.eta_rep = eta_repetitive(p, cell.tau_sens, cell.m, squeezing);
        cell.ratio = cell.eta_conv / cell.eta_rep;
    };
    if (exec == Execution::serial) {
        for (long long idx = 0; idx < total; ++idx)
            fill(idx);
    } else {
#pragma omp parallel for schedule(static)
        for (long long idx = 0; idx < total; ++idx)
            fill(idx);
    }
    return out;
}

std::string to_string(ContrastDecay d) {
    return d == ContrastDecay::relaxation ? "relaxation" : "literal";
}

ContrastDecay contrast_decay_from_string(const std::string& s) {
    if (s == "relaxation")
        return ContrastDecay::relaxation;
    if (s == "literal")
        return ContrastDecay::literal;
    throw ConfigError("unknown contrast decay '" + s + "' (expected relaxation|literal)");
}

std::string to_string(SqueezingConvention c) {
    return c == SqueezingConvention::db_amplitude ? "db_amplitude" : "literal";
}

SqueezingConvention squeezing_convention_from_string(const std::string& s) {
    if (s == "db_amplitude")
        return SqueezingConvention::db_amplitude;
    if (s == "literal")
        return SqueezingConvention::literal;
    throw ConfigError("unknown squeezing convention '" + s +
                      "' (expected db_amplitude|literal)");
}

}  // namespace pnl
