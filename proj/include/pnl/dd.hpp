#pragma once

// XY8 detection of a monochromatic field with a random phase.
//
// A sensor spin prepared along +Y accrues theta = alpha' sin(lambda) during
// the pulse train, where lambda is the field phase at the start of the
// sequence. Averaging over a uniform lambda gives Bessel-function moments.
// Times in this header are in microseconds unless noted.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pnl/ensemble.hpp"
#include "pnl/histogram.hpp"
#include "pnl/parallel.hpp"

namespace pnl {

inline constexpr double kElectronGyromagnetic = 28.04e9;  // Hz / T

struct AcSignal {
    double b_osc = 1.84e-6;     // T
    double frequency = 250e3;   // Hz

    // Pulse spacing that puts the XY8 filter on the signal, 1/(2f), in us.
    double resonant_spacing() const { return 0.5e6 / frequency; }
    void validate() const;
};

struct DdSequence {
    unsigned n_pulses = 8;
    double tau = 2.0;  // pulse spacing, us

    double tau_sens() const { return n_pulses * tau; }
    static DdSequence resonant(const AcSignal& signal, unsigned n_pulses = 8);
    void validate() const;
};

// literal:           sinc((tau - tau0) * N_p * tau * pi)
// resonant_spacing:  sinc((tau - tau0) * N_p * tau0 * pi), even in tau - tau0
enum class SincConvention { literal, resonant_spacing };

struct InteractionStrength {
    double alpha = 0.0;        // rad, on resonance
    double alpha_prime = 0.0;  // rad, including the detuning response
};

double sinc(double x);

InteractionStrength interaction_strength(
    const DdSequence& seq, const AcSignal& signal,
    SincConvention convention = SincConvention::literal);

double accumulated_phase(const DdSequence& seq, const AcSignal& signal,
                         double lambda,
                         SincConvention convention = SincConvention::literal);

// Moments of (sin theta, cos theta)/2 over a uniform field phase.
struct MarginalMoments {
    double mean_x = 0.0;
    double mean_y = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
};

MarginalMoments marginal_moments(double alpha_prime);

// Readout direction on the Bloch sphere (radians).
struct ReadoutAxis {
    std::string label;
    double polar = 0.0;
    double azimuth = 0.0;

    static ReadoutAxis x() { return {"X", 1.5707963267948966, 0.0}; }
    static ReadoutAxis y() { return {"Y", 1.5707963267948966, 1.5707963267948966}; }
    static ReadoutAxis z() { return {"Z", 0.0, 0.0}; }
    static ReadoutAxis from_label(const std::string& label);
};

struct TomographyPlan {
    EnsembleConfig cfg;
    DdSequence seq;
    AcSignal signal;
    SincConvention convention = SincConvention::literal;
    std::vector<ReadoutAxis> axes{ReadoutAxis::x(), ReadoutAxis::y(),
                                  ReadoutAxis::z()};
    std::uint64_t shots = 3000;
    std::uint64_t m = 25000;  // readout repetitions per shot
    std::uint64_t seed = 1;
    std::uint64_t stream = 0;
    // Readout scaling; each spin's projection probability is pulled toward
    // 1/2 so that its variance contribution scales by k1.
    double k1 = 1.0;
    std::size_t histogram_bins = 0;  // 0: one bin per spin-count value

    void validate() const;
};

struct AxisResult {
    ReadoutAxis axis;
    double alpha_prime = 0.0;
    double mean = 0.0;           // per-spin J~ along the axis
    double sigma_prime = 0.0;    // std((b - a) / (2 n c))
    double err = 0.0;
    double sigma_shot_prime = 0.0;
    double sigma_proj = 0.0;     // shot noise removed
    double sigma_proj_err = 0.0;
    double n = 0.0;
    double c = 0.0;
    Histogram histogram;         // of (b - a) / (2 n c) per spin
};

std::vector<AxisResult> simulate_tomography(const TomographyPlan& plan,
                                            Execution exec = Execution::parallel);

// Expected per-spin variance of the readout along `axis` for N spins,
// including the binomial term, as a function of k1.
double tomography_variance(const ReadoutAxis& axis, double alpha_prime,
                           std::size_t n_nv, double k1);

struct K1Fit {
    double k1 = 1.0;
    double err = 0.0;
    double chi2 = 0.0;
};

// Weighted least squares of sigma_proj^2 against tomography_variance (which
// is affine in k1).
K1Fit fit_k1(std::span<const AxisResult> results, std::size_t n_nv);

enum class DriveNoise { common_drive, independent };

struct RelaxationPoint {
    double t = 0.0;  // in units of the model's 1/e time of the mean
    double mean = 0.0;
    double mean_err = 0.0;
    double sigma = 0.0;
    double sigma_err = 0.0;
};

inline constexpr int kDriveSources = 10;

// Drive amplitude (rad per unit time) whose ten-source composite makes the
// mean J~ fall to 1/e of its start at t = 1.
double common_drive_rate();

// Mean per-spin J~ of an ensemble initialized in |up>.
double relaxation_mean(DriveNoise noise, double t);

std::vector<RelaxationPoint> correlated_vs_uncorrelated_t1(
    std::size_t n_nv, DriveNoise noise, std::span<const double> times,
    std::uint64_t shots, std::uint64_t seed,
    Execution exec = Execution::parallel);

std::string to_string(SincConvention c);
SincConvention sinc_convention_from_string(const std::string& s);
std::string to_string(DriveNoise n);

}  // namespace pnl
