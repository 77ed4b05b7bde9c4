#pragma once

#include "nlc/waveform.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nlc {

// Standard single-mode fiber defaults.
inline constexpr double kSsmfAlphaDbPerKm = 0.2;
inline constexpr double kSsmfBeta2Ps2PerKm = -21.7;
inline constexpr double kSsmfGammaPerWKm = 1.3;

struct FiberSpanSpec {
    double length_km = 80.0;
    double alpha_db_per_km = kSsmfAlphaDbPerKm;
    double beta2_ps2_per_km = kSsmfBeta2Ps2PerKm;
    double gamma_per_w_km = kSsmfGammaPerWKm;
    double step_km = 0.1;

    void validate() const;
    /// Field-power attenuation coefficient in 1/km.
    double alpha_per_km() const;
    int steps() const;
};

struct AmplifierSpec {
    double gain_db = 16.0;
    double noise_figure_db = 5.0;
    double center_frequency_thz = 193.4;
    bool noise_enabled = true;

    void validate() const;
    /// One-sided ASE power spectral density per polarization, W/Hz.
    double ase_psd() const;
};

struct LinkSpan {
    FiberSpanSpec fiber;
    AmplifierSpec amplifier;
};

struct LinkSpec {
    std::vector<LinkSpan> spans;
    double launch_power_dbm = 0.0;

    void validate() const;
    double total_length_km() const;
    /// Sum of beta2 * length over spans, ps^2.
    double accumulated_dispersion_ps2() const;

    /// `count` identical spans whose amplifiers exactly offset span loss.
    static LinkSpec uniform(int count, const FiberSpanSpec& fiber, double noise_figure_db,
                            bool ase, double launch_power_dbm,
                            double center_frequency_thz = 193.4);
};

struct PropagationDiagnostics {
    /// Largest nonlinear phase applied in a single step, rad.
    double max_step_phase = 0.0;
    std::vector<std::string> warnings;
};

/// Nonlinear phase per step above which propagate_span reports a warning.
inline constexpr double kStepPhaseWarning = 0.05;

double dbm_to_watts(double dbm);

SampledWaveform set_launch_power(const SampledWaveform& w, double p_dbm);

/// Symmetrized split-step solution of
///   dA/dz = -(alpha/2) A - i (beta2/2) d2A/dt2 + i gamma |A|^2 A
/// (Manakov form with 8/9 gamma for two polarizations). The waveform is
/// treated as one period of a cyclic signal.
SampledWaveform propagate_span(const SampledWaveform& w, const FiberSpanSpec& span,
                               PropagationDiagnostics* diag = nullptr);

/// Gain plus circular Gaussian ASE over the full simulation bandwidth.
SampledWaveform amplify(const SampledWaveform& w, const AmplifierSpec& amp, std::uint64_t rng_seed);

SampledWaveform propagate_link(const SampledWaveform& w, const LinkSpec& link,
                               std::uint64_t rng_seed, PropagationDiagnostics* diag = nullptr);

namespace detail {

/// Integrated nonlinear length of a step of `h_km` referenced to the power at
/// the step midpoint; even in alpha, so forward and backward steps agree.
double midpoint_effective_length(double alpha_per_km, double h_km);

/// Split-step integration shared by forward propagation and back-propagation.
/// The linear operator per km is `field_exponent + i (beta2/2) w^2`, with
/// field_exponent = -alpha/2 for forward propagation.
void split_step(std::vector<CVector>& pols, double sample_rate, double length_km, int steps,
                double field_exponent_per_km, double beta2_ps2_per_km, double gamma_per_w_km,
                PropagationDiagnostics* diag);

} // namespace detail

} // namespace nlc
