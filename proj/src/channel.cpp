#include "nlc/channel.hpp"

#include "nlc/fft.hpp"
#include "nlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nlc {

namespace {

constexpr double kPlanck = 6.62607015e-34; // J s

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace

void FiberSpanSpec::validate() const
{
    require(length_km > 0.0, "link error", "span length must be positive");
    require(step_km > 0.0, "link error", "step size must be positive");
    require(step_km <= length_km, "link error", "step size exceeds span length");
    require(alpha_db_per_km >= 0.0, "link error", "attenuation must be non-negative");
}

double FiberSpanSpec::alpha_per_km() const { return alpha_db_per_km * std::log(10.0) / 10.0; }

int FiberSpanSpec::steps() const
{
    return std::max(1, static_cast<int>(std::ceil(length_km / step_km - 1e-9)));
}

void AmplifierSpec::validate() const
{
    require(gain_db >= 0.0, "link error", "amplifier gain must be non-negative");
    require(center_frequency_thz > 0.0, "link error", "center frequency must be positive");
}

double AmplifierSpec::ase_psd() const
{
    if (!noise_enabled) return 0.0;
    const double g = db_to_linear(gain_db);
    const double f = db_to_linear(noise_figure_db);
    return (g - 1.0) * f * kPlanck * center_frequency_thz * 1e12 / 2.0;
}

void LinkSpec::validate() const
{
    require(!spans.empty(), "link error", "link has no spans");
    for (const auto& s : spans) {
        s.fiber.validate();
        s.amplifier.validate();
    }
}

double LinkSpec::total_length_km() const
{
    double acc = 0.0;
    for (const auto& s : spans) acc += s.fiber.length_km;
    return acc;
}

double LinkSpec::accumulated_dispersion_ps2() const
{
    double acc = 0.0;
    for (const auto& s : spans) acc += s.fiber.beta2_ps2_per_km * s.fiber.length_km;
    return acc;
}

LinkSpec LinkSpec::uniform(int count, const FiberSpanSpec& fiber, double noise_figure_db, bool ase,
                           double launch_power_dbm, double center_frequency_thz)
{
    require(count >= 1, "link error", "span count must be positive");
    LinkSpec link;
    link.launch_power_dbm = launch_power_dbm;
    AmplifierSpec amp;
    amp.gain_db = fiber.alpha_db_per_km * fiber.length_km;
    amp.noise_figure_db = noise_figure_db;
    amp.noise_enabled = ase;
    amp.center_frequency_thz = center_frequency_thz;
    link.spans.assign(static_cast<std::size_t>(count), LinkSpan{fiber, amp});
    return link;
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

SampledWaveform set_launch_power(const SampledWaveform& w, double p_dbm)
{
    const double p = w.mean_power();
    require(p > 0.0, "cannot scale", "signal is all zero");
    const double g = std::sqrt(dbm_to_watts(p_dbm) / p);
    SampledWaveform out = w;
    for (auto& pol : out.pols)
        for (auto& s : pol) s *= g;
    return out;
}

namespace detail {

double midpoint_effective_length(double alpha_per_km, double h_km)
{
    const double a = std::abs(alpha_per_km);
    if (a * h_km < 1e-12) return h_km;
    return 2.0 * std::sinh(a * h_km / 2.0) / a;
}

void split_step(std::vector<CVector>& pols, double sample_rate, double length_km, int steps,
                double field_exponent_per_km, double beta2_ps2_per_km, double gamma_per_w_km,
                PropagationDiagnostics* diag)
{
    require(steps >= 1, "link error", "need at least one step");
    const std::size_t n = pols.front().size();
    const double h = length_km / steps;

    std::vector<cdouble> half(n);
    std::vector<cdouble> full(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double w = bin_angular_frequency(k, n, sample_rate);
        const cdouble op(field_exponent_per_km, 0.5 * beta2_ps2_per_km * w * w);
        half[k] = std::exp(op * (h / 2.0));
        full[k] = std::exp(op * h);
    }

    const bool coupled = pols.size() == 2;
    const double gamma_eff = coupled ? gamma_per_w_km * 8.0 / 9.0 : gamma_per_w_km;
    const double nl_length = midpoint_effective_length(2.0 * field_exponent_per_km, h);
    const bool nonlinear = gamma_per_w_km != 0.0;

    std::vector<FftPlan> plans;
    plans.reserve(pols.size());
    for (std::size_t p = 0; p < pols.size(); ++p) {
        plans.emplace_back(n);
        auto buf = plans[p].buffer();
        std::copy(pols[p].begin(), pols[p].end(), buf.begin());
        plans[p].forward();
        for (std::size_t k = 0; k < n; ++k) buf[k] *= half[k];
    }

    std::vector<double> intensity(n);
    double max_phase = 0.0;
    for (int s = 0; s < steps; ++s) {
        const auto& lin = s + 1 == steps ? half : full;
        if (nonlinear) {
            std::fill(intensity.begin(), intensity.end(), 0.0);
            for (auto& plan : plans) {
                plan.inverse();
                auto buf = plan.buffer();
                for (std::size_t k = 0; k < n; ++k) intensity[k] += std::norm(buf[k]);
            }
            const double scale = gamma_eff * nl_length;
            double peak = 0.0;
            for (auto& plan : plans) {
                auto buf = plan.buffer();
                for (std::size_t k = 0; k < n; ++k) buf[k] *= std::polar(1.0, scale * intensity[k]);
            }
            for (double v : intensity) peak = std::max(peak, v);
            max_phase = std::max(max_phase, std::abs(scale) * peak);
            for (auto& plan : plans) {
                plan.forward();
                auto buf = plan.buffer();
                for (std::size_t k = 0; k < n; ++k) buf[k] *= lin[k];
            }
        } else {
            for (auto& plan : plans) {
                auto buf = plan.buffer();
                for (std::size_t k = 0; k < n; ++k) buf[k] *= lin[k];
            }
        }
    }

    for (std::size_t p = 0; p < pols.size(); ++p) {
        plans[p].inverse();
        auto buf = plans[p].buffer();
        std::copy(buf.begin(), buf.end(), pols[p].begin());
    }

    if (diag != nullptr) {
        diag->max_step_phase = std::max(diag->max_step_phase, max_phase);
        if (max_phase > kStepPhaseWarning) {
            std::ostringstream msg;
            msg << "accuracy warning: nonlinear phase per step " << max_phase << " rad exceeds "
                << kStepPhaseWarning << " rad; reduce the step size";
            diag->warnings.push_back(msg.str());
        }
    }
}

} // namespace detail

SampledWaveform propagate_span(const SampledWaveform& w, const FiberSpanSpec& span,
                               PropagationDiagnostics* diag)
{
    span.validate();
    require(w.length() > 0, "waveform error", "empty waveform");
    SampledWaveform out = w;
    detail::split_step(out.pols, w.sample_rate, span.length_km, span.steps(),
                       -span.alpha_per_km() / 2.0, span.beta2_ps2_per_km, span.gamma_per_w_km,
                       diag);
    return out;
}

SampledWaveform amplify(const SampledWaveform& w, const AmplifierSpec& amp, std::uint64_t rng_seed)
{
    amp.validate();
    SampledWaveform out = w;
    const double g = std::pow(10.0, amp.gain_db / 20.0);
    for (auto& pol : out.pols)
        for (auto& s : pol) s *= g;

    const double psd = amp.ase_psd();
    if (psd <= 0.0) return out;
    const double sigma = std::sqrt(psd * w.sample_rate / 2.0); // per quadrature
    Rng rng(rng_seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto& pol : out.pols)
        for (auto& s : pol) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            s += cdouble(re, im);
        }
    return out;
}

SampledWaveform propagate_link(const SampledWaveform& w, const LinkSpec& link,
                               std::uint64_t rng_seed, PropagationDiagnostics* diag)
{
    link.validate();
    SampledWaveform cur = w;
    for (std::size_t i = 0; i < link.spans.size(); ++i) {
        cur = propagate_span(cur, link.spans[i].fiber, diag);
        cur = amplify(cur, link.spans[i].amplifier, substream_seed(rng_seed, i));
    }
    return cur;
}

} // namespace nlc
