#include "nlc/compensation.hpp"

#include "nlc/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace nlc {

double dispersion_memory_samples(double beta2_ps2_per_km, double length_km, double sample_rate)
{
    const double bandwidth_rad_per_ps = 2.0 * std::numbers::pi * sample_rate * 1e-12;
    const double spread_ps = std::abs(beta2_ps2_per_km) * length_km * bandwidth_rad_per_ps;
    return spread_ps * sample_rate * 1e-12;
}

void DbpSpec::validate(const SampledWaveform& w, const LinkSpec& link) const
{
    require(steps_per_span >= 1, "configuration error", "steps_per_span must be >= 1");
    require(oversampling >= 2, "configuration error", "oversampling must be >= 2");
    require(fft_size > 0 && std::has_single_bit(static_cast<unsigned>(fft_size)),
            "configuration error", "fft_size must be a power of two");
    require(w.sps() == oversampling, "configuration error",
            "waveform has " + std::to_string(w.sps()) + " samples/symbol, DBP expects " +
                std::to_string(oversampling));
    for (const auto& s : link.spans) {
        const double memory = dispersion_memory_samples(
            s.fiber.beta2_ps2_per_km, s.fiber.length_km / steps_per_span, w.sample_rate);
        require(fft_size >= 2.0 * memory, "configuration error",
                "fft_size " + std::to_string(fft_size) + " is shorter than twice the per-step "
                "dispersive memory of " + std::to_string(memory) + " samples");
    }
}

SampledWaveform cdc(const SampledWaveform& w, double accumulated_dispersion_ps2)
{
    SampledWaveform out = w;
    if (accumulated_dispersion_ps2 == 0.0) return out;
    const std::size_t n = w.length();
    FftPlan plan(n);
    for (auto& pol : out.pols) {
        auto buf = plan.buffer();
        std::copy(pol.begin(), pol.end(), buf.begin());
        plan.forward();
        for (std::size_t k = 0; k < n; ++k) {
            const double om = bin_angular_frequency(k, n, w.sample_rate);
            buf[k] *= std::polar(1.0, -0.5 * accumulated_dispersion_ps2 * om * om);
        }
        plan.inverse();
        std::copy(buf.begin(), buf.end(), pol.begin());
    }
    return out;
}

SampledWaveform cdc(const SampledWaveform& w, const LinkSpec& link)
{
    link.validate();
    return cdc(w, link.accumulated_dispersion_ps2());
}

SampledWaveform dbp(const SampledWaveform& w, const LinkSpec& link, const DbpSpec& spec)
{
    link.validate();
    spec.validate(w, link);
    SampledWaveform out = w;
    for (auto it = link.spans.rbegin(); it != link.spans.rend(); ++it) {
        const double g = std::pow(10.0, -it->amplifier.gain_db / 20.0);
        for (auto& pol : out.pols)
            for (auto& s : pol) s *= g;
        const auto& f = it->fiber;
        detail::split_step(out.pols, out.sample_rate, f.length_km, spec.steps_per_span,
                           f.alpha_per_km() / 2.0, -f.beta2_ps2_per_km, -f.gamma_per_w_km,
                           nullptr);
    }
    return out;
}

} // namespace nlc
