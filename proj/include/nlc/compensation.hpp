#pragma once

#include "nlc/channel.hpp"
#include "nlc/waveform.hpp"

namespace nlc {

struct DbpSpec {
    int steps_per_span = 1;
    int oversampling = 2; // samples per symbol the back-propagation runs at
    int fft_size = 4096;

    /// Checks the spec against the waveform it will process: sps must equal
    /// `oversampling` and `fft_size` must be a power of two at least twice the
    /// dispersive memory (in samples) of one back-propagation step.
    void validate(const SampledWaveform& w, const LinkSpec& link) const;
};

/// Dispersive spread, in samples, of a `length_km` dispersion step across the
/// full simulated bandwidth.
double dispersion_memory_samples(double beta2_ps2_per_km, double length_km, double sample_rate);

/// All-pass removal of `accumulated_dispersion_ps2` (sum of beta2 * L).
SampledWaveform cdc(const SampledWaveform& w, double accumulated_dispersion_ps2);
SampledWaveform cdc(const SampledWaveform& w, const LinkSpec& link);

/// Span-by-span back-propagation in reverse order: deterministic amplifier
/// gain removal, then the fiber solved with negated alpha, beta2 and gamma
/// using `steps_per_span` symmetric split steps.
SampledWaveform dbp(const SampledWaveform& w, const LinkSpec& link, const DbpSpec& spec);

} // namespace nlc
