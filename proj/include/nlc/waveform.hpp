#pragma once

#include "nlc/signal.hpp"
#include "nlc/types.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace nlc {

/// Complex baseband samples, one array per polarization.
/// Field samples are in sqrt(W) once a launch power has been applied.
struct SampledWaveform {
    std::vector<CVector> pols;
    double sample_rate = 0.0; // Hz
    double symbol_rate = 0.0; // Hz

    std::size_t polarizations() const noexcept { return pols.size(); }
    std::size_t length() const noexcept { return pols.empty() ? 0 : pols.front().size(); }
    /// Integer samples per symbol; throws if sample_rate / symbol_rate is not integral.
    int sps() const;
    /// Mean |A|^2 summed over polarizations.
    double mean_power() const;
};

struct PulseShapeSpec {
    double rolloff = 0.01;
    int filter_span = 256; // symbols, even
    int sps = 4;
};

/// Root-raised-cosine taps (span * sps + 1 of them), unit energy, so that the
/// RRC-RRC cascade has unit gain at symbol instants.
std::vector<double> rrc_taps(const PulseShapeSpec& spec);

/// Delay in samples of one RRC filter (half its length).
int rrc_delay(const PulseShapeSpec& spec);

/// Upsample and filter. Output length is symbols * sps + taps - 1.
SampledWaveform shape(std::span<const SymbolSequence> pols, const PulseShapeSpec& spec,
                      double symbol_rate);
SampledWaveform shape(const SymbolSequence& tx, const PulseShapeSpec& spec, double symbol_rate);

/// Matched filter and symbol-rate sampling, one sequence per polarization.
///
/// Assumes the sample layout produced by shape(): symbol n of the original
/// sequence sits at sample `delay_samples + rrc_delay + n * sps`. Each output
/// sequence is normalized to unit mean power.
std::vector<SymbolSequence> matched_filter(const SampledWaveform& rx, const PulseShapeSpec& spec,
                                           std::ptrdiff_t delay_samples = 0);

/// Band-limited (FFT) resampling to `new_sps` samples per symbol.
SampledWaveform resample(const SampledWaveform& w, int new_sps);

/// CEQW1 waveform file I/O.
void write_waveform(const std::filesystem::path& path, const SampledWaveform& w);
SampledWaveform read_waveform(const std::filesystem::path& path);

} // namespace nlc
