#include "nlc/waveform.hpp"

#include "nlc/binary_io.hpp"
#include "nlc/fft.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace nlc {

int SampledWaveform::sps() const
{
    require(symbol_rate > 0.0 && sample_rate > 0.0, "waveform error", "rates must be positive");
    const double ratio = sample_rate / symbol_rate;
    const double rounded = std::round(ratio);
    require(rounded >= 1.0 && std::abs(ratio - rounded) < 1e-9 * ratio, "waveform error",
            "sample_rate / symbol_rate = " + std::to_string(ratio) + " is not an integer");
    return static_cast<int>(rounded);
}

double SampledWaveform::mean_power() const
{
    if (length() == 0) return 0.0;
    double acc = 0.0;
    for (const auto& p : pols)
        for (const auto& s : p) acc += std::norm(s);
    return acc / static_cast<double>(length());
}

std::vector<double> rrc_taps(const PulseShapeSpec& spec)
{
    require(spec.sps >= 1, "shape error", "sps must be positive");
    require(spec.filter_span > 0 && spec.filter_span % 2 == 0, "shape error",
            "filter span must be a positive even number of symbols");
    require(spec.rolloff > 0.0 && spec.rolloff <= 1.0, "shape error", "rolloff must be in (0, 1]");

    const double beta = spec.rolloff;
    const int n = spec.filter_span * spec.sps + 1;
    const int mid = n / 2;
    const double pi = std::numbers::pi;
    std::vector<double> h(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i - mid) / spec.sps; // in symbols
        double v;
        if (i == mid) {
            v = 1.0 - beta + 4.0 * beta / pi;
        } else if (std::abs(std::abs(4.0 * beta * t) - 1.0) < 1e-9) {
            v = beta / std::sqrt(2.0) *
                ((1.0 + 2.0 / pi) * std::sin(pi / (4.0 * beta)) +
                 (1.0 - 2.0 / pi) * std::cos(pi / (4.0 * beta)));
        } else {
            const double num =
                std::sin(pi * t * (1.0 - beta)) + 4.0 * beta * t * std::cos(pi * t * (1.0 + beta));
            const double den = pi * t * (1.0 - (4.0 * beta * t) * (4.0 * beta * t));
            v = num / den;
        }
        h[static_cast<std::size_t>(i)] = v;
    }
    const double energy = std::inner_product(h.begin(), h.end(), h.begin(), 0.0);
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : h) v *= scale;
    return h;
}

int rrc_delay(const PulseShapeSpec& spec) { return spec.filter_span * spec.sps / 2; }

SampledWaveform shape(std::span<const SymbolSequence> pols, const PulseShapeSpec& spec,
                      double symbol_rate)
{
    require(spec.sps >= 2, "aliasing error",
            "shaping needs sps >= 2, got " + std::to_string(spec.sps));
    require(!pols.empty(), "shape error", "no polarizations given");
    const auto h = rrc_taps(spec);
    const std::size_t taps = h.size();
    const auto sps = static_cast<std::size_t>(spec.sps);

    SampledWaveform w;
    w.symbol_rate = symbol_rate;
    w.sample_rate = symbol_rate * spec.sps;
    for (const auto& seq : pols) {
        require(seq.size() == pols.front().size(), "shape error",
                "polarizations must have equal symbol counts");
        CVector out(seq.size() * sps + taps - 1, cdouble{});
        // Polyphase form: each symbol contributes a scaled copy of the taps.
        for (std::size_t n = 0; n < seq.size(); ++n) {
            const cdouble s = seq.symbols[n];
            if (s == cdouble{}) continue;
            cdouble* dst = out.data() + n * sps;
            for (std::size_t j = 0; j < taps; ++j) dst[j] += s * h[j];
        }
        w.pols.push_back(std::move(out));
    }
    return w;
}

SampledWaveform shape(const SymbolSequence& tx, const PulseShapeSpec& spec, double symbol_rate)
{
    return shape(std::span<const SymbolSequence>(&tx, 1), spec, symbol_rate);
}

std::vector<SymbolSequence> matched_filter(const SampledWaveform& rx, const PulseShapeSpec& spec,
                                           std::ptrdiff_t delay_samples)
{
    require(rx.sps() == spec.sps, "shape error",
            "waveform sps " + std::to_string(rx.sps()) + " does not match filter sps " +
                std::to_string(spec.sps));
    const auto h = rrc_taps(spec);
    const auto taps = static_cast<std::ptrdiff_t>(h.size());
    const auto len = static_cast<std::ptrdiff_t>(rx.length());
    const std::ptrdiff_t sps = spec.sps;
    require(delay_samples >= 0, "insufficient data", "negative delay");
    require(len - delay_samples >= taps, "insufficient data",
            "waveform of " + std::to_string(len) + " samples is shorter than the filter span");
    const std::ptrdiff_t count = (len - delay_samples - taps) / sps + 1;

    std::vector<SymbolSequence> out;
    for (const auto& pol : rx.pols) {
        SymbolSequence seq;
        seq.role = SymbolRole::received;
        seq.symbols.resize(static_cast<std::size_t>(count));
        double power = 0.0;
        for (std::ptrdiff_t n = 0; n < count; ++n) {
            // Symmetric taps: correlation equals convolution.
            const cdouble* src = pol.data() + delay_samples + n * sps;
            cdouble acc{};
            for (std::ptrdiff_t j = 0; j < taps; ++j) acc += src[j] * h[static_cast<std::size_t>(j)];
            seq.symbols[static_cast<std::size_t>(n)] = acc;
            power += std::norm(acc);
        }
        power /= static_cast<double>(count);
        if (power > 0.0) {
            const double g = 1.0 / std::sqrt(power);
            for (auto& s : seq.symbols) s *= g;
        }
        out.push_back(std::move(seq));
    }
    return out;
}

SampledWaveform resample(const SampledWaveform& w, int new_sps)
{
    const int old_sps = w.sps();
    require(new_sps >= 2, "aliasing error",
            std::to_string(new_sps) + " samples/symbol aliases the occupied band");
    if (new_sps == old_sps) return w;

    const std::size_t n = w.length();
    require((n * static_cast<std::size_t>(new_sps)) % static_cast<std::size_t>(old_sps) == 0,
            "resample error", "length " + std::to_string(n) + " does not resample to an integer count");
    const std::size_t m = n * static_cast<std::size_t>(new_sps) / static_cast<std::size_t>(old_sps);

    FftPlan src(n);
    FftPlan dst(m);
    SampledWaveform out;
    out.symbol_rate = w.symbol_rate;
    out.sample_rate = w.symbol_rate * new_sps;
    const std::size_t half = std::min(n, m) / 2; // bins |k| < half copied directly
    const bool even_nyquist = std::min(n, m) % 2 == 0;
    for (const auto& pol : w.pols) {
        auto x = src.buffer();
        std::copy(pol.begin(), pol.end(), x.begin());
        src.forward();
        auto y = dst.buffer();
        std::fill(y.begin(), y.end(), cdouble{});
        const std::size_t upper = half + (even_nyquist ? 0 : 1);
        for (std::size_t k = 0; k < upper; ++k) y[k] = x[k];
        for (std::size_t k = 1; k < upper; ++k) y[m - k] = x[n - k];
        if (even_nyquist) {
            if (m > n) {
                y[half] = 0.5 * x[half];
                y[m - half] = 0.5 * x[half];
            } else {
                y[half] = x[half] + x[n - half];
            }
        }
        dst.inverse();
        const double scale = static_cast<double>(m) / static_cast<double>(n);
        CVector res(m);
        for (std::size_t k = 0; k < m; ++k) res[k] = y[k] * scale;
        out.pols.push_back(std::move(res));
    }
    return out;
}

namespace {
constexpr std::string_view kWaveMagic = "CEQW1";
}

void write_waveform(const std::filesystem::path& path, const SampledWaveform& w)
{
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "io error", "cannot open " + path.string() + " for writing");
    binio::put_magic(os, kWaveMagic);
    binio::put_le<std::uint64_t>(os, w.polarizations());
    binio::put_le<std::uint64_t>(os, w.length());
    binio::put_f64(os, w.sample_rate);
    binio::put_f64(os, w.symbol_rate);
    for (const auto& pol : w.pols)
        for (const auto& s : pol) {
            binio::put_f64(os, s.real());
            binio::put_f64(os, s.imag());
        }
    require(static_cast<bool>(os), "io error", "write failed for " + path.string());
}

SampledWaveform read_waveform(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io error", "cannot open " + path.string());
    binio::expect_magic(is, kWaveMagic);
    const auto npol = binio::get_le<std::uint64_t>(is, "polarization count");
    const auto nsamp = binio::get_le<std::uint64_t>(is, "sample count");
    require(npol >= 1 && npol <= 2, "parse error",
            "polarization count must be 1 or 2, got " + std::to_string(npol));
    SampledWaveform w;
    w.sample_rate = binio::get_f64(is, "sample rate");
    w.symbol_rate = binio::get_f64(is, "symbol rate");
    w.pols.assign(npol, CVector(nsamp));
    for (auto& pol : w.pols)
        for (auto& s : pol) {
            const double re = binio::get_f64(is, "samples");
            const double im = binio::get_f64(is, "samples");
            s = {re, im};
        }
    binio::expect_eof(is);
    return w;
}

} // namespace nlc
