#include "nlc/signal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>

namespace nlc {

namespace {

constexpr std::array<double, 4> kGrayLevels = {-3.0, -1.0, 3.0, 1.0}; // indexed by 2-bit label

} // namespace

ConstellationMap ConstellationMap::qam16()
{
    ConstellationMap map;
    map.bits_per_symbol_ = 4;
    map.points_.resize(16);
    const double scale = 1.0 / std::sqrt(10.0);
    for (int label = 0; label < 16; ++label) {
        const double re = kGrayLevels[static_cast<std::size_t>(label >> 2)];
        const double im = kGrayLevels[static_cast<std::size_t>(label & 3)];
        map.points_[static_cast<std::size_t>(label)] = cdouble(re, im) * scale;
    }
    return map;
}

Bits ConstellationMap::label(int index) const
{
    Bits out(static_cast<std::size_t>(bits_per_symbol_));
    for (int b = 0; b < bits_per_symbol_; ++b)
        out[static_cast<std::size_t>(b)] =
            static_cast<std::uint8_t>((index >> (bits_per_symbol_ - 1 - b)) & 1);
    return out;
}

double ConstellationMap::min_distance() const
{
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < points_.size(); ++a)
        for (std::size_t b = a + 1; b < points_.size(); ++b)
            best = std::min(best, std::abs(points_[a] - points_[b]));
    return best;
}

SymbolSequence map_bits(std::span<const std::uint8_t> bits, const ConstellationMap& map)
{
    const auto m = static_cast<std::size_t>(map.bits_per_symbol());
    require(bits.size() % m == 0, "length error",
            "bit count " + std::to_string(bits.size()) + " is not a multiple of " +
                std::to_string(m));
    SymbolSequence out;
    out.role = SymbolRole::transmitted;
    out.symbols.resize(bits.size() / m);
    for (std::size_t s = 0; s < out.symbols.size(); ++s) {
        int index = 0;
        for (std::size_t b = 0; b < m; ++b)
            index = (index << 1) | (bits[s * m + b] & 1);
        out.symbols[s] = map.points()[static_cast<std::size_t>(index)];
    }
    return out;
}

Bits hard_decide(std::span<const cdouble> rx, const ConstellationMap& map)
{
    const auto m = static_cast<std::size_t>(map.bits_per_symbol());
    const auto& pts = map.points();
    Bits out(rx.size() * m);
    for (std::size_t s = 0; s < rx.size(); ++s) {
        std::size_t best = 0;
        double best_d = std::norm(rx[s] - pts[0]);
        for (std::size_t p = 1; p < pts.size(); ++p) {
            const double d = std::norm(rx[s] - pts[p]);
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        for (std::size_t b = 0; b < m; ++b)
            out[s * m + b] = static_cast<std::uint8_t>((best >> (m - 1 - b)) & 1);
    }
    return out;
}

double q2_from_ber(double ber)
{
    require(ber > 0.0 && ber < 0.5, "domain error",
            "q2_from_ber requires 0 < ber < 0.5, got " + std::to_string(ber));
    const double q = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * ber);
    return 20.0 * std::log10(q);
}

double ber_from_q2(double q2_db)
{
    const double q = std::pow(10.0, q2_db / 20.0);
    return 0.5 * std::erfc(q / std::sqrt(2.0));
}

double evm_percent(std::span<const cdouble> rx, std::span<const cdouble> reference)
{
    require(rx.size() == reference.size(), "length error", "evm: size mismatch");
    require(!rx.empty(), "length error", "evm: empty input");
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        err += std::norm(rx[i] - reference[i]);
        ref += std::norm(reference[i]);
    }
    return 100.0 * std::sqrt(err / ref);
}

MetricsReport measure(std::span<const cdouble> rx, std::span<const cdouble> tx,
                      const ConstellationMap& map)
{
    require(rx.size() == tx.size(), "length error", "measure: size mismatch");
    require(!rx.empty(), "length error", "measure: empty input");
    const Bits rx_bits = hard_decide(rx, map);
    const Bits tx_bits = hard_decide(tx, map);

    MetricsReport r;
    r.bits_total = rx_bits.size();
    for (std::size_t i = 0; i < rx_bits.size(); ++i)
        r.bit_errors += rx_bits[i] != tx_bits[i];
    r.ber = static_cast<double>(r.bit_errors) / static_cast<double>(r.bits_total);
    r.error_free = r.bit_errors == 0;
    const double ber_for_q = r.error_free ? 1.0 / static_cast<double>(r.bits_total)
                                          : std::min(r.ber, 0.5 - 1e-12);
    r.q2_db = q2_from_ber(ber_for_q);
    r.evm_pct = evm_percent(rx, tx);
    return r;
}

} // namespace nlc
