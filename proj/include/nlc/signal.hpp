#pragma once

#include "nlc/types.hpp"

#include <array>
#include <cstddef>
#include <span>

namespace nlc {

enum class SymbolRole { transmitted, received, equalized };

struct SymbolSequence {
    CVector symbols;
    SymbolRole role = SymbolRole::transmitted;

    std::size_t size() const noexcept { return symbols.size(); }
};

/// Gray-labelled square 16-QAM at unit average power.
///
/// Point index equals the integer value of its 4-bit label (first bit is the
/// MSB). The first two bits select the in-phase level and the last two the
/// quadrature level, each via the 2-bit Gray code 00,01,11,10 -> -3,-1,+1,+3
/// (scaled by 1/sqrt(10)).
class ConstellationMap {
public:
    static ConstellationMap qam16();

    int order() const noexcept { return static_cast<int>(points_.size()); }
    int bits_per_symbol() const noexcept { return bits_per_symbol_; }
    const std::vector<cdouble>& points() const noexcept { return points_; }
    /// Label of point `index`, MSB first.
    Bits label(int index) const;
    double min_distance() const;

private:
    std::vector<cdouble> points_;
    int bits_per_symbol_ = 0;
};

struct MetricsReport {
    std::size_t bit_errors = 0;
    std::size_t bits_total = 0;
    double ber = 0.0;
    /// Q^2 in dB. When no errors were counted this is the floor evaluated at
    /// BER = 1/bits_total and `error_free` is set.
    double q2_db = 0.0;
    double evm_pct = 0.0;
    bool error_free = false;
};

SymbolSequence map_bits(std::span<const std::uint8_t> bits, const ConstellationMap& map);

/// Nearest-point decisions; exact ties go to the lowest point index.
Bits hard_decide(std::span<const cdouble> rx, const ConstellationMap& map);

/// Q^2 = 20 log10(sqrt(2) erfcinv(2 BER)), defined on 0 < ber < 0.5.
double q2_from_ber(double ber);
double ber_from_q2(double q2_db);

/// RMS error over RMS reference magnitude, in percent.
double evm_percent(std::span<const cdouble> rx, std::span<const cdouble> reference);

/// Error-counting metrics of `rx` against the transmitted symbols.
MetricsReport measure(std::span<const cdouble> rx, std::span<const cdouble> tx,
                      const ConstellationMap& map);

} // namespace nlc
