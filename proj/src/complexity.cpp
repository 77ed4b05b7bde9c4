#include "nlc/complexity.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <sstream>

namespace nlc {

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::bi: return "bi";
    case Scheme::co_standard: return "co_standard";
    case Scheme::co_simplified: return "co_simplified";
    case Scheme::dbp: return "dbp";
    case Scheme::cdc: return "cdc";
    }
    return "unknown";
}

Scheme parse_scheme(const std::string& name)
{
    for (Scheme s : {Scheme::bi, Scheme::co_standard, Scheme::co_simplified, Scheme::dbp, Scheme::cdc})
        if (to_string(s) == name) return s;
    throw Error("domain error", "unknown scheme '" + name + "'");
}

double CountingConvention::lstm_step(int n_input, int n_hidden) const
{
    const double gates = 4.0 * n_hidden * (n_input + n_hidden);
    const double elementwise = static_cast<double>(elementwise_products_per_hidden) * n_hidden;
    return gates + elementwise + activation_cost * 5.0 * n_hidden;
}

std::uint64_t c_l(int n_input, int n_hidden)
{
    require(n_input > 0 && n_hidden > 0, "domain error", "C_L needs positive sizes");
    const auto ni = static_cast<std::uint64_t>(n_input);
    const auto nh = static_cast<std::uint64_t>(n_hidden);
    return 4 * nh * (ni + nh) + 3 * nh;
}

namespace {

double bits_per_symbol(int modulation_order)
{
    require(modulation_order >= 2 && std::has_single_bit(static_cast<unsigned>(modulation_order)),
            "domain error", "modulation order must be a power of two");
    return std::log2(static_cast<double>(modulation_order));
}

} // namespace

double rmpb(Scheme scheme, int modulation_order, int window_length, int block_length, int n_input,
            int n_hidden)
{
    const double bits = bits_per_symbol(modulation_order);
    require(window_length >= 1, "domain error", "L_T must be positive");
    const double cl = static_cast<double>(c_l(n_input, n_hidden));
    const double lt = window_length;
    const double nh = n_hidden;
    switch (scheme) {
    case Scheme::bi: return (2.0 * lt * cl + 4.0 * lt * nh) / bits;
    case Scheme::co_standard: return ((lt + 1.0) * cl + 4.0 * nh) / bits;
    case Scheme::co_simplified: {
        require(block_length > window_length - 1, "domain error",
                "simplified mode needs L_B > L_T - 1");
        const double lb = block_length;
        return (2.0 * lb / (lb - lt + 1.0) * cl + 4.0 * nh) / bits;
    }
    case Scheme::dbp:
    case Scheme::cdc: break;
    }
    throw Error("domain error", "rmpb: " + to_string(scheme) + " is not an LSTM scheme");
}

double dbp_rmpb(int modulation_order, int n_span, int n_step, int n_up, int n_fft)
{
    const double bits = bits_per_symbol(modulation_order);
    require(n_fft >= 2 && std::has_single_bit(static_cast<unsigned>(n_fft)), "domain error",
            "n_FFT must be a power of two");
    const double per_step = 2.0 * (std::log2(static_cast<double>(n_fft)) + 1.0) + 1.0;
    const CountingConvention conv;
    return conv.real_mults_per_complex_mult / bits * n_span * n_step * n_up * per_step;
}

double cdc_rmpb(int modulation_order, int n_up, int n_fft)
{
    return dbp_rmpb(modulation_order, 1, 1, n_up, n_fft);
}

double rmpb(Scheme scheme, const ComplexityInputs& in)
{
    switch (scheme) {
    case Scheme::dbp: return dbp_rmpb(in.modulation_order, in.n_span, in.n_step, in.n_up, in.n_fft);
    case Scheme::cdc: return cdc_rmpb(in.modulation_order, in.n_up, in.n_fft);
    default:
        return rmpb(scheme, in.modulation_order, in.window_length, in.block_length, in.n_input,
                    in.n_hidden);
    }
}

ComplexityReport audit(Scheme scheme, const ComplexityInputs& inputs, const OpCounter& counter,
                       std::uint64_t output_symbols, double tolerance)
{
    require(scheme == Scheme::bi || scheme == Scheme::co_standard || scheme == Scheme::co_simplified,
            "domain error", "only LSTM schemes are instrumented");
    require(output_symbols > 0, "domain error", "audit needs at least one equalized symbol");
    ComplexityReport r;
    r.scheme = scheme;
    r.inputs = inputs;
    r.analytic_rmpb = rmpb(scheme, inputs);
    r.lstm_steps = counter.lstm_steps;
    r.fcl_calls = counter.fcl_calls;
    r.multiplications = counter.multiplications();
    r.output_symbols = output_symbols;
    const double bits = static_cast<double>(output_symbols) * bits_per_symbol(inputs.modulation_order);
    r.instrumented_rmpb = static_cast<double>(r.multiplications) / bits;
    const double rel = std::abs(r.instrumented_rmpb - r.analytic_rmpb) / r.analytic_rmpb;
    r.passed = rel <= tolerance;

    std::ostringstream os;
    os << "lstm_steps=" << counter.lstm_steps << " lstm_mults=" << counter.lstm_multiplications
       << " fcl_calls=" << counter.fcl_calls << " fcl_mults=" << counter.fcl_multiplications
       << " symbols=" << output_symbols << " relative_difference=" << rel;
    r.detail = os.str();
    return r;
}

std::string complexity_csv_header()
{
    return "scheme,L_T,L_B,analytic_rmpb,instrumented_rmpb,ratio_to_bi";
}

namespace {

std::string fmt_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace

std::string complexity_csv_row(const ComplexityRow& row)
{
    std::string s = to_string(row.scheme) + "," + std::to_string(row.window_length) + "," +
                    std::to_string(row.block_length) + "," + fmt_double(row.analytic_rmpb) + ",";
    if (row.instrumented_rmpb) s += fmt_double(*row.instrumented_rmpb);
    s += "," + fmt_double(row.ratio_to_bi);
    return s;
}

std::vector<ComplexityRow> complexity_table(const ComplexityInputs& base,
                                            const std::vector<int>& window_lengths)
{
    std::vector<ComplexityRow> rows;
    for (int lt : window_lengths) {
        ComplexityInputs in = base;
        in.window_length = lt;
        const double bi = rmpb(Scheme::bi, in);
        for (Scheme s : {Scheme::bi, Scheme::co_standard, Scheme::co_simplified, Scheme::dbp,
                         Scheme::cdc}) {
            const double v = rmpb(s, in);
            rows.push_back({s, lt, base.block_length, v, std::nullopt, v / bi});
        }
    }
    return rows;
}

} // namespace nlc
