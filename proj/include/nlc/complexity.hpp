#pragma once

#include "nlc/lstm.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nlc {

enum class Scheme { bi, co_standard, co_simplified, dbp, cdc };

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& name);

/// Real-multiplication counting rules. The defaults reproduce the LSTM
/// per-step count C_L = 4 n_h (n_in + n_h) + 3 n_h exactly.
struct CountingConvention {
    int real_mults_per_complex_mult = 4;
    int elementwise_products_per_hidden = 3;
    /// Charge for one sigma/tanh evaluation (0: not counted). A step
    /// evaluates 5 n_h of them.
    double activation_cost = 0.0;

    double lstm_step(int n_input, int n_hidden) const;
};

struct ComplexityInputs {
    int modulation_order = 16;
    int window_length = 21; // L_T
    int block_length = 30000;
    int n_input = 4;
    int n_hidden = 16;
    int n_span = 20;
    int n_step = 1;
    int n_up = 2;
    int n_fft = 4096;
};

/// C_L.
std::uint64_t c_l(int n_input, int n_hidden);

/// Real multiplications per bit of an LSTM scheme (bi / co_standard / co_simplified).
double rmpb(Scheme scheme, int modulation_order, int window_length, int block_length, int n_input,
            int n_hidden);

/// DBP real multiplications per bit.
double dbp_rmpb(int modulation_order, int n_span, int n_step, int n_up, int n_fft);

/// CDC modelled as a single dispersion step (n_span * n_step = 1).
double cdc_rmpb(int modulation_order, int n_up, int n_fft);

/// Dispatch over all schemes.
double rmpb(Scheme scheme, const ComplexityInputs& in);

struct ComplexityReport {
    Scheme scheme = Scheme::co_simplified;
    ComplexityInputs inputs;
    double analytic_rmpb = 0.0;
    double instrumented_rmpb = 0.0;
    std::uint64_t lstm_steps = 0;
    std::uint64_t fcl_calls = 0;
    std::uint64_t multiplications = 0;
    std::uint64_t output_symbols = 0;
    bool passed = false;
    std::string detail;
};

/// Compares an instrumented equalization run (counter collected over
/// `output_symbols` equalized symbols) with the analytic formula. The check
/// passes when the relative difference is at most `tolerance`.
ComplexityReport audit(Scheme scheme, const ComplexityInputs& inputs, const OpCounter& counter,
                       std::uint64_t output_symbols, double tolerance = 0.01);

/// One CSV row per (scheme, L_T): scheme,L_T,L_B,analytic_rmpb,instrumented_rmpb,ratio_to_bi.
/// instrumented_rmpb is left empty for formula-only rows.
struct ComplexityRow {
    Scheme scheme;
    int window_length;
    int block_length;
    double analytic_rmpb;
    std::optional<double> instrumented_rmpb;
    double ratio_to_bi;
};

std::string complexity_csv_header();
std::string complexity_csv_row(const ComplexityRow& row);

/// Formula table over a grid of tap lengths for the LSTM schemes, plus
/// DBP/CDC rows (which do not depend on L_T).
std::vector<ComplexityRow> complexity_table(const ComplexityInputs& base,
                                            const std::vector<int>& window_lengths);

} // namespace nlc
