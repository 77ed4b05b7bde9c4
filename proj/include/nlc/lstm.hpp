#pragma once

#include "nlc/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace nlc {

/// Dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double* row(std::size_t r) { return data.data() + r * cols; }
};

/// One unidirectional LSTM. Every gate matrix is n_hidden x (n_hidden +
/// n_input) and multiplies the concatenation [h_{t-1}, x_t]; the first
/// n_hidden columns are the recurrent ones.
struct LstmParams {
    std::size_t n_input = 0;
    std::size_t n_hidden = 0;
    Matrix w_f, w_i, w_c, w_o;
    std::vector<double> b_f, b_i, b_c, b_o;

    static LstmParams zeros(std::size_t n_input, std::size_t n_hidden);
    void validate() const;
    std::size_t parameter_count() const;
};

struct LstmState {
    std::vector<double> h;
    std::vector<double> c;

    static LstmState zero(std::size_t n_hidden);
};

/// Output layer: w_out is n_out x n_fcl_in.
struct FclParams {
    Matrix w_out;
    std::vector<double> b_out;

    static FclParams zeros(std::size_t n_out, std::size_t n_in);
    std::size_t n_in() const { return w_out.cols; }
    std::size_t n_out() const { return w_out.rows; }
    void validate() const;
};

/// Real-multiplication instrumentation. The LSTM step charges its gate
/// matrix products and its three elementwise products; the FCL charges its
/// matrix product. Nonlinearities and additions are free.
struct OpCounter {
    std::uint64_t lstm_steps = 0;
    std::uint64_t fcl_calls = 0;
    std::uint64_t lstm_multiplications = 0;
    std::uint64_t fcl_multiplications = 0;

    std::uint64_t multiplications() const { return lstm_multiplications + fcl_multiplications; }
    OpCounter& operator+=(const OpCounter& o);
};

LstmState lstm_step(const LstmParams& p, const LstmState& s, std::span<const double> x,
                    OpCounter* counter = nullptr);

/// Left fold of lstm_step; returns the state after every step.
std::vector<LstmState> lstm_run(const LstmParams& p, const LstmState& init,
                                std::span<const std::vector<double>> xs,
                                OpCounter* counter = nullptr);

std::vector<double> fcl(const FclParams& p, std::span<const double> features,
                        OpCounter* counter = nullptr);

// ---------------------------------------------------------------------------
// Two-direction networks over a symbol window, and their gradients.

/// How the two LSTMs read a window of L_T = 2k + 1 input vectors.
///  bidirectional:   first runs x_0..x_{2k}, second runs x_{2k}..x_0, and the
///                   FCL sees all 2 L_T hidden states.
///  center_oriented: first runs x_0..x_k, second runs x_{2k}..x_k, and the
///                   FCL sees the two final hidden states.
enum class WindowLayout { bidirectional, center_oriented };

struct DualLstm {
    LstmParams first;  // forward / left
    LstmParams second; // backward / right
    FclParams fcl;

    static DualLstm zeros(WindowLayout layout, std::size_t n_input, std::size_t n_hidden,
                          std::size_t window_length, std::size_t n_out = 2);
    std::size_t parameter_count() const;
    void validate() const;
};

std::size_t fcl_input_size(WindowLayout layout, std::size_t n_hidden, std::size_t window_length);

/// Mutable views of every parameter array, in checkpoint order.
std::vector<std::span<double>> parameter_blocks(DualLstm& net);
std::vector<std::span<const double>> parameter_blocks(const DualLstm& net);

/// A window is L_T pointers, each to n_input doubles, in time order.
using WindowView = std::span<const double* const>;

/// Scratch space reused across forward_window / bptt_window calls.
struct BpttWorkspace {
    struct Step {
        std::vector<double> z; // [h_{t-1}, x_t]
        std::vector<double> f, i, g, o, c_prev, c, tanh_c, h;
    };
    std::vector<Step> first, second;
    std::vector<double> features, dfeatures;
};

/// lstm_step that keeps every intermediate in `out` (out.h, out.c are the new state).
void lstm_step_traced(const LstmParams& p, std::span<const double> h_prev,
                      std::span<const double> c_prev, const double* x, BpttWorkspace::Step& out,
                      OpCounter* counter = nullptr);

std::vector<double> forward_window(const DualLstm& net, WindowLayout layout, WindowView window,
                                   OpCounter* counter = nullptr);
/// Initial (h, c) of the two LSTMs for one window; empty spans mean zero.
struct WindowStart {
    std::span<const double> first_h, first_c, second_h, second_c;
};

std::vector<double> forward_window(const DualLstm& net, WindowLayout layout, WindowView window,
                                   BpttWorkspace& ws, OpCounter* counter = nullptr,
                                   const WindowStart* start = nullptr);

/// Loss (mean squared error over the n_out outputs) of one window against
/// `target`, with reverse-mode gradients through every step of the window
/// *added* into `grads`. A non-null `start` sets the initial states, which
/// are treated as constants.
double bptt_window(const DualLstm& net, WindowLayout layout, WindowView window,
                   std::span<const double> target, DualLstm& grads, BpttWorkspace& ws,
                   const WindowStart* start = nullptr);

// ---------------------------------------------------------------------------
// Training support.

struct OptimizerState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

/// Bias-corrected adaptive-moment update. `grads` are scaled by `grad_scale`
/// (e.g. 1/batch) before use.
void optimizer_step(OptimizerState& opt, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads, double grad_scale = 1.0);

/// Weights uniform in +-1/sqrt(fan_in), biases zero except the forget gate (1.0).
void initialize(DualLstm& net, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CEQM1 checkpoints.

struct CheckpointShape {
    std::uint32_t n_input = 0;
    std::uint32_t n_hidden = 0;
    std::uint32_t n_fcl_in = 0;
    std::uint32_t n_out = 0;

    bool operator==(const CheckpointShape&) const = default;
};

CheckpointShape checkpoint_shape(const DualLstm& net);
void save_checkpoint(const std::filesystem::path& path, const DualLstm& net);
DualLstm load_checkpoint(const std::filesystem::path& path);
/// Throws "dimension mismatch" when the stored shape differs from `expected`.
DualLstm load_checkpoint(const std::filesystem::path& path, const CheckpointShape& expected);

} // namespace nlc
