#pragma once

#include "nlc/lstm.hpp"
#include "nlc/signal.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nlc {

enum class EqualizerMode { bi, co_standard, co_simplified };

std::string to_string(EqualizerMode mode);
EqualizerMode parse_equalizer_mode(const std::string& name);

struct EqualizerSpec {
    EqualizerMode mode = EqualizerMode::co_simplified;
    int k = 10;               // single-side taps
    int n_input = 2;          // 2: one polarization (I, Q); 4: both polarizations
    int n_hidden = 16;
    int block_length = 30000; // L_B, simplified mode only

    int window_length() const { return 2 * k + 1; }
    WindowLayout layout() const;
    std::size_t fcl_inputs() const;
    void validate() const;
};

/// Received symbols flattened into per-symbol input vectors.
class FeatureSequence {
public:
    FeatureSequence() = default;
    /// n_input = 2 * pols.size(); the target polarization must come first.
    explicit FeatureSequence(std::span<const SymbolSequence> pols);
    explicit FeatureSequence(const SymbolSequence& rx);

    std::size_t size() const { return n_input_ == 0 ? 0 : data_.size() / n_input_; }
    std::size_t n_input() const { return n_input_; }
    const double* at(std::size_t n) const { return data_.data() + n * n_input_; }
    /// Sub-range [begin, end) as a new sequence.
    FeatureSequence slice(std::size_t begin, std::size_t end) const;

private:
    std::size_t n_input_ = 0;
    std::vector<double> data_;
};

/// The 2k+1 input vectors x_{n-k} .. x_{n+k}.
std::vector<std::vector<double>> feature_window(const FeatureSequence& rx, std::size_t n, int k);

struct EqualizedOutput {
    SymbolSequence symbols;
    /// Input indices [valid_begin, valid_end) that produced `symbols`.
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;
};

EqualizedOutput equalize_bi(const DualLstm& net, const EqualizerSpec& spec, const FeatureSequence& rx,
                            OpCounter* counter = nullptr);
EqualizedOutput equalize_co_standard(const DualLstm& net, const EqualizerSpec& spec,
                                     const FeatureSequence& rx, OpCounter* counter = nullptr);
/// One block of the simplified mode: 2 L_B recurrent steps (a full forward
/// pass of the left LSTM and a full backward pass of the right LSTM, each
/// state recycled into the next step), then one FCL per interior position.
EqualizedOutput equalize_co_simplified(const DualLstm& net, const EqualizerSpec& spec,
                                       const FeatureSequence& rx_block, OpCounter* counter = nullptr);

struct Block {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t valid_begin = 0;
    std::size_t valid_end = 0;
    bool short_block = false; // shorter than L_B
};

/// Blocks of length L_B overlapping by L_T - 1, so the valid ranges tile
/// [k, length - k) exactly once.
std::vector<Block> partition_blocks(std::size_t length, int block_length, int window_length);

/// Equalizes every fully-contexted symbol of `rx` with the configured mode
/// (the simplified mode runs block by block).
EqualizedOutput equalize(const DualLstm& net, const EqualizerSpec& spec, const FeatureSequence& rx,
                         OpCounter* counter = nullptr);

/// Mean L2 distance between the recycled (simplified-mode) left/right
/// hidden states and the freshly started standard-mode ones over the
/// interior of one block.
struct RecyclingDeviation {
    double left = 0.0;
    double right = 0.0;
};
RecyclingDeviation recycling_deviation(const DualLstm& net, const EqualizerSpec& spec,
                                       const FeatureSequence& rx_block);

// ---------------------------------------------------------------------------

struct TrainingConfig {
    std::size_t train_symbols = 20000;
    std::size_t test_symbols = 200000;
    std::uint64_t seed = 1;
    double learning_rate = 1e-3;
    /// When set, the rate follows a cosine from learning_rate down to this
    /// value over max_epochs. Otherwise it is constant.
    std::optional<double> final_learning_rate;
    std::size_t batch_size = 256;
    int max_epochs = 200;
    int patience = 10;
    double validation_fraction = 0.1;
    /// Co-LSTM only: share of training windows whose LSTMs start from the
    /// state a recycled (simplified-mode) pass holds at the window edge
    /// instead of from zero. Gradients still stop at the window.
    double recycled_start_fraction = 0.5;
    /// Batches between refreshes of those recycled states.
    int recycled_refresh_batches = 8;
};

struct TrainingReport {
    std::vector<double> train_loss;
    std::vector<double> validation_loss;
    int best_epoch = -1;
    int epochs_run = 0;
    bool early_stopped = false;
};

struct TrainedEqualizer {
    DualLstm net;
    TrainingReport report;
};

/// Trains on the windows centred on every fully-contexted index of `rx`
/// against `tx` (same length, aligned). Co-LSTM modes always train in the
/// standard (window) mode, optionally from recycled start states. Seeds: substreams "init" and "shuffle" of cfg.seed.
/// `on_epoch` (optional) is called after every epoch with (epoch, train, validation).
TrainedEqualizer train(const EqualizerSpec& spec, const TrainingConfig& cfg, const FeatureSequence& rx,
                       std::span<const cdouble> tx,
                       const std::function<void(int, double, double)>& on_epoch = {});

} // namespace nlc
