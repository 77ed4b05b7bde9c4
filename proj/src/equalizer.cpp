#include "nlc/equalizer.hpp"

#include "nlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

namespace nlc {

std::string to_string(EqualizerMode mode)
{
    switch (mode) {
    case EqualizerMode::bi: return "bi";
    case EqualizerMode::co_standard: return "co_standard";
    case EqualizerMode::co_simplified: return "co_simplified";
    }
    return "unknown";
}

EqualizerMode parse_equalizer_mode(const std::string& name)
{
    if (name == "bi") return EqualizerMode::bi;
    if (name == "co_standard") return EqualizerMode::co_standard;
    if (name == "co_simplified") return EqualizerMode::co_simplified;
    throw Error("configuration error", "unknown equalizer mode '" + name + "'");
}

WindowLayout EqualizerSpec::layout() const
{
    return mode == EqualizerMode::bi ? WindowLayout::bidirectional : WindowLayout::center_oriented;
}

std::size_t EqualizerSpec::fcl_inputs() const
{
    return fcl_input_size(layout(), static_cast<std::size_t>(n_hidden),
                          static_cast<std::size_t>(window_length()));
}

void EqualizerSpec::validate() const
{
    require(k >= 0, "configuration error", "k must be non-negative");
    require(n_input == 2 || n_input == 4, "configuration error", "n_input must be 2 or 4");
    require(n_hidden >= 1, "configuration error", "n_hidden must be positive");
    if (mode == EqualizerMode::co_simplified)
        require(block_length > window_length(), "configuration error",
                "block length L_B must exceed the window length L_T");
}

// ---------------------------------------------------------------------------

FeatureSequence::FeatureSequence(std::span<const SymbolSequence> pols)
{
    require(!pols.empty() && pols.size() <= 2, "dimension error", "need one or two polarizations");
    n_input_ = 2 * pols.size();
    const std::size_t len = pols.front().size();
    for (const auto& p : pols)
        require(p.size() == len, "dimension error", "polarizations differ in length");
    data_.resize(len * n_input_);
    for (std::size_t n = 0; n < len; ++n)
        for (std::size_t p = 0; p < pols.size(); ++p) {
            data_[n * n_input_ + 2 * p] = pols[p].symbols[n].real();
            data_[n * n_input_ + 2 * p + 1] = pols[p].symbols[n].imag();
        }
}

FeatureSequence::FeatureSequence(const SymbolSequence& rx)
    : FeatureSequence(std::span<const SymbolSequence>(&rx, 1))
{
}

FeatureSequence FeatureSequence::slice(std::size_t begin, std::size_t end) const
{
    require(begin <= end && end <= size(), "boundary error", "slice out of range");
    FeatureSequence out;
    out.n_input_ = n_input_;
    out.data_.assign(data_.begin() + static_cast<std::ptrdiff_t>(begin * n_input_),
                     data_.begin() + static_cast<std::ptrdiff_t>(end * n_input_));
    return out;
}

std::vector<std::vector<double>> feature_window(const FeatureSequence& rx, std::size_t n, int k)
{
    require(k >= 0, "boundary error", "negative tap count");
    const auto ku = static_cast<std::size_t>(k);
    require(n >= ku && n + ku < rx.size(), "boundary error",
            "window around index " + std::to_string(n) + " leaves the sequence of length " +
                std::to_string(rx.size()));
    std::vector<std::vector<double>> out;
    out.reserve(2 * ku + 1);
    for (std::size_t j = n - ku; j <= n + ku; ++j)
        out.emplace_back(rx.at(j), rx.at(j) + rx.n_input());
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_model(const DualLstm& net, const EqualizerSpec& spec, const FeatureSequence& rx)
{
    spec.validate();
    require(net.first.n_input == rx.n_input() && net.first.n_input ==
                static_cast<std::size_t>(spec.n_input),
            "configuration error", "model n_input does not match the received features");
    require(net.first.n_hidden == static_cast<std::size_t>(spec.n_hidden), "configuration error",
            "model n_hidden does not match the equalizer spec");
    require(net.fcl.n_in() == spec.fcl_inputs(), "configuration error",
            "FCL input size " + std::to_string(net.fcl.n_in()) + " does not match the " +
                to_string(spec.mode) + " layout (" + std::to_string(spec.fcl_inputs()) + ")");
    require(net.fcl.n_out() == 2, "configuration error", "FCL must have 2 outputs (I, Q)");
    require(rx.size() >= static_cast<std::size_t>(spec.window_length()), "block-size error",
            "sequence of " + std::to_string(rx.size()) + " symbols is shorter than L_T");
}

EqualizedOutput equalize_windows(const DualLstm& net, const EqualizerSpec& spec,
                                 const FeatureSequence& rx, OpCounter* counter)
{
    check_model(net, spec, rx);
    const auto k = static_cast<std::size_t>(spec.k);
    const std::size_t lt = 2 * k + 1;
    EqualizedOutput out;
    out.valid_begin = k;
    out.valid_end = rx.size() - k;
    out.symbols.role = SymbolRole::equalized;
    out.symbols.symbols.reserve(out.valid_end - out.valid_begin);
    std::vector<const double*> window(lt);
    BpttWorkspace ws;
    for (std::size_t n = out.valid_begin; n < out.valid_end; ++n) {
        for (std::size_t j = 0; j < lt; ++j) window[j] = rx.at(n - k + j);
        const auto y = forward_window(net, spec.layout(), window, ws, counter);
        out.symbols.symbols.emplace_back(y[0], y[1]);
    }
    return out;
}

// Full pass of one LSTM over [begin, end) of rx in the given direction,
// recycling each state into the next step. Returns the hidden states
// indexed by position relative to `begin`.
std::vector<double> recycled_pass(const LstmParams& p, const FeatureSequence& rx, bool reverse,
                                  OpCounter* counter)
{
    const std::size_t nh = p.n_hidden;
    const std::size_t len = rx.size();
    std::vector<double> hs(len * nh);
    std::vector<double> h(nh, 0.0), c(nh, 0.0);
    BpttWorkspace::Step st;
    for (std::size_t t = 0; t < len; ++t) {
        const std::size_t pos = reverse ? len - 1 - t : t;
        lstm_step_traced(p, h, c, rx.at(pos), st, counter);
        h.swap(st.h);
        c.swap(st.c);
        std::copy(h.begin(), h.end(), hs.begin() + static_cast<std::ptrdiff_t>(pos * nh));
    }
    return hs;
}

} // namespace

EqualizedOutput equalize_bi(const DualLstm& net, const EqualizerSpec& spec, const FeatureSequence& rx,
                            OpCounter* counter)
{
    require(spec.mode == EqualizerMode::bi, "configuration error", "spec mode is not bi");
    return equalize_windows(net, spec, rx, counter);
}

EqualizedOutput equalize_co_standard(const DualLstm& net, const EqualizerSpec& spec,
                                     const FeatureSequence& rx, OpCounter* counter)
{
    require(spec.mode != EqualizerMode::bi, "configuration error", "spec mode is not a Co-LSTM mode");
    return equalize_windows(net, spec, rx, counter);
}

EqualizedOutput equalize_co_simplified(const DualLstm& net, const EqualizerSpec& spec,
                                       const FeatureSequence& rx_block, OpCounter* counter)
{
    require(spec.mode != EqualizerMode::bi, "configuration error", "spec mode is not a Co-LSTM mode");
    check_model(net, spec, rx_block);
    const std::size_t nh = net.first.n_hidden;
    const auto k = static_cast<std::size_t>(spec.k);

    // Stage 1: one forward and one backward pass over the block.
    const auto left = recycled_pass(net.first, rx_block, false, counter);
    const auto right = recycled_pass(net.second, rx_block, true, counter);

    // Stage 2: FCL on the concatenated states of each interior position.
    EqualizedOutput out;
    out.valid_begin = k;
    out.valid_end = rx_block.size() - k;
    out.symbols.role = SymbolRole::equalized;
    out.symbols.symbols.reserve(out.valid_end - out.valid_begin);
    std::vector<double> features(2 * nh);
    for (std::size_t n = out.valid_begin; n < out.valid_end; ++n) {
        std::copy_n(left.begin() + static_cast<std::ptrdiff_t>(n * nh), nh, features.begin());
        std::copy_n(right.begin() + static_cast<std::ptrdiff_t>(n * nh), nh,
                    features.begin() + static_cast<std::ptrdiff_t>(nh));
        const auto y = fcl(net.fcl, features, counter);
        out.symbols.symbols.emplace_back(y[0], y[1]);
    }
    return out;
}

std::vector<Block> partition_blocks(std::size_t length, int block_length, int window_length)
{
    require(window_length >= 1 && window_length % 2 == 1, "configuration error",
            "window length must be odd and positive");
    require(block_length > window_length, "configuration error", "L_B must exceed L_T");
    const auto lb = static_cast<std::size_t>(block_length);
    const auto lt = static_cast<std::size_t>(window_length);
    const std::size_t k = lt / 2;
    require(length >= lt, "block-size error",
            "sequence of " + std::to_string(length) + " symbols is shorter than L_T");

    std::vector<Block> blocks;
    const std::size_t stride = lb - lt + 1;
    for (std::size_t begin = 0;; begin += stride) {
        Block b;
        b.begin = begin;
        b.end = std::min(begin + lb, length);
        b.valid_begin = begin + k;
        b.valid_end = b.end - k;
        b.short_block = b.end - b.begin < lb;
        blocks.push_back(b);
        if (b.end == length) break;
    }
    return blocks;
}

EqualizedOutput equalize(const DualLstm& net, const EqualizerSpec& spec, const FeatureSequence& rx,
                         OpCounter* counter)
{
    switch (spec.mode) {
    case EqualizerMode::bi: return equalize_bi(net, spec, rx, counter);
    case EqualizerMode::co_standard: return equalize_co_standard(net, spec, rx, counter);
    case EqualizerMode::co_simplified: break;
    }
    check_model(net, spec, rx);
    EqualizedOutput out;
    out.symbols.role = SymbolRole::equalized;
    const auto blocks = partition_blocks(rx.size(), spec.block_length, spec.window_length());
    out.valid_begin = blocks.front().valid_begin;
    out.valid_end = blocks.back().valid_end;
    out.symbols.symbols.reserve(out.valid_end - out.valid_begin);
    for (const auto& b : blocks) {
        const auto part = equalize_co_simplified(net, spec, rx.slice(b.begin, b.end), counter);
        out.symbols.symbols.insert(out.symbols.symbols.end(), part.symbols.symbols.begin(),
                                   part.symbols.symbols.end());
    }
    return out;
}

RecyclingDeviation recycling_deviation(const DualLstm& net, const EqualizerSpec& spec,
                                       const FeatureSequence& rx_block)
{
    check_model(net, spec, rx_block);
    const std::size_t nh = net.first.n_hidden;
    const auto k = static_cast<std::size_t>(spec.k);
    const auto left = recycled_pass(net.first, rx_block, false, nullptr);
    const auto right = recycled_pass(net.second, rx_block, true, nullptr);

    RecyclingDeviation dev;
    std::vector<double> zero(nh, 0.0), h(nh), c(nh);
    BpttWorkspace::Step st;
    auto fresh = [&](const LstmParams& p, std::size_t from, std::size_t to_inclusive, bool rev) {
        std::fill(h.begin(), h.end(), 0.0);
        std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t t = 0; t <= (rev ? from - to_inclusive : to_inclusive - from); ++t) {
            const std::size_t pos = rev ? from - t : from + t;
            lstm_step_traced(p, h, c, rx_block.at(pos), st);
            h.swap(st.h);
            c.swap(st.c);
        }
    };
    const std::size_t begin = k, end = rx_block.size() - k;
    for (std::size_t n = begin; n < end; ++n) {
        fresh(net.first, n - k, n, false);
        double dl = 0.0;
        for (std::size_t r = 0; r < nh; ++r) dl += std::pow(h[r] - left[n * nh + r], 2);
        fresh(net.second, n + k, n, true);
        double dr = 0.0;
        for (std::size_t r = 0; r < nh; ++r) dr += std::pow(h[r] - right[n * nh + r], 2);
        dev.left += std::sqrt(dl);
        dev.right += std::sqrt(dr);
    }
    const auto count = static_cast<double>(end - begin);
    dev.left /= count;
    dev.right /= count;
    return dev;
}

// ---------------------------------------------------------------------------

TrainedEqualizer train(const EqualizerSpec& spec, const TrainingConfig& cfg, const FeatureSequence& rx,
                       std::span<const cdouble> tx,
                       const std::function<void(int, double, double)>& on_epoch)
{
    spec.validate();
    require(rx.n_input() == static_cast<std::size_t>(spec.n_input), "configuration error",
            "feature width does not match n_input");
    require(rx.size() == tx.size(), "training error", "rx and tx training symbols are not aligned");
    require(cfg.batch_size >= 1 && cfg.max_epochs >= 1, "configuration error",
            "batch size and epoch budget must be positive");
    require(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0, "configuration error",
            "validation fraction must be in (0, 1)");
    const auto k = static_cast<std::size_t>(spec.k);
    const std::size_t lt = 2 * k + 1;
    require(rx.size() >= lt + 2, "training error", "too few training symbols for the window");

    const WindowLayout layout = spec.layout();
    TrainedEqualizer result{DualLstm::zeros(layout, rx.n_input(), static_cast<std::size_t>(spec.n_hidden),
                                            lt),
                            {}};
    DualLstm& net = result.net;
    initialize(net, substream_seed(cfg.seed, "init"));

    // Window centres; the validation set is the contiguous tail.
    const std::size_t first = k, last = rx.size() - k;
    const std::size_t total = last - first;
    const auto n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(total))));
    require(n_val < total, "training error", "validation split leaves no training windows");
    std::vector<std::size_t> train_idx(total - n_val);
    std::iota(train_idx.begin(), train_idx.end(), first);
    std::vector<std::size_t> val_idx(n_val);
    std::iota(val_idx.begin(), val_idx.end(), first + total - n_val);

    std::vector<const double*> window(lt);
    auto load_window = [&](std::size_t n) {
        for (std::size_t j = 0; j < lt; ++j) window[j] = rx.at(n - k + j);
    };

    // States of full recycled passes, stored after each position.
    const bool recycle = layout == WindowLayout::center_oriented && cfg.recycled_start_fraction > 0.0;
    const std::size_t nh = static_cast<std::size_t>(spec.n_hidden);
    std::vector<double> left_h, left_c, right_h, right_c;
    auto recycled_pass_states = [&](const LstmParams& p, bool reverse, std::vector<double>& hs,
                                    std::vector<double>& cs) {
        const std::size_t len = rx.size();
        hs.assign(len * nh, 0.0);
        cs.assign(len * nh, 0.0);
        std::vector<double> h(nh, 0.0), c(nh, 0.0);
        BpttWorkspace::Step st;
        for (std::size_t t = 0; t < len; ++t) {
            const std::size_t pos = reverse ? len - 1 - t : t;
            lstm_step_traced(p, h, c, rx.at(pos), st);
            h.swap(st.h);
            c.swap(st.c);
            std::copy(h.begin(), h.end(), hs.begin() + static_cast<std::ptrdiff_t>(pos * nh));
            std::copy(c.begin(), c.end(), cs.begin() + static_cast<std::ptrdiff_t>(pos * nh));
        }
    };
    auto refresh = [&] {
        recycled_pass_states(net.first, false, left_h, left_c);
        recycled_pass_states(net.second, true, right_h, right_c);
    };
    // Start states for the window centred on n; positions outside rx are zero.
    auto start_of = [&](std::size_t n) {
        WindowStart s;
        auto at = [&](const std::vector<double>& v, std::size_t pos) {
            return std::span<const double>(v.data() + pos * nh, nh);
        };
        if (n >= k + 1) {
            s.first_h = at(left_h, n - k - 1);
            s.first_c = at(left_c, n - k - 1);
        }
        if (n + k + 1 < rx.size()) {
            s.second_h = at(right_h, n + k + 1);
            s.second_c = at(right_c, n + k + 1);
        }
        return s;
    };
    auto target_of = [&](std::size_t n) { return std::array<double, 2>{tx[n].real(), tx[n].imag()}; };

    OptimizerState opt;
    opt.learning_rate = cfg.learning_rate;
    DualLstm grads = DualLstm::zeros(layout, rx.n_input(), static_cast<std::size_t>(spec.n_hidden), lt);
    BpttWorkspace ws;
    DualLstm best = net;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Rng shuffle_rng(substream_seed(cfg.seed, "shuffle"));

    // With recycling, the validation loss mixes both start conditions in the training proportion.
    auto validation_loss = [&]() {
        if (recycle) refresh();
        double acc = 0.0;
        for (std::size_t n : val_idx) {
            load_window(n);
            const auto t = target_of(n);
            auto err = [&](const std::vector<double>& y) {
                return 0.5 * ((y[0] - t[0]) * (y[0] - t[0]) + (y[1] - t[1]) * (y[1] - t[1]));
            };
            if (recycle) {
                const WindowStart s = start_of(n);
                const double f = cfg.recycled_start_fraction;
                acc += f * err(forward_window(net, layout, window, ws, nullptr, &s));
                if (f < 1.0) acc += (1.0 - f) * err(forward_window(net, layout, window, ws));
            } else {
                acc += err(forward_window(net, layout, window, ws));
            }
        }
        return acc / static_cast<double>(val_idx.size());
    };
    const int refresh_every = std::max(1, cfg.recycled_refresh_batches);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (cfg.final_learning_rate && cfg.max_epochs > 1) {
            const double x = static_cast<double>(epoch) / static_cast<double>(cfg.max_epochs - 1);
            opt.learning_rate = *cfg.final_learning_rate +
                                0.5 * (cfg.learning_rate - *cfg.final_learning_rate) * (1.0 + std::cos(std::numbers::pi * x));
        }
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        double epoch_loss = 0.0;
        int batch = 0;
        for (std::size_t b0 = 0; b0 < train_idx.size(); b0 += cfg.batch_size, ++batch) {
            const std::size_t b1 = std::min(b0 + cfg.batch_size, train_idx.size());
            if (recycle && batch % refresh_every == 0) refresh();
            for (auto block : parameter_blocks(grads)) std::fill(block.begin(), block.end(), 0.0);
            for (std::size_t b = b0; b < b1; ++b) {
                load_window(train_idx[b]);
                const auto t = target_of(train_idx[b]);
                const bool from_recycled =
                    recycle && static_cast<double>(shuffle_rng() >> 11) * 0x1.0p-53 <
                                   cfg.recycled_start_fraction;
                const WindowStart s = from_recycled ? start_of(train_idx[b]) : WindowStart{};
                double loss;
                try {
                    loss = bptt_window(net, layout, window, t, grads, ws, from_recycled ? &s : nullptr);
                } catch (const Error& e) {
                    throw Error("training error", "divergence at epoch " + std::to_string(epoch) +
                                                      ": " + e.what());
                }
                epoch_loss += loss;
            }
            const auto pb = parameter_blocks(net);
            const auto gb = parameter_blocks(static_cast<const DualLstm&>(grads));
            optimizer_step(opt, pb, gb, 1.0 / static_cast<double>(b1 - b0));
        }
        epoch_loss /= static_cast<double>(train_idx.size());
        const double val = validation_loss();
        if (!std::isfinite(epoch_loss) || !std::isfinite(val))
            throw Error("training error", "non-finite loss at epoch " + std::to_string(epoch));
        result.report.train_loss.push_back(epoch_loss);
        result.report.validation_loss.push_back(val);
        result.report.epochs_run = epoch + 1;
        if (on_epoch) on_epoch(epoch, epoch_loss, val);
        if (val < best_val) {
            best_val = val;
            best = net;
            result.report.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            result.report.early_stopped = true;
            break;
        }
    }
    net = std::move(best);
    return result;
}

} // namespace nlc
