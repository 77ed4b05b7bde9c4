#pragma once

#include "nlc/complexity.hpp"
#include "nlc/config.hpp"

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nlc {

/// Symbol frame: [guard][train][test][guard].
struct FrameLayout {
    std::size_t guard = 0;
    std::size_t train = 0;
    std::size_t test = 0;

    std::size_t total() const { return 2 * guard + train + test; }
    std::size_t train_begin() const { return guard; }
    std::size_t test_begin() const { return guard + train; }
};

FrameLayout frame_layout(const ExperimentConfig& cfg);

/// Smallest 2^a 3^b 5^c 7^d that is >= n.
std::size_t fft_friendly_size(std::size_t n);

struct SimulatedLink {
    FrameLayout layout;
    std::vector<SymbolSequence> tx; // per polarization, whole frame
    SampledWaveform rx;             // after the link, at the signal rate
    PropagationDiagnostics diagnostics;
};

/// Generates bits ("data-bits" substream), maps, shapes, zero-pads to an
/// FFT-friendly length, sets the launch power and propagates the link
/// (ASE from the "channel-noise" substream).
SimulatedLink simulate(const ExperimentConfig& cfg);

/// Receiver DSP for one compensation scheme: resample to the DBP
/// oversampling rate, cdc / dbp / dbp-<n>, matched filter, then a
/// least-squares complex gain fitted on the training range.
std::vector<SymbolSequence> compensate(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                       const std::string& scheme);

bool is_lstm_scheme(const std::string& scheme);
/// Validates a scheme name (cdc, dbp, dbp-<n>, bi, co_standard, co_simplified).
void check_scheme(const std::string& scheme);

/// Analytic real multiplications per bit of a scheme under `cfg`. LSTM
/// schemes include the CDC stage that feeds them.
double scheme_rmpb(const ExperimentConfig& cfg, const std::string& scheme);
ComplexityInputs complexity_inputs(const ExperimentConfig& cfg);

struct SchemeResult {
    std::string scheme;
    MetricsReport metrics;
    double rmpb = 0.0;
    std::optional<TrainingReport> training;
    std::optional<ComplexityReport> audit;
};

/// Trained networks shared by schemes evaluated on the same link. Both
/// Co-LSTM modes train identically and share one network.
class ModelCache {
public:
    const DualLstm* find(WindowLayout layout) const;
    void store(WindowLayout layout, TrainedEqualizer model);
    const TrainingReport* report(WindowLayout layout) const;

private:
    std::vector<std::pair<WindowLayout, TrainedEqualizer>> models_;
};

/// Feature sequence of the CDC-compensated symbols (target polarization first).
FeatureSequence lstm_features(const std::vector<SymbolSequence>& cdc_symbols);

TrainedEqualizer train_equalizer(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                 const std::vector<SymbolSequence>& cdc_symbols,
                                 EqualizerMode mode);

/// Equalizes the test range with `net` and measures it.
SchemeResult evaluate_equalizer(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                const std::vector<SymbolSequence>& cdc_symbols,
                                EqualizerMode mode, const DualLstm& net);

/// Metrics of one scheme on the test range of the target polarization.
SchemeResult evaluate_scheme(const SimulatedLink& sim, const ExperimentConfig& cfg,
                             const std::string& scheme, ModelCache* cache = nullptr);

/// Full chain for the listed schemes; returns the JSON report.
nlohmann::json run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& schemes);

struct SweepRow {
    double value = 0.0;
    std::string scheme;
    MetricsReport metrics;
    double rmpb = 0.0;
    std::string status = "ok";
};

/// Applies one sweep value to a copy of `cfg`.
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepVariable variable,
                                   double value);

/// Rows ordered by sweep value, then by scheme order in the config. Points
/// run on up to cfg.workers threads; a failing point is recorded in its rows.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::function<void(const std::string&)>& log = {});

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepRow& row);
nlohmann::json sweep_json(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows);

/// Formula table for the configured link and equalizer over `window_lengths`
/// (L_T), with instrumented values from counted runs on synthetic input.
std::vector<ComplexityRow> complexity_report(const ExperimentConfig& cfg,
                                             const std::vector<int>& window_lengths);

nlohmann::json metrics_json(const MetricsReport& m);
nlohmann::json training_json(const TrainingReport& r);
nlohmann::json audit_json(const ComplexityReport& r);

/// Shortest round-trip decimal form.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace nlc
