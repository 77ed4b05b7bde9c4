#pragma once

#include "nlc/channel.hpp"
#include "nlc/compensation.hpp"
#include "nlc/equalizer.hpp"
#include "nlc/waveform.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nlc {

struct LinkConfig {
    int spans = 10;
    double span_length_km = 80.0;
    double alpha_db_per_km = kSsmfAlphaDbPerKm;
    double beta2_ps2_per_km = kSsmfBeta2Ps2PerKm;
    double gamma_per_w_km = kSsmfGammaPerWKm;
    double step_km = 0.1;
    double noise_figure_db = 5.0;
    bool ase = true;
    double center_frequency_thz = 193.4;
    double launch_power_dbm = 1.0;
    int polarizations = 1;

    LinkSpec to_link_spec() const;
};

struct SignalConfig {
    double symbol_rate_gbd = 32.0;
    std::string modulation = "16qam";
    double rolloff = 0.01;
    int filter_span = 256;
    int sps = 4;
    int guard_symbols = 512;

    PulseShapeSpec pulse() const { return {rolloff, filter_span, sps}; }
};

struct EqualizerConfig {
    EqualizerSpec spec;
    TrainingConfig training;
    DbpSpec dbp;
};

enum class SweepVariable { launch_power, distance, tap_length };

struct SweepConfig {
    SweepVariable variable = SweepVariable::launch_power;
    std::vector<double> values;
    /// Scheme names: cdc, dbp (configured steps), dbp-<n>, bi, co_standard, co_simplified.
    std::vector<std::string> schemes;
};

struct ExperimentConfig {
    LinkConfig link;
    SignalConfig signal;
    EqualizerConfig equalizer;
    std::optional<SweepConfig> sweep;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    int workers = 1;

    void validate() const;
};

std::string to_string(SweepVariable v);

/// Parses the JSON config; every unknown key is an error.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& cfg);

} // namespace nlc
