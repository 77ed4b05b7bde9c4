// Command-line driver: simulate, train, equalize, sweep, complexity, report.

#include "nlc/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <set>

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::optional<std::string> mode;
    std::optional<std::string> checkpoint;
};

nlc::ExperimentConfig resolve(const Options& o)
{
    nlc::ExperimentConfig cfg = nlc::load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.equalizer.training.seed = *o.seed;
    }
    if (o.out) cfg.output_dir = *o.out;
    if (o.workers) cfg.workers = *o.workers;
    if (o.mode && nlc::is_lstm_scheme(*o.mode)) cfg.equalizer.spec.mode = nlc::parse_equalizer_mode(*o.mode);
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    return cfg;
}

std::filesystem::path out_path(const nlc::ExperimentConfig& cfg, const char* name)
{
    return std::filesystem::path(cfg.output_dir) / name;
}

std::filesystem::path checkpoint_path(const Options& o, const nlc::ExperimentConfig& cfg)
{
    return o.checkpoint ? std::filesystem::path(*o.checkpoint) : out_path(cfg, "checkpoint.ceqm");
}

std::string selected_scheme(const Options& o, const nlc::ExperimentConfig& cfg)
{
    return o.mode ? *o.mode : nlc::to_string(cfg.equalizer.spec.mode);
}

void log(const std::string& msg) { std::cerr << msg << '\n'; }

int cmd_simulate(const Options& o)
{
    const auto cfg = resolve(o);
    const auto sim = nlc::simulate(cfg);
    nlc::write_waveform(out_path(cfg, "rx.ceqw"), sim.rx);
    nlohmann::json j;
    j["config"] = nlc::to_json(cfg);
    j["seed"] = cfg.seed;
    j["frame"] = {{"guard", sim.layout.guard}, {"train", sim.layout.train}, {"test", sim.layout.test}};
    j["waveform"] = {{"polarizations", sim.rx.polarizations()},
                     {"samples", sim.rx.length()},
                     {"sample_rate_hz", sim.rx.sample_rate},
                     {"symbol_rate_hz", sim.rx.symbol_rate},
                     {"mean_power_w", sim.rx.mean_power()}};
    j["propagation"] = {{"max_step_phase_rad", sim.diagnostics.max_step_phase},
                        {"warnings", sim.diagnostics.warnings}};
    nlc::write_text(out_path(cfg, "simulate.json"), j.dump(2) + "\n");
    for (const auto& w : sim.diagnostics.warnings) log("warning: " + w);
    log("wrote " + out_path(cfg, "rx.ceqw").string());
    return 0;
}

int cmd_train(const Options& o)
{
    const auto cfg = resolve(o);
    const std::string scheme = selected_scheme(o, cfg);
    if (!nlc::is_lstm_scheme(scheme))
        throw nlc::Error("configuration error", "train needs an LSTM mode, got '" + scheme + "'");
    const auto mode = nlc::parse_equalizer_mode(scheme);
    const auto sim = nlc::simulate(cfg);
    const auto syms = nlc::compensate(sim, cfg, "cdc");
    const auto& l = sim.layout;
    nlc::EqualizerSpec spec = cfg.equalizer.spec;
    spec.mode = mode;
    const auto features = nlc::lstm_features(syms).slice(l.train_begin(), l.train_begin() + l.train);
    const std::span<const nlc::cdouble> tx(sim.tx.front().symbols.data() + l.train_begin(), l.train);
    const auto model = nlc::train(spec, cfg.equalizer.training, features, tx,
                                  [](int epoch, double tr, double val) {
                                      log("epoch " + std::to_string(epoch) + " train " +
                                          nlc::format_double(tr) + " validation " +
                                          nlc::format_double(val));
                                  });
    const auto ckpt = checkpoint_path(o, cfg);
    if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
    nlc::save_checkpoint(ckpt, model.net);
    nlohmann::json j;
    j["config"] = nlc::to_json(cfg);
    j["seed"] = cfg.seed;
    j["mode"] = scheme;
    j["checkpoint"] = ckpt.string();
    j["training"] = nlc::training_json(model.report);
    nlc::write_text(out_path(cfg, "train.json"), j.dump(2) + "\n");
    log("wrote " + ckpt.string());
    return 0;
}

int cmd_equalize(const Options& o)
{
    const auto cfg = resolve(o);
    const std::string scheme = selected_scheme(o, cfg);
    nlc::check_scheme(scheme);
    const auto sim = nlc::simulate(cfg);
    nlc::SchemeResult r;
    if (nlc::is_lstm_scheme(scheme)) {
        const auto mode = nlc::parse_equalizer_mode(scheme);
        nlc::EqualizerSpec spec = cfg.equalizer.spec;
        spec.mode = mode;
        const auto net = nlc::load_checkpoint(
            checkpoint_path(o, cfg),
            {static_cast<std::uint32_t>(spec.n_input), static_cast<std::uint32_t>(spec.n_hidden),
             static_cast<std::uint32_t>(spec.fcl_inputs()), 2});
        r = nlc::evaluate_equalizer(sim, cfg, nlc::compensate(sim, cfg, "cdc"), mode, net);
    } else {
        r = nlc::evaluate_scheme(sim, cfg, scheme);
    }
    nlohmann::json j;
    j["config"] = nlc::to_json(cfg);
    j["seed"] = cfg.seed;
    nlohmann::json s = {{"scheme", r.scheme}, {"metrics", nlc::metrics_json(r.metrics)}, {"rmpb", r.rmpb}};
    if (r.audit) s["audit"] = nlc::audit_json(*r.audit);
    j["schemes"] = nlohmann::json::array({s});
    nlc::write_text(out_path(cfg, "report.json"), j.dump(2) + "\n");
    log(r.scheme + " q2_db=" + nlc::format_double(r.metrics.q2_db) +
        " ber=" + nlc::format_double(r.metrics.ber));
    return 0;
}

int cmd_sweep(const Options& o)
{
    const auto cfg = resolve(o);
    const auto rows = nlc::run_sweep(cfg, log);
    std::string csv = nlc::sweep_csv_header() + "\n";
    for (const auto& r : rows) csv += nlc::sweep_csv_row(r) + "\n";
    nlc::write_text(out_path(cfg, "sweep.csv"), csv);
    nlc::write_text(out_path(cfg, "sweep.json"), nlc::sweep_json(cfg, rows).dump(2) + "\n");
    log("wrote " + out_path(cfg, "sweep.csv").string());
    return 0;
}

int cmd_complexity(const Options& o)
{
    const auto cfg = resolve(o);
    std::set<int> grid;
    if (cfg.sweep && cfg.sweep->variable == nlc::SweepVariable::tap_length) {
        for (double v : cfg.sweep->values) grid.insert(2 * static_cast<int>(v) + 1);
    } else {
        for (int lt = 3; lt <= 41; lt += 2) grid.insert(lt);
        grid.insert(cfg.equalizer.spec.window_length());
    }
    const auto rows = nlc::complexity_report(cfg, {grid.begin(), grid.end()});
    std::string csv = nlc::complexity_csv_header() + "\n";
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        csv += nlc::complexity_csv_row(r) + "\n";
        nlohmann::json row = {{"scheme", nlc::to_string(r.scheme)},
                              {"L_T", r.window_length},
                              {"L_B", r.block_length},
                              {"analytic_rmpb", r.analytic_rmpb},
                              {"ratio_to_bi", r.ratio_to_bi}};
        if (r.instrumented_rmpb) row["instrumented_rmpb"] = *r.instrumented_rmpb;
        arr.push_back(std::move(row));
    }
    // Ratios with the CDC stage charged to the LSTM schemes.
    const auto in = nlc::complexity_inputs(cfg);
    const double cdc = nlc::rmpb(nlc::Scheme::cdc, in);
    const double co = nlc::rmpb(nlc::Scheme::co_simplified, in) + cdc;
    nlohmann::json j;
    j["config"] = nlc::to_json(cfg);
    j["seed"] = cfg.seed;
    j["rows"] = std::move(arr);
    j["with_cdc"] = {{"co_simplified_over_bi", co / (nlc::rmpb(nlc::Scheme::bi, in) + cdc)},
                     {"co_simplified_over_dbp", co / nlc::rmpb(nlc::Scheme::dbp, in)}};
    nlc::write_text(out_path(cfg, "complexity.csv"), csv);
    nlc::write_text(out_path(cfg, "complexity.json"), j.dump(2) + "\n");
    std::cout << csv;
    return 0;
}

int cmd_report(const Options& o)
{
    const auto cfg = resolve(o);
    std::vector<std::string> schemes = {"cdc", "dbp"};
    const std::string sel = selected_scheme(o, cfg);
    if (std::find(schemes.begin(), schemes.end(), sel) == schemes.end()) schemes.push_back(sel);
    const auto report = nlc::run_pipeline(cfg, schemes);
    nlc::write_text(out_path(cfg, "report.json"), report.dump(2) + "\n");
    for (const auto& s : report["schemes"])
        log(s["scheme"].get<std::string>() + " q2_db=" +
            nlc::format_double(s["metrics"]["q2_db"].get<double>()));
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fiber link simulation and LSTM nonlinearity equalization"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", o.seed, "Root seed (overrides the config)");
    app.add_option("--out", o.out, "Output directory (overrides the config)");
    app.add_option("--workers", o.workers, "Parallel sweep points")->check(CLI::PositiveNumber);
    app.add_option("--mode", o.mode, "Scheme: bi, co_standard, co_simplified, cdc, dbp or dbp-<n>");
    app.add_option("--checkpoint", o.checkpoint, "Checkpoint path (train/equalize)");

    int (*handler)(const Options&) = nullptr;
    auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        app.add_subcommand(name, help)->callback([&handler, fn] { handler = fn; });
    };
    add("simulate", "Simulate the link and dump the received waveform", cmd_simulate);
    add("train", "Train an LSTM equalizer and save a checkpoint", cmd_train);
    add("equalize", "Equalize the test range with one scheme", cmd_equalize);
    add("sweep", "Run the configured sweep and write sweep.csv", cmd_sweep);
    add("complexity", "Write the complexity table", cmd_complexity);
    add("report", "Run the full pipeline and write report.json", cmd_report);

    CLI11_PARSE(app, argc, argv);
    try {
        if (o.mode) nlc::check_scheme(*o.mode);
        return handler(o);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
