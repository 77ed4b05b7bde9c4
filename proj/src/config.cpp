#include "nlc/config.hpp"

#include <fstream>
#include <set>

namespace nlc {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key that was not consumed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name))
    {
        require(j_.is_object(), "config error", "section '" + name_ + "' must be an object");
    }

    template <typename T>
    void get(const char* key, T& out)
    {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw Error("config error", name_ + "." + key + ": " + e.what());
        }
    }

    const json* child(const char* key)
    {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const
    {
        for (const auto& [key, _] : j_.items())
            if (!seen_.contains(key))
                throw Error("config error", "unknown key '" + name_ + "." + key + "'");
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

SweepVariable parse_sweep_variable(const std::string& s)
{
    if (s == "launch_power") return SweepVariable::launch_power;
    if (s == "distance") return SweepVariable::distance;
    if (s == "tap_length") return SweepVariable::tap_length;
    throw Error("config error", "unknown sweep variable '" + s + "'");
}

} // namespace

std::string to_string(SweepVariable v)
{
    switch (v) {
    case SweepVariable::launch_power: return "launch_power";
    case SweepVariable::distance: return "distance";
    case SweepVariable::tap_length: return "tap_length";
    }
    return "unknown";
}

LinkSpec LinkConfig::to_link_spec() const
{
    FiberSpanSpec fiber;
    fiber.length_km = span_length_km;
    fiber.alpha_db_per_km = alpha_db_per_km;
    fiber.beta2_ps2_per_km = beta2_ps2_per_km;
    fiber.gamma_per_w_km = gamma_per_w_km;
    fiber.step_km = step_km;
    return LinkSpec::uniform(spans, fiber, noise_figure_db, ase, launch_power_dbm,
                             center_frequency_thz);
}

void ExperimentConfig::validate() const
{
    require(link.spans >= 1, "config error", "link.spans must be >= 1");
    require(link.polarizations == 1 || link.polarizations == 2, "config error",
            "link.polarizations must be 1 or 2");
    link.to_link_spec().validate();
    require(signal.modulation == "16qam", "config error", "only 16qam is supported");
    require(signal.symbol_rate_gbd > 0.0, "config error", "signal.symbol_rate_gbd must be positive");
    require(signal.sps >= 2, "config error", "signal.sps must be >= 2");
    require(signal.guard_symbols >= 0, "config error", "signal.guard_symbols must be >= 0");
    equalizer.spec.validate();
    require(equalizer.spec.n_input == 2 * link.polarizations, "config error",
            "equalizer.n_input must be 2 per polarization");
    require(equalizer.training.train_symbols > 0 && equalizer.training.test_symbols > 0,
            "config error", "train and test symbol counts must be positive");
    require(equalizer.training.recycled_start_fraction >= 0.0 &&
                equalizer.training.recycled_start_fraction <= 1.0,
            "config error", "equalizer.recycled_start_fraction must be in [0, 1]");
    require(equalizer.training.recycled_refresh_batches >= 1, "config error",
            "equalizer.recycled_refresh_batches must be >= 1");
    require(equalizer.training.learning_rate > 0.0, "config error", "equalizer.learning_rate must be positive");
    if (equalizer.training.final_learning_rate)
        require(*equalizer.training.final_learning_rate > 0.0 &&
                    *equalizer.training.final_learning_rate <= equalizer.training.learning_rate,
                "config error", "equalizer.final_learning_rate must be in (0, learning_rate]");
    require(workers >= 1, "config error", "workers must be >= 1");
    if (sweep) {
        require(!sweep->values.empty(), "config error", "sweep.values must be nonempty");
        require(!sweep->schemes.empty(), "config error", "sweep.schemes must be nonempty");
    }
}

ExperimentConfig parse_config(const json& j)
{
    ExperimentConfig cfg;
    Section root(j, "config");
    if (const json* l = root.child("link")) {
        Section s(*l, "link");
        auto& c = cfg.link;
        s.get("spans", c.spans);
        s.get("span_length_km", c.span_length_km);
        s.get("alpha_db_per_km", c.alpha_db_per_km);
        s.get("beta2_ps2_per_km", c.beta2_ps2_per_km);
        s.get("gamma_per_w_km", c.gamma_per_w_km);
        s.get("step_km", c.step_km);
        s.get("noise_figure_db", c.noise_figure_db);
        s.get("ase", c.ase);
        s.get("center_frequency_thz", c.center_frequency_thz);
        s.get("launch_power_dbm", c.launch_power_dbm);
        s.get("polarizations", c.polarizations);
        s.finish();
    }
    if (const json* sg = root.child("signal")) {
        Section s(*sg, "signal");
        auto& c = cfg.signal;
        s.get("symbol_rate_gbd", c.symbol_rate_gbd);
        s.get("modulation", c.modulation);
        s.get("rolloff", c.rolloff);
        s.get("filter_span", c.filter_span);
        s.get("sps", c.sps);
        s.get("guard_symbols", c.guard_symbols);
        s.finish();
    }
    if (const json* e = root.child("equalizer")) {
        Section s(*e, "equalizer");
        auto& spec = cfg.equalizer.spec;
        auto& tr = cfg.equalizer.training;
        std::string mode = to_string(spec.mode);
        s.get("mode", mode);
        spec.mode = parse_equalizer_mode(mode);
        s.get("k", spec.k);
        s.get("n_input", spec.n_input);
        s.get("n_hidden", spec.n_hidden);
        s.get("block_length", spec.block_length);
        s.get("train_symbols", tr.train_symbols);
        s.get("test_symbols", tr.test_symbols);
        s.get("learning_rate", tr.learning_rate);
        if (const json* f = s.child("final_learning_rate")) {
            require(f->is_number(), "config error", "equalizer.final_learning_rate must be a number");
            tr.final_learning_rate = f->get<double>();
        }
        s.get("batch_size", tr.batch_size);
        s.get("max_epochs", tr.max_epochs);
        s.get("patience", tr.patience);
        s.get("validation_fraction", tr.validation_fraction);
        s.get("recycled_start_fraction", tr.recycled_start_fraction);
        s.get("recycled_refresh_batches", tr.recycled_refresh_batches);
        if (const json* d = s.child("dbp")) {
            Section ds(*d, "equalizer.dbp");
            ds.get("steps_per_span", cfg.equalizer.dbp.steps_per_span);
            ds.get("oversampling", cfg.equalizer.dbp.oversampling);
            ds.get("fft_size", cfg.equalizer.dbp.fft_size);
            ds.finish();
        }
        s.finish();
    }
    if (const json* sw = root.child("sweep")) {
        Section s(*sw, "sweep");
        SweepConfig c;
        std::string var = "launch_power";
        s.get("variable", var);
        c.variable = parse_sweep_variable(var);
        s.get("values", c.values);
        s.get("schemes", c.schemes);
        s.finish();
        cfg.sweep = c;
    }
    root.get("seed", cfg.seed);
    root.get("output_dir", cfg.output_dir);
    root.get("workers", cfg.workers);
    root.finish();
    cfg.equalizer.training.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream is(path);
    require(static_cast<bool>(is), "config error", "cannot open " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw Error("config error", path.string() + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& cfg)
{
    const auto& l = cfg.link;
    const auto& sg = cfg.signal;
    const auto& spec = cfg.equalizer.spec;
    const auto& tr = cfg.equalizer.training;
    const auto& d = cfg.equalizer.dbp;
    json j = {
        {"link",
         {{"spans", l.spans},
          {"span_length_km", l.span_length_km},
          {"alpha_db_per_km", l.alpha_db_per_km},
          {"beta2_ps2_per_km", l.beta2_ps2_per_km},
          {"gamma_per_w_km", l.gamma_per_w_km},
          {"step_km", l.step_km},
          {"noise_figure_db", l.noise_figure_db},
          {"ase", l.ase},
          {"center_frequency_thz", l.center_frequency_thz},
          {"launch_power_dbm", l.launch_power_dbm},
          {"polarizations", l.polarizations}}},
        {"signal",
         {{"symbol_rate_gbd", sg.symbol_rate_gbd},
          {"modulation", sg.modulation},
          {"rolloff", sg.rolloff},
          {"filter_span", sg.filter_span},
          {"sps", sg.sps},
          {"guard_symbols", sg.guard_symbols}}},
        {"equalizer",
         {{"mode", to_string(spec.mode)},
          {"k", spec.k},
          {"n_input", spec.n_input},
          {"n_hidden", spec.n_hidden},
          {"block_length", spec.block_length},
          {"train_symbols", tr.train_symbols},
          {"test_symbols", tr.test_symbols},
          {"learning_rate", tr.learning_rate},
          {"batch_size", tr.batch_size},
          {"max_epochs", tr.max_epochs},
          {"patience", tr.patience},
          {"validation_fraction", tr.validation_fraction},
          {"recycled_start_fraction", tr.recycled_start_fraction},
          {"recycled_refresh_batches", tr.recycled_refresh_batches},
          {"dbp",
           {{"steps_per_span", d.steps_per_span},
            {"oversampling", d.oversampling},
            {"fft_size", d.fft_size}}}}},
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
        {"workers", cfg.workers},
    };
    if (tr.final_learning_rate) j["equalizer"]["final_learning_rate"] = *tr.final_learning_rate;
    if (cfg.sweep)
        j["sweep"] = {{"variable", to_string(cfg.sweep->variable)},
                      {"values", cfg.sweep->values},
                      {"schemes", cfg.sweep->schemes}};
    return j;
}

} // namespace nlc
