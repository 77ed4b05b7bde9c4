#include "nlc/pipeline.hpp"

#include "nlc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace nlc {

using nlohmann::json;

namespace {

constexpr int kModulationOrder = 16;

// Runs one stage, prefixing any error with the stage name and the config.
template <typename F>
auto stage(const char* name, const ExperimentConfig& cfg, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.category(), std::string("stage '") + name + "': " + e.what() +
                                      "; config: " + to_json(cfg).dump());
    }
}

EqualizerSpec spec_for(const ExperimentConfig& cfg, EqualizerMode mode)
{
    EqualizerSpec spec = cfg.equalizer.spec;
    spec.mode = mode;
    return spec;
}

// Steps per span of a dbp scheme name, 0 when the name is not dbp.
int dbp_steps(const ExperimentConfig& cfg, const std::string& scheme)
{
    if (scheme == "dbp") return cfg.equalizer.dbp.steps_per_span;
    if (scheme.rfind("dbp-", 0) != 0) return 0;
    int n = 0;
    const char* b = scheme.data() + 4;
    const char* e = scheme.data() + scheme.size();
    const auto res = std::from_chars(b, e, n);
    require(res.ec == std::errc{} && res.ptr == e && n >= 1, "configuration error",
            "bad scheme '" + scheme + "'");
    return n;
}

} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "io error", "cannot write " + path.string());
    os << text;
    require(static_cast<bool>(os), "io error", "write failed for " + path.string());
}

FrameLayout frame_layout(const ExperimentConfig& cfg)
{
    FrameLayout l;
    l.guard = static_cast<std::size_t>(cfg.signal.guard_symbols);
    l.train = cfg.equalizer.training.train_symbols;
    l.test = cfg.equalizer.training.test_symbols;
    return l;
}

std::size_t fft_friendly_size(std::size_t n)
{
    auto smooth = [](std::size_t m) {
        for (std::size_t p : {2, 3, 5, 7})
            while (m % p == 0) m /= p;
        return m == 1;
    };
    std::size_t m = std::max<std::size_t>(n, 1);
    while (!smooth(m)) ++m;
    return m;
}

bool is_lstm_scheme(const std::string& scheme)
{
    return scheme == "bi" || scheme == "co_standard" || scheme == "co_simplified";
}

void check_scheme(const std::string& scheme)
{
    if (scheme == "cdc" || is_lstm_scheme(scheme)) return;
    ExperimentConfig probe;
    require(dbp_steps(probe, scheme) > 0, "configuration error", "unknown scheme '" + scheme + "'");
}

// ---------------------------------------------------------------------------

SimulatedLink simulate(const ExperimentConfig& cfg)
{
    cfg.validate();
    SimulatedLink sim;
    sim.layout = frame_layout(cfg);
    require(sim.layout.guard >= static_cast<std::size_t>(cfg.equalizer.spec.k), "configuration error",
            "guard_symbols must cover the equalizer taps");

    const auto map = ConstellationMap::qam16();
    Rng bits_rng(substream_seed(cfg.seed, "data-bits"));
    const std::size_t n_bits = sim.layout.total() * static_cast<std::size_t>(map.bits_per_symbol());
    for (int p = 0; p < cfg.link.polarizations; ++p) {
        Bits bits(n_bits);
        for (auto& b : bits) b = static_cast<std::uint8_t>(bits_rng() >> 63);
        sim.tx.push_back(map_bits(bits, map));
    }

    SampledWaveform w = shape(sim.tx, cfg.signal.pulse(), cfg.signal.symbol_rate_gbd * 1e9);
    w = set_launch_power(w, cfg.link.launch_power_dbm);
    // Even and FFT-friendly at both the signal rate and half of it.
    const std::size_t padded = 2 * fft_friendly_size((w.length() + 1) / 2);
    for (auto& pol : w.pols) pol.resize(padded, cdouble{});

    sim.rx = propagate_link(w, cfg.link.to_link_spec(), substream_seed(cfg.seed, "channel-noise"),
                            &sim.diagnostics);
    return sim;
}

std::vector<SymbolSequence> compensate(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                       const std::string& scheme)
{
    check_scheme(scheme);
    const int n_up = cfg.equalizer.dbp.oversampling;
    SampledWaveform r = sim.rx.sps() == n_up ? sim.rx : resample(sim.rx, n_up);
    const LinkSpec link = cfg.link.to_link_spec();
    const int steps = dbp_steps(cfg, scheme);
    if (steps == 0) {
        r = cdc(r, link);
    } else {
        DbpSpec d = cfg.equalizer.dbp;
        d.steps_per_span = steps;
        r = dbp(r, link, d);
    }
    PulseShapeSpec ps = cfg.signal.pulse();
    ps.sps = n_up;
    auto syms = matched_filter(r, ps);

    const FrameLayout& l = sim.layout;
    for (std::size_t p = 0; p < syms.size(); ++p) {
        auto& s = syms[p].symbols;
        require(s.size() >= l.total(), "insufficient data", "receiver recovered too few symbols");
        s.resize(l.total());
        // Least-squares complex gain on the training range.
        cdouble num{};
        double den = 0.0;
        for (std::size_t n = l.train_begin(); n < l.train_begin() + l.train; ++n) {
            num += sim.tx[p].symbols[n] * std::conj(s[n]);
            den += std::norm(s[n]);
        }
        require(den > 0.0, "insufficient data", "no received power in the training range");
        const cdouble a = num / den;
        for (auto& v : s) v *= a;
    }
    return syms;
}

// ---------------------------------------------------------------------------

ComplexityInputs complexity_inputs(const ExperimentConfig& cfg)
{
    ComplexityInputs in;
    in.modulation_order = kModulationOrder;
    in.window_length = cfg.equalizer.spec.window_length();
    in.block_length = cfg.equalizer.spec.block_length;
    in.n_input = cfg.equalizer.spec.n_input;
    in.n_hidden = cfg.equalizer.spec.n_hidden;
    in.n_span = cfg.link.spans;
    in.n_step = cfg.equalizer.dbp.steps_per_span;
    in.n_up = cfg.equalizer.dbp.oversampling;
    in.n_fft = cfg.equalizer.dbp.fft_size;
    return in;
}

double scheme_rmpb(const ExperimentConfig& cfg, const std::string& scheme)
{
    check_scheme(scheme);
    const ComplexityInputs in = complexity_inputs(cfg);
    const double cdc_term = cdc_rmpb(in.modulation_order, in.n_up, in.n_fft);
    if (scheme == "cdc") return cdc_term;
    if (is_lstm_scheme(scheme)) return rmpb(parse_scheme(scheme), in) + cdc_term;
    return dbp_rmpb(in.modulation_order, in.n_span, dbp_steps(cfg, scheme), in.n_up, in.n_fft);
}

const DualLstm* ModelCache::find(WindowLayout layout) const
{
    for (const auto& [l, m] : models_)
        if (l == layout) return &m.net;
    return nullptr;
}

const TrainingReport* ModelCache::report(WindowLayout layout) const
{
    for (const auto& [l, m] : models_)
        if (l == layout) return &m.report;
    return nullptr;
}

void ModelCache::store(WindowLayout layout, TrainedEqualizer model)
{
    for (auto& [l, m] : models_)
        if (l == layout) {
            m = std::move(model);
            return;
        }
    models_.emplace_back(layout, std::move(model));
}

FeatureSequence lstm_features(const std::vector<SymbolSequence>& cdc_symbols)
{
    return FeatureSequence(std::span<const SymbolSequence>(cdc_symbols));
}

TrainedEqualizer train_equalizer(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                 const std::vector<SymbolSequence>& cdc_symbols, EqualizerMode mode)
{
    const FrameLayout& l = sim.layout;
    const auto features = lstm_features(cdc_symbols).slice(l.train_begin(), l.train_begin() + l.train);
    const std::span<const cdouble> tx(sim.tx.front().symbols.data() + l.train_begin(), l.train);
    return train(spec_for(cfg, mode), cfg.equalizer.training, features, tx);
}

SchemeResult evaluate_equalizer(const SimulatedLink& sim, const ExperimentConfig& cfg,
                                const std::vector<SymbolSequence>& cdc_symbols, EqualizerMode mode,
                                const DualLstm& net)
{
    const FrameLayout& l = sim.layout;
    const EqualizerSpec spec = spec_for(cfg, mode);
    const auto k = static_cast<std::size_t>(spec.k);
    const auto features =
        lstm_features(cdc_symbols).slice(l.test_begin() - k, l.test_begin() + l.test + k);
    OpCounter counter;
    const auto out = equalize(net, spec, features, &counter);
    require(out.symbols.size() == l.test, "equalizer error", "equalized length mismatch");

    SchemeResult r;
    r.scheme = to_string(mode);
    const std::span<const cdouble> tx(sim.tx.front().symbols.data() + l.test_begin(), l.test);
    r.metrics = measure(out.symbols.symbols, tx, ConstellationMap::qam16());
    r.rmpb = scheme_rmpb(cfg, r.scheme);
    r.audit = audit(parse_scheme(r.scheme), complexity_inputs(cfg), counter, l.test);
    return r;
}

SchemeResult evaluate_scheme(const SimulatedLink& sim, const ExperimentConfig& cfg,
                             const std::string& scheme, ModelCache* cache)
{
    check_scheme(scheme);
    const FrameLayout& l = sim.layout;
    if (!is_lstm_scheme(scheme)) {
        const auto syms = stage("compensate", cfg, [&] { return compensate(sim, cfg, scheme); });
        SchemeResult r;
        r.scheme = scheme;
        const std::span<const cdouble> rx(syms.front().symbols.data() + l.test_begin(), l.test);
        const std::span<const cdouble> tx(sim.tx.front().symbols.data() + l.test_begin(), l.test);
        r.metrics = measure(rx, tx, ConstellationMap::qam16());
        r.rmpb = scheme_rmpb(cfg, scheme);
        return r;
    }

    const EqualizerMode mode = parse_equalizer_mode(scheme);
    const WindowLayout layout = spec_for(cfg, mode).layout();
    const auto syms = stage("compensate", cfg, [&] { return compensate(sim, cfg, "cdc"); });
    ModelCache local;
    ModelCache& models = cache ? *cache : local;
    if (!models.find(layout))
        models.store(layout, stage("train", cfg, [&] { return train_equalizer(sim, cfg, syms, mode); }));
    SchemeResult r = stage("equalize", cfg, [&] {
        return evaluate_equalizer(sim, cfg, syms, mode, *models.find(layout));
    });
    r.training = *models.report(layout);
    return r;
}

// ---------------------------------------------------------------------------

json metrics_json(const MetricsReport& m)
{
    return {{"ber", m.ber},           {"q2_db", m.q2_db},       {"evm_pct", m.evm_pct},
            {"bit_errors", m.bit_errors}, {"bits", m.bits_total}, {"error_free", m.error_free}};
}

json training_json(const TrainingReport& r)
{
    return {{"epochs_run", r.epochs_run},
            {"best_epoch", r.best_epoch},
            {"early_stopped", r.early_stopped},
            {"train_loss", r.train_loss},
            {"validation_loss", r.validation_loss}};
}

json audit_json(const ComplexityReport& r)
{
    return {{"scheme", to_string(r.scheme)},
            {"analytic_rmpb", r.analytic_rmpb},
            {"instrumented_rmpb", r.instrumented_rmpb},
            {"lstm_steps", r.lstm_steps},
            {"fcl_calls", r.fcl_calls},
            {"multiplications", r.multiplications},
            {"output_symbols", r.output_symbols},
            {"passed", r.passed},
            {"detail", r.detail}};
}

json run_pipeline(const ExperimentConfig& cfg, const std::vector<std::string>& schemes)
{
    for (const auto& s : schemes) check_scheme(s);
    const SimulatedLink sim = stage("simulate", cfg, [&] { return simulate(cfg); });
    json report;
    report["config"] = to_json(cfg);
    report["seed"] = cfg.seed;
    report["frame"] = {{"guard", sim.layout.guard},
                       {"train", sim.layout.train},
                       {"test", sim.layout.test},
                       {"samples", sim.rx.length()}};
    report["propagation"] = {{"max_step_phase_rad", sim.diagnostics.max_step_phase},
                             {"warnings", sim.diagnostics.warnings}};
    ModelCache cache;
    json results = json::array();
    for (const auto& s : schemes) {
        const SchemeResult r = evaluate_scheme(sim, cfg, s, &cache);
        json j = {{"scheme", r.scheme}, {"metrics", metrics_json(r.metrics)}, {"rmpb", r.rmpb}};
        if (r.training) j["training"] = training_json(*r.training);
        if (r.audit) j["audit"] = audit_json(*r.audit);
        results.push_back(std::move(j));
    }
    report["schemes"] = std::move(results);
    return report;
}

// ---------------------------------------------------------------------------

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, SweepVariable variable, double value)
{
    ExperimentConfig c = cfg;
    switch (variable) {
    case SweepVariable::launch_power: c.link.launch_power_dbm = value; break;
    case SweepVariable::distance: {
        const double spans = value / cfg.link.span_length_km;
        require(std::abs(spans - std::round(spans)) < 1e-9 && spans >= 1.0, "configuration error",
                "distance " + format_double(value) + " km is not a whole number of spans");
        c.link.spans = static_cast<int>(std::lround(spans));
        break;
    }
    case SweepVariable::tap_length:
        require(value >= 1.0 && value == std::floor(value), "configuration error",
                "tap length must be a positive integer");
        c.equalizer.spec.k = static_cast<int>(value);
        break;
    }
    c.sweep.reset();
    c.validate();
    return c;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg,
                                const std::function<void(const std::string&)>& log)
{
    require(cfg.sweep.has_value(), "configuration error", "config has no sweep section");
    const SweepConfig& sw = *cfg.sweep;
    for (const auto& s : sw.schemes) check_scheme(s);

    std::vector<double> values = sw.values;
    std::stable_sort(values.begin(), values.end());
    std::vector<std::vector<SweepRow>> results(values.size());
    std::mutex log_mutex;
    auto say = [&](const std::string& msg) {
        if (!log) return;
        std::lock_guard lock(log_mutex);
        log(msg);
    };

    auto run_point = [&](std::size_t i) {
        const double v = values[i];
        auto& rows = results[i];
        for (const auto& s : sw.schemes) rows.push_back({v, s, {}, 0.0, "ok"});
        try {
            const ExperimentConfig c = apply_sweep_value(cfg, sw.variable, v);
            const SimulatedLink sim = stage("simulate", c, [&] { return simulate(c); });
            ModelCache cache;
            for (auto& row : rows) {
                try {
                    const SchemeResult r = evaluate_scheme(sim, c, row.scheme, &cache);
                    row.metrics = r.metrics;
                    row.rmpb = r.rmpb;
                    say(to_string(sw.variable) + "=" + format_double(v) + " " + row.scheme +
                        " q2_db=" + format_double(r.metrics.q2_db));
                } catch (const std::exception& e) {
                    row.status = std::string("error: ") + e.what();
                    say(to_string(sw.variable) + "=" + format_double(v) + " " + row.scheme + " " +
                        row.status);
                }
            }
        } catch (const std::exception& e) {
            for (auto& row : rows) row.status = std::string("error: ") + e.what();
            say(to_string(sw.variable) + "=" + format_double(v) + " " + rows.front().status);
        }
    };

    const auto n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.workers)), values.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) run_point(i);
    };
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    }

    std::vector<SweepRow> out;
    for (auto& r : results) out.insert(out.end(), r.begin(), r.end());
    return out;
}

std::string sweep_csv_header()
{
    return "value,scheme,ber,q2_db,rmpb,evm_pct,error_free,status";
}

std::string sweep_csv_row(const SweepRow& row)
{
    std::string status = row.status;
    std::replace_if(status.begin(), status.end(), [](char ch) { return ch == ',' || ch == '\n'; },
                    ';');
    const bool ok = row.status == "ok";
    auto num = [&](double v) { return ok ? format_double(v) : std::string(); };
    return format_double(row.value) + "," + row.scheme + "," + num(row.metrics.ber) + "," +
           num(row.metrics.q2_db) + "," + format_double(row.rmpb) + "," + num(row.metrics.evm_pct) +
           "," + (ok ? (row.metrics.error_free ? "1" : "0") : "") + "," + status;
}

json sweep_json(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows)
{
    json j;
    j["config"] = to_json(cfg);
    j["seed"] = cfg.seed;
    json arr = json::array();
    for (const auto& r : rows) {
        json row = {{"value", r.value}, {"scheme", r.scheme}, {"rmpb", r.rmpb}, {"status", r.status}};
        if (r.status == "ok") row["metrics"] = metrics_json(r.metrics);
        arr.push_back(std::move(row));
    }
    j["rows"] = std::move(arr);
    return j;
}

// ---------------------------------------------------------------------------

std::vector<ComplexityRow> complexity_report(const ExperimentConfig& cfg,
                                             const std::vector<int>& window_lengths)
{
    ComplexityInputs base = complexity_inputs(cfg);
    auto rows = complexity_table(base, window_lengths);
    const double bits = std::log2(static_cast<double>(base.modulation_order));
    Rng rng(substream_seed(cfg.seed, "init"));
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    for (auto& row : rows) {
        if (row.scheme != Scheme::bi && row.scheme != Scheme::co_standard &&
            row.scheme != Scheme::co_simplified)
            continue;
        EqualizerSpec spec = cfg.equalizer.spec;
        spec.mode = row.scheme == Scheme::bi            ? EqualizerMode::bi
                    : row.scheme == Scheme::co_standard ? EqualizerMode::co_standard
                                                        : EqualizerMode::co_simplified;
        spec.k = row.window_length / 2;
        // Simplified mode is charged over one full block, the others over a
        // short run.
        const std::size_t length = row.scheme == Scheme::co_simplified
                                       ? static_cast<std::size_t>(spec.block_length)
                                       : static_cast<std::size_t>(row.window_length) + 199;
        SymbolSequence s;
        s.symbols.resize(length);
        for (auto& v : s.symbols) v = {u(rng), u(rng)};
        std::vector<SymbolSequence> pols(static_cast<std::size_t>(spec.n_input / 2), s);
        const FeatureSequence features{std::span<const SymbolSequence>(pols)};
        DualLstm net = DualLstm::zeros(spec.layout(), static_cast<std::size_t>(spec.n_input),
                                       static_cast<std::size_t>(spec.n_hidden),
                                       static_cast<std::size_t>(spec.window_length()));
        OpCounter counter;
        const auto out = equalize(net, spec, features, &counter);
        row.instrumented_rmpb =
            static_cast<double>(counter.multiplications()) / (static_cast<double>(out.symbols.size()) * bits);
    }
    return rows;
}

} // namespace nlc
