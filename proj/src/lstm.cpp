#include "nlc/lstm.hpp"

#include "nlc/binary_io.hpp"
#include "nlc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace nlc {

namespace {

double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

// One exp instead of std::tanh; absolute error stays at rounding level.
double fast_tanh(double a) { return 1.0 - 2.0 / (std::exp(2.0 * a) + 1.0); }

double dot(const double* a, const double* b, std::size_t n)
{
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += a[j] * b[j];
    return acc;
}

bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Gate equations for one step; fills the cache entry `st` (z, gates, c, h).
void cell_forward(const LstmParams& p, std::span<const double> h_prev, std::span<const double> c_prev,
                  const double* x, BpttWorkspace::Step& st, OpCounter* counter)
{
    const std::size_t nh = p.n_hidden;
    const std::size_t nz = nh + p.n_input;
    st.z.resize(nz);
    std::copy(h_prev.begin(), h_prev.end(), st.z.begin());
    std::copy(x, x + p.n_input, st.z.begin() + static_cast<std::ptrdiff_t>(nh));
    st.f.resize(nh);
    st.i.resize(nh);
    st.g.resize(nh);
    st.o.resize(nh);
    st.c_prev.assign(c_prev.begin(), c_prev.end());
    st.c.resize(nh);
    st.tanh_c.resize(nh);
    st.h.resize(nh);
    const double* z = st.z.data();
    // Pre-activations, column by column so the row sums are independent.
    std::copy(p.b_f.begin(), p.b_f.end(), st.f.begin());
    std::copy(p.b_i.begin(), p.b_i.end(), st.i.begin());
    std::copy(p.b_c.begin(), p.b_c.end(), st.g.begin());
    std::copy(p.b_o.begin(), p.b_o.end(), st.o.begin());
    const double* wf = p.w_f.data.data();
    const double* wi = p.w_i.data.data();
    const double* wc = p.w_c.data.data();
    const double* wo = p.w_o.data.data();
    for (std::size_t j = 0; j < nz; ++j) {
        const double zj = z[j];
        for (std::size_t r = 0; r < nh; ++r) {
            st.f[r] += wf[r * nz + j] * zj;
            st.i[r] += wi[r * nz + j] * zj;
            st.g[r] += wc[r * nz + j] * zj;
            st.o[r] += wo[r * nz + j] * zj;
        }
    }
    for (std::size_t r = 0; r < nh; ++r) {
        st.f[r] = sigmoid(st.f[r]);
        st.i[r] = sigmoid(st.i[r]);
        st.g[r] = fast_tanh(st.g[r]);
        st.o[r] = sigmoid(st.o[r]);
        st.c[r] = st.f[r] * st.c_prev[r] + st.i[r] * st.g[r];
        st.tanh_c[r] = fast_tanh(st.c[r]);
        st.h[r] = st.o[r] * st.tanh_c[r];
    }
    if (counter != nullptr) {
        counter->lstm_steps += 1;
        counter->lstm_multiplications += 4 * nh * nz + 3 * nh;
    }
}

// Accumulates the step's parameter gradients; on entry dh/dc hold the
// gradient w.r.t. this step's h and c, on exit they hold it w.r.t. h_{t-1}
// and c_{t-1}.
void cell_backward(const LstmParams& p, const BpttWorkspace::Step& st, std::vector<double>& dh,
                   std::vector<double>& dc, LstmParams& g, std::vector<double>& da)
{
    const std::size_t nh = p.n_hidden;
    const std::size_t nz = nh + p.n_input;
    da.resize(4 * nh);
    double* da_f = da.data();
    double* da_i = da_f + nh;
    double* da_g = da_i + nh;
    double* da_o = da_g + nh;
    for (std::size_t r = 0; r < nh; ++r) {
        const double d_o = dh[r] * st.tanh_c[r];
        const double dcr = dc[r] + dh[r] * st.o[r] * (1.0 - st.tanh_c[r] * st.tanh_c[r]);
        const double d_f = dcr * st.c_prev[r];
        const double d_i = dcr * st.g[r];
        const double d_g = dcr * st.i[r];
        da_f[r] = d_f * st.f[r] * (1.0 - st.f[r]);
        da_i[r] = d_i * st.i[r] * (1.0 - st.i[r]);
        da_g[r] = d_g * (1.0 - st.g[r] * st.g[r]);
        da_o[r] = d_o * st.o[r] * (1.0 - st.o[r]);
        dc[r] = dcr * st.f[r];
    }
    std::fill(dh.begin(), dh.end(), 0.0);
    const double* z = st.z.data();
    auto accumulate = [&](const Matrix& w, Matrix& gw, std::vector<double>& gb, const double* a) {
        for (std::size_t r = 0; r < nh; ++r) {
            const double ar = a[r];
            gb[r] += ar;
            double* gwr = gw.row(r);
            const double* wr = w.row(r);
            for (std::size_t j = 0; j < nz; ++j) gwr[j] += ar * z[j];
            for (std::size_t j = 0; j < nh; ++j) dh[j] += ar * wr[j];
        }
    };
    accumulate(p.w_f, g.w_f, g.b_f, da_f);
    accumulate(p.w_i, g.w_i, g.b_i, da_i);
    accumulate(p.w_c, g.w_c, g.b_c, da_g);
    accumulate(p.w_o, g.w_o, g.b_o, da_o);
}

void check_input(const LstmParams& p, std::size_t len)
{
    require(len == p.n_input, "dimension error",
            "input vector has " + std::to_string(len) + " components, expected " +
                std::to_string(p.n_input));
}

} // namespace

// ---------------------------------------------------------------------------

LstmParams LstmParams::zeros(std::size_t n_input, std::size_t n_hidden)
{
    LstmParams p;
    p.n_input = n_input;
    p.n_hidden = n_hidden;
    const std::size_t nz = n_input + n_hidden;
    p.w_f = p.w_i = p.w_c = p.w_o = Matrix(n_hidden, nz);
    p.b_f = p.b_i = p.b_c = p.b_o = std::vector<double>(n_hidden, 0.0);
    return p;
}

void LstmParams::validate() const
{
    require(n_input > 0 && n_hidden > 0, "dimension error", "LSTM sizes must be positive");
    const std::size_t nz = n_input + n_hidden;
    for (const Matrix* w : {&w_f, &w_i, &w_c, &w_o}) {
        require(w->rows == n_hidden && w->cols == nz && w->data.size() == n_hidden * nz,
                "dimension error", "gate matrix shape mismatch");
        require(all_finite(w->data), "dimension error", "non-finite LSTM weight");
    }
    for (const auto* b : {&b_f, &b_i, &b_c, &b_o}) {
        require(b->size() == n_hidden, "dimension error", "gate bias shape mismatch");
        require(all_finite(*b), "dimension error", "non-finite LSTM bias");
    }
}

std::size_t LstmParams::parameter_count() const
{
    return 4 * n_hidden * (n_input + n_hidden) + 4 * n_hidden;
}

LstmState LstmState::zero(std::size_t n_hidden)
{
    return {std::vector<double>(n_hidden, 0.0), std::vector<double>(n_hidden, 0.0)};
}

FclParams FclParams::zeros(std::size_t n_out, std::size_t n_in)
{
    return {Matrix(n_out, n_in), std::vector<double>(n_out, 0.0)};
}

void FclParams::validate() const
{
    require(w_out.data.size() == w_out.rows * w_out.cols && b_out.size() == w_out.rows,
            "dimension error", "FCL shape mismatch");
    require(all_finite(w_out.data) && all_finite(b_out), "dimension error", "non-finite FCL parameter");
}

OpCounter& OpCounter::operator+=(const OpCounter& o)
{
    lstm_steps += o.lstm_steps;
    fcl_calls += o.fcl_calls;
    lstm_multiplications += o.lstm_multiplications;
    fcl_multiplications += o.fcl_multiplications;
    return *this;
}

void lstm_step_traced(const LstmParams& p, std::span<const double> h_prev,
                      std::span<const double> c_prev, const double* x, BpttWorkspace::Step& out,
                      OpCounter* counter)
{
    cell_forward(p, h_prev, c_prev, x, out, counter);
}

LstmState lstm_step(const LstmParams& p, const LstmState& s, std::span<const double> x,
                    OpCounter* counter)
{
    check_input(p, x.size());
    require(s.h.size() == p.n_hidden && s.c.size() == p.n_hidden, "dimension error",
            "state size does not match n_hidden");
    BpttWorkspace::Step st;
    cell_forward(p, s.h, s.c, x.data(), st, counter);
    return {std::move(st.h), std::move(st.c)};
}

std::vector<LstmState> lstm_run(const LstmParams& p, const LstmState& init,
                                std::span<const std::vector<double>> xs, OpCounter* counter)
{
    require(!xs.empty(), "length error", "lstm_run needs a nonempty sequence");
    std::vector<LstmState> out;
    out.reserve(xs.size());
    const LstmState* prev = &init;
    for (const auto& x : xs) {
        out.push_back(lstm_step(p, *prev, x, counter));
        prev = &out.back();
    }
    return out;
}

std::vector<double> fcl(const FclParams& p, std::span<const double> features, OpCounter* counter)
{
    require(features.size() == p.n_in(), "dimension error",
            "FCL expects " + std::to_string(p.n_in()) + " features, got " +
                std::to_string(features.size()));
    std::vector<double> y(p.n_out());
    for (std::size_t r = 0; r < p.n_out(); ++r)
        y[r] = p.b_out[r] + dot(p.w_out.row(r), features.data(), p.n_in());
    if (counter != nullptr) {
        counter->fcl_calls += 1;
        counter->fcl_multiplications += p.n_out() * p.n_in();
    }
    return y;
}

// ---------------------------------------------------------------------------

std::size_t fcl_input_size(WindowLayout layout, std::size_t n_hidden, std::size_t window_length)
{
    return layout == WindowLayout::bidirectional ? 2 * window_length * n_hidden : 2 * n_hidden;
}

DualLstm DualLstm::zeros(WindowLayout layout, std::size_t n_input, std::size_t n_hidden,
                         std::size_t window_length, std::size_t n_out)
{
    return {LstmParams::zeros(n_input, n_hidden), LstmParams::zeros(n_input, n_hidden),
            FclParams::zeros(n_out, fcl_input_size(layout, n_hidden, window_length))};
}

std::size_t DualLstm::parameter_count() const
{
    return first.parameter_count() + second.parameter_count() + fcl.w_out.data.size() +
           fcl.b_out.size();
}

void DualLstm::validate() const
{
    first.validate();
    second.validate();
    fcl.validate();
    require(first.n_input == second.n_input && first.n_hidden == second.n_hidden,
            "dimension error", "the two LSTMs must have the same shape");
}

namespace {

template <typename Net, typename Span>
std::vector<Span> blocks_of(Net& net)
{
    std::vector<Span> out;
    for (auto* p : {&net.first, &net.second}) {
        out.emplace_back(p->w_f.data);
        out.emplace_back(p->w_i.data);
        out.emplace_back(p->w_c.data);
        out.emplace_back(p->w_o.data);
        out.emplace_back(p->b_f);
        out.emplace_back(p->b_i);
        out.emplace_back(p->b_c);
        out.emplace_back(p->b_o);
    }
    out.emplace_back(net.fcl.w_out.data);
    out.emplace_back(net.fcl.b_out);
    return out;
}

} // namespace

std::vector<std::span<double>> parameter_blocks(DualLstm& net)
{
    return blocks_of<DualLstm, std::span<double>>(net);
}

std::vector<std::span<const double>> parameter_blocks(const DualLstm& net)
{
    return blocks_of<const DualLstm, std::span<const double>>(net);
}

namespace {

struct RunPlan {
    std::vector<const double*> first;
    std::vector<const double*> second;
};

RunPlan plan_runs(WindowLayout layout, WindowView window)
{
    const std::size_t lt = window.size();
    require(lt % 2 == 1, "length error", "window length must be odd");
    const std::size_t k = lt / 2;
    RunPlan plan;
    if (layout == WindowLayout::bidirectional) {
        plan.first.assign(window.begin(), window.end());
        plan.second.assign(window.rbegin(), window.rend());
    } else {
        plan.first.assign(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(k + 1));
        for (std::size_t j = 0; j <= k; ++j) plan.second.push_back(window[lt - 1 - j]);
    }
    return plan;
}

void run_traced(const LstmParams& p, const std::vector<const double*>& xs,
                std::vector<BpttWorkspace::Step>& steps, OpCounter* counter,
                std::span<const double> h0 = {}, std::span<const double> c0 = {})
{
    steps.resize(xs.size());
    const std::vector<double> zero(p.n_hidden, 0.0);
    const std::span<const double> h_init = h0.empty() ? std::span<const double>(zero) : h0;
    const std::span<const double> c_init = c0.empty() ? std::span<const double>(zero) : c0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const auto h_prev = t == 0 ? h_init : std::span<const double>(steps[t - 1].h);
        const auto c_prev = t == 0 ? c_init : std::span<const double>(steps[t - 1].c);
        cell_forward(p, h_prev, c_prev, xs[t], steps[t], counter);
    }
}

void run_both(const DualLstm& net, const RunPlan& plan, BpttWorkspace& ws, OpCounter* counter,
              const WindowStart* start)
{
    if (start == nullptr) {
        run_traced(net.first, plan.first, ws.first, counter);
        run_traced(net.second, plan.second, ws.second, counter);
        return;
    }
    run_traced(net.first, plan.first, ws.first, counter, start->first_h, start->first_c);
    run_traced(net.second, plan.second, ws.second, counter, start->second_h, start->second_c);
}

// Feature vector layout: bidirectional -> [h1_0..h1_{L-1}, h2 by time position],
// center_oriented -> [h1_final, h2_final].
void gather_features(WindowLayout layout, const BpttWorkspace& ws, std::size_t nh,
                     std::vector<double>& features)
{
    features.clear();
    if (layout == WindowLayout::bidirectional) {
        const std::size_t lt = ws.first.size();
        for (std::size_t t = 0; t < lt; ++t)
            features.insert(features.end(), ws.first[t].h.begin(), ws.first[t].h.end());
        for (std::size_t pos = 0; pos < lt; ++pos) {
            const auto& h = ws.second[lt - 1 - pos].h;
            features.insert(features.end(), h.begin(), h.end());
        }
    } else {
        features.insert(features.end(), ws.first.back().h.begin(), ws.first.back().h.end());
        features.insert(features.end(), ws.second.back().h.begin(), ws.second.back().h.end());
    }
    (void)nh;
}

} // namespace

std::vector<double> forward_window(const DualLstm& net, WindowLayout layout, WindowView window,
                                   OpCounter* counter)
{
    BpttWorkspace ws;
    return forward_window(net, layout, window, ws, counter);
}

std::vector<double> forward_window(const DualLstm& net, WindowLayout layout, WindowView window,
                                   BpttWorkspace& ws, OpCounter* counter, const WindowStart* start)
{
    const RunPlan plan = plan_runs(layout, window);
    run_both(net, plan, ws, counter, start);
    gather_features(layout, ws, net.first.n_hidden, ws.features);
    return fcl(net.fcl, ws.features, counter);
}

double bptt_window(const DualLstm& net, WindowLayout layout, WindowView window,
                   std::span<const double> target, DualLstm& grads, BpttWorkspace& ws,
                   const WindowStart* start)
{
    const std::size_t nh = net.first.n_hidden;
    require(target.size() == net.fcl.n_out(), "dimension error", "target size mismatch");
    require(net.fcl.n_in() == fcl_input_size(layout, nh, window.size()), "dimension error",
            "FCL input size does not match the window layout");
    const RunPlan plan = plan_runs(layout, window);
    run_both(net, plan, ws, nullptr, start);
    gather_features(layout, ws, nh, ws.features);
    const auto y = fcl(net.fcl, ws.features);

    const std::size_t n_out = y.size();
    double loss = 0.0;
    std::vector<double> dy(n_out);
    for (std::size_t r = 0; r < n_out; ++r) {
        const double e = y[r] - target[r];
        loss += e * e;
        dy[r] = 2.0 * e / static_cast<double>(n_out);
    }
    loss /= static_cast<double>(n_out);
    require(std::isfinite(loss), "divergence", "non-finite loss");

    // Output layer.
    const std::size_t nf = ws.features.size();
    ws.dfeatures.assign(nf, 0.0);
    for (std::size_t r = 0; r < n_out; ++r) {
        grads.fcl.b_out[r] += dy[r];
        double* gw = grads.fcl.w_out.row(r);
        const double* w = net.fcl.w_out.row(r);
        for (std::size_t j = 0; j < nf; ++j) {
            gw[j] += dy[r] * ws.features[j];
            ws.dfeatures[j] += dy[r] * w[j];
        }
    }

    // Recurrences, newest step first.
    std::vector<double> dh(nh), dc(nh), da;
    auto backprop = [&](const LstmParams& p, const std::vector<BpttWorkspace::Step>& steps,
                        LstmParams& g, auto&& feature_grad_of_step) {
        std::fill(dh.begin(), dh.end(), 0.0);
        std::fill(dc.begin(), dc.end(), 0.0);
        for (std::size_t t = steps.size(); t-- > 0;) {
            const double* df = feature_grad_of_step(t);
            if (df != nullptr)
                for (std::size_t r = 0; r < nh; ++r) dh[r] += df[r];
            cell_backward(p, steps[t], dh, dc, g, da);
        }
    };

    const double* dfeat = ws.dfeatures.data();
    if (layout == WindowLayout::bidirectional) {
        const std::size_t lt = ws.first.size();
        backprop(net.first, ws.first, grads.first,
                 [&](std::size_t t) { return dfeat + t * nh; });
        backprop(net.second, ws.second, grads.second,
                 [&](std::size_t t) { return dfeat + (lt + (lt - 1 - t)) * nh; });
    } else {
        const std::size_t last1 = ws.first.size() - 1;
        const std::size_t last2 = ws.second.size() - 1;
        backprop(net.first, ws.first, grads.first,
                 [&](std::size_t t) { return t == last1 ? dfeat : nullptr; });
        backprop(net.second, ws.second, grads.second,
                 [&](std::size_t t) { return t == last2 ? dfeat + nh : nullptr; });
    }
    return loss;
}

// ---------------------------------------------------------------------------

void optimizer_step(OptimizerState& opt, std::span<const std::span<double>> params,
                    std::span<const std::span<const double>> grads, double grad_scale)
{
    require(params.size() == grads.size(), "dimension error", "parameter/gradient block mismatch");
    std::size_t total = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        require(params[b].size() == grads[b].size(), "dimension error",
                "parameter/gradient block size mismatch");
        total += params[b].size();
    }
    if (opt.m.empty()) {
        opt.m.assign(total, 0.0);
        opt.v.assign(total, 0.0);
    }
    require(opt.m.size() == total && opt.v.size() == total, "dimension error",
            "optimizer moments do not match the parameter count");

    opt.step += 1;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    std::size_t idx = 0;
    for (std::size_t b = 0; b < params.size(); ++b) {
        for (std::size_t j = 0; j < params[b].size(); ++j, ++idx) {
            const double g = grads[b][j] * grad_scale;
            opt.m[idx] = opt.beta1 * opt.m[idx] + (1.0 - opt.beta1) * g;
            opt.v[idx] = opt.beta2 * opt.v[idx] + (1.0 - opt.beta2) * g * g;
            const double mhat = opt.m[idx] / c1;
            const double vhat = opt.v[idx] / c2;
            params[b][j] -= opt.learning_rate * mhat / (std::sqrt(vhat) + opt.epsilon);
        }
    }
}

void initialize(DualLstm& net, std::uint64_t seed)
{
    Rng rng(seed);
    auto fill = [&](std::vector<double>& v, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (auto& x : v) x = u(rng);
    };
    for (auto* p : {&net.first, &net.second}) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(p->n_input + p->n_hidden));
        for (Matrix* w : {&p->w_f, &p->w_i, &p->w_c, &p->w_o}) fill(w->data, bound);
        std::fill(p->b_f.begin(), p->b_f.end(), 1.0);
        std::fill(p->b_i.begin(), p->b_i.end(), 0.0);
        std::fill(p->b_c.begin(), p->b_c.end(), 0.0);
        std::fill(p->b_o.begin(), p->b_o.end(), 0.0);
    }
    fill(net.fcl.w_out.data, 1.0 / std::sqrt(static_cast<double>(net.fcl.n_in())));
    std::fill(net.fcl.b_out.begin(), net.fcl.b_out.end(), 0.0);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::string_view kModelMagic = "CEQM1";
}

CheckpointShape checkpoint_shape(const DualLstm& net)
{
    return {static_cast<std::uint32_t>(net.first.n_input),
            static_cast<std::uint32_t>(net.first.n_hidden),
            static_cast<std::uint32_t>(net.fcl.n_in()), static_cast<std::uint32_t>(net.fcl.n_out())};
}

void save_checkpoint(const std::filesystem::path& path, const DualLstm& net)
{
    net.validate();
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "io error", "cannot open " + path.string() + " for writing");
    const auto shape = checkpoint_shape(net);
    binio::put_magic(os, kModelMagic);
    binio::put_le(os, shape.n_input);
    binio::put_le(os, shape.n_hidden);
    binio::put_le(os, shape.n_fcl_in);
    binio::put_le(os, shape.n_out);
    for (const auto& block : parameter_blocks(net))
        for (double v : block) binio::put_f64(os, v);
    require(static_cast<bool>(os), "io error", "write failed for " + path.string());
}

DualLstm load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io error", "cannot open " + path.string());
    binio::expect_magic(is, kModelMagic);
    CheckpointShape shape;
    shape.n_input = binio::get_le<std::uint32_t>(is, "n_input");
    shape.n_hidden = binio::get_le<std::uint32_t>(is, "n_hidden");
    shape.n_fcl_in = binio::get_le<std::uint32_t>(is, "n_fcl_in");
    shape.n_out = binio::get_le<std::uint32_t>(is, "n_out");
    require(shape.n_input > 0 && shape.n_hidden > 0 && shape.n_fcl_in > 0 && shape.n_out > 0,
            "parse error", "checkpoint header has a zero dimension");
    require(shape.n_input <= 1024 && shape.n_hidden <= 4096 && shape.n_out <= 64 &&
                shape.n_fcl_in <= (1u << 24),
            "parse error", "checkpoint header dimensions are implausible");

    DualLstm net{LstmParams::zeros(shape.n_input, shape.n_hidden),
                 LstmParams::zeros(shape.n_input, shape.n_hidden),
                 FclParams::zeros(shape.n_out, shape.n_fcl_in)};
    for (auto block : parameter_blocks(net))
        for (double& v : block) v = binio::get_f64(is, "parameters");
    binio::expect_eof(is);
    net.validate();
    return net;
}

DualLstm load_checkpoint(const std::filesystem::path& path, const CheckpointShape& expected)
{
    DualLstm net = load_checkpoint(path);
    const auto got = checkpoint_shape(net);
    if (!(got == expected)) {
        throw Error("dimension mismatch",
                    "checkpoint has (n_input, n_hidden, n_fcl_in, n_out) = (" +
                        std::to_string(got.n_input) + ", " + std::to_string(got.n_hidden) + ", " +
                        std::to_string(got.n_fcl_in) + ", " + std::to_string(got.n_out) +
                        "), expected (" + std::to_string(expected.n_input) + ", " +
                        std::to_string(expected.n_hidden) + ", " +
                        std::to_string(expected.n_fcl_in) + ", " + std::to_string(expected.n_out) +
                        ")");
    }
    return net;
}

} // namespace nlc
