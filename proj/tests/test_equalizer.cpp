#include "nlc/complexity.hpp"
#include "nlc/equalizer.hpp"
#include "nlc/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nlc;

namespace {

SymbolSequence random_symbols(std::size_t n, std::uint64_t seed)
{
    const auto map = ConstellationMap::qam16();
    Rng rng(seed);
    SymbolSequence s;
    s.symbols.resize(n);
    for (auto& v : s.symbols) v = map.points()[rng() % 16];
    return s;
}

SymbolSequence add_noise(SymbolSequence s, double sigma, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    for (auto& v : s.symbols) v += cdouble(g(rng), g(rng));
    s.role = SymbolRole::received;
    return s;
}

EqualizerSpec co_spec(int k, int nh, int lb, EqualizerMode mode = EqualizerMode::co_standard)
{
    EqualizerSpec spec;
    spec.mode = mode;
    spec.k = k;
    spec.n_input = 2;
    spec.n_hidden = nh;
    spec.block_length = lb;
    return spec;
}

DualLstm random_net(const EqualizerSpec& spec, std::uint64_t seed)
{
    auto net = DualLstm::zeros(spec.layout(), static_cast<std::size_t>(spec.n_input),
                               static_cast<std::size_t>(spec.n_hidden),
                               static_cast<std::size_t>(spec.window_length()));
    initialize(net, seed);
    Rng rng(seed + 1);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto block : parameter_blocks(net))
        for (double& v : block) v += u(rng);
    return net;
}

// Zero recurrent weights and a closed forget gate: each step sees only its input.
void make_history_free(LstmParams& p)
{
    const std::size_t nh = p.n_hidden;
    for (Matrix* w : {&p.w_f, &p.w_i, &p.w_c, &p.w_o})
        for (std::size_t r = 0; r < nh; ++r)
            for (std::size_t c = 0; c < nh; ++c) (*w)(r, c) = 0.0;
    std::fill(p.w_f.data.begin(), p.w_f.data.end(), 0.0);
    std::fill(p.b_f.begin(), p.b_f.end(), -20.0);
}

std::size_t bit_errors(std::span<const cdouble> rx, std::span<const cdouble> tx)
{
    const auto map = ConstellationMap::qam16();
    const auto a = hard_decide(rx, map);
    const auto b = hard_decide(tx, map);
    std::size_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += a[i] != b[i];
    return e;
}

} // namespace

TEST_SUITE("equalizer")
{
    TEST_CASE("feature windows")
    {
        const auto s = random_symbols(12, 1);
        const FeatureSequence f(s);
        REQUIRE(f.size() == 12);
        REQUIRE(f.n_input() == 2);
        const auto w0 = feature_window(f, 4, 0);
        REQUIRE(w0.size() == 1);
        CHECK(w0[0][0] == s.symbols[4].real());
        CHECK(w0[0][1] == s.symbols[4].imag());
        const auto w = feature_window(f, 5, 2);
        REQUIRE(w.size() == 5);
        for (std::size_t j = 0; j < 5; ++j) CHECK(w[j][0] == s.symbols[3 + j].real());
        const auto w6 = feature_window(f, 6, 2);
        for (std::size_t j = 0; j < 4; ++j) CHECK(w6[j] == w[j + 1]);
        CHECK_THROWS_WITH_AS(feature_window(f, 1, 2), doctest::Contains("boundary error"), Error);
        CHECK_THROWS_WITH_AS(feature_window(f, 10, 2), doctest::Contains("boundary error"), Error);

        const SymbolSequence pols[] = {s, random_symbols(12, 2)};
        const FeatureSequence f4(pols);
        CHECK(f4.n_input() == 4);
        CHECK(f4.at(3)[2] == pols[1].symbols[3].real());
        CHECK(f4.at(3)[3] == pols[1].symbols[3].imag());
    }

    TEST_CASE("block partition")
    {
        const int lb = 100, lt = 21;
        auto one = partition_blocks(100, lb, lt);
        REQUIRE(one.size() == 1);
        CHECK(one[0].valid_end - one[0].valid_begin == 80);
        CHECK_FALSE(one[0].short_block);

        auto two = partition_blocks(2 * lb - (lt - 1), lb, lt);
        REQUIRE(two.size() == 2);
        CHECK(two[0].valid_end == two[1].valid_begin);
        CHECK_FALSE(two[1].short_block);

        for (std::size_t len : {21u, 57u, 100u, 101u, 333u, 1000u}) {
            const auto blocks = partition_blocks(len, lb, lt);
            std::size_t total = 0, expect = 10;
            for (const auto& b : blocks) {
                CHECK(b.valid_begin == expect);
                total += b.valid_end - b.valid_begin;
                expect = b.valid_end;
            }
            CHECK(total == len - lt + 1);
            CHECK(blocks.back().valid_end == len - 10);
        }
        CHECK(partition_blocks(57, lb, lt).front().short_block);
        CHECK_THROWS_AS(partition_blocks(20, lb, lt), Error);
        CHECK_THROWS_WITH_AS(partition_blocks(500, 21, 21), doctest::Contains("configuration error"), Error);
    }

    TEST_CASE("zero network outputs the FCL bias")
    {
        auto spec = co_spec(2, 4, 50, EqualizerMode::bi);
        auto net = DualLstm::zeros(spec.layout(), 2, 4, 5);
        net.fcl.b_out = {0.25, -0.5};
        const auto out = equalize(net, spec, FeatureSequence(random_symbols(30, 3)));
        REQUIRE(out.symbols.size() == 26);
        for (auto v : out.symbols.symbols) CHECK(v == cdouble(0.25, -0.5));
    }

    TEST_CASE("k = 0 runs one step each way")
    {
        auto spec = co_spec(0, 3, 50);
        const auto net = random_net(spec, 4);
        const auto s = random_symbols(10, 5);
        const FeatureSequence f(s);
        const auto out = equalize(net, spec, f);
        REQUIRE(out.symbols.size() == 10);
        for (std::size_t n = 0; n < 10; ++n) {
            const std::vector<std::vector<double>> x = {{s.symbols[n].real(), s.symbols[n].imag()}};
            const auto l = lstm_run(net.first, LstmState::zero(3), x).back();
            const auto r = lstm_run(net.second, LstmState::zero(3), x).back();
            std::vector<double> feat(l.h);
            feat.insert(feat.end(), r.h.begin(), r.h.end());
            const auto y = fcl(net.fcl, feat);
            CHECK(out.symbols.symbols[n] == cdouble(y[0], y[1]));
        }
    }

    TEST_CASE("history-free parameters make both Co-LSTM modes identical")
    {
        auto spec = co_spec(4, 6, 200);
        auto net = random_net(spec, 6);
        make_history_free(net.first);
        make_history_free(net.second);
        const FeatureSequence f(add_noise(random_symbols(700, 7), 0.3, 8));
        const auto a = equalize(net, spec, f);
        spec.mode = EqualizerMode::co_simplified;
        const auto b = equalize(net, spec, f);
        REQUIRE(a.symbols.size() == b.symbols.size());
        CHECK(a.valid_begin == b.valid_begin);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.symbols.size(); ++i)
            worst = std::max(worst, std::abs(a.symbols.symbols[i] - b.symbols.symbols[i]));
        CHECK(worst < 1e-8);
    }

    TEST_CASE("step counts per mode")
    {
        const int k = 3, lt = 7;
        const std::size_t m = 40;
        const FeatureSequence f(random_symbols(m + lt - 1, 9));

        auto bi = co_spec(k, 5, 100, EqualizerMode::bi);
        OpCounter cb;
        equalize(random_net(bi, 10), bi, f, &cb);
        CHECK(cb.lstm_steps == 2 * lt * m);
        CHECK(cb.fcl_calls == m);
        CHECK(cb.fcl_multiplications == m * 2 * (2 * lt * 5));

        auto co = co_spec(k, 5, 100);
        OpCounter cs;
        equalize(random_net(co, 11), co, f, &cs);
        CHECK(cs.lstm_steps == (lt + 1) * m);
        CHECK(cs.lstm_multiplications == (lt + 1) * m * c_l(2, 5));

        auto simp = co_spec(k, 5, 30, EqualizerMode::co_simplified);
        const FeatureSequence block(random_symbols(30, 12));
        OpCounter cp;
        const auto out = equalize_co_simplified(random_net(simp, 13), simp, block, &cp);
        CHECK(cp.lstm_steps == 2 * 30);
        CHECK(cp.fcl_calls == 30 - lt + 1);
        CHECK(out.symbols.size() == 30 - lt + 1);
        CHECK_THROWS_WITH_AS(equalize_co_simplified(random_net(simp, 13), simp,
                                                    FeatureSequence(random_symbols(6, 1))),
                             doctest::Contains("block-size error"), Error);
    }

    TEST_CASE("simplified output does not depend on the block length beyond recycling")
    {
        // Outputs cover every interior symbol exactly once for any L_B.
        auto spec = co_spec(2, 4, 40, EqualizerMode::co_simplified);
        auto net = random_net(spec, 14);
        make_history_free(net.first);
        make_history_free(net.second);
        const FeatureSequence f(random_symbols(333, 15));
        const auto a = equalize(net, spec, f);
        spec.block_length = 97;
        const auto b = equalize(net, spec, f);
        REQUIRE(a.symbols.size() == 329);
        REQUIRE(b.symbols.size() == 329);
        for (std::size_t i = 0; i < 329; ++i) CHECK(std::abs(a.symbols.symbols[i] - b.symbols.symbols[i]) < 1e-8);
    }

    TEST_CASE("evaluation order does not matter")
    {
        auto spec = co_spec(2, 4, 50, EqualizerMode::bi);
        const auto net = random_net(spec, 16);
        const auto s = random_symbols(60, 17);
        const auto whole = equalize(net, spec, FeatureSequence(s));
        const auto tail = equalize(net, spec, FeatureSequence(s).slice(30, 60));
        for (std::size_t i = 0; i < tail.symbols.size(); ++i)
            CHECK(tail.symbols.symbols[i] == whole.symbols.symbols[30 + i]);
    }

    TEST_CASE("layout mismatches are configuration errors")
    {
        auto spec = co_spec(2, 4, 50, EqualizerMode::bi);
        const auto bi_net = random_net(spec, 18);
        spec.mode = EqualizerMode::co_standard;
        const FeatureSequence f(random_symbols(40, 19));
        CHECK_THROWS_WITH_AS(equalize(bi_net, spec, f), doctest::Contains("configuration error"), Error);
        spec.n_hidden = 5;
        CHECK_THROWS_AS(equalize(random_net(co_spec(2, 4, 50), 1), spec, f), Error);
        CHECK_THROWS_AS(parse_equalizer_mode("lstm"), Error);
        CHECK(parse_equalizer_mode("co_simplified") == EqualizerMode::co_simplified);
    }

    TEST_CASE("training is deterministic for a fixed seed")
    {
        const auto tx = random_symbols(1200, 20);
        const auto rx = add_noise(tx, 0.05, 21);
        auto spec = co_spec(2, 4, 100);
        TrainingConfig cfg;
        cfg.max_epochs = 3;
        cfg.seed = 5;
        const auto a = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        const auto b = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        CHECK(a.report.train_loss == b.report.train_loss);
        CHECK(a.report.validation_loss == b.report.validation_loss);
        CHECK(a.net.fcl.w_out.data == b.net.fcl.w_out.data);
        cfg.seed = 6;
        const auto c = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        CHECK(c.report.train_loss != a.report.train_loss);
    }

    TEST_CASE("learning-rate schedule")
    {
        const auto tx = random_symbols(1200, 22);
        const auto rx = add_noise(tx, 0.05, 23);
        auto spec = co_spec(2, 4, 100);
        TrainingConfig cfg;
        cfg.max_epochs = 3;
        const auto flat = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        cfg.final_learning_rate = cfg.learning_rate;
        const auto same = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        CHECK(same.report.train_loss == flat.report.train_loss);
        cfg.final_learning_rate = 1e-5;
        const auto decayed = train(spec, cfg, FeatureSequence(rx), tx.symbols);
        // The first epoch runs at the initial rate.
        CHECK(decayed.report.train_loss[0] == flat.report.train_loss[0]);
        CHECK(decayed.report.train_loss[2] != flat.report.train_loss[2]);
    }

    TEST_CASE("identity channel is learned without errors")
    {
        const auto tx = random_symbols(5000, 22);
        auto spec = co_spec(1, 8, 1000);
        TrainingConfig cfg;
        cfg.max_epochs = 60;
        cfg.seed = 2;
        const auto model = train(spec, cfg, FeatureSequence(tx), tx.symbols);
        const auto test = random_symbols(5000, 23);
        spec.mode = EqualizerMode::co_simplified;
        const auto out = equalize(model.net, spec, FeatureSequence(test));
        const std::span<const cdouble> ref(test.symbols.data() + 1, out.symbols.size());
        CHECK(bit_errors(out.symbols.symbols, ref) == 0);
    }

    TEST_CASE("AWGN-only channel: the equalizer does no harm")
    {
        const double sigma = 0.15;
        const auto tx = random_symbols(20000, 24);
        const auto rx = add_noise(tx, sigma, 25);
        auto spec = co_spec(2, 8, 30000);
        TrainingConfig cfg;
        cfg.max_epochs = 40;
        cfg.seed = 3;
        const auto model = train(spec, cfg, FeatureSequence(rx), tx.symbols);

        const auto ttx = random_symbols(100000, 26);
        const auto trx = add_noise(ttx, sigma, 27);
        const auto out = equalize(model.net, spec, FeatureSequence(trx));
        const std::span<const cdouble> ref(ttx.symbols.data() + 2, out.symbols.size());
        const std::span<const cdouble> direct(trx.symbols.data() + 2, out.symbols.size());
        const auto eq = bit_errors(out.symbols.symbols, ref);
        const auto base = bit_errors(direct, ref);
        MESSAGE("equalized errors " << eq << ", hard-decision errors " << base);
        CHECK(base > 1000);
        CHECK(static_cast<double>(eq) <= 1.05 * static_cast<double>(base));
    }

    TEST_CASE("mode names")
    {
        CHECK(to_string(EqualizerMode::bi) == "bi");
        CHECK(to_string(EqualizerMode::co_standard) == "co_standard");
        CHECK(co_spec(10, 16, 30000).fcl_inputs() == 32);
        CHECK(co_spec(10, 16, 30000, EqualizerMode::bi).fcl_inputs() == 672);
        auto bad = co_spec(10, 16, 21, EqualizerMode::co_simplified);
        CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("configuration error"), Error);
    }
}
