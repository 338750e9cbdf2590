#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "humid/model.hpp"
#include "humid/optim.hpp"

using namespace humid;

namespace {

MaTcnConfig tiny_cfg() {
    MaTcnConfig cfg;
    cfg.d = 8;
    cfg.n_heads = 2;
    cfg.n_blocks = 2;
    cfg.kernel = 3;
    cfg.dilation_base = 2;
    cfg.se_reduction = 4;
    cfg.vocab_lat = 12;
    cfg.vocab_lon = 12;
    cfg.vocab_interval = 288;
    cfg.emb_lat = 2;
    cfg.emb_lon = 2;
    cfg.emb_interval = 2;
    cfg.emb_velocity = 2;
    return cfg;
}

GridSequence random_seq(std::mt19937_64& rng, const MaTcnConfig& cfg, int len) {
    std::uniform_int_distribution<int> lat(0, cfg.vocab_lat - 1);
    std::uniform_int_distribution<int> lon(0, cfg.vocab_lon - 1);
    std::uniform_int_distribution<int> iv(1, cfg.vocab_interval);
    std::uniform_real_distribution<double> vel(0.0, 20.0);
    GridSequence s;
    for (int i = 0; i < len; ++i) s.cells.push_back({lat(rng), lon(rng), iv(rng), vel(rng)});
    s.original_length = len;
    s.mask.assign(static_cast<std::size_t>(len), true);
    return s;
}

void pad_seq(GridSequence& s, int target) {
    while (static_cast<int>(s.cells.size()) < target) {
        s.cells.push_back({0, 0, 1, 0.0});
        s.mask.push_back(false);
    }
}

struct Fixture {
    MaTcnConfig cfg = tiny_cfg();
    MaTcnEncoder enc{"enc.", cfg};
    ParamStore params;
    std::mt19937_64 rng{2024};
    Fixture() { enc.init_params(params, rng); }
};

Tensor rand_row(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> dist(-1, 1);
    Tensor t = Tensor::zeros({1, d});
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace

TEST_CASE("receptive_field arithmetic") {
    CHECK(receptive_field(4, 10, 2) == 271);
    CHECK(receptive_field(1, 2, 2) == 3);
    CHECK(receptive_field(3, 1, 2) == 1);
    CHECK(receptive_field(7, 1, 3) == 1);
    CHECK(receptive_field(2, 4, 1) == 13);  // B=1 limit: 2N(K-1)+1
}

TEST_CASE("receptive_field monotone in each argument") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> nd(1, 6), kd(1, 12), bd(1, 4);
    for (int i = 0; i < 100; ++i) {
        const int n = nd(rng), k = kd(rng), b = bd(rng);
        const long long base = receptive_field(n, k, b);
        CHECK(receptive_field(n + 1, k, b) >= base);
        CHECK(receptive_field(n, k + 1, b) >= base);
        CHECK(receptive_field(n, k, b + 1) >= base);
    }
}

TEST_CASE("embed_inputs: shape, determinism, bias limit") {
    Fixture f;
    for (int len : {10, 37}) {
        auto seq = random_seq(f.rng, f.cfg, len);
        Tape t;
        ParamBinding bind(t, f.params);
        Var x = f.enc.embed_inputs(t, bind, seq);
        CHECK(t.value(x).rows() == f.cfg.d);
        CHECK(t.value(x).cols() == len);
    }

    // identical cells give identical output columns
    GridSequence seq;
    seq.cells = {{3, 4, 100, 5.0}, {3, 4, 100, 5.0}};
    seq.mask = {true, true};
    seq.original_length = 2;
    Tape t;
    ParamBinding bind(t, f.params);
    Var x = f.enc.embed_inputs(t, bind, seq);
    for (int i = 0; i < f.cfg.d; ++i)
        CHECK(t.value(x).at(i, 0) == t.value(x).at(i, 1));

    // zeroed tables and velocity map leave only the stem bias
    for (const char* n : {"enc.emb.lat", "enc.emb.lon", "enc.emb.interval",
                          "enc.emb.vel.w", "enc.emb.vel.b"})
        for (double& v : f.params.get(n).data) v = 0.0;
    for (std::int64_t i = 0; i < f.params.get("enc.stem.b").size(); ++i)
        f.params.get("enc.stem.b").data[i] = 0.25 * static_cast<double>(i);
    Tape t2;
    ParamBinding bind2(t2, f.params);
    Var x2 = f.enc.embed_inputs(t2, bind2, seq);
    for (int i = 0; i < f.cfg.d; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(t2.value(x2).at(i, j) == doctest::Approx(0.25 * i));
}

TEST_CASE("embed_inputs: out-of-vocab index is an error") {
    Fixture f;
    GridSequence seq;
    seq.cells = {{f.cfg.vocab_lat, 0, 1, 0.0}};
    seq.mask = {true};
    seq.original_length = 1;
    Tape t;
    ParamBinding bind(t, f.params);
    CHECK_THROWS_AS(f.enc.embed_inputs(t, bind, seq), std::out_of_range);
}

TEST_CASE("channel_attention: gate range and saturation limit") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 20);
    Tape t;
    ParamBinding bind(t, f.params);
    Var x = f.enc.embed_inputs(t, bind, seq);
    Var y = f.enc.channel_attention(t, bind, x, seq.mask);
    // gate in (0,1): |y| <= |x| elementwise, with equality impossible
    for (std::int64_t i = 0; i < t.value(x).size(); ++i) {
        const double xi = t.value(x).data[i], yi = t.value(y).data[i];
        CHECK(std::abs(yi) <= std::abs(xi));
        if (xi != 0.0) CHECK(std::abs(yi) > 0.0);
    }

    // huge excitation bias saturates the sigmoid: output -> x
    for (double& v : f.params.get("enc.se.w2").data) v = 0.0;
    for (double& v : f.params.get("enc.se.b2").data) v = 40.0;
    Tape t2;
    ParamBinding bind2(t2, f.params);
    Var x2 = f.enc.embed_inputs(t2, bind2, seq);
    Var y2 = f.enc.channel_attention(t2, bind2, x2, seq.mask);
    for (std::int64_t i = 0; i < t2.value(x2).size(); ++i)
        CHECK(t2.value(y2).data[i] == doctest::Approx(t2.value(x2).data[i]).epsilon(1e-12));
}

TEST_CASE("channel_attention: padded and truncated inputs give identical gates") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 15);
    auto padded = seq;
    pad_seq(padded, 25);
    auto run = [&](const GridSequence& s) {
        Tape t;
        ParamBinding bind(t, f.params);
        Var x = f.enc.embed_inputs(t, bind, s);
        Var y = f.enc.channel_attention(t, bind, x, s.mask);
        // compare only real columns
        std::vector<double> out;
        for (int i = 0; i < f.cfg.d; ++i)
            for (int j = 0; j < 15; ++j) out.push_back(t.value(y).at(i, j));
        return out;
    };
    CHECK(run(seq) == run(padded));
}

TEST_CASE("mhsa: L=1 output equals W_O . V + I") {
    Fixture f;
    Tape t;
    ParamBinding bind(t, f.params);
    Var input = t.leaf(rand_row(f.rng, f.cfg.d), false);
    Var out = f.enc.mhsa_layer(t, bind, input, 1, {true});

    // manual: per head V = I Wv; concat; times Wo; plus I
    Tensor iv = t.value(input);
    std::vector<double> cat;
    for (int h = 0; h < f.cfg.n_heads; ++h) {
        const Tensor& wv = f.params.get("enc.block1.mhsa.h" + std::to_string(h) + ".v");
        for (int j = 0; j < f.cfg.head_dim(); ++j) {
            double s = 0.0;
            for (int p = 0; p < f.cfg.d; ++p) s += iv.at(0, p) * wv.at(p, j);
            cat.push_back(s);
        }
    }
    const Tensor& wo = f.params.get("enc.block1.mhsa.wo");
    for (int j = 0; j < f.cfg.d; ++j) {
        double s = iv.at(0, j);
        for (int p = 0; p < f.cfg.d; ++p) s += cat[static_cast<std::size_t>(p)] * wo.at(p, j);
        CHECK(t.value(out).at(0, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("mhsa: head_dim follows floor(d/n)") {
    MaTcnConfig cfg = tiny_cfg();
    cfg.d = 64;
    cfg.n_heads = 8;
    CHECK(cfg.head_dim() == 8);
}

TEST_CASE("conv_residual_block: zero weights give pure residual") {
    Fixture f;
    for (const auto& n : f.params.names())
        if (n.find("conv1") != std::string::npos)
            for (double& v : f.params.get(n).data) v = 0.0;
    Tape t;
    ParamBinding bind(t, f.params);
    std::mt19937_64 rng(5);
    Tensor x0 = Tensor::zeros({f.cfg.d, 9});
    std::uniform_real_distribution<double> dist(-1, 1);
    for (double& v : x0.data) v = dist(rng);
    Var x = t.leaf(x0, false);
    Var y = f.enc.conv_residual_block(t, bind, x, 1, 1);
    CHECK(t.value(y).data == x0.data);
}

TEST_CASE("conv path is causal under perturbation") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 14);
    auto run = [&](const GridSequence& s) {
        Tape t;
        ParamBinding bind(t, f.params);
        Var x = t.leaf([&] {
            Tensor v = Tensor::zeros({f.cfg.d, static_cast<int>(s.cells.size())});
            for (int i = 0; i < f.cfg.d; ++i)
                for (std::size_t j = 0; j < s.cells.size(); ++j)
                    v.at(i, static_cast<int>(j)) = s.cells[j].velocity + 0.1 * i;
            return v;
        }(), false);
        Var y = f.enc.conv_residual_block(t, bind, x, 1, 2);
        Var y2 = f.enc.conv_residual_block(t, bind, y, 2, 2);
        return t.value(y2);
    };
    const Tensor base = run(seq);
    for (int pt = 0; pt < 14; ++pt) {
        auto pert = seq;
        pert.cells[static_cast<std::size_t>(pt)].velocity += 1.0;
        const Tensor out = run(pert);
        for (int i = 0; i < f.cfg.d; ++i)
            for (int j = 0; j < pt; ++j)
                CHECK(out.at(i, j) == base.at(i, j));
    }
}

TEST_CASE("double_block: zeroed conv weights expose the MHSA output") {
    Fixture f;
    for (const auto& n : f.params.names())
        if (n.find("block1.conv") != std::string::npos)
            for (double& v : f.params.get(n).data) v = 0.0;
    auto seq = random_seq(f.rng, f.cfg, 8);
    Tape t;
    ParamBinding bind(t, f.params);
    Var x = f.enc.embed_inputs(t, bind, seq);
    Var input = transpose(t, x);
    Var mhsa_out = f.enc.mhsa_layer(t, bind, input, 1, seq.mask);
    auto out = f.enc.double_block(t, bind, input, 1, seq.mask);
    CHECK(t.value(out.h_first).data == t.value(mhsa_out).data);
    CHECK(t.value(out.h_second).data == t.value(mhsa_out).data);
    CHECK(t.value(out.output).rows() == 8);
    CHECK(t.value(out.output).cols() == f.cfg.d);
}

TEST_CASE("time_aggregate: equal rows give the common row; L=1 trivial") {
    Fixture f;
    Tape t;
    ParamBinding bind(t, f.params);
    Tensor row = rand_row(f.rng, f.cfg.d);
    Tensor rep = Tensor::zeros({5, f.cfg.d});
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < f.cfg.d; ++j) rep.at(i, j) = row.at(0, j);
    Var h = t.leaf(rep, false);
    Var agg = f.enc.time_aggregate(t, bind, h, 1, std::vector<bool>(5, true));
    for (int j = 0; j < f.cfg.d; ++j)
        CHECK(t.value(agg).at(0, j) == doctest::Approx(row.at(0, j)).epsilon(1e-12));

    Var h1 = t.leaf(row, false);
    Var agg1 = f.enc.time_aggregate(t, bind, h1, 2, {true});
    for (int j = 0; j < f.cfg.d; ++j)
        CHECK(t.value(agg1).at(0, j) == doctest::Approx(row.at(0, j)));
}

TEST_CASE("time_aggregate: padded steps contribute nothing") {
    Fixture f;
    Tape t;
    ParamBinding bind(t, f.params);
    std::mt19937_64 rng(9);
    Tensor real = Tensor::zeros({4, f.cfg.d});
    std::uniform_real_distribution<double> dist(-1, 1);
    for (double& v : real.data) v = dist(rng);
    Tensor padded = Tensor::zeros({7, f.cfg.d});
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < f.cfg.d; ++j) padded.at(i, j) = real.at(i, j);
    for (int i = 4; i < 7; ++i)
        for (int j = 0; j < f.cfg.d; ++j) padded.at(i, j) = 99.0;  // garbage
    Var a = f.enc.time_aggregate(t, bind, t.leaf(real, false), 1,
                                 std::vector<bool>(4, true));
    Var b = f.enc.time_aggregate(t, bind, t.leaf(padded, false), 1,
                                 {true, true, true, true, false, false, false});
    CHECK(t.value(a).data == t.value(b).data);
}

TEST_CASE("target_attention: uniform over identical inputs, 2N weights") {
    Fixture f;
    Tape t;
    ParamBinding bind(t, f.params);
    Tensor row = rand_row(f.rng, f.cfg.d);
    std::vector<Var> hs;
    for (int i = 0; i < 2 * f.cfg.n_blocks; ++i) hs.push_back(t.leaf(row, false));
    Var demb = t.leaf(rand_row(f.rng, f.cfg.d), false);
    Var tr = f.enc.target_attention(t, bind, hs, demb);
    for (int j = 0; j < f.cfg.d; ++j)
        CHECK(t.value(tr).at(0, j) == doctest::Approx(row.at(0, j)).epsilon(1e-12));

    // wrong count is rejected
    hs.pop_back();
    CHECK_THROWS_AS(f.enc.target_attention(t, bind, hs, demb), std::invalid_argument);
}

TEST_CASE("forward_trip: output dim, determinism, distinct inputs differ") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 12);
    auto other = random_seq(f.rng, f.cfg, 15);
    auto run = [&](const GridSequence& s) {
        Tape t;
        ParamBinding bind(t, f.params);
        Var demb = t.leaf(Tensor::full({1, f.cfg.d}, 0.3), false);
        Var tr = f.enc.forward_trip(t, bind, s, demb);
        return t.value(tr);
    };
    const Tensor a = run(seq);
    CHECK(a.rows() == 1);
    CHECK(a.cols() == f.cfg.d);
    CHECK(run(seq).data == a.data);          // identical input, identical Tr
    CHECK(run(other).data != a.data);        // different trajectories differ
}

TEST_CASE("forward_trip: Tr is bit-identical under end padding") {
    Fixture f;
    for (int trial = 0; trial < 5; ++trial) {
        auto seq = random_seq(f.rng, f.cfg, 10 + trial * 3);
        auto padded = seq;
        pad_seq(padded, static_cast<int>(seq.cells.size()) + 7 + trial);
        auto run = [&](const GridSequence& s) {
            Tape t;
            ParamBinding bind(t, f.params);
            Var demb = t.leaf(Tensor::full({1, f.cfg.d}, 0.1), false);
            return t.value(f.enc.forward_trip(t, bind, s, demb)).data;
        };
        CHECK(run(seq) == run(padded));
    }
}

TEST_CASE("grad_check: single MHSA layer passes at 1e-3") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 6);
    auto loss_fn = [&](Tape& t, ParamBinding& bind) {
        Var x = f.enc.embed_inputs(t, bind, seq);
        Var y = f.enc.mhsa_layer(t, bind, transpose(t, x), 1, seq.mask);
        Var s = sigmoid(t, y);
        Var ones_r = t.leaf(Tensor::full({f.cfg.d, 1}, 1.0), false);
        Var rowsum = matmul(t, s, ones_r);
        Var ones_l = t.leaf(Tensor::full({1, 6}, 1.0), false);
        return matmul(t, ones_l, rowsum);
    };
    auto report = grad_check(loss_fn, f.params, 1e-5, 1e-3, 10);
    CHECK(report.pass);
}

TEST_CASE("grad_check: full forward_trip passes at 1e-3") {
    Fixture f;
    auto seq = random_seq(f.rng, f.cfg, 7);
    auto loss_fn = [&](Tape& t, ParamBinding& bind) {
        Var demb = t.leaf(Tensor::full({1, f.cfg.d}, 0.2), false);
        Var tr = f.enc.forward_trip(t, bind, seq, demb);
        Var s = tanh_op(t, tr);
        Var ones = t.leaf(Tensor::full({f.cfg.d, 1}, 1.0), false);
        return matmul(t, s, ones);
    };
    auto report = grad_check(loss_fn, f.params, 1e-5, 1e-3, 6);
    CHECK(report.pass);
    CHECK(report.worst() < 1e-3);
}

TEST_CASE("ablation flags change the parameter set") {
    MaTcnConfig cfg = tiny_cfg();
    std::mt19937_64 rng(3);
    ParamStore full, no_mhsa, no_agg;
    MaTcnEncoder(std::string("e."), cfg).init_params(full, rng);
    cfg.disable_mhsa = true;
    MaTcnEncoder(std::string("e."), cfg).init_params(no_mhsa, rng);
    cfg.disable_mhsa = false;
    cfg.disable_aggregation = true;
    MaTcnEncoder(std::string("e."), cfg).init_params(no_agg, rng);
    CHECK(no_mhsa.total_elements() < full.total_elements());
    CHECK(no_agg.total_elements() < full.total_elements());
    for (const auto& n : no_mhsa.names()) CHECK(n.find("mhsa") == std::string::npos);
    for (const auto& n : no_agg.names()) CHECK(n.find("agg.") == std::string::npos);
}

TEST_CASE("ablated encoders still run forward") {
    MaTcnConfig cfg = tiny_cfg();
    cfg.disable_mhsa = true;
    cfg.disable_aggregation = true;
    MaTcnEncoder enc("e.", cfg);
    ParamStore ps;
    std::mt19937_64 rng(4);
    enc.init_params(ps, rng);
    GridSequence seq;
    for (int i = 0; i < 11; ++i) seq.cells.push_back({1, 2, 10 + i, 3.0});
    seq.mask.assign(11, true);
    seq.original_length = 11;
    Tape t;
    ParamBinding bind(t, ps);
    Var demb = t.leaf(Tensor::full({1, cfg.d}, 0.0), false);
    Var tr = enc.forward_trip(t, bind, seq, demb);
    CHECK(t.value(tr).cols() == cfg.d);
}
