#include "humid/model.hpp"

#include <cmath>
#include <stdexcept>

namespace humid {

namespace {
// Raw m/s values are O(10); keep the velocity channel on the same footing
// as the embeddings.
constexpr double kVelocityScale = 0.1;
}  // namespace

void MaTcnConfig::validate() const {
    if (d < 1 || n_heads < 1 || head_dim() < 1)
        throw std::invalid_argument("MaTcnConfig: need d >= n_heads >= 1");
    if (n_blocks < 1 || kernel < 1 || dilation_base < 1)
        throw std::invalid_argument("MaTcnConfig: N, K, B must be >= 1");
    if (se_reduction < 1) throw std::invalid_argument("MaTcnConfig: se_reduction >= 1");
    if (vocab_lat < 1 || vocab_lon < 1 || vocab_interval < 1)
        throw std::invalid_argument("MaTcnConfig: vocab sizes must be set");
    if (emb_lat < 1 || emb_lon < 1 || emb_interval < 1 || emb_velocity < 1)
        throw std::invalid_argument("MaTcnConfig: embedding dims must be >= 1");
}

long long receptive_field(int n_blocks, int kernel, int dilation_base) {
    if (n_blocks < 1 || kernel < 1 || dilation_base < 1)
        throw std::invalid_argument("receptive_field: N, K, B must be >= 1");
    if (dilation_base == 1)
        return 2LL * n_blocks * (kernel - 1) + 1;
    long long pow_bn = 1;
    for (int i = 0; i < n_blocks; ++i) pow_bn *= dilation_base;
    return 2LL * (pow_bn - 1) * (kernel - 1) / (dilation_base - 1) + 1;
}

int last_unmasked(const std::vector<bool>& mask) {
    for (int i = static_cast<int>(mask.size()) - 1; i >= 0; --i)
        if (mask[static_cast<std::size_t>(i)]) return i;
    throw std::invalid_argument("last_unmasked: all positions masked");
}

MaTcnEncoder::MaTcnEncoder(std::string prefix, const MaTcnConfig& cfg)
    : prefix_(std::move(prefix)), cfg_(cfg) {
    cfg_.validate();
}

void MaTcnEncoder::init_params(ParamStore& store, std::mt19937_64& rng) const {
    const int d = cfg_.d;
    store.add(name("emb.lat"), init_embedding(rng, cfg_.vocab_lat, cfg_.emb_lat));
    store.add(name("emb.lon"), init_embedding(rng, cfg_.vocab_lon, cfg_.emb_lon));
    store.add(name("emb.interval"), init_embedding(rng, cfg_.vocab_interval, cfg_.emb_interval));
    store.add(name("emb.vel.w"), init_linear(rng, 1, cfg_.emb_velocity));
    store.add(name("emb.vel.b"), Tensor::zeros({cfg_.emb_velocity}));
    store.add(name("stem.w"), init_linear(rng, d, cfg_.emb_concat()));
    store.add(name("stem.b"), Tensor::zeros({d}));

    const int bottleneck = std::max(1, d / cfg_.se_reduction);
    store.add(name("se.w1"), init_linear(rng, bottleneck, d));
    store.add(name("se.b1"), Tensor::zeros({bottleneck}));
    store.add(name("se.w2"), init_linear(rng, d, bottleneck));
    store.add(name("se.b2"), Tensor::zeros({d}));

    const int dk = cfg_.head_dim();
    for (int l = 1; l <= cfg_.n_blocks; ++l) {
        const std::string b = "block" + std::to_string(l) + ".";
        if (!cfg_.disable_mhsa) {
            for (int h = 0; h < cfg_.n_heads; ++h) {
                const std::string hp = b + "mhsa.h" + std::to_string(h) + ".";
                store.add(name(hp + "q"), init_linear(rng, d, dk));
                store.add(name(hp + "k"), init_linear(rng, d, dk));
                store.add(name(hp + "v"), init_linear(rng, d, dk));
            }
            store.add(name(b + "mhsa.wo"), init_linear(rng, cfg_.n_heads * dk, d));
        }
        for (int s = 1; s <= 2; ++s) {
            const std::string cp = b + "conv" + std::to_string(s) + ".";
            store.add(name(cp + "dw"), init_linear(rng, d, cfg_.kernel));
            store.add(name(cp + "pw1.w"), init_linear(rng, 2 * d, d));
            store.add(name(cp + "pw1.b"), Tensor::zeros({2 * d}));
            store.add(name(cp + "pw2.w"), init_linear(rng, d, 2 * d));
            store.add(name(cp + "pw2.b"), Tensor::zeros({d}));
        }
    }
    if (!cfg_.disable_aggregation) {
        for (int j = 1; j <= 2 * cfg_.n_blocks; ++j)
            store.add(name("agg.w" + std::to_string(j)), init_linear(rng, d, d));
        store.add(name("agg.vd"), init_linear(rng, d, d));
        store.add(name("agg.bd"), Tensor::zeros({d}));
    }
}

Var MaTcnEncoder::embed_inputs(Tape& t, ParamBinding& p, const GridSequence& seq) const {
    const int L = static_cast<int>(seq.cells.size());
    if (L == 0) throw std::invalid_argument("embed_inputs: empty sequence");
    std::vector<int> lat_idx, lon_idx, int_idx;
    Tensor vel = Tensor::zeros({L, 1});
    for (int i = 0; i < L; ++i) {
        const GridCell& c = seq.cells[static_cast<std::size_t>(i)];
        lat_idx.push_back(c.g_lat);
        lon_idx.push_back(c.g_lon);
        if (c.interval < 1 || c.interval > cfg_.vocab_interval)
            throw std::out_of_range("embed_inputs: interval " + std::to_string(c.interval) +
                                    " outside [1," + std::to_string(cfg_.vocab_interval) + "]");
        int_idx.push_back(c.interval - 1);
        vel.at(i, 0) = c.velocity * kVelocityScale;
    }
    Var e_lat = gather_rows(t, p(name("emb.lat")), lat_idx);
    Var e_lon = gather_rows(t, p(name("emb.lon")), lon_idx);
    Var e_int = gather_rows(t, p(name("emb.interval")), int_idx);
    Var vcol = t.leaf(std::move(vel), false);
    Var e_vel = add_row_bias(t, matmul(t, vcol, p(name("emb.vel.w"))), p(name("emb.vel.b")));
    Var cat = concat_cols(t, {e_lat, e_lon, e_int, e_vel});  // [L x emb_concat]
    return pointwise_conv(t, transpose(t, cat), p(name("stem.w")), p(name("stem.b")));
}

Var MaTcnEncoder::channel_attention(Tape& t, ParamBinding& p, Var x,
                                    const std::vector<bool>& mask) const {
    Var squeeze = masked_mean_cols(t, x, mask);  // [d x 1]
    Var z = relu(t, pointwise_conv(t, squeeze, p(name("se.w1")), p(name("se.b1"))));
    Var gate = sigmoid(t, pointwise_conv(t, z, p(name("se.w2")), p(name("se.b2"))));
    return scale_rows(t, x, gate);
}

Var MaTcnEncoder::mhsa_layer(Tape& t, ParamBinding& p, Var input, int level,
                             const std::vector<bool>& mask) const {
    const std::string b = "block" + std::to_string(level) + ".mhsa.";
    const int dk = cfg_.head_dim();
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Var> heads;
    for (int h = 0; h < cfg_.n_heads; ++h) {
        const std::string hp = b + "h" + std::to_string(h) + ".";
        Var q = matmul(t, input, p(name(hp + "q")));
        Var k = matmul(t, input, p(name(hp + "k")));
        Var v = matmul(t, input, p(name(hp + "v")));
        Var logits = scale(t, matmul(t, q, transpose(t, k)), inv_sqrt_dk);
        Var attn = masked_softmax(t, logits, mask);
        heads.push_back(matmul_masked_rows(t, attn, v, mask));
    }
    Var cat = heads.size() == 1 ? heads[0] : concat_cols(t, heads);
    Var proj = matmul(t, cat, p(name(b + "wo")));
    return add(t, proj, input);
}

Var MaTcnEncoder::conv_residual_block(Tape& t, ParamBinding& p, Var x, int index,
                                      int dilation) const {
    const int level = (index + 1) / 2;
    const int sub = index - 2 * (level - 1);
    const std::string cp = "block" + std::to_string(level) + ".conv" + std::to_string(sub) + ".";
    Var dw = depthwise_causal_conv1d(t, x, p(name(cp + "dw")), dilation);
    Var h1 = gelu(t, dw);
    Var h2 = gelu(t, pointwise_conv(t, h1, p(name(cp + "pw1.w")), p(name(cp + "pw1.b"))));
    Var h3 = pointwise_conv(t, h2, p(name(cp + "pw2.w")), p(name(cp + "pw2.b")));
    return add(t, x, h3);
}

MaTcnEncoder::DoubleBlockOut MaTcnEncoder::double_block(Tape& t, ParamBinding& p,
                                                        Var input, int level,
                                                        const std::vector<bool>& mask) const {
    if (level < 1 || level > cfg_.n_blocks)
        throw std::invalid_argument("double_block: level out of range");
    int dilation = 1;
    for (int i = 1; i < level; ++i) dilation *= cfg_.dilation_base;
    Var a = cfg_.disable_mhsa ? input : mhsa_layer(t, p, input, level, mask);
    Var xt = transpose(t, a);
    Var c1 = conv_residual_block(t, p, xt, 2 * level - 1, dilation);
    Var c2 = conv_residual_block(t, p, c1, 2 * level, dilation);
    DoubleBlockOut out;
    out.h_first = transpose(t, c1);
    out.h_second = transpose(t, c2);
    out.output = out.h_second;
    return out;
}

Var MaTcnEncoder::time_aggregate(Tape& t, ParamBinding& p, Var h_seq, int subblock_index,
                                 const std::vector<bool>& mask) const {
    Var w = p(name("agg.w" + std::to_string(subblock_index)));
    const int t_last = last_unmasked(mask);
    Var h_t = gather_rows(t, h_seq, {t_last});            // [1 x d]
    Var u = matmul(t, h_seq, w);                          // [L x d]
    Var logits = transpose(t, matmul(t, u, transpose(t, h_t)));  // [1 x L]
    Var lambda = masked_softmax(t, logits, mask);
    return matmul_masked_rows(t, lambda, h_seq, mask);    // [1 x d]
}

Var MaTcnEncoder::target_attention(Tape& t, ParamBinding& p,
                                   const std::vector<Var>& h_list, Var d_emb) const {
    if (static_cast<int>(h_list.size()) != 2 * cfg_.n_blocks)
        throw std::invalid_argument("target_attention: expected " +
                                    std::to_string(2 * cfg_.n_blocks) + " inputs, got " +
                                    std::to_string(h_list.size()));
    if (t.value(d_emb).size() != cfg_.d)
        throw std::invalid_argument("target_attention: d_emb size " +
                                    shape_str(t.value(d_emb).shape) + " does not match d=" +
                                    std::to_string(cfg_.d));
    Var h_stack = concat_rows(t, h_list);  // [2N x d]
    Var transformed = tanh_op(
        t, add_row_bias(t, matmul(t, h_stack, transpose(t, p(name("agg.vd")))),
                        p(name("agg.bd"))));
    Var scores = transpose(t, matmul(t, transformed, transpose(t, d_emb)));  // [1 x 2N]
    std::vector<bool> all_true(h_list.size(), true);
    Var beta = masked_softmax(t, scores, all_true);
    // weights come from the transformed vectors, the sum runs over the raw ones
    return matmul(t, beta, h_stack);  // [1 x d]
}

Var MaTcnEncoder::forward_trip(Tape& t, ParamBinding& p, const GridSequence& seq,
                               Var d_emb) const {
    const std::vector<bool>& mask = seq.mask;
    Var x = embed_inputs(t, p, seq);          // [d x L]
    x = channel_attention(t, p, x, mask);
    Var cur = transpose(t, x);                // [L x d]
    std::vector<Var> aggregated;
    for (int l = 1; l <= cfg_.n_blocks; ++l) {
        DoubleBlockOut out = double_block(t, p, cur, l, mask);
        if (!cfg_.disable_aggregation) {
            aggregated.push_back(time_aggregate(t, p, out.h_first, 2 * l - 1, mask));
            aggregated.push_back(time_aggregate(t, p, out.h_second, 2 * l, mask));
        }
        cur = out.output;
    }
    if (cfg_.disable_aggregation)
        return gather_rows(t, cur, {last_unmasked(mask)});
    return target_attention(t, p, aggregated, d_emb);
}

}  // namespace humid
