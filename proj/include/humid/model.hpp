#pragma once

#include <random>
#include <string>
#include <vector>

#include "humid/params.hpp"
#include "humid/preprocess.hpp"
#include "humid/tensor.hpp"

namespace humid {

struct MaTcnConfig {
    int d = 64;          // hidden size
    int n_heads = 8;
    int n_blocks = 4;    // N
    int kernel = 10;     // K, depthwise kernel size
    int dilation_base = 2;  // B
    int se_reduction = 4;   // channel-attention bottleneck ratio

    int vocab_lat = 0;   // grid vocabulary sizes, from GridConfig
    int vocab_lon = 0;
    int vocab_interval = 288;

    int emb_lat = 16;
    int emb_lon = 16;
    int emb_interval = 8;
    int emb_velocity = 8;

    bool disable_mhsa = false;
    bool disable_aggregation = false;

    int head_dim() const { return d / n_heads; }  // d_k = floor(d/n)
    int emb_concat() const { return emb_lat + emb_lon + emb_interval + emb_velocity; }
    void validate() const;
};

// Exact receptive field of the stacked conv paths: 2(B^N-1)(K-1)/(B-1)+1,
// with the B=1 limit 2N(K-1)+1.
long long receptive_field(int n_blocks, int kernel, int dilation_base);

// One trajectory encoder. Parameter names are created under `prefix` so two
// encoders (seeking/serving) can live in one store.
class MaTcnEncoder {
public:
    MaTcnEncoder(std::string prefix, const MaTcnConfig& cfg);

    void init_params(ParamStore& store, std::mt19937_64& rng) const;

    // Embedding lookups + velocity projection + 1x1 channel expansion. [d x L]
    Var embed_inputs(Tape& t, ParamBinding& p, const GridSequence& seq) const;

    Var channel_attention(Tape& t, ParamBinding& p, Var x,
                          const std::vector<bool>& mask) const;

    // I is [L x d]; masked keys get zero attention weight.
    Var mhsa_layer(Tape& t, ParamBinding& p, Var input, int level,
                   const std::vector<bool>& mask) const;

    // x is [d x L]; two of these per double block. `index` is the sub-block
    // index in [1, 2N] used for parameter naming.
    Var conv_residual_block(Tape& t, ParamBinding& p, Var x, int index,
                            int dilation) const;

    struct DoubleBlockOut {
        Var output;  // [L x d]
        Var h_first;   // sub-block 2l-1 output, [L x d]
        Var h_second;  // sub-block 2l output, [L x d]
    };
    DoubleBlockOut double_block(Tape& t, ParamBinding& p, Var input, int level,
                                const std::vector<bool>& mask) const;

    // Eq-style time attention toward the last unmasked step. h_seq [L x d] -> [1 x d].
    Var time_aggregate(Tape& t, ParamBinding& p, Var h_seq, int subblock_index,
                       const std::vector<bool>& mask) const;

    // Attention over the 2N aggregated vectors against the profile embedding.
    Var target_attention(Tape& t, ParamBinding& p, const std::vector<Var>& h_list,
                         Var d_emb) const;

    // Full encoder: GridSequence -> [1 x d] trip representation.
    Var forward_trip(Tape& t, ParamBinding& p, const GridSequence& seq,
                     Var d_emb) const;

    const MaTcnConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    std::string name(const std::string& suffix) const { return prefix_ + suffix; }
    std::string prefix_;
    MaTcnConfig cfg_;
};

// Index of the last true entry in the mask; throws when all masked.
int last_unmasked(const std::vector<bool>& mask);

}  // namespace humid
