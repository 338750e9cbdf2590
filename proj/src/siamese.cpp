#include "humid/siamese.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace humid {

SiameseModel::SiameseModel(const MaTcnConfig& cfg)
    : cfg_(cfg), seek_("seek.", cfg), serve_("serve.", cfg) {}

void SiameseModel::init_params(ParamStore& store, std::mt19937_64& rng) const {
    seek_.init_params(store, rng);
    serve_.init_params(store, rng);
    const int d = cfg_.d;
    store.add("profile.w1", init_linear(rng, d, kProfileDim));
    store.add("profile.b1", Tensor::zeros({d}));
    store.add("profile.w2", init_linear(rng, d, d));
    store.add("profile.b2", Tensor::zeros({d}));
    const int h1 = 2 * d, h2 = std::max(1, d / 2);
    store.add("head.w1", init_linear(rng, h1, 6 * d));
    store.add("head.b1", Tensor::zeros({h1}));
    store.add("head.w2", init_linear(rng, h2, h1));
    store.add("head.b2", Tensor::zeros({h2}));
    store.add("head.w3", init_linear(rng, 1, h2));
    store.add("head.b3", Tensor::zeros({1}));
}

Var SiameseModel::profile_embed(Tape& t, ParamBinding& p,
                                const std::array<double, kProfileDim>& profile) const {
    Tensor in = Tensor::zeros({1, kProfileDim});
    for (int i = 0; i < kProfileDim; ++i) {
        if (!std::isfinite(profile[static_cast<std::size_t>(i)]))
            throw std::invalid_argument("profile_embed: non-finite feature at index " +
                                        std::to_string(i));
        in.at(0, i) = profile[static_cast<std::size_t>(i)];
    }
    Var x = t.leaf(std::move(in), false);
    Var h = gelu(t, add_row_bias(t, matmul(t, x, transpose(t, p("profile.w1"))),
                                 p("profile.b1")));
    return add_row_bias(t, matmul(t, h, transpose(t, p("profile.w2"))), p("profile.b2"));
}

Var SiameseModel::dissimilarity_logit(Tape& t, ParamBinding& p, const DriverInput& a,
                                      const DriverInput& b) const {
    Var demb_a = profile_embed(t, p, a.profile);
    Var demb_b = profile_embed(t, p, b.profile);
    Var tr_s_a = seek_.forward_trip(t, p, a.seeking_seq, demb_a);
    Var tr_d_a = serve_.forward_trip(t, p, a.serving_seq, demb_a);
    Var tr_s_b = seek_.forward_trip(t, p, b.seeking_seq, demb_b);
    Var tr_d_b = serve_.forward_trip(t, p, b.serving_seq, demb_b);
    Var cat = concat_cols(t, {tr_s_a, tr_d_a, demb_a, tr_s_b, tr_d_b, demb_b});
    Var h1 = gelu(t, add_row_bias(t, matmul(t, cat, transpose(t, p("head.w1"))),
                                  p("head.b1")));
    Var h2 = gelu(t, add_row_bias(t, matmul(t, h1, transpose(t, p("head.w2"))),
                                  p("head.b2")));
    return add_row_bias(t, matmul(t, h2, transpose(t, p("head.w3"))), p("head.b3"));
}

double SiameseModel::dissimilarity(Tape& t, ParamBinding& p, const DriverInput& a,
                                   const DriverInput& b) const {
    Var logit = dissimilarity_logit(t, p, a, b);
    return t.value(sigmoid(t, logit)).data[0];
}

PairClass classify(double score, double threshold) {
    return score < threshold ? PairClass::same : PairClass::different;
}

std::vector<DriverPool> build_pools(const Corpus& corpus) {
    std::map<std::string, DriverPool> by_id;
    for (const auto& s : corpus.sequences) {
        auto& pool = by_id[s.driver_id];
        pool.driver_id = s.driver_id;
        (s.kind == TripKind::seeking ? pool.seeking : pool.serving).push_back(&s);
    }
    for (const auto& p : corpus.profiles) {
        auto it = by_id.find(p.driver_id);
        if (it != by_id.end()) it->second.profile = p.values;
    }
    std::vector<DriverPool> pools;
    for (auto& [id, pool] : by_id)
        if (!pool.seeking.empty() && !pool.serving.empty())
            pools.push_back(std::move(pool));
    return pools;
}

namespace {

DriverInput side_from(const DriverPool& pool, int seek_idx, int serve_idx) {
    DriverInput d;
    d.seeking_seq = *pool.seeking[static_cast<std::size_t>(seek_idx)];
    d.serving_seq = *pool.serving[static_cast<std::size_t>(serve_idx)];
    d.profile = pool.profile;
    return d;
}

// uniform int in [0, n) without distribution-implementation variance
int uniform_index(std::mt19937_64& rng, int n) {
    return static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

// second index distinct from `first` when n > 1
int disjoint_index(std::mt19937_64& rng, int n, int first) {
    if (n <= 1) return first;
    const int r = static_cast<int>(rng() % static_cast<std::uint64_t>(n - 1));
    return r >= first ? r + 1 : r;
}

}  // namespace

std::vector<PairExample> make_pairs(const std::vector<DriverPool>& pools, int count,
                                    double ratio, std::uint64_t seed,
                                    PairSamplerStats* stats) {
    if (pools.size() < 2)
        throw std::invalid_argument("make_pairs: need at least 2 drivers, got " +
                                    std::to_string(pools.size()));
    std::vector<int> same_eligible;
    for (std::size_t i = 0; i < pools.size(); ++i)
        if (pools[i].seeking.size() >= 2 && pools[i].serving.size() >= 2)
            same_eligible.push_back(static_cast<int>(i));

    std::mt19937_64 rng(seed);
    PairSamplerStats local;
    std::vector<PairExample> out;
    out.reserve(static_cast<std::size_t>(count));
    const int n = static_cast<int>(pools.size());
    for (int i = 0; i < count; ++i) {
        bool want_same =
            (static_cast<double>(rng()) / static_cast<double>(std::mt19937_64::max())) < ratio;
        PairExample ex;
        int same_driver = -1;
        if (want_same) {
            const int di = uniform_index(rng, n);
            if (pools[static_cast<std::size_t>(di)].seeking.size() < 2 ||
                pools[static_cast<std::size_t>(di)].serving.size() < 2) {
                ++local.skipped_same;
                if (same_eligible.empty()) {
                    want_same = false;  // nobody can form a same pair
                } else {
                    same_driver = same_eligible[static_cast<std::size_t>(
                        uniform_index(rng, static_cast<int>(same_eligible.size())))];
                }
            } else {
                same_driver = di;
            }
        }
        if (want_same) {
            const DriverPool& pool = pools[static_cast<std::size_t>(same_driver)];
            ex.seek_idx_a = uniform_index(rng, static_cast<int>(pool.seeking.size()));
            ex.serve_idx_a = uniform_index(rng, static_cast<int>(pool.serving.size()));
            ex.seek_idx_b = disjoint_index(rng, static_cast<int>(pool.seeking.size()), ex.seek_idx_a);
            ex.serve_idx_b = disjoint_index(rng, static_cast<int>(pool.serving.size()), ex.serve_idx_a);
            ex.a = side_from(pool, ex.seek_idx_a, ex.serve_idx_a);
            ex.b = side_from(pool, ex.seek_idx_b, ex.serve_idx_b);
            ex.driver_a = ex.driver_b = pool.driver_id;
            ex.label = 0.0;
        } else {
            const int da = uniform_index(rng, n);
            const int db = disjoint_index(rng, n, da);
            const DriverPool& pa = pools[static_cast<std::size_t>(da)];
            const DriverPool& pb = pools[static_cast<std::size_t>(db)];
            ex.seek_idx_a = uniform_index(rng, static_cast<int>(pa.seeking.size()));
            ex.serve_idx_a = uniform_index(rng, static_cast<int>(pa.serving.size()));
            ex.seek_idx_b = uniform_index(rng, static_cast<int>(pb.seeking.size()));
            ex.serve_idx_b = uniform_index(rng, static_cast<int>(pb.serving.size()));
            ex.a = side_from(pa, ex.seek_idx_a, ex.serve_idx_a);
            ex.b = side_from(pb, ex.seek_idx_b, ex.serve_idx_b);
            ex.driver_a = pa.driver_id;
            ex.driver_b = pb.driver_id;
            ex.label = 1.0;
        }
        out.push_back(std::move(ex));
        ++local.emitted;
    }
    if (stats) *stats = local;
    return out;
}

void write_pair_manifest(const std::vector<PairExample>& pairs,
                         const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_pair_manifest: cannot write " + path);
    out << "driver_a,seek_a,serve_a,driver_b,seek_b,serve_b,label\n";
    for (const auto& p : pairs)
        out << p.driver_a << ',' << p.seek_idx_a << ',' << p.serve_idx_a << ','
            << p.driver_b << ',' << p.seek_idx_b << ',' << p.serve_idx_b << ','
            << static_cast<int>(p.label) << "\n";
}

}  // namespace humid
