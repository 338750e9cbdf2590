#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "humid/model.hpp"
#include "humid/preprocess.hpp"

namespace humid {

struct DriverInput {
    GridSequence seeking_seq;
    GridSequence serving_seq;
    std::array<double, kProfileDim> profile{};  // z-normalized features
};

struct PairExample {
    DriverInput a;
    DriverInput b;
    double label = 0.0;  // 0 = same driver, 1 = different drivers
    std::string driver_a;
    std::string driver_b;
    int seek_idx_a = 0, serve_idx_a = 0, seek_idx_b = 0, serve_idx_b = 0;
};

// Twin-shared model: two MA-TCN encoders (one per trip kind), a profile
// embedding net and the dissimilarity head, all in one parameter store.
class SiameseModel {
public:
    explicit SiameseModel(const MaTcnConfig& cfg);

    void init_params(ParamStore& store, std::mt19937_64& rng) const;

    // 12 -> d -> d with GELU between.
    Var profile_embed(Tape& t, ParamBinding& p,
                      const std::array<double, kProfileDim>& profile) const;

    // Pre-sigmoid dissimilarity logit for a pair.
    Var dissimilarity_logit(Tape& t, ParamBinding& p, const DriverInput& a,
                            const DriverInput& b) const;

    // Score in (0,1); sigma of the logit.
    double dissimilarity(Tape& t, ParamBinding& p, const DriverInput& a,
                         const DriverInput& b) const;

    const MaTcnConfig& config() const { return cfg_; }
    const MaTcnEncoder& seeking_encoder() const { return seek_; }
    const MaTcnEncoder& serving_encoder() const { return serve_; }

private:
    MaTcnConfig cfg_;
    MaTcnEncoder seek_;
    MaTcnEncoder serve_;
};

// score < threshold -> same driver; boundary goes to "different".
enum class PairClass { same, different };
PairClass classify(double score, double threshold = 0.5);

// Trajectory pools per driver, grouped from a corpus.
struct DriverPool {
    std::string driver_id;
    std::vector<const GridSequence*> seeking;
    std::vector<const GridSequence*> serving;
    std::array<double, kProfileDim> profile{};
};

std::vector<DriverPool> build_pools(const Corpus& corpus);

struct PairSamplerStats {
    int emitted = 0;
    int skipped_same = 0;  // drivers that could not form a same-driver pair
};

// Seeded, reproducible pair stream. `ratio` is the fraction of same-driver
// pairs. Same-driver pairs draw disjoint trajectories when possible.
std::vector<PairExample> make_pairs(const std::vector<DriverPool>& pools, int count,
                                    double ratio, std::uint64_t seed,
                                    PairSamplerStats* stats = nullptr);

// Optional audit export: one line per pair.
void write_pair_manifest(const std::vector<PairExample>& pairs,
                         const std::string& path);

}  // namespace humid
