#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "humid/checkpoint.hpp"
#include "humid/siamese.hpp"

namespace humid {

// Everything one run needs, loadable from a flat key=value file with CLI
// overrides applied on top.
struct RunConfig {
    MaTcnConfig model;
    GridConfig grid;

    double lr = 1e-4;
    int batch_size = 32;
    int max_epochs = 50;
    int patience = 5;  // early stop on val accuracy
    std::uint64_t seed = 1;
    double threshold = 0.5;

    int train_pairs_per_epoch = 256;
    int val_pairs = 128;
    int eval_pairs = 200;
    double same_ratio = 0.5;
    int n_train_drivers = 0;  // 0 = 70% of drivers
    int n_val_drivers = 0;    // 0 = 15% (at least 2 when possible)

    std::string corpus_seq;       // JSONL trajectory file
    std::string corpus_profiles;  // JSONL profile file
    std::string out_dir = ".";

    void validate() const;
};

// Throws std::invalid_argument on unknown key or unparsable value.
void set_config_key(RunConfig& rc, const std::string& key, const std::string& value);
RunConfig load_run_config(const std::string& path);

// Round-trippable string form; also feeds the config digest and checkpoints.
std::map<std::string, std::string> config_to_meta(const RunConfig& rc);
RunConfig config_from_meta(const std::map<std::string, std::string>& meta);
std::string config_digest(const std::map<std::string, std::string>& meta);

// Driver-id split: test drivers are never seen in training.
struct DriverSplit {
    std::vector<DriverPool> train, val, test;
};
DriverSplit split_drivers(std::vector<DriverPool> pools, int n_train, int n_val,
                          std::uint64_t seed);

// Profile z-normalization fitted on the training drivers only.
struct ProfileNorm {
    std::array<double, kProfileDim> mean{};
    std::array<double, kProfileDim> std{};
};
ProfileNorm fit_profile_norm(const std::vector<DriverPool>& train_pools);
void normalize_pools(std::vector<DriverPool>& pools, const ProfileNorm& norm);

struct MetricsReport {
    double accuracy = 0.0;
    double recall = 0.0;  // positive class = different-driver pairs
    double f1 = 0.0;
    int tp = 0, fp = 0, tn = 0, fn = 0;
    int n_pairs = 0;
    std::string config_digest;
};
MetricsReport metrics_from_counts(int tp, int fp, int tn, int fn);
MetricsReport evaluate_pairs(const SiameseModel& model, ParamStore& params,
                             const std::vector<PairExample>& pairs, double threshold);
std::string metrics_to_json(const MetricsReport& m);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
    double val_recall = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_accuracy = 0.0;
    ProfileNorm norm;
    std::vector<std::string> train_driver_ids, val_driver_ids, test_driver_ids;
};

// Seeded end-to-end training with early stopping; the best-val checkpoint is
// written to `ckpt_path`. `log_stream` (optional) gets one CSV line per
// epoch. Throws std::runtime_error on non-finite loss.
TrainResult train_model(const RunConfig& rc, const Corpus& corpus,
                        const std::string& ckpt_path, std::ostream* log_stream);

// Fixed-batch overfit driver: Adam on the given pairs until the mean loss
// drops below `target` or `max_steps` is hit. Returns the final loss.
double overfit_fixed_pairs(const SiameseModel& model, ParamStore& params,
                           const std::vector<PairExample>& pairs, int max_steps,
                           double lr, double target,
                           std::vector<double>* history = nullptr);

// Gradient-integrity sweep: primitives, one double block, end-to-end siamese
// loss. Prints one line per group with its max relative error.
bool run_gradcheck(std::ostream& out, double tol = 1e-3);

void write_loss_curve_svg(const std::vector<EpochLog>& log, const std::string& path);

// Evaluation entry used by the CLI: rebuilds model + normalization from the
// checkpoint, samples balanced pairs from unseen drivers, reports metrics.
MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const Corpus& corpus,
                                  double threshold, int n_pairs, std::uint64_t seed);

}  // namespace humid
