#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "humid/harness.hpp"
#include "humid/synthgen.hpp"

using namespace humid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;   // usage / config error
constexpr int kExitData = 2;    // unreadable or inconsistent data
constexpr int kExitNumeric = 3; // numerical failure

RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::string>& overrides) {
    RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + kv);
        set_config_key(rc, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return rc;
}

void fill_vocab_from_grid(RunConfig& rc) {
    if (rc.model.vocab_lat == 0) rc.model.vocab_lat = rc.grid.lat_cells();
    if (rc.model.vocab_lon == 0) rc.model.vocab_lon = rc.grid.lon_cells();
}

int cmd_preprocess(const RunConfig& rc, const std::string& input,
                   const std::string& out_seq, const std::string& out_profiles) {
    const IngestResult ingest = ingest_csv(input, rc.grid);
    std::int64_t segments = 0, kept = 0;
    for (const auto& [driver, points] : ingest.by_driver) {
        auto trajs = segment_by_status(driver, points, rc.grid.tz_offset_hours);
        segments += static_cast<std::int64_t>(trajs.size());
        kept += static_cast<std::int64_t>(filter_trajectories(std::move(trajs)).size());
    }
    const Corpus corpus = preprocess_corpus(input, rc.grid);
    save_corpus(corpus, out_seq, out_profiles);
    std::cout << "rows read:          " << ingest.rows_read << "\n"
              << "rows skipped:       " << ingest.rows_skipped << "\n"
              << "rows out of area:   " << ingest.rows_out_of_area << "\n"
              << "rows deduplicated:  " << ingest.rows_deduplicated << "\n"
              << "drivers:            " << ingest.by_driver.size() << "\n"
              << "segments:           " << segments << "\n"
              << "trajectories kept:  " << kept << "\n"
              << "profiles written:   " << corpus.profiles.size() << "\n";
    return kExitOk;
}

int cmd_synth(const RunConfig& rc, int drivers, int days, int trips, double sep,
              std::uint64_t seed, const std::string& out) {
    SynthCorpusSpec spec;
    spec.n_drivers = drivers;
    spec.days = days;
    spec.trips_per_day = trips;
    spec.separability = sep;
    spec.grid = rc.grid;
    spec.seed = seed;
    gen_corpus(spec, out);
    std::cout << "wrote " << out << " (" << drivers << " drivers, " << days
              << " days, " << trips << "+" << trips << " trips/day, separability "
              << sep << ")\n";
    return kExitOk;
}

int cmd_train(RunConfig rc, const std::string& ckpt, const std::string& log_path,
              const std::string& svg_path) {
    if (rc.corpus_seq.empty() || rc.corpus_profiles.empty())
        throw std::invalid_argument("train: corpus_seq and corpus_profiles must be set");
    fill_vocab_from_grid(rc);
    rc.validate();
    const Corpus corpus = load_corpus(rc.corpus_seq, rc.corpus_profiles, rc.grid);

    std::ofstream log_file;
    std::ostream* log = &std::cout;
    if (!log_path.empty()) {
        log_file.open(log_path);
        if (!log_file) throw std::runtime_error("cannot write training log " + log_path);
        log = &log_file;
    }
    const TrainResult result = train_model(rc, corpus, ckpt, log);
    if (!svg_path.empty()) write_loss_curve_svg(result.log, svg_path);
    std::cout << "best epoch " << result.best_epoch << ", val accuracy "
              << result.best_val_accuracy << "; checkpoint: " << ckpt << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& seq,
             const std::string& profiles, double threshold, int pairs,
             std::uint64_t seed, const std::string& json_out) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const RunConfig rc = config_from_meta(ckpt.meta);
    const Corpus corpus = load_corpus(seq, profiles, rc.grid);
    const double th = threshold > 0.0 ? threshold : rc.threshold;
    const MetricsReport m = evaluate_checkpoint(ckpt, corpus, th, pairs, seed);
    const std::string json = metrics_to_json(m);
    if (json_out.empty()) {
        std::cout << json << "\n";
    } else {
        std::ofstream out(json_out);
        if (!out) throw std::runtime_error("cannot write " + json_out);
        out << json << "\n";
        std::cout << "metrics written to " << json_out << "\n";
    }
    return kExitOk;
}

int cmd_rfs(int n, int k, int b) {
    std::cout << "N\tK\tB\tRFS\n";
    for (int level = 1; level <= n; ++level)
        std::cout << level << "\t" << k << "\t" << b << "\t"
                  << receptive_field(level, k, b) << "\n";
    return kExitOk;
}

bool is_numeric_error(const std::exception& e) {
    const std::string what = e.what();
    return what.find("diverged") != std::string::npos ||
           what.find("NaN") != std::string::npos ||
           what.find("non-finite") != std::string::npos;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory-verification toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // --config/--set may appear after the subcommand

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat key=value config file");
    app.add_option("--set", overrides, "override a config key (key=value), repeatable");

    auto* pre = app.add_subcommand("preprocess", "raw GPS CSV -> corpus files");
    std::string input, out_seq = "corpus_seq.jsonl", out_profiles = "corpus_profiles.jsonl";
    pre->add_option("--input", input, "raw CSV")->required();
    pre->add_option("--out-seq", out_seq, "trajectory JSONL output");
    pre->add_option("--out-profiles", out_profiles, "profile JSONL output");

    auto* synth = app.add_subcommand("synth", "generate a synthetic driver corpus");
    int drivers = 20, days = 5, trips = 5;
    double separability = 1.0;
    std::uint64_t synth_seed = 1;
    std::string synth_out = "synth.csv";
    synth->add_option("--drivers", drivers);
    synth->add_option("--days", days);
    synth->add_option("--trips-per-day", trips, "trips per kind per day");
    synth->add_option("--separability", separability)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out);

    auto* train = app.add_subcommand("train", "train and checkpoint the best model");
    std::string ckpt = "model.ckpt", log_path, svg_path;
    train->add_option("--ckpt", ckpt, "checkpoint output path");
    train->add_option("--log", log_path, "CSV training log (default: stdout)");
    train->add_option("--svg", svg_path, "optional loss-curve SVG");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    std::string eval_ckpt, eval_seq, eval_profiles, json_out;
    double eval_threshold = 0.0;
    int eval_pairs = 200;
    std::uint64_t eval_seed = 7;
    eval->add_option("--ckpt", eval_ckpt)->required();
    eval->add_option("--corpus-seq", eval_seq)->required();
    eval->add_option("--corpus-profiles", eval_profiles)->required();
    eval->add_option("--threshold", eval_threshold, "default: value stored in checkpoint");
    eval->add_option("--pairs", eval_pairs);
    eval->add_option("--seed", eval_seed);
    eval->add_option("--json", json_out, "write metrics JSON here instead of stdout");

    auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients vs finite differences");
    double tol = 1e-3;
    gradcheck->add_option("--tol", tol, "max relative error");

    auto* rfs = app.add_subcommand("rfs", "receptive field size table");
    int rfs_n = 4, rfs_k = 10, rfs_b = 2;
    rfs->add_option("n", rfs_n, "number of double blocks")->required();
    rfs->add_option("k", rfs_k, "kernel size")->required();
    rfs->add_option("b", rfs_b, "dilation base")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig rc = resolve_config(config_path, overrides);
        if (pre->parsed()) return cmd_preprocess(rc, input, out_seq, out_profiles);
        if (synth->parsed()) return cmd_synth(rc, drivers, days, trips, separability,
                                              synth_seed, synth_out);
        if (train->parsed()) return cmd_train(rc, ckpt, log_path, svg_path);
        if (eval->parsed()) return cmd_eval(eval_ckpt, eval_seq, eval_profiles,
                                            eval_threshold, eval_pairs, eval_seed, json_out);
        if (gradcheck->parsed())
            return run_gradcheck(std::cout, tol) ? kExitOk : kExitNumeric;
        if (rfs->parsed()) {
            if (rfs_n < 1 || rfs_k < 1 || rfs_b < 1) {
                std::cerr << "rfs: arguments must be >= 1\n";
                return kExitUsage;
            }
            return cmd_rfs(rfs_n, rfs_k, rfs_b);
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        if (is_numeric_error(e)) {
            std::cerr << "numerical failure: " << e.what() << "\n";
            return kExitNumeric;
        }
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
