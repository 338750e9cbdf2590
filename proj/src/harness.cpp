#include "humid/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "humid/optim.hpp"

namespace humid {

namespace {

std::string fmt_double(double v) {
    std::ostringstream ss;
    ss << std::setprecision(17) << v;
    return ss.str();
}

double parse_double(const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad number: " + s);
    }
}

int parse_int(const std::string& s) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad integer: " + s);
    }
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw std::invalid_argument("bad boolean: " + s);
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    if (lr <= 0.0) throw std::invalid_argument("RunConfig: learning rate must be > 0");
    if (batch_size < 1) throw std::invalid_argument("RunConfig: batch_size >= 1");
    if (max_epochs < 1) throw std::invalid_argument("RunConfig: max_epochs >= 1");
    if (patience < 1) throw std::invalid_argument("RunConfig: patience >= 1");
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("RunConfig: threshold in (0,1)");
    if (train_pairs_per_epoch < 1 || val_pairs < 1)
        throw std::invalid_argument("RunConfig: pair counts >= 1");
    if (same_ratio < 0.0 || same_ratio > 1.0)
        throw std::invalid_argument("RunConfig: same_ratio in [0,1]");
}

void set_config_key(RunConfig& rc, const std::string& key, const std::string& value) {
    if (key == "d") rc.model.d = parse_int(value);
    else if (key == "n_heads") rc.model.n_heads = parse_int(value);
    else if (key == "n_blocks") rc.model.n_blocks = parse_int(value);
    else if (key == "kernel") rc.model.kernel = parse_int(value);
    else if (key == "dilation_base") rc.model.dilation_base = parse_int(value);
    else if (key == "se_reduction") rc.model.se_reduction = parse_int(value);
    else if (key == "vocab_lat") rc.model.vocab_lat = parse_int(value);
    else if (key == "vocab_lon") rc.model.vocab_lon = parse_int(value);
    else if (key == "vocab_interval") rc.model.vocab_interval = parse_int(value);
    else if (key == "emb_lat") rc.model.emb_lat = parse_int(value);
    else if (key == "emb_lon") rc.model.emb_lon = parse_int(value);
    else if (key == "emb_interval") rc.model.emb_interval = parse_int(value);
    else if (key == "emb_velocity") rc.model.emb_velocity = parse_int(value);
    else if (key == "disable_mhsa") rc.model.disable_mhsa = parse_bool(value);
    else if (key == "disable_aggregation") rc.model.disable_aggregation = parse_bool(value);
    else if (key == "lat_min") rc.grid.bbox.lat_min = parse_double(value);
    else if (key == "lat_max") rc.grid.bbox.lat_max = parse_double(value);
    else if (key == "lon_min") rc.grid.bbox.lon_min = parse_double(value);
    else if (key == "lon_max") rc.grid.bbox.lon_max = parse_double(value);
    else if (key == "grid_side_deg") rc.grid.grid_side_deg = parse_double(value);
    else if (key == "tz_offset_hours") rc.grid.tz_offset_hours = parse_int(value);
    else if (key == "lr") rc.lr = parse_double(value);
    else if (key == "batch_size") rc.batch_size = parse_int(value);
    else if (key == "max_epochs") rc.max_epochs = parse_int(value);
    else if (key == "patience") rc.patience = parse_int(value);
    else if (key == "seed") {
        try {
            rc.seed = static_cast<std::uint64_t>(std::stoull(value));
        } catch (const std::exception&) {
            throw std::invalid_argument("bad integer: " + value);
        }
    }
    else if (key == "threshold") rc.threshold = parse_double(value);
    else if (key == "train_pairs_per_epoch") rc.train_pairs_per_epoch = parse_int(value);
    else if (key == "val_pairs") rc.val_pairs = parse_int(value);
    else if (key == "eval_pairs") rc.eval_pairs = parse_int(value);
    else if (key == "same_ratio") rc.same_ratio = parse_double(value);
    else if (key == "n_train_drivers") rc.n_train_drivers = parse_int(value);
    else if (key == "n_val_drivers") rc.n_val_drivers = parse_int(value);
    else if (key == "corpus_seq") rc.corpus_seq = value;
    else if (key == "corpus_profiles") rc.corpus_profiles = value;
    else if (key == "out_dir") rc.out_dir = value;
    else throw std::invalid_argument("unknown config key: " + key);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config file not readable: " + path);
    RunConfig rc;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        // trim
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        line = line.substr(b, e - b + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        const auto ke = key.find_last_not_of(" \t");
        key = key.substr(0, ke + 1);
        const auto vb = value.find_first_not_of(" \t");
        value = vb == std::string::npos ? "" : value.substr(vb);
        set_config_key(rc, key, value);
    }
    return rc;
}

std::map<std::string, std::string> config_to_meta(const RunConfig& rc) {
    std::map<std::string, std::string> m;
    m["d"] = std::to_string(rc.model.d);
    m["n_heads"] = std::to_string(rc.model.n_heads);
    m["n_blocks"] = std::to_string(rc.model.n_blocks);
    m["kernel"] = std::to_string(rc.model.kernel);
    m["dilation_base"] = std::to_string(rc.model.dilation_base);
    m["se_reduction"] = std::to_string(rc.model.se_reduction);
    m["vocab_lat"] = std::to_string(rc.model.vocab_lat);
    m["vocab_lon"] = std::to_string(rc.model.vocab_lon);
    m["vocab_interval"] = std::to_string(rc.model.vocab_interval);
    m["emb_lat"] = std::to_string(rc.model.emb_lat);
    m["emb_lon"] = std::to_string(rc.model.emb_lon);
    m["emb_interval"] = std::to_string(rc.model.emb_interval);
    m["emb_velocity"] = std::to_string(rc.model.emb_velocity);
    m["disable_mhsa"] = rc.model.disable_mhsa ? "1" : "0";
    m["disable_aggregation"] = rc.model.disable_aggregation ? "1" : "0";
    m["lat_min"] = fmt_double(rc.grid.bbox.lat_min);
    m["lat_max"] = fmt_double(rc.grid.bbox.lat_max);
    m["lon_min"] = fmt_double(rc.grid.bbox.lon_min);
    m["lon_max"] = fmt_double(rc.grid.bbox.lon_max);
    m["grid_side_deg"] = fmt_double(rc.grid.grid_side_deg);
    m["tz_offset_hours"] = std::to_string(rc.grid.tz_offset_hours);
    m["lr"] = fmt_double(rc.lr);
    m["batch_size"] = std::to_string(rc.batch_size);
    m["max_epochs"] = std::to_string(rc.max_epochs);
    m["patience"] = std::to_string(rc.patience);
    m["seed"] = std::to_string(rc.seed);
    m["threshold"] = fmt_double(rc.threshold);
    m["train_pairs_per_epoch"] = std::to_string(rc.train_pairs_per_epoch);
    m["val_pairs"] = std::to_string(rc.val_pairs);
    m["eval_pairs"] = std::to_string(rc.eval_pairs);
    m["same_ratio"] = fmt_double(rc.same_ratio);
    m["n_train_drivers"] = std::to_string(rc.n_train_drivers);
    m["n_val_drivers"] = std::to_string(rc.n_val_drivers);
    return m;
}

RunConfig config_from_meta(const std::map<std::string, std::string>& meta) {
    RunConfig rc;
    for (const auto& [k, v] : meta) set_config_key(rc, k, v);
    return rc;
}

std::string config_digest(const std::map<std::string, std::string>& meta) {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : meta) {
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    std::ostringstream ss;
    ss << std::hex << std::setw(16) << std::setfill('0') << h;
    return ss.str();
}

DriverSplit split_drivers(std::vector<DriverPool> pools, int n_train, int n_val,
                          std::uint64_t seed) {
    const int n = static_cast<int>(pools.size());
    if (n_train < 1 || n_val < 0 || n_train + n_val > n)
        throw std::invalid_argument("split_drivers: bad split sizes for " +
                                    std::to_string(n) + " drivers");
    std::mt19937_64 rng(seed);
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
        std::swap(pools[static_cast<std::size_t>(i)], pools[static_cast<std::size_t>(j)]);
    }
    DriverSplit split;
    for (int i = 0; i < n; ++i) {
        auto& dst = i < n_train ? split.train : i < n_train + n_val ? split.val : split.test;
        dst.push_back(std::move(pools[static_cast<std::size_t>(i)]));
    }
    return split;
}

ProfileNorm fit_profile_norm(const std::vector<DriverPool>& train_pools) {
    if (train_pools.empty())
        throw std::invalid_argument("fit_profile_norm: empty training split");
    ProfileNorm norm;
    const double n = static_cast<double>(train_pools.size());
    for (const auto& p : train_pools)
        for (int i = 0; i < kProfileDim; ++i)
            norm.mean[static_cast<std::size_t>(i)] += p.profile[static_cast<std::size_t>(i)] / n;
    for (const auto& p : train_pools)
        for (int i = 0; i < kProfileDim; ++i) {
            const double d = p.profile[static_cast<std::size_t>(i)] -
                             norm.mean[static_cast<std::size_t>(i)];
            norm.std[static_cast<std::size_t>(i)] += d * d / n;
        }
    for (int i = 0; i < kProfileDim; ++i) {
        auto& s = norm.std[static_cast<std::size_t>(i)];
        s = std::sqrt(s);
        if (s < 1e-8) s = 1.0;  // constant feature: pass through centered
    }
    return norm;
}

void normalize_pools(std::vector<DriverPool>& pools, const ProfileNorm& norm) {
    for (auto& p : pools)
        for (int i = 0; i < kProfileDim; ++i)
            p.profile[static_cast<std::size_t>(i)] =
                (p.profile[static_cast<std::size_t>(i)] - norm.mean[static_cast<std::size_t>(i)]) /
                norm.std[static_cast<std::size_t>(i)];
}

MetricsReport metrics_from_counts(int tp, int fp, int tn, int fn) {
    MetricsReport m;
    m.tp = tp;
    m.fp = fp;
    m.tn = tn;
    m.fn = fn;
    m.n_pairs = tp + fp + tn + fn;
    if (m.n_pairs > 0) m.accuracy = static_cast<double>(tp + tn) / m.n_pairs;
    m.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    m.f1 = precision + m.recall > 0.0 ? 2.0 * precision * m.recall / (precision + m.recall)
                                      : 0.0;
    return m;
}

MetricsReport evaluate_pairs(const SiameseModel& model, ParamStore& params,
                             const std::vector<PairExample>& pairs, double threshold) {
    int tp = 0, fp = 0, tn = 0, fn = 0;
    for (const auto& pair : pairs) {
        Tape t;
        ParamBinding bind(t, params);
        const double score = model.dissimilarity(t, bind, pair.a, pair.b);
        const bool pred_diff = classify(score, threshold) == PairClass::different;
        const bool is_diff = pair.label == 1.0;
        if (is_diff && pred_diff) ++tp;
        else if (is_diff && !pred_diff) ++fn;
        else if (!is_diff && pred_diff) ++fp;
        else ++tn;
    }
    return metrics_from_counts(tp, fp, tn, fn);
}

std::string metrics_to_json(const MetricsReport& m) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["accuracy"] = m.accuracy;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["confusion"] = {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    j["n_pairs"] = m.n_pairs;
    j["config_digest"] = m.config_digest;
    return j.dump(2);
}

namespace {

// Mean BCE over a batch, with gradients accumulated into `sums`.
double batch_step(const SiameseModel& model, ParamStore& params,
                  const std::vector<PairExample>& pairs, std::size_t begin,
                  std::size_t end, std::map<std::string, Tensor>& sums) {
    double loss_sum = 0.0;
    const double inv = 1.0 / static_cast<double>(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        Tape t;
        ParamBinding bind(t, params);
        Var logit = model.dissimilarity_logit(t, bind, pairs[i].a, pairs[i].b);
        Var loss = bce_with_logit(t, logit, pairs[i].label);
        const double lv = t.value(loss).data[0];
        if (!std::isfinite(lv))
            throw std::runtime_error("training diverged: non-finite loss on pair " +
                                     std::to_string(i));
        loss_sum += lv;
        t.backward(loss);
        for (auto& [name, g] : bind.gradients()) {
            auto it = sums.find(name);
            if (it == sums.end()) {
                Tensor scaled = g;
                for (double& v : scaled.data) v *= inv;
                sums.emplace(name, std::move(scaled));
            } else {
                for (std::size_t k = 0; k < g.data.size(); ++k)
                    it->second.data[k] += g.data[k] * inv;
            }
        }
    }
    return loss_sum;
}

double mean_pair_loss(const SiameseModel& model, ParamStore& params,
                      const std::vector<PairExample>& pairs) {
    double sum = 0.0;
    for (const auto& pair : pairs) {
        Tape t;
        ParamBinding bind(t, params);
        Var logit = model.dissimilarity_logit(t, bind, pair.a, pair.b);
        sum += t.value(bce_with_logit(t, logit, pair.label)).data[0];
    }
    return sum / static_cast<double>(pairs.size());
}

Checkpoint make_checkpoint(const RunConfig& rc, const ParamStore& params,
                           const ProfileNorm& norm) {
    Checkpoint ckpt;
    ckpt.meta = config_to_meta(rc);
    for (const auto& name : params.names()) ckpt.params.add(name, params.get(name));
    ckpt.extras["profile.mean"] = {norm.mean.begin(), norm.mean.end()};
    ckpt.extras["profile.std"] = {norm.std.begin(), norm.std.end()};
    return ckpt;
}

}  // namespace

TrainResult train_model(const RunConfig& rc, const Corpus& corpus,
                        const std::string& ckpt_path, std::ostream* log_stream) {
    rc.validate();
    auto pools = build_pools(corpus);
    const int n = static_cast<int>(pools.size());
    if (n < 3) throw std::runtime_error("train_model: need at least 3 drivers, got " +
                                        std::to_string(n));
    int n_train = rc.n_train_drivers > 0
                      ? rc.n_train_drivers
                      : std::max(2, static_cast<int>(std::lround(0.7 * n)));
    int n_val = rc.n_val_drivers > 0
                    ? rc.n_val_drivers
                    : std::max(2, static_cast<int>(std::lround(0.15 * n)));
    if (rc.n_train_drivers == 0 && n_train + n_val > n) {
        // auto split on a small corpus: keep 2 val drivers so val pairs exist
        n_val = std::min(n_val, std::max(2, n - 2));
        n_train = n - n_val;
    }
    DriverSplit split = split_drivers(std::move(pools), n_train, n_val, rc.seed);

    TrainResult result;
    for (const auto& p : split.train) result.train_driver_ids.push_back(p.driver_id);
    for (const auto& p : split.val) result.val_driver_ids.push_back(p.driver_id);
    for (const auto& p : split.test) result.test_driver_ids.push_back(p.driver_id);
    result.norm = fit_profile_norm(split.train);
    normalize_pools(split.train, result.norm);
    normalize_pools(split.val, result.norm);

    SiameseModel model(rc.model);
    ParamStore params;
    std::mt19937_64 init_rng(rc.seed);
    model.init_params(params, init_rng);

    const auto val_set = make_pairs(split.val, rc.val_pairs, 0.5, rc.seed ^ 0x9e3779b97f4a7c15ull);

    AdamState adam;
    adam.lr = rc.lr;
    result.best_val_accuracy = -1.0;
    double best_val_loss = 1e300;
    int stale = 0;
    if (log_stream)
        *log_stream << "epoch,train_loss,val_loss,val_accuracy,val_recall,val_f1\n";

    for (int epoch = 1; epoch <= rc.max_epochs; ++epoch) {
        auto train_set = make_pairs(split.train, rc.train_pairs_per_epoch, rc.same_ratio,
                                    rc.seed * 1315423911ull + static_cast<std::uint64_t>(epoch));
        double loss_sum = 0.0;
        for (std::size_t b = 0; b < train_set.size(); b += static_cast<std::size_t>(rc.batch_size)) {
            const std::size_t e = std::min(train_set.size(), b + static_cast<std::size_t>(rc.batch_size));
            std::map<std::string, Tensor> grads;
            loss_sum += batch_step(model, params, train_set, b, e, grads);
            adam_step(params, grads, adam);
        }

        EpochLog row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(train_set.size());
        const MetricsReport vm = evaluate_pairs(model, params, val_set, rc.threshold);
        row.val_loss = mean_pair_loss(model, params, val_set);
        row.val_accuracy = vm.accuracy;
        row.val_recall = vm.recall;
        row.val_f1 = vm.f1;
        result.log.push_back(row);
        if (log_stream)
            *log_stream << row.epoch << ',' << std::setprecision(10) << row.train_loss << ','
                        << row.val_loss << ',' << row.val_accuracy << ',' << row.val_recall
                        << ',' << row.val_f1 << "\n" << std::flush;

        // val accuracy drives selection; ties (it saturates fast on easy
        // corpora) break on val loss so training continues to refine
        const bool improved = row.val_accuracy > result.best_val_accuracy ||
                              (row.val_accuracy == result.best_val_accuracy &&
                               row.val_loss < best_val_loss);
        if (improved) {
            result.best_val_accuracy = row.val_accuracy;
            best_val_loss = row.val_loss;
            result.best_epoch = epoch;
            stale = 0;
            if (!ckpt_path.empty())
                save_checkpoint(make_checkpoint(rc, params, result.norm), ckpt_path);
        } else if (++stale >= rc.patience) {
            break;
        }
    }
    return result;
}

double overfit_fixed_pairs(const SiameseModel& model, ParamStore& params,
                           const std::vector<PairExample>& pairs, int max_steps,
                           double lr, double target, std::vector<double>* history) {
    if (pairs.empty()) throw std::invalid_argument("overfit_fixed_pairs: no pairs");
    AdamState adam;
    adam.lr = lr;
    double loss = 0.0;
    for (int step = 0; step < max_steps; ++step) {
        std::map<std::string, Tensor> grads;
        loss = batch_step(model, params, pairs, 0, pairs.size(), grads) /
               static_cast<double>(pairs.size());
        if (history) history->push_back(loss);
        if (loss < target) return loss;
        adam_step(params, grads, adam);
    }
    return loss;
}

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::vector<int> shape) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (double& v : t.data)
        v = static_cast<double>(rng() >> 11) / 9007199254740992.0 - 0.5;
    return t;
}

GridSequence random_seq(std::mt19937_64& rng, const MaTcnConfig& cfg, int len) {
    GridSequence s;
    for (int i = 0; i < len; ++i)
        s.cells.push_back({static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab_lat)),
                           static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab_lon)),
                           1 + static_cast<int>(rng() % 288),
                           static_cast<double>(rng() % 150) / 10.0});
    s.mask.assign(static_cast<std::size_t>(len), true);
    s.original_length = len;
    return s;
}

// scalar mean over every element of a matrix, via ones^T x ones
Var mean_elems(Tape& t, Var x) {
    const Tensor& v = t.value(x);
    const int r = v.rows(), c = v.cols();
    Var left = t.leaf(Tensor::full({1, r}, 1.0), false);
    Var right = t.leaf(Tensor::full({c, 1}, 1.0), false);
    return scale(t, matmul(t, matmul(t, left, x), right), 1.0 / (r * c));
}

MaTcnConfig gradcheck_cfg() {
    MaTcnConfig cfg;
    cfg.d = 8;
    cfg.n_heads = 2;
    cfg.n_blocks = 1;
    cfg.kernel = 3;
    cfg.dilation_base = 2;
    cfg.vocab_lat = 12;
    cfg.vocab_lon = 12;
    cfg.emb_lat = 2;
    cfg.emb_lon = 2;
    cfg.emb_interval = 2;
    cfg.emb_velocity = 2;
    return cfg;
}

}  // namespace

bool run_gradcheck(std::ostream& out, double tol) {
    std::mt19937_64 rng(2024);
    bool all_pass = true;
    auto run = [&](const std::string& group, ParamStore& params,
                   const std::function<Var(Tape&, ParamBinding&)>& f, double step,
                   int max_probes) {
        const GradCheckReport rep = grad_check(f, params, step, tol, max_probes);
        out << (rep.pass ? "pass" : "FAIL") << "  " << group
            << "  max_rel_err=" << rep.worst() << "\n";
        for (const auto& e : rep.entries)
            if (!e.pass) out << "      worst parameter: " << e.name << " rel_err "
                             << e.max_rel_error << "\n";
        all_pass = all_pass && rep.pass;
    };

    {
        ParamStore p;
        p.add("w", random_tensor(rng, {3, 4}));
        Tensor x = random_tensor(rng, {5, 3});
        run("matmul", p, [&](Tape& t, ParamBinding& b) {
            return mean_elems(t, matmul(t, t.leaf(x, false), b("w")));
        }, 1e-5, 0);
    }
    for (const auto& [name, op] :
         std::vector<std::pair<std::string, Var (*)(Tape&, Var)>>{
             {"gelu", gelu}, {"sigmoid", sigmoid}, {"tanh", tanh_op}, {"relu", relu}}) {
        ParamStore p;
        p.add("x", random_tensor(rng, {2, 6}));
        auto fn = op;
        run(name, p, [&fn](Tape& t, ParamBinding& b) {
            return mean_elems(t, fn(t, b("x")));
        }, 1e-5, 0);
    }
    {
        ParamStore p;
        p.add("logits", random_tensor(rng, {3, 6}));
        std::vector<bool> mask{true, true, false, true, true, false};
        Tensor w = random_tensor(rng, {3, 6});
        run("masked_softmax", p, [&](Tape& t, ParamBinding& b) {
            return mean_elems(t, mul(t, masked_softmax(t, b("logits"), mask), t.leaf(w, false)));
        }, 1e-5, 0);
    }
    {
        ParamStore p;
        p.add("x", random_tensor(rng, {4, 9}));
        p.add("k", random_tensor(rng, {4, 3}));
        run("depthwise_causal_conv1d", p, [&](Tape& t, ParamBinding& b) {
            return mean_elems(t, depthwise_causal_conv1d(t, b("x"), b("k"), 2));
        }, 1e-5, 0);
    }
    {
        ParamStore p;
        p.add("x", random_tensor(rng, {3, 7}));
        p.add("w", random_tensor(rng, {5, 3}));
        p.add("bias", random_tensor(rng, {5}));
        run("pointwise_conv", p, [&](Tape& t, ParamBinding& b) {
            return mean_elems(t, pointwise_conv(t, b("x"), b("w"), b("bias")));
        }, 1e-5, 0);
    }
    {
        ParamStore p;
        p.add("z", random_tensor(rng, {1}));
        run("bce_with_logit", p, [&](Tape& t, ParamBinding& b) {
            return bce_with_logit(t, b("z"), 1.0);
        }, 1e-5, 0);
    }
    {
        const MaTcnConfig cfg = gradcheck_cfg();
        MaTcnEncoder enc("gc.", cfg);
        ParamStore p;
        std::mt19937_64 prng(31);
        enc.init_params(p, prng);
        Tensor input = random_tensor(rng, {9, cfg.d});
        std::vector<bool> mask(9, true);
        mask[7] = mask[8] = false;
        run("double_block", p, [&](Tape& t, ParamBinding& b) {
            auto blk = enc.double_block(t, b, t.leaf(input, true), 1, mask);
            return mean_elems(t, blk.output);
        }, 1e-5, 6);
    }
    {
        const MaTcnConfig cfg = gradcheck_cfg();
        SiameseModel model(cfg);
        ParamStore p;
        std::mt19937_64 prng(32);
        model.init_params(p, prng);
        DriverInput a, b2;
        a.seeking_seq = random_seq(rng, cfg, 11);
        a.serving_seq = random_seq(rng, cfg, 9);
        b2.seeking_seq = random_seq(rng, cfg, 10);
        b2.serving_seq = random_seq(rng, cfg, 12);
        for (int i = 0; i < kProfileDim; ++i) {
            a.profile[static_cast<std::size_t>(i)] = 0.05 * i - 0.3;
            b2.profile[static_cast<std::size_t>(i)] = 0.4 - 0.06 * i;
        }
        run("siamese_loss", p, [&](Tape& t, ParamBinding& bind) {
            Var logit = model.dissimilarity_logit(t, bind, a, b2);
            return bce_with_logit(t, logit, 1.0);
        }, 1e-4, 4);
    }
    out << (all_pass ? "gradcheck: all groups passed" : "gradcheck: FAILURES above") << "\n";
    return all_pass;
}

void write_loss_curve_svg(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    const int w = 640, h = 360, m = 40;
    double lo = 1e300, hi = -1e300;
    for (const auto& r : log) {
        lo = std::min(lo, r.train_loss);
        hi = std::max(hi, r.train_loss);
    }
    if (log.empty()) { lo = 0.0; hi = 1.0; }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << m << "' y='20' font-size='14'>train loss by epoch</text>\n"
        << "<polyline fill='none' stroke='steelblue' stroke-width='2' points='";
    const double n = std::max<std::size_t>(log.size(), 2) - 1.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        const double x = m + (w - 2 * m) * (static_cast<double>(i) / n);
        const double y = h - m - (h - 2 * m) * ((log[i].train_loss - lo) / (hi - lo));
        out << x << ',' << y << ' ';
    }
    out << "'/>\n<line x1='" << m << "' y1='" << h - m << "' x2='" << w - m << "' y2='"
        << h - m << "' stroke='black'/>\n<line x1='" << m << "' y1='" << m << "' x2='" << m
        << "' y2='" << h - m << "' stroke='black'/>\n</svg>\n";
}

MetricsReport evaluate_checkpoint(const Checkpoint& ckpt, const Corpus& corpus,
                                  double threshold, int n_pairs, std::uint64_t seed) {
    const RunConfig rc = config_from_meta(ckpt.meta);
    SiameseModel model(rc.model);
    ParamStore params;
    for (const auto& name : ckpt.params.names()) params.add(name, ckpt.params.get(name));

    ProfileNorm norm;
    const auto mit = ckpt.extras.find("profile.mean");
    const auto sit = ckpt.extras.find("profile.std");
    if (mit == ckpt.extras.end() || sit == ckpt.extras.end() ||
        mit->second.size() != kProfileDim || sit->second.size() != kProfileDim)
        throw std::runtime_error("checkpoint is missing profile normalization stats");
    std::copy(mit->second.begin(), mit->second.end(), norm.mean.begin());
    std::copy(sit->second.begin(), sit->second.end(), norm.std.begin());

    auto pools = build_pools(corpus);
    normalize_pools(pools, norm);
    const auto pairs = make_pairs(pools, n_pairs, 0.5, seed);
    MetricsReport m = evaluate_pairs(model, params, pairs, threshold);
    m.config_digest = config_digest(ckpt.meta);
    return m;
}

}  // namespace humid
