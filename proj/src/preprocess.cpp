#include "humid/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace humid {

namespace {

constexpr double kEarthRadiusM = 6371000.0;
constexpr double kDegToRad = 3.14159265358979323846 / 180.0;
constexpr int kSecondsPerDay = 86400;

// floor of (x - origin)/side, nudged so exact multiples of the side length
// land in the upper cell despite decimal round-off
int grid_index(double x, double origin, double side) {
    return static_cast<int>(std::floor((x - origin) / side + 1e-9));
}

std::int64_t local_seconds(std::int64_t utc, int tz_offset_hours) {
    return utc + static_cast<std::int64_t>(tz_offset_hours) * 3600;
}

int seconds_of_local_day(std::int64_t utc, int tz_offset_hours) {
    std::int64_t s = local_seconds(utc, tz_offset_hours) % kSecondsPerDay;
    if (s < 0) s += kSecondsPerDay;
    return static_cast<int>(s);
}

// civil date from days since epoch (Howard Hinnant's algorithm)
std::string local_date(std::int64_t utc, int tz_offset_hours) {
    std::int64_t secs = local_seconds(utc, tz_offset_hours);
    std::int64_t z = secs / kSecondsPerDay;
    if (secs % kSecondsPerDay < 0) --z;
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    const std::int64_t year = y + (m <= 2);
    char buf[24];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(year), m, d);
    return buf;
}

std::string kind_str(TripKind k) { return k == TripKind::seeking ? "seeking" : "serving"; }
TripKind kind_from(const std::string& s) {
    if (s == "seeking") return TripKind::seeking;
    if (s == "serving") return TripKind::serving;
    throw std::invalid_argument("unknown trip kind: " + s);
}

}  // namespace

int GridConfig::lat_cells() const {
    return static_cast<int>(std::ceil((bbox.lat_max - bbox.lat_min) / grid_side_deg)) + 1;
}

int GridConfig::lon_cells() const {
    return static_cast<int>(std::ceil((bbox.lon_max - bbox.lon_min) / grid_side_deg)) + 1;
}

double haversine_m(double lat1, double lon1, double lat2, double lon2) {
    const double p1 = lat1 * kDegToRad, p2 = lat2 * kDegToRad;
    const double dp = (lat2 - lat1) * kDegToRad;
    const double dl = (lon2 - lon1) * kDegToRad;
    const double a = std::sin(dp / 2) * std::sin(dp / 2) +
                     std::cos(p1) * std::cos(p2) * std::sin(dl / 2) * std::sin(dl / 2);
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

IngestResult ingest_csv(const std::string& path, const GridConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ingest_csv: cannot open " + path);
    if (cfg.grid_side_deg <= 0.0)
        throw std::invalid_argument("ingest_csv: grid_side_deg must be > 0");

    IngestResult res;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("ingest_csv: empty file " + path);
    // header required
    if (line.find("driver_id") == std::string::npos)
        throw std::runtime_error("ingest_csv: missing header row in " + path);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++res.rows_read;
        std::stringstream ss(line);
        std::string f[5];
        bool ok = true;
        for (int i = 0; i < 5; ++i)
            if (!std::getline(ss, f[i], ',')) { ok = false; break; }
        RawGpsPoint p;
        if (ok) {
            try {
                p.driver_id = f[0];
                p.timestamp = std::stoll(f[1]);
                p.lat = std::stod(f[2]);
                p.lon = std::stod(f[3]);
                const int st = std::stoi(f[4]);
                if (p.driver_id.empty() || (st != 0 && st != 1) ||
                    p.lat < -90 || p.lat > 90 || p.lon < -180 || p.lon > 180)
                    ok = false;
                p.status = st == 1;
            } catch (const std::exception&) {
                ok = false;
            }
        }
        if (!ok) {
            ++res.rows_skipped;
            continue;
        }
        if (!cfg.bbox.contains(p.lat, p.lon)) {
            ++res.rows_out_of_area;
            continue;
        }
        res.by_driver[p.driver_id].push_back(std::move(p));
    }

    for (auto& [id, pts] : res.by_driver) {
        std::stable_sort(pts.begin(), pts.end(),
                         [](const RawGpsPoint& a, const RawGpsPoint& b) {
                             return a.timestamp < b.timestamp;
                         });
        // keep first of equal timestamps
        std::vector<RawGpsPoint> dedup;
        dedup.reserve(pts.size());
        for (auto& p : pts) {
            if (!dedup.empty() && dedup.back().timestamp == p.timestamp) {
                ++res.rows_deduplicated;
                continue;
            }
            dedup.push_back(std::move(p));
        }
        pts = std::move(dedup);
    }
    std::erase_if(res.by_driver, [](const auto& kv) { return kv.second.empty(); });
    if (res.by_driver.empty())
        throw std::runtime_error("ingest_csv: no usable points in " + path);
    return res;
}

std::vector<Trajectory> segment_by_status(const std::string& driver_id,
                                          const std::vector<RawGpsPoint>& points,
                                          int tz_offset_hours) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < points.size();) {
        std::size_t j = i;
        while (j < points.size() && points[j].status == points[i].status) ++j;
        Trajectory t;
        t.driver_id = driver_id;
        t.kind = points[i].status ? TripKind::serving : TripKind::seeking;
        t.day = local_date(points[i].timestamp, tz_offset_hours);
        for (std::size_t k = i; k < j; ++k)
            t.points.push_back({points[k].lat, points[k].lon, points[k].timestamp, 0.0});
        out.push_back(std::move(t));
        i = j;
    }
    return out;
}

std::vector<Trajectory> filter_trajectories(std::vector<Trajectory> trajs) {
    // length filter first, bounds inclusive
    std::erase_if(trajs, [](const Trajectory& t) {
        return t.points.size() < 10 || t.points.size() > 300;
    });
    // per driver-day: require >= 5 of each kind
    std::map<std::pair<std::string, std::string>, std::pair<int, int>> counts;
    for (const auto& t : trajs) {
        auto& c = counts[{t.driver_id, t.day}];
        (t.kind == TripKind::seeking ? c.first : c.second) += 1;
    }
    std::erase_if(trajs, [&](const Trajectory& t) {
        const auto& c = counts.at({t.driver_id, t.day});
        return c.first < 5 || c.second < 5;
    });
    return trajs;
}

void compute_velocity(Trajectory& traj) {
    auto& pts = traj.points;
    if (pts.size() < 2) {
        for (auto& p : pts) p.velocity = 0.0;
        return;
    }
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double dt = static_cast<double>(pts[i + 1].timestamp - pts[i].timestamp);
        if (dt <= 0.0) {
            pts[i].velocity = 0.0;
            continue;
        }
        pts[i].velocity =
            haversine_m(pts[i].lat, pts[i].lon, pts[i + 1].lat, pts[i + 1].lon) / dt;
    }
    pts.back().velocity = pts[pts.size() - 2].velocity;
}

GridSequence to_grid(const Trajectory& traj, const GridConfig& cfg) {
    GridSequence seq;
    seq.driver_id = traj.driver_id;
    seq.day = traj.day;
    seq.kind = traj.kind;
    for (const auto& p : traj.points) {
        GridCell c;
        c.g_lat = grid_index(p.lat, cfg.bbox.lat_min, cfg.grid_side_deg);
        c.g_lon = grid_index(p.lon, cfg.bbox.lon_min, cfg.grid_side_deg);
        c.interval = seconds_of_local_day(p.timestamp, cfg.tz_offset_hours) / 300 + 1;
        c.velocity = p.velocity;
        seq.cells.push_back(c);
    }
    seq.original_length = static_cast<int>(seq.cells.size());
    seq.mask.assign(seq.cells.size(), true);
    return seq;
}

void pad_and_mask(std::vector<GridSequence>& batch) {
    if (batch.empty()) throw std::invalid_argument("pad_and_mask: empty batch");
    std::size_t len_max = 0;
    for (const auto& s : batch) len_max = std::max(len_max, s.cells.size());
    for (auto& s : batch) {
        s.original_length = static_cast<int>(s.cells.size());
        s.mask.assign(s.cells.size(), true);
        while (s.cells.size() < len_max) {
            s.cells.push_back(GridCell{0, 0, 1, 0.0});
            s.mask.push_back(false);
        }
    }
}

ProfileFeatures extract_profile_features(const std::string& driver_id,
                                         const std::string& period,
                                         const std::vector<Trajectory>& trajs,
                                         const GridConfig& cfg) {
    if (trajs.empty())
        throw std::invalid_argument("extract_profile_features: no trajectories for " + driver_id);
    bool any_seek = false, any_serve = false;
    for (const auto& t : trajs)
        (t.kind == TripKind::seeking ? any_seek : any_serve) = true;
    if (!any_seek || !any_serve)
        throw std::invalid_argument(
            "extract_profile_features: need both seeking and serving trips for " + driver_id);

    std::set<std::string> days;
    int n_seek = 0, n_serve = 0;
    double vel_sum = 0.0, vel_sq = 0.0;
    std::int64_t n_points = 0;
    double dur_sum = 0.0, len_sum = 0.0;
    std::set<std::pair<int, int>> cells;
    double seg_counts[4] = {0, 0, 0, 0};

    for (const auto& t : trajs) {
        days.insert(t.day);
        (t.kind == TripKind::seeking ? n_seek : n_serve) += 1;
        dur_sum += static_cast<double>(t.points.back().timestamp - t.points.front().timestamp);
        for (std::size_t i = 0; i < t.points.size(); ++i) {
            const auto& p = t.points[i];
            vel_sum += p.velocity;
            vel_sq += p.velocity * p.velocity;
            ++n_points;
            cells.insert({grid_index(p.lat, cfg.bbox.lat_min, cfg.grid_side_deg),
                          grid_index(p.lon, cfg.bbox.lon_min, cfg.grid_side_deg)});
            const int hour = seconds_of_local_day(p.timestamp, cfg.tz_offset_hours) / 3600;
            seg_counts[hour / 6] += 1.0;
            if (i + 1 < t.points.size())
                len_sum += haversine_m(p.lat, p.lon, t.points[i + 1].lat, t.points[i + 1].lon);
        }
    }

    const double n_trips = static_cast<double>(n_seek + n_serve);
    const double n_days = static_cast<double>(days.size());
    const double mean_v = vel_sum / static_cast<double>(n_points);
    const double var_v = std::max(0.0, vel_sq / static_cast<double>(n_points) - mean_v * mean_v);

    ProfileFeatures pf;
    pf.driver_id = driver_id;
    pf.period = period;
    pf.values[0] = static_cast<double>(n_seek) / n_days;
    pf.values[1] = static_cast<double>(n_serve) / n_days;
    pf.values[2] = mean_v;
    pf.values[3] = std::sqrt(var_v);
    pf.values[4] = dur_sum / n_trips;
    pf.values[5] = static_cast<double>(n_points) / n_trips;
    pf.values[6] = len_sum / n_trips;
    pf.values[7] = static_cast<double>(cells.size());
    for (int s = 0; s < 4; ++s)
        pf.values[8 + s] = seg_counts[s] / static_cast<double>(n_points);
    for (double v : pf.values)
        if (!std::isfinite(v))
            throw std::runtime_error("extract_profile_features: non-finite feature for " + driver_id);
    return pf;
}

Corpus preprocess_corpus(const std::string& csv_path, const GridConfig& cfg) {
    IngestResult ing = ingest_csv(csv_path, cfg);
    std::vector<Trajectory> all;
    for (const auto& [id, pts] : ing.by_driver) {
        auto trajs = segment_by_status(id, pts, cfg.tz_offset_hours);
        for (auto& t : trajs) all.push_back(std::move(t));
    }
    all = filter_trajectories(std::move(all));
    for (auto& t : all) compute_velocity(t);

    Corpus corpus;
    corpus.grid = cfg;
    std::map<std::string, std::vector<Trajectory>> per_driver;
    for (auto& t : all) {
        corpus.sequences.push_back(to_grid(t, cfg));
        per_driver[t.driver_id].push_back(std::move(t));
    }
    for (const auto& [id, trajs] : per_driver)
        corpus.profiles.push_back(extract_profile_features(id, "all", trajs, cfg));
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& seq_path,
                 const std::string& profile_path) {
    std::ofstream seq(seq_path);
    if (!seq) throw std::runtime_error("save_corpus: cannot write " + seq_path);
    for (const auto& s : corpus.sequences) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : s.cells)
            cells.push_back({c.g_lat, c.g_lon, c.interval, c.velocity});
        nlohmann::json rec{{"driver", s.driver_id},
                           {"day", s.day},
                           {"kind", kind_str(s.kind)},
                           {"cells", cells}};
        seq << rec.dump() << "\n";
    }
    std::ofstream prof(profile_path);
    if (!prof) throw std::runtime_error("save_corpus: cannot write " + profile_path);
    for (const auto& p : corpus.profiles) {
        nlohmann::json rec{{"driver", p.driver_id},
                           {"period", p.period},
                           {"features", p.values}};
        prof << rec.dump() << "\n";
    }
}

Corpus load_corpus(const std::string& seq_path, const std::string& profile_path,
                   const GridConfig& cfg) {
    Corpus corpus;
    corpus.grid = cfg;
    std::ifstream seq(seq_path);
    if (!seq) throw std::runtime_error("load_corpus: cannot open " + seq_path);
    std::string line;
    while (std::getline(seq, line)) {
        if (line.empty()) continue;
        auto rec = nlohmann::json::parse(line);
        GridSequence s;
        s.driver_id = rec.at("driver").get<std::string>();
        s.day = rec.at("day").get<std::string>();
        s.kind = kind_from(rec.at("kind").get<std::string>());
        for (const auto& c : rec.at("cells"))
            s.cells.push_back({c.at(0).get<int>(), c.at(1).get<int>(),
                               c.at(2).get<int>(), c.at(3).get<double>()});
        s.original_length = static_cast<int>(s.cells.size());
        s.mask.assign(s.cells.size(), true);
        corpus.sequences.push_back(std::move(s));
    }
    std::ifstream prof(profile_path);
    if (!prof) throw std::runtime_error("load_corpus: cannot open " + profile_path);
    while (std::getline(prof, line)) {
        if (line.empty()) continue;
        auto rec = nlohmann::json::parse(line);
        ProfileFeatures p;
        p.driver_id = rec.at("driver").get<std::string>();
        p.period = rec.at("period").get<std::string>();
        const auto& f = rec.at("features");
        for (int i = 0; i < kProfileDim; ++i) p.values[static_cast<std::size_t>(i)] = f.at(i).get<double>();
        corpus.profiles.push_back(std::move(p));
    }
    return corpus;
}

}  // namespace humid
