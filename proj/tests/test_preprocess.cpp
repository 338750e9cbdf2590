#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "humid/preprocess.hpp"

using namespace humid;

namespace {

GridConfig test_cfg() {
    GridConfig cfg;
    cfg.bbox = {22.44, 22.87, 113.75, 114.63};  // Shenzhen-like box
    cfg.grid_side_deg = 0.01;
    cfg.tz_offset_hours = 0;
    return cfg;
}

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& body) {
        path = std::string("humid_test_") + std::to_string(rand()) + ".csv";
        std::ofstream out(path);
        out << "driver_id,timestamp,lat,lon,status\n" << body;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

std::vector<RawGpsPoint> mk_points(const std::vector<int>& statuses,
                                   std::int64_t t0 = 1000) {
    std::vector<RawGpsPoint> pts;
    for (std::size_t i = 0; i < statuses.size(); ++i)
        pts.push_back({"d1", t0 + static_cast<std::int64_t>(i) * 40, 22.5, 114.0,
                       statuses[i] == 1});
    return pts;
}

Trajectory mk_traj(int n, TripKind kind, const std::string& day = "2016-07-01",
                   std::int64_t t0 = 0) {
    Trajectory t;
    t.driver_id = "d1";
    t.day = day;
    t.kind = kind;
    for (int i = 0; i < n; ++i)
        t.points.push_back({22.5, 114.0, t0 + i * 40, 0.0});
    return t;
}

}  // namespace

TEST_CASE("ingest: single in-bbox point") {
    TempCsv csv("d1,1000,22.5,114.0,0\n");
    auto res = ingest_csv(csv.path, test_cfg());
    CHECK(res.by_driver.size() == 1);
    CHECK(res.by_driver.at("d1").size() == 1);
}

TEST_CASE("ingest: out-of-bbox point dropped") {
    TempCsv csv("d1,1000,22.5,114.0,0\nd1,1040,30.0,114.0,1\n");
    auto res = ingest_csv(csv.path, test_cfg());
    CHECK(res.by_driver.at("d1").size() == 1);
    CHECK(res.rows_out_of_area == 1);
}

TEST_CASE("ingest: malformed rows skipped with count, dedup keeps first") {
    TempCsv csv(
        "d1,1000,22.5,114.0,0\n"
        "garbage row\n"
        "d1,notanint,22.5,114.0,0\n"
        "d1,1000,22.6,114.1,1\n"   // duplicate timestamp, dropped
        "d1,1040,22.5,114.0,1\n");
    auto res = ingest_csv(csv.path, test_cfg());
    CHECK(res.rows_skipped == 2);
    CHECK(res.rows_deduplicated == 1);
    REQUIRE(res.by_driver.at("d1").size() == 2);
    CHECK(res.by_driver.at("d1")[0].lat == doctest::Approx(22.5));
}

TEST_CASE("ingest: 100-row fixture with 7 out-of-area rows retains 93") {
    std::string body;
    for (int i = 0; i < 100; ++i) {
        const bool outside = i % 14 == 3 && i < 94;  // exactly 7 such rows
        const double lat = outside ? 10.0 : 22.5;
        body += "d1," + std::to_string(1000 + i * 40) + "," + std::to_string(lat) +
                ",114.0,0\n";
    }
    TempCsv csv(body);
    auto res = ingest_csv(csv.path, test_cfg());
    CHECK(res.rows_out_of_area == 7);
    CHECK(res.by_driver.at("d1").size() == 93);
}

TEST_CASE("ingest: empty result is an error") {
    TempCsv csv("d1,1000,10.0,10.0,0\n");
    CHECK_THROWS(ingest_csv(csv.path, test_cfg()));
}

TEST_CASE("segment_by_status splits on status change") {
    auto trajs = segment_by_status("d1", mk_points({0, 0, 1, 1, 0}), 0);
    REQUIRE(trajs.size() == 3);
    CHECK(trajs[0].points.size() == 2);
    CHECK(trajs[0].kind == TripKind::seeking);
    CHECK(trajs[1].points.size() == 2);
    CHECK(trajs[1].kind == TripKind::serving);
    CHECK(trajs[2].points.size() == 1);

    CHECK(segment_by_status("d1", mk_points({1, 1, 1}), 0).size() == 1);
    CHECK(segment_by_status("d1", mk_points({0, 1, 0, 1, 0, 1}), 0).size() == 6);
}

TEST_CASE("segmentation partition restores the original point sequence") {
    auto pts = mk_points({0, 0, 1, 0, 1, 1, 1, 0, 0, 1});
    auto trajs = segment_by_status("d1", pts, 0);
    std::vector<std::int64_t> restored;
    for (const auto& t : trajs)
        for (const auto& p : t.points) restored.push_back(p.timestamp);
    std::vector<std::int64_t> original;
    for (const auto& p : pts) original.push_back(p.timestamp);
    CHECK(restored == original);
}

TEST_CASE("filter: length bounds") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 5; ++i) trajs.push_back(mk_traj(20, TripKind::seeking));
    for (int i = 0; i < 5; ++i) trajs.push_back(mk_traj(20, TripKind::serving));
    trajs.push_back(mk_traj(9, TripKind::seeking));    // dropped: < 10
    trajs.push_back(mk_traj(300, TripKind::seeking));  // kept: bound inclusive
    trajs.push_back(mk_traj(301, TripKind::seeking));  // dropped: > 300
    trajs.push_back(mk_traj(10, TripKind::seeking));   // kept
    auto out = filter_trajectories(trajs);
    CHECK(out.size() == 12);
    bool has300 = false, has301 = false, has9 = false;
    for (const auto& t : out) {
        if (t.points.size() == 300) has300 = true;
        if (t.points.size() == 301) has301 = true;
        if (t.points.size() == 9) has9 = true;
    }
    CHECK(has300);
    CHECK_FALSE(has301);
    CHECK_FALSE(has9);
}

TEST_CASE("filter: driver-day with 5 seeking / 4 serving entirely removed") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 5; ++i) trajs.push_back(mk_traj(20, TripKind::seeking));
    for (int i = 0; i < 4; ++i) trajs.push_back(mk_traj(20, TripKind::serving));
    CHECK(filter_trajectories(trajs).empty());
}

TEST_CASE("filter: every retained driver-day has >=5 of each kind") {
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 5; ++i) trajs.push_back(mk_traj(20, TripKind::seeking, "2016-07-01"));
    for (int i = 0; i < 5; ++i) trajs.push_back(mk_traj(20, TripKind::serving, "2016-07-01"));
    for (int i = 0; i < 6; ++i) trajs.push_back(mk_traj(20, TripKind::seeking, "2016-07-02"));
    for (int i = 0; i < 2; ++i) trajs.push_back(mk_traj(20, TripKind::serving, "2016-07-02"));
    auto out = filter_trajectories(trajs);
    CHECK(out.size() == 10);
    for (const auto& t : out) CHECK(t.day == "2016-07-01");
}

TEST_CASE("velocity: identical points give 0, last copies previous") {
    Trajectory t;
    t.points = {{22.5, 114.0, 0, 0}, {22.5, 114.0, 40, 0}};
    compute_velocity(t);
    CHECK(t.points[0].velocity == 0.0);
    CHECK(t.points[1].velocity == 0.0);

    // 0.01 deg latitude in 40 s: about 1112 m -> about 27.8 m/s
    Trajectory t2;
    t2.points = {{22.50, 114.0, 0, 0}, {22.51, 114.0, 40, 0}, {22.51, 114.0, 80, 0}};
    compute_velocity(t2);
    CHECK(t2.points[0].velocity == doctest::Approx(27.8).epsilon(0.01));
    CHECK(t2.points[2].velocity == t2.points[1].velocity);
}

TEST_CASE("velocity: zero time gap yields 0") {
    Trajectory t;
    t.points = {{22.50, 114.0, 100, 0}, {22.51, 114.0, 100, 0}, {22.51, 114.0, 140, 0}};
    compute_velocity(t);
    CHECK(t.points[0].velocity == 0.0);
}

TEST_CASE("to_grid: floor arithmetic and interval boundaries") {
    GridConfig cfg = test_cfg();
    Trajectory t;
    t.points = {{22.53, 113.76, 450, 3.0},     // 00:07:30 -> interval 2
                {22.53, 113.76, 0, 3.0},       // 00:00:00 -> interval 1
                {22.53, 113.76, 86399, 3.0}};  // 23:59:59 -> interval 288
    auto seq = to_grid(t, cfg);
    CHECK(seq.cells[0].g_lat == 9);  // floor((22.53-22.44)/0.01)
    CHECK(seq.cells[0].g_lon == 1);
    CHECK(seq.cells[0].interval == 2);
    CHECK(seq.cells[1].interval == 1);
    CHECK(seq.cells[2].interval == 288);
    CHECK(seq.cells[0].velocity == 3.0);
}

TEST_CASE("to_grid: timezone offset shifts the interval") {
    GridConfig cfg = test_cfg();
    cfg.tz_offset_hours = 8;
    Trajectory t;
    t.points = {{22.5, 114.0, 0, 0.0}};  // UTC midnight = 08:00 local
    auto seq = to_grid(t, cfg);
    CHECK(seq.cells[0].interval == 8 * 12 + 1);
}

TEST_CASE("grid mapping is order-preserving per coordinate") {
    GridConfig cfg = test_cfg();
    int prev = -1;
    for (double lat = 22.44; lat < 22.87; lat += 0.003) {
        Trajectory t;
        t.points = {{lat, 114.0, 0, 0.0}};
        const int g = to_grid(t, cfg).cells[0].g_lat;
        CHECK(g >= prev);
        prev = g;
    }
}

TEST_CASE("pad_and_mask: batch padded to max length") {
    std::vector<GridSequence> batch(2);
    for (int i = 0; i < 10; ++i) batch[0].cells.push_back({1, 1, 5, 2.0});
    for (int i = 0; i < 17; ++i) batch[1].cells.push_back({2, 2, 6, 3.0});
    pad_and_mask(batch);
    CHECK(batch[0].cells.size() == 17);
    CHECK(batch[1].cells.size() == 17);
    CHECK(batch[0].original_length == 10);
    int false_tail = 0;
    for (bool b : batch[0].mask)
        if (!b) ++false_tail;
    CHECK(false_tail == 7);
    CHECK(batch[0].cells[12].interval == 1);
    CHECK(batch[0].cells[12].velocity == 0.0);

    std::vector<GridSequence> single(1);
    for (int i = 0; i < 5; ++i) single[0].cells.push_back({1, 1, 1, 1.0});
    pad_and_mask(single);
    CHECK(single[0].cells.size() == 5);
    for (bool b : single[0].mask) CHECK(b);
}

TEST_CASE("padding is value-transparent for masked statistics") {
    std::vector<GridSequence> batch(2);
    for (int i = 0; i < 10; ++i) batch[0].cells.push_back({1, 1, 5, 1.0 + i});
    for (int i = 0; i < 25; ++i) batch[1].cells.push_back({2, 2, 6, 2.0});
    const double unpadded_mean = (1.0 + 10.0) / 2.0;
    pad_and_mask(batch);
    double s = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < batch[0].cells.size(); ++i)
        if (batch[0].mask[i]) {
            s += batch[0].cells[i].velocity;
            ++n;
        }
    CHECK(s / n == unpadded_mean);
}

TEST_CASE("profile features: constant-speed synthetic driver") {
    GridConfig cfg = test_cfg();
    std::vector<Trajectory> trajs;
    // constant 10 m/s: consecutive points 400 m apart every 40 s
    for (int k = 0; k < 2; ++k) {
        Trajectory t = mk_traj(0, k == 0 ? TripKind::seeking : TripKind::serving);
        for (int i = 0; i < 12; ++i) {
            const double lat = 22.50 + i * (400.0 / 111194.9);  // ~400 m north steps
            t.points.push_back({lat, 114.0, i * 40, 0.0});
        }
        compute_velocity(t);
        trajs.push_back(std::move(t));
    }
    auto pf = extract_profile_features("d1", "all", trajs, cfg);
    CHECK(pf.values[2] == doctest::Approx(10.0).epsilon(0.01));  // mean speed
    CHECK(pf.values[3] == doctest::Approx(0.0).epsilon(1e-6).scale(1));  // std speed
}

TEST_CASE("profile features: trip count and spreadsheet-style recomputation") {
    GridConfig cfg = test_cfg();
    std::vector<Trajectory> trajs;
    for (const std::string& day : {"2016-07-01", "2016-07-02"}) {
        const std::int64_t base = day == "2016-07-01" ? 0 : 86400;
        for (int i = 0; i < 5; ++i) {
            auto a = mk_traj(10, TripKind::seeking, day, base + i * 2000);
            compute_velocity(a);
            trajs.push_back(a);
            auto b = mk_traj(10, TripKind::serving, day, base + i * 2000 + 1000);
            compute_velocity(b);
            trajs.push_back(b);
        }
    }
    auto pf = extract_profile_features("d1", "all", trajs, cfg);
    CHECK(pf.values[0] == doctest::Approx(5.0));  // seeking trips/day
    CHECK(pf.values[1] == doctest::Approx(5.0));  // serving trips/day
    // hand-computed: every trip has 10 points, duration 9*40 = 360 s,
    // all points in one grid cell, all points in segment 0 on day 1 and 2
    CHECK(pf.values[4] == doctest::Approx(360.0));
    CHECK(pf.values[5] == doctest::Approx(10.0));
    CHECK(pf.values[6] == doctest::Approx(0.0));  // stationary points
    CHECK(pf.values[7] == doctest::Approx(1.0));
    CHECK(pf.values[8] == doctest::Approx(1.0));  // all activity 00:00-06:00
    CHECK(pf.values[9] + pf.values[10] + pf.values[11] == doctest::Approx(0.0));
}

TEST_CASE("profile features: missing kind is an error") {
    GridConfig cfg = test_cfg();
    std::vector<Trajectory> trajs{mk_traj(10, TripKind::seeking)};
    CHECK_THROWS(extract_profile_features("d1", "all", trajs, cfg));
    CHECK_THROWS(extract_profile_features("d1", "all", {}, cfg));
}

TEST_CASE("corpus save/load round trip") {
    Corpus c;
    c.grid = test_cfg();
    GridSequence s;
    s.driver_id = "d7";
    s.day = "2016-07-03";
    s.kind = TripKind::serving;
    s.cells = {{3, 4, 17, 5.25}, {3, 5, 17, 6.5}};
    s.original_length = 2;
    s.mask = {true, true};
    c.sequences.push_back(s);
    ProfileFeatures pf;
    pf.driver_id = "d7";
    pf.period = "all";
    for (int i = 0; i < kProfileDim; ++i) pf.values[i] = 0.5 * i;
    c.profiles.push_back(pf);

    save_corpus(c, "tmp_seq.jsonl", "tmp_prof.jsonl");
    auto loaded = load_corpus("tmp_seq.jsonl", "tmp_prof.jsonl", test_cfg());
    REQUIRE(loaded.sequences.size() == 1);
    CHECK(loaded.sequences[0].driver_id == "d7");
    CHECK(loaded.sequences[0].kind == TripKind::serving);
    CHECK(loaded.sequences[0].cells[1].velocity == 6.5);
    CHECK(loaded.sequences[0].cells[0].interval == 17);
    REQUIRE(loaded.profiles.size() == 1);
    CHECK(loaded.profiles[0].values[3] == 1.5);
    std::remove("tmp_seq.jsonl");
    std::remove("tmp_prof.jsonl");
}
