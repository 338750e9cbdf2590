#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace humid {

struct RawGpsPoint {
    std::string driver_id;
    std::int64_t timestamp = 0;  // seconds since epoch, UTC
    double lat = 0.0;
    double lon = 0.0;
    bool status = false;  // passenger on board
};

struct BBox {
    double lat_min = 0.0, lat_max = 0.0;
    double lon_min = 0.0, lon_max = 0.0;
    bool contains(double lat, double lon) const {
        return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
    }
};

struct GridConfig {
    BBox bbox;
    double grid_side_deg = 0.01;
    int tz_offset_hours = 0;  // local time = utc + offset

    int lat_cells() const;
    int lon_cells() const;
};

enum class TripKind { seeking, serving };

struct TrajPoint {
    double lat = 0.0, lon = 0.0;
    std::int64_t timestamp = 0;
    double velocity = 0.0;  // m/s, set by compute_velocity
};

struct Trajectory {
    std::string driver_id;
    std::string day;  // local calendar date, YYYY-MM-DD
    TripKind kind = TripKind::seeking;
    std::vector<TrajPoint> points;
};

struct GridCell {
    int g_lat = 0;
    int g_lon = 0;
    int interval = 1;  // 1..288, 5-minute slot of local day
    double velocity = 0.0;
};

struct GridSequence {
    std::string driver_id;
    std::string day;
    TripKind kind = TripKind::seeking;
    std::vector<GridCell> cells;
    std::vector<bool> mask;  // true = real step
    int original_length = 0;
};

// 12 per-driver style statistics; raw (un-normalized) values.
inline constexpr int kProfileDim = 12;
struct ProfileFeatures {
    std::string driver_id;
    std::string period;
    std::array<double, kProfileDim> values{};
};

struct IngestResult {
    std::map<std::string, std::vector<RawGpsPoint>> by_driver;  // sorted by time
    std::int64_t rows_read = 0;
    std::int64_t rows_skipped = 0;     // malformed
    std::int64_t rows_out_of_area = 0;
    std::int64_t rows_deduplicated = 0;
};

double haversine_m(double lat1, double lon1, double lat2, double lon2);

// Reads the raw CSV (header: driver_id,timestamp,lat,lon,status), drops
// out-of-area points, sorts per driver and deduplicates equal timestamps
// keeping the first occurrence. Throws if no points survive.
IngestResult ingest_csv(const std::string& path, const GridConfig& cfg);

// Maximal constant-status runs become trajectories (no length filter yet).
std::vector<Trajectory> segment_by_status(const std::string& driver_id,
                                          const std::vector<RawGpsPoint>& points,
                                          int tz_offset_hours);

// Length filter [10,300] first, then driver-days with fewer than 5 seeking
// or 5 serving trajectories are dropped entirely.
std::vector<Trajectory> filter_trajectories(std::vector<Trajectory> trajs);

// Forward-difference average velocities; the last point copies its
// predecessor; zero time gap yields 0.
void compute_velocity(Trajectory& traj);

GridSequence to_grid(const Trajectory& traj, const GridConfig& cfg);

// Pads every sequence in the batch to the longest length; pad cells are
// (0,0,interval=1,v=0) and masked out.
void pad_and_mask(std::vector<GridSequence>& batch);

ProfileFeatures extract_profile_features(const std::string& driver_id,
                                         const std::string& period,
                                         const std::vector<Trajectory>& trajs,
                                         const GridConfig& cfg);

// Full pipeline: ingest -> segment -> filter -> velocity -> grid.
struct Corpus {
    std::vector<GridSequence> sequences;         // unpadded
    std::vector<ProfileFeatures> profiles;       // one per driver, period "all"
    GridConfig grid;
};

Corpus preprocess_corpus(const std::string& csv_path, const GridConfig& cfg);

// JSONL persistence of the preprocessed corpus (one trajectory per line)
// plus a sibling profile file.
void save_corpus(const Corpus& corpus, const std::string& seq_path,
                 const std::string& profile_path);
Corpus load_corpus(const std::string& seq_path, const std::string& profile_path,
                   const GridConfig& cfg);

}  // namespace humid
