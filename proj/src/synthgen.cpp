#include "humid/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace humid {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMetersPerDegLat = 111194.93;
constexpr int kSampleIntervalS = 40;
constexpr int kTripGapS = 45;
// longest trip emitted by gen_corpus, so a full day of trips fits in a day
constexpr int kCorpusTripCap = 80;

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// Box-Muller, one value per call; hand-rolled so output is identical across
// standard libraries
double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// geometric number of extra points beyond the 10-point floor
int sample_length(std::mt19937_64& rng, double mean, int max_points) {
    const double extra_mean = std::max(1.0, mean - 10.0);
    const double p = 1.0 / (extra_mean + 1.0);
    const double u = std::max(uniform01(rng), 1e-12);
    const int extra = static_cast<int>(std::floor(std::log(u) / std::log(1.0 - p)));
    return std::clamp(10 + extra, 10, max_points);
}

}  // namespace

void SynthCorpusSpec::validate() const {
    if (n_drivers < 2) throw std::invalid_argument("SynthCorpusSpec: need >= 2 drivers");
    if (days < 1) throw std::invalid_argument("SynthCorpusSpec: days >= 1");
    if (trips_per_day < 5)
        throw std::invalid_argument("SynthCorpusSpec: trips_per_day >= 5 keeps drivers past the filter");
    if (separability < 0.0 || separability > 1.0)
        throw std::invalid_argument("SynthCorpusSpec: separability in [0,1]");
    if (grid.bbox.lat_max <= grid.bbox.lat_min || grid.bbox.lon_max <= grid.bbox.lon_min)
        throw std::invalid_argument("SynthCorpusSpec: empty bounding box");
}

std::vector<DriverStyle> sample_styles(const SynthCorpusSpec& spec) {
    spec.validate();
    const int n = spec.n_drivers;
    const int radius = 3;
    const int spacing = 3 * radius + 1;  // pairwise distance > 2 * radius at sep 1
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));

    const int lat_cells = spec.grid.lat_cells();
    const int lon_cells = spec.grid.lon_cells();
    const int margin = radius + 1;
    const int center_lat = lat_cells / 2;
    const int center_lon = lon_cells / 2;

    std::vector<DriverStyle> styles;
    for (int i = 0; i < n; ++i) {
        DriverStyle s;
        s.driver_id = "drv" + std::to_string(i);
        s.roaming_radius = radius;
        const int row = i / cols, col = i % cols;
        const double off_lat = (row - (n / cols) / 2.0) * spacing;
        const double off_lon = (col - cols / 2.0) * spacing;
        s.home_g_lat = std::clamp(
            center_lat + static_cast<int>(std::lround(spec.separability * off_lat)),
            margin, lat_cells - 1 - margin);
        s.home_g_lon = std::clamp(
            center_lon + static_cast<int>(std::lround(spec.separability * off_lon)),
            margin, lon_cells - 1 - margin);
        s.speed_std = 0.4;
        s.speed_mean = 6.0 + spec.separability * 4.0 * s.speed_std * i;
        s.active_start_hour = spec.separability * 2.0 * (i % 5);
        s.active_span_hours = 18.0;
        s.trip_length_mean = 25.0;
        s.turn_bias = spec.separability * 2.0 * kPi * i / n;
        // at separability 0 every style field coincides, seed included, so
        // drivers are fully exchangeable (a control corpus carries no signal)
        s.seed = spec.seed * 1000003ULL +
                 (spec.separability == 0.0 ? 0 : static_cast<std::uint64_t>(i) + 1);
        styles.push_back(std::move(s));
    }
    return styles;
}

SynthTrip gen_trajectory(const DriverStyle& style, TripKind kind,
                         std::int64_t start_time, const GridConfig& grid,
                         std::mt19937_64& rng) {
    const int len = sample_length(rng, style.trip_length_mean, 300);
    return gen_trajectory_capped(style, kind, start_time, grid, rng, len);
}

SynthTrip gen_trajectory_capped(const DriverStyle& style, TripKind kind,
                                std::int64_t start_time, const GridConfig& grid,
                                std::mt19937_64& rng, int len) {
    const double side = grid.grid_side_deg;
    const double home_lat = grid.bbox.lat_min + (style.home_g_lat + 0.5) * side;
    const double home_lon = grid.bbox.lon_min + (style.home_g_lon + 0.5) * side;
    const double range_deg = style.roaming_radius * side;
    const double lat_lo = std::max(grid.bbox.lat_min, home_lat - range_deg);
    const double lat_hi = std::min(grid.bbox.lat_max, home_lat + range_deg);
    const double lon_lo = std::max(grid.bbox.lon_min, home_lon - range_deg);
    const double lon_hi = std::min(grid.bbox.lon_max, home_lon + range_deg);
    const double m_per_deg_lon = kMetersPerDegLat * std::cos(home_lat * kPi / 180.0);

    double lat = home_lat + (uniform01(rng) - 0.5) * range_deg;
    double lon = home_lon + (uniform01(rng) - 0.5) * range_deg;
    double heading = style.turn_bias + 0.5 * gaussian(rng);

    SynthTrip trip;
    for (int i = 0; i < len; ++i) {
        RawGpsPoint p;
        p.driver_id = style.driver_id;
        p.timestamp = start_time + static_cast<std::int64_t>(i) * kSampleIntervalS;
        p.lat = lat;
        p.lon = lon;
        p.status = kind == TripKind::serving;
        trip.points.push_back(p);

        const double speed = std::max(0.0, style.speed_mean + style.speed_std * gaussian(rng));
        const double dist_m = speed * kSampleIntervalS;
        heading += 0.25 * gaussian(rng) + 0.05 * std::sin(style.turn_bias - heading);
        double nlat = 0.0, nlon = 0.0;
        auto in_bounds = [&](double h) {
            nlat = lat + dist_m * std::cos(h) / kMetersPerDegLat;
            nlon = lon + dist_m * std::sin(h) / m_per_deg_lon;
            return nlat >= lat_lo && nlat <= lat_hi && nlon >= lon_lo && nlon <= lon_hi;
        };
        bool ok = in_bounds(heading);
        if (!ok) {
            // reflect off the wall instead of clipping so every step keeps
            // its full length; one of the mirrors lands inside whenever the
            // step is shorter than the box
            for (double h : {kPi - heading, -heading, heading + kPi}) {
                if (in_bounds(h)) {
                    heading = h;
                    ok = true;
                    break;
                }
            }
        }
        if (ok) {
            lat = nlat;
            lon = nlon;
        }
    }
    return trip;
}

void gen_corpus(const SynthCorpusSpec& spec, const std::string& csv_path) {
    spec.validate();
    auto styles = sample_styles(spec);
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("gen_corpus: cannot write " + csv_path);
    out << "driver_id,timestamp,lat,lon,status\n";
    out.precision(8);
    out << std::fixed;

    for (const auto& style : styles) {
        std::mt19937_64 rng(style.seed);
        for (int day = 0; day < spec.days; ++day) {
            std::int64_t t = static_cast<std::int64_t>(day) * 86400 +
                             static_cast<std::int64_t>(style.active_start_hour * 3600.0);
            for (int trip_i = 0; trip_i < 2 * spec.trips_per_day; ++trip_i) {
                const TripKind kind = trip_i % 2 == 0 ? TripKind::seeking : TripKind::serving;
                const int len = sample_length(rng, style.trip_length_mean, kCorpusTripCap);
                SynthTrip trip = gen_trajectory_capped(style, kind, t, spec.grid, rng, len);
                for (const auto& p : trip.points)
                    out << p.driver_id << ',' << p.timestamp << ',' << p.lat << ','
                        << p.lon << ',' << (p.status ? 1 : 0) << "\n";
                t = trip.points.back().timestamp + kTripGapS;
            }
        }
    }
}

}  // namespace humid
