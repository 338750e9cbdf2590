#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "humid/preprocess.hpp"

namespace humid {

struct DriverStyle {
    std::string driver_id;
    int home_g_lat = 0;           // grid cell of the home region center
    int home_g_lon = 0;
    int roaming_radius = 3;       // grid cells
    double speed_mean = 8.0;      // m/s
    double speed_std = 0.4;
    double active_start_hour = 0; // trips begin at this local hour
    double active_span_hours = 18;
    double trip_length_mean = 25; // points
    double turn_bias = 0.0;       // preferred heading, radians
    std::uint64_t seed = 0;
};

struct SynthCorpusSpec {
    int n_drivers = 2;
    int days = 1;
    int trips_per_day = 5;        // per kind; >= 5 keeps every driver-day
    double separability = 1.0;    // 0 = identical styles, 1 = well separated
    GridConfig grid;
    std::uint64_t seed = 1;

    void validate() const;
};

// Deterministic under seed. At separability 1 home regions are disjoint
// (pairwise cell distance > 2 * roaming_radius) and speed means are at
// least 3 standard deviations apart; at 0 all styles coincide.
std::vector<DriverStyle> sample_styles(const SynthCorpusSpec& spec);

struct SynthTrip {
    std::vector<RawGpsPoint> points;  // 40-second cadence, constant status
};

// Biased random walk around the home region. `start_time` is UTC seconds.
SynthTrip gen_trajectory(const DriverStyle& style, TripKind kind,
                         std::int64_t start_time, const GridConfig& grid,
                         std::mt19937_64& rng);

// Same walk with the point count fixed by the caller.
SynthTrip gen_trajectory_capped(const DriverStyle& style, TripKind kind,
                                std::int64_t start_time, const GridConfig& grid,
                                std::mt19937_64& rng, int len);

// Writes the raw-CSV format consumed by the preprocessing pipeline. Every
// generated driver-day survives the trajectory filters by construction.
void gen_corpus(const SynthCorpusSpec& spec, const std::string& csv_path);

}  // namespace humid
