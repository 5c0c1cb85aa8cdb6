#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "steerid/rng.hpp"
#include "steerid/trip.hpp"

namespace steerid {

// Stationary AR(2) steering process with a tunable spectral peak, plus a
// velocity channel coupled negatively to the steering envelope.
struct DriverProfile {
    std::string driver_id;
    double phi1 = 0.0;
    double phi2 = 0.0;
    double innovation_std = 8.0;     // degrees
    double resonance_hz = 1.0;       // implied spectral peak
    double velocity_base = 13.0;     // m/s
    double velocity_coupling = 0.08;  // envelope gain into speed reduction
    std::uint64_t seed = 0;

    bool stationary() const {
        return phi2 > -1.0 && phi1 + phi2 < 1.0 && phi2 - phi1 < 1.0;
    }
};

enum class FleetPreset {
    Separable,  // pairwise resonance gaps >= 0.15 Hz
    Hard,       // overlap allowed
};

struct SynthConfig {
    std::size_t n_drivers = 5;
    std::size_t trips_per_driver = 12;
    double trip_min_s = 27.0 * 60.0;
    double trip_max_s = 35.0 * 60.0;
    double jitter_ms = 8.0;         // uniform timestamp jitter, < half the grid step
    double missing_rate = 0.01;     // per row, per channel
    double gps_outage_rate = 0.003;  // approximate fraction of rows inside outages
    FleetPreset preset = FleetPreset::Separable;
    std::uint64_t seed = 1;
};

// Deterministic profiles for a config; exposed so oracle tests can simulate
// the same processes directly.
std::vector<DriverProfile> make_profiles(const SynthConfig& config);

// Analytic AR(2) autocorrelation via the Yule-Walker recursion.
std::vector<double> ar2_analytic_acf(double phi1, double phi2, std::size_t h_max);

// One trip at nominal 10 Hz with timestamp jitter and injected dirt.
std::vector<RawSample> gen_trip(const DriverProfile& profile, double duration_s, Rng& rng,
                                const SynthConfig& config);

// Clean steering-only path on the exact grid, for Monte-Carlo oracles.
std::vector<double> gen_steering_path(const DriverProfile& profile, std::size_t n, Rng& rng);

struct FleetOutput {
    std::vector<DriverProfile> profiles;
    std::filesystem::path manifest;
    std::size_t trips_written = 0;
};

// Writes trip CSVs plus the fleet manifest into out_dir.
FleetOutput gen_fleet(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace steerid
