#include "steerid/synth.hpp"

#include <cmath>
#include <cstdio>

#include "steerid/errors.hpp"

namespace steerid {

namespace {
constexpr double kDtSeconds = 0.1;
constexpr double kOutageMeanRows = 8.0;  // short bursts, most gaps stay bridgeable
constexpr std::size_t kWarmupSamples = 300;

std::string two_digit_id(const char* prefix, std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, i);
    return buf;
}
}  // namespace

std::vector<DriverProfile> make_profiles(const SynthConfig& config) {
    if (config.n_drivers == 0) throw config_error("need at least one driver");

    // resonance band kept under half Nyquist so the spectral peak is crisp;
    // spacing capped at 0.3 Hz so short windows cannot trivially resolve it
    const double f_lo = 0.35, f_hi = 2.45;
    const double min_gap = 0.15;
    double spacing = 0.0;
    if (config.n_drivers > 1) {
        spacing = std::min(0.3, (f_hi - f_lo) / static_cast<double>(config.n_drivers - 1));
        if (config.preset == FleetPreset::Separable && spacing < min_gap - 1e-12)
            throw config_error("cannot place " + std::to_string(config.n_drivers) +
                               " drivers with >= 0.15 Hz resonance separation");
    }

    Rng rng = Rng(config.seed).child(0xD81F);
    std::vector<DriverProfile> profiles(config.n_drivers);
    for (std::size_t i = 0; i < config.n_drivers; ++i) {
        auto& p = profiles[i];
        p.driver_id = two_digit_id("d", i + 1);
        if (config.preset == FleetPreset::Separable) {
            p.resonance_hz = config.n_drivers == 1 ? 1.0 : f_lo + spacing * static_cast<double>(i);
        } else {
            p.resonance_hz = rng.uniform(f_lo, f_hi);
        }
        const double damping = rng.uniform(0.90, 0.93);
        p.phi1 = 2.0 * damping * std::cos(2.0 * M_PI * p.resonance_hz * kDtSeconds);
        p.phi2 = -damping * damping;
        // amplitude and speed ranges overlap across drivers: the resonance
        // carries most of the class signal, summary statistics only part
        p.innovation_std = rng.uniform(7.5, 10.5);
        p.velocity_base = rng.uniform(12.0, 14.0);
        p.velocity_coupling = rng.uniform(0.06, 0.11);
        p.seed = rng.next_u64();
        if (!p.stationary()) throw config_error("profile left the AR(2) stationarity triangle");
    }
    return profiles;
}

std::vector<double> ar2_analytic_acf(double phi1, double phi2, std::size_t h_max) {
    std::vector<double> rho(h_max + 1);
    rho[0] = 1.0;
    if (h_max >= 1) rho[1] = phi1 / (1.0 - phi2);
    for (std::size_t h = 2; h <= h_max; ++h) rho[h] = phi1 * rho[h - 1] + phi2 * rho[h - 2];
    return rho;
}

std::vector<double> gen_steering_path(const DriverProfile& profile, std::size_t n, Rng& rng) {
    std::vector<double> path(n);
    double prev1 = 0.0, prev2 = 0.0;
    for (std::size_t i = 0; i < kWarmupSamples + n; ++i) {
        const double value =
            profile.phi1 * prev1 + profile.phi2 * prev2 + rng.normal(0.0, profile.innovation_std);
        prev2 = prev1;
        prev1 = value;
        if (i >= kWarmupSamples) path[i - kWarmupSamples] = value;
    }
    return path;
}

std::vector<RawSample> gen_trip(const DriverProfile& profile, double duration_s, Rng& rng,
                                const SynthConfig& config) {
    if (!profile.stationary()) throw config_error("profile is not stationary");
    if (config.jitter_ms >= 50.0)
        throw config_error("timestamp jitter must stay below half the 100 ms grid step");

    const auto n = static_cast<std::size_t>(std::llround(duration_s / kDtSeconds));
    Rng path_rng = rng.child(0xA1);
    Rng dirt_rng = rng.child(0xA2);
    const auto steering = gen_steering_path(profile, n, path_rng);

    // slowing into curves: speed drops with the smoothed steering magnitude
    std::vector<RawSample> samples(n);
    double envelope = 0.0;
    bool in_outage = false;
    const double outage_start =
        config.gps_outage_rate / (kOutageMeanRows * std::max(1.0 - config.gps_outage_rate, 1e-6));
    for (std::size_t i = 0; i < n; ++i) {
        envelope = 0.95 * envelope + 0.05 * std::abs(steering[i]);
        const double speed = std::max(profile.velocity_base - profile.velocity_coupling * envelope, 0.0);

        auto& row = samples[i];
        const double jitter =
            config.jitter_ms > 0.0 ? dirt_rng.uniform(-config.jitter_ms, config.jitter_ms) : 0.0;
        row.timestamp_ms = 100.0 * static_cast<double>(i) + (i == 0 ? 0.0 : jitter);
        if (!(config.missing_rate > 0.0 && dirt_rng.uniform01() < config.missing_rate))
            row.steering = steering[i];
        if (!(config.missing_rate > 0.0 && dirt_rng.uniform01() < config.missing_rate))
            row.velocity = speed;
        const double u = dirt_rng.uniform01();
        if (in_outage)
            in_outage = u >= 1.0 / kOutageMeanRows;
        else
            in_outage = config.gps_outage_rate > 0.0 && u < outage_start;
        row.gps_valid = !in_outage;
    }
    return samples;
}

FleetOutput gen_fleet(const SynthConfig& config, const std::filesystem::path& out_dir) {
    if (config.trip_min_s > config.trip_max_s) throw config_error("trip duration range is inverted");
    std::filesystem::create_directories(out_dir);

    FleetOutput out;
    out.profiles = make_profiles(config);

    Rng root(config.seed);
    std::vector<ManifestEntry> manifest;
    for (std::size_t d = 0; d < out.profiles.size(); ++d) {
        const auto& profile = out.profiles[d];
        for (std::size_t t = 0; t < config.trips_per_driver; ++t) {
            Rng trip_rng = root.child((d << 20) | t);
            const double duration = trip_rng.uniform(config.trip_min_s, config.trip_max_s);
            const auto samples = gen_trip(profile, duration, trip_rng, config);
            const std::string name = profile.driver_id + "_" + two_digit_id("t", t + 1) + ".csv";
            write_samples_csv(out_dir / name, samples);
            manifest.push_back({profile.driver_id, name});
            ++out.trips_written;
        }
    }
    out.manifest = out_dir / "manifest.csv";
    write_manifest(out.manifest, manifest);
    return out;
}

}  // namespace steerid
