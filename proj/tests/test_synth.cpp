#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "steerid/errors.hpp"
#include "steerid/stationarity.hpp"
#include "steerid/synth.hpp"
#include "steerid/trip.hpp"

using namespace steerid;
namespace fs = std::filesystem;

namespace {
std::string file_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("clean profile with no dirt stays on the exact grid") {
    SynthConfig cfg;
    cfg.jitter_ms = 0.0;
    cfg.missing_rate = 0.0;
    cfg.gps_outage_rate = 0.0;
    const auto profiles = make_profiles(cfg);
    Rng rng(1);
    const auto samples = gen_trip(profiles[0], 60.0, rng, cfg);
    REQUIRE(samples.size() == 600);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        CHECK(samples[i].timestamp_ms == 100.0 * static_cast<double>(i));
        CHECK(samples[i].steering.has_value());
        CHECK(samples[i].velocity.has_value());
        CHECK(samples[i].gps_valid);
    }
}

TEST_CASE("trip generation is deterministic per seed") {
    SynthConfig cfg;
    const auto profiles = make_profiles(cfg);
    Rng r1(9), r2(9);
    const auto a = gen_trip(profiles[1], 120.0, r1, cfg);
    const auto b = gen_trip(profiles[1], 120.0, r2, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].timestamp_ms == b[i].timestamp_ms);
        CHECK(a[i].steering == b[i].steering);
        CHECK(a[i].velocity == b[i].velocity);
        CHECK(a[i].gps_valid == b[i].gps_valid);
    }
}

TEST_CASE("sample acf of a clean trip matches the Yule-Walker values") {
    SynthConfig cfg;
    const auto profiles = make_profiles(cfg);
    for (const auto& profile : {profiles[0], profiles[2]}) {
        Rng rng(31);
        const auto path = gen_steering_path(profile, 6000, rng);  // 10 minutes
        const auto sample = acf(path, 10);
        const auto analytic = ar2_analytic_acf(profile.phi1, profile.phi2, 10);
        for (std::size_t h = 1; h <= 10; ++h)
            CHECK(std::abs(sample.rho[h] - analytic[h]) < 0.05);
    }
}

TEST_CASE("every profile is stationary and ADF-rejected on clean paths") {
    SynthConfig cfg;
    const auto profiles = make_profiles(cfg);
    for (const auto& profile : profiles) {
        CHECK(profile.stationary());
        int rejects = 0;
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            Rng rng(500 + seed);
            const auto path = gen_steering_path(profile, 6000, rng);
            if (adf_test(path).reject_unit_root) ++rejects;
        }
        CHECK(rejects == 5);
    }
}

TEST_CASE("separable preset enforces resonance gaps") {
    SynthConfig cfg;
    cfg.n_drivers = 5;
    const auto profiles = make_profiles(cfg);
    REQUIRE(profiles.size() == 5);
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j)
            CHECK(std::abs(profiles[i].resonance_hz - profiles[j].resonance_hz) >= 0.15);

    cfg.n_drivers = 200;
    CHECK_THROWS_AS(make_profiles(cfg), config_error);

    // the hard preset allows overlap, so large fleets stay placeable
    cfg.preset = FleetPreset::Hard;
    const auto hard = make_profiles(cfg);
    REQUIRE(hard.size() == 200);
    for (const auto& p : hard) CHECK(p.stationary());
}

TEST_CASE("dirt injection accounting: generated = kept + removed") {
    SynthConfig cfg;
    cfg.missing_rate = 0.05;
    cfg.gps_outage_rate = 0.05;
    const auto profiles = make_profiles(cfg);
    Rng rng(3);
    const auto samples = gen_trip(profiles[0], 300.0, rng, cfg);
    const auto kept = clean_samples(samples);
    std::size_t removed = 0;
    for (const auto& s : samples)
        if (!s.steering || !s.velocity || !s.gps_valid) ++removed;
    // jitter below half the grid step keeps timestamps strictly increasing,
    // so cleaning removes exactly the dirty rows
    CHECK(kept.size() + removed == samples.size());
    CHECK(removed > 0);
}

TEST_CASE("fleet generation is byte-identical per seed and long enough for the protocol") {
    SynthConfig cfg;
    cfg.n_drivers = 2;
    cfg.trips_per_driver = 3;
    cfg.trip_min_s = 300.0;
    cfg.trip_max_s = 360.0;
    cfg.seed = 77;

    const fs::path dir_a = fs::temp_directory_path() / "steerid_fleet_a";
    const fs::path dir_b = fs::temp_directory_path() / "steerid_fleet_b";
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
    const auto out_a = gen_fleet(cfg, dir_a);
    const auto out_b = gen_fleet(cfg, dir_b);
    CHECK(out_a.trips_written == 6);

    for (const auto& entry : fs::directory_iterator(dir_a)) {
        const auto name = entry.path().filename();
        CHECK(file_bytes(entry.path()) == file_bytes(dir_b / name));
    }

    // default config generates at least 270 minutes per driver
    SynthConfig full;
    CHECK(static_cast<double>(full.trips_per_driver) * full.trip_min_s >= 270.0 * 60.0);
}
