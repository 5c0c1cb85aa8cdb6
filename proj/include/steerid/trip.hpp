#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace steerid {

// One row of a raw trip recording. Missing cells stay missing until
// clean_samples removes the row; they are never silently zeroed.
struct RawSample {
    double timestamp_ms = 0.0;
    std::optional<double> steering;  // degrees
    std::optional<double> velocity;  // m/s
    bool gps_valid = false;
};

// Cleaned, uniformly resampled trip on the exact 100 ms grid.
struct UniformTrip {
    std::string trip_id;
    std::string driver_id;
    double rate_hz = 10.0;
    std::vector<double> steering;
    std::vector<double> velocity;

    std::size_t length() const { return steering.size(); }
    double duration_s() const { return static_cast<double>(length()) / rate_hz; }
};

struct ManifestEntry {
    std::string driver_id;
    std::string trip_file;  // relative to the manifest's directory
};

inline constexpr double kGridMs = 100.0;           // 10 Hz
inline constexpr std::size_t kMinTripSamples = 3000;  // 5 min at 10 Hz
inline constexpr double kMaxGapMs = 2000.0;        // longer gaps split the recording

// CSV I/O. Header is exactly `timestamp_ms,steering_deg,speed_mps,gps_valid`;
// an empty numeric cell marks a missing value.
std::vector<RawSample> parse_trip_csv(const std::filesystem::path& path);
void write_samples_csv(const std::filesystem::path& path, const std::vector<RawSample>& samples);
void write_trip_csv(const std::filesystem::path& path, const UniformTrip& trip);

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

// Keeps rows that are complete (steering, velocity, gps fix) and drops any
// row whose timestamp is not strictly greater than its kept predecessor's.
std::vector<RawSample> clean_samples(const std::vector<RawSample>& raw);

// Splits a cleaned recording wherever consecutive timestamps are more than
// max_gap_ms apart, so interpolation never bridges a transmission outage.
std::vector<std::vector<RawSample>> split_on_gaps(const std::vector<RawSample>& clean,
                                                  double max_gap_ms = kMaxGapMs);

// Piecewise quadratic interpolation of steering and velocity onto the
// 100 ms grid spanning [first, last] timestamp. Requires >= 3 samples with
// strictly increasing timestamps; never extrapolates.
UniformTrip resample_uniform(const std::vector<RawSample>& clean, double rate_hz = 10.0);

// Returns the trip iff it is at least 5 minutes long; nullopt = dismissed.
std::optional<UniformTrip> enforce_min_length(UniformTrip trip);

struct IngestStats {
    std::size_t files = 0;
    std::size_t chunks = 0;      // recordings after gap splitting
    std::size_t kept = 0;
    std::size_t dismissed = 0;   // shorter than 5 minutes
};

// Full ingest pipeline over a fleet manifest: parse, clean, split on gaps,
// resample, enforce minimum length. Trips come back in manifest order.
std::vector<UniformTrip> ingest_fleet(const std::filesystem::path& manifest_path,
                                      IngestStats* stats = nullptr);

}  // namespace steerid
