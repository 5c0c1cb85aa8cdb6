#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "steerid/kernels.hpp"
#include "steerid/rng.hpp"

namespace steerid {

class DftPlan;
struct UniformTrip;

inline constexpr double kSegmentSeconds = 900.0;  // 15 min
inline constexpr std::size_t kVoteEvery = 6;      // windows per vote
inline constexpr std::size_t kBatchSize = 32;

// log2(|FFT| + 1) of one steering window plus the window's mean velocity.
struct WindowFeature {
    std::vector<double> lft;  // length w
    double mean_velocity = 0.0;
};

// Contiguous slice of a driver's concatenated stream, segment_s seconds long.
struct RawSegment {
    std::string driver_id;
    std::vector<double> steering;
    std::vector<double> velocity;
    std::size_t start_sample = 0;  // offset in the driver's stream, for span audits
};

// F x (w+1) feature rows for one segment; F is a multiple of 6 so votes tile
// the segment exactly.
struct SegmentMatrix {
    std::string driver_id;
    std::size_t window_len = 0;  // w, in samples
    Matrix features;

    std::size_t n_windows() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

// Per-class segment store; class order is the sorted driver ids.
struct SegmentPool {
    std::vector<std::string> classes;
    std::vector<std::vector<SegmentMatrix>> per_class;

    std::size_t n_classes() const { return classes.size(); }
    std::size_t class_index(const std::string& driver) const;  // throws config_error
};

struct Batch {
    std::vector<const SegmentMatrix*> segments;
    std::vector<std::size_t> labels;
};

// Cuts each driver's trips into consecutive segment_s-second segments:
// long trips split, short trips concatenate, trailing remainder dropped.
// Every driver must yield at least n_segments; the result keeps exactly that
// many per driver.
std::map<std::string, std::vector<RawSegment>> build_segments(const std::vector<UniformTrip>& trips,
                                                              double segment_s,
                                                              std::size_t n_segments);

// Concatenation helper shared with the split protocol: one stream per driver,
// trips in input order.
struct DriverStream {
    std::string driver_id;
    std::vector<double> steering;
    std::vector<double> velocity;
};
std::map<std::string, DriverStream> concat_streams(const std::vector<UniformTrip>& trips);

// Consecutive non-overlapping segments of seg_samples from one stream slice.
std::vector<RawSegment> cut_stream(const DriverStream& stream, std::size_t begin, std::size_t end,
                                   std::size_t seg_samples);

WindowFeature log_fft_window(std::span<const double> window, std::span<const double> velocity,
                             const DftPlan& plan);

// Non-overlapping windows of w samples, remainder dropped, F truncated to a
// multiple of 6. Throws data_error when fewer than 6 windows fit.
SegmentMatrix build_segment_matrix(const RawSegment& segment, std::size_t window_samples,
                                   const DftPlan& plan);

// 32 draws of (uniform class, uniform segment within class).
Batch assemble_batch(const SegmentPool& pool, Rng& rng, std::size_t batch_size = kBatchSize);

// Binary feature cache: header {magic, version, F, w}, then one record per
// segment (driver id, row-major float32 matrix).
void write_feature_cache(const std::filesystem::path& path, const std::vector<SegmentMatrix>& segments);
std::vector<SegmentMatrix> read_feature_cache(const std::filesystem::path& path);

}  // namespace steerid
