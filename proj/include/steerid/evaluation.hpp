#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "steerid/features.hpp"
#include "steerid/forest.hpp"
#include "steerid/gru.hpp"

namespace steerid {

struct UniformTrip;

struct ProtocolConfig {
    double train_min = 240.0;  // minutes of training data per driver
    double test_min = 30.0;    // minimum held-out minutes per driver
    double segment_min = 15.0;
};

// Chronological split: the earliest train_min minutes of each driver's
// stream feed training, segments after that point feed testing. Segment
// counts are balanced across drivers by seeded downsampling of the richer
// test pools.
struct SplitPlan {
    std::vector<std::string> drivers;                // class order (sorted)
    std::vector<std::vector<RawSegment>> train;      // per class
    std::vector<std::vector<RawSegment>> test;
    std::size_t train_per_driver = 0;
    std::size_t test_per_driver = 0;
};

SplitPlan make_split(const std::vector<UniformTrip>& trips, std::uint64_t seed,
                     const ProtocolConfig& cfg = {});

// Feature extraction over a split half at a given window length.
SegmentPool build_pool(const std::vector<std::string>& classes,
                       const std::vector<std::vector<RawSegment>>& segments,
                       std::size_t window_samples);

// argmax of the elementwise sum of the first k votes; ties -> lowest index.
std::size_t cumulative_decision(const std::vector<VoteVector>& votes, std::size_t k);

struct AccuracyCurve {
    std::vector<double> accuracy;  // accuracy[k-1] = accuracy after k votes
    std::size_t n_segments = 0;
    std::size_t n_classes = 0;
};

struct ConfusionMatrix {
    Matrix counts;      // rows = true class, cols = predicted
    Matrix normalized;  // rows sum to 1
    std::size_t total = 0;
};

// Building blocks shared with the mock-vote tests.
AccuracyCurve accuracy_from_votes(const std::vector<std::vector<VoteVector>>& votes,
                                  const std::vector<std::size_t>& labels, std::size_t n_classes);
ConfusionMatrix confusion_from_votes(const std::vector<std::vector<VoteVector>>& votes,
                                     const std::vector<std::size_t>& labels, std::size_t n_classes);

AccuracyCurve accuracy_over_time(const ModelParams& params, const SegmentPool& test_pool);
ConfusionMatrix confusion(const ModelParams& params, const SegmentPool& test_pool);

// ---- window sweep ----

struct SweepRow {
    double window_s = 0.0;
    double mean_acc = 0.0;
    double std_acc = 0.0;
};

struct SweepOptions {
    std::vector<double> windows_s;  // within [2.5, 10] on the 0.5 s grid
    std::size_t repetitions = 7;
    std::size_t subset_size = 0;  // drivers per repetition; 0 = all
    std::uint64_t seed = 1;
    TrainOptions train;  // per-cell training budget
    ProtocolConfig protocol;
};

// 2.5 .. 10.0 in 0.5 steps (16 windows)
std::vector<double> default_sweep_windows();

// Full retrain per (window, repetition); the driver subset and split depend
// only on the repetition, so each window sees identical data.
std::vector<SweepRow> window_sweep(const std::vector<UniformTrip>& trips, const SweepOptions& opts);

// ---- decision-forest baseline over the same split ----

struct BaselineResult {
    double final_acc = 0.0;
    ConfusionMatrix confusion;
    Forest forest;
};

// 7 summary statistics per window, one row per window of the segment.
Matrix summary_matrix(const RawSegment& segment, std::size_t window_samples);

BaselineResult run_baseline(const SplitPlan& split, std::size_t window_samples,
                            const ForestOptions& opts);

}  // namespace steerid
