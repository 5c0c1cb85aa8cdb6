#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "steerid/kernels.hpp"
#include "steerid/rng.hpp"

namespace steerid {

// Per-window order statistics of steering plus mean velocity: 7 values.
struct SummaryFeatures {
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
    double median = 0.0;
    double iqr = 0.0;
    double mean_velocity = 0.0;

    std::array<double, 7> as_array() const { return {mean, stddev, min, max, median, iqr, mean_velocity}; }
};

SummaryFeatures summarize_window(std::span<const double> window, std::span<const double> velocity);

struct ForestOptions {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_node_size = 5;
    std::uint64_t seed = 1;
};

// Threshold splits send x <= threshold left, where the threshold is an
// observed training value, so any monotone per-feature rescaling applied to
// train and test alike leaves every decision path unchanged.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::vector<std::uint32_t> histogram;  // leaf class counts
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::size_t predict(std::span<const double> x) const;
};

struct Forest {
    std::size_t n_classes = 0;
    std::size_t n_features = 0;
    std::vector<DecisionTree> trees;
    // per-tree out-of-bag sample indices, kept for diagnostics
    std::vector<std::vector<std::uint32_t>> oob;
};

// Bootstrap per tree, Gini greedy splits over sqrt(d) feature candidates.
Forest fit_forest(const Matrix& features, std::span<const std::size_t> labels,
                  std::size_t n_classes, const ForestOptions& opts);

// Majority over trees; ties break toward the lower class index.
std::size_t predict_window(const Forest& forest, std::span<const double> x);

// Majority over the per-window predictions of one segment.
std::size_t classify_segment(const Forest& forest, const Matrix& segment_windows);

// OOB accuracy over the training set (samples with no OOB vote are skipped).
double oob_accuracy(const Forest& forest, const Matrix& features, std::span<const std::size_t> labels);

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace steerid
