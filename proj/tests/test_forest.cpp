#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "steerid/errors.hpp"
#include "steerid/forest.hpp"
#include "steerid/rng.hpp"
#include "steerid/synth.hpp"

using namespace steerid;

namespace {

// two classes separated by a single feature threshold, others pure noise
Matrix separable_features(std::vector<std::size_t>& labels, std::size_t n_per_class, Rng& rng) {
    Matrix features(2 * n_per_class, 7);
    labels.resize(2 * n_per_class);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const std::size_t cls = i < n_per_class ? 0 : 1;
        labels[i] = cls;
        for (std::size_t d = 0; d < 7; ++d) features.at(i, d) = rng.uniform(-1.0, 1.0);
        features.at(i, 2) = cls == 0 ? rng.uniform(-1.0, -0.1) : rng.uniform(0.1, 1.0);
    }
    return features;
}

}  // namespace

TEST_CASE("summary of a constant window") {
    const std::vector<double> window(10, 4.5);
    const std::vector<double> vel(10, 12.0);
    const auto f = summarize_window(window, vel);
    CHECK(f.mean == doctest::Approx(4.5));
    CHECK(f.median == doctest::Approx(4.5));
    CHECK(f.min == 4.5);
    CHECK(f.max == 4.5);
    CHECK(f.stddev == doctest::Approx(0.0));
    CHECK(f.iqr == doctest::Approx(0.0));
    CHECK(f.mean_velocity == doctest::Approx(12.0));
}

TEST_CASE("summary of 1..4 under the interpolated quantile rule") {
    const std::vector<double> window = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> vel = {1.0, 1.0, 1.0, 1.0};
    const auto f = summarize_window(window, vel);
    CHECK(f.mean == doctest::Approx(2.5));
    CHECK(f.median == doctest::Approx(2.5));
    CHECK(f.iqr == doctest::Approx(1.5));  // quartiles 1.75 and 3.25
    CHECK(f.min == 1.0);
    CHECK(f.max == 4.0);
}

TEST_CASE("summary statistics are permutation invariant") {
    Rng rng(71);
    std::vector<double> window(25), vel(25, 3.0);
    for (double& v : window) v = rng.uniform(-50, 50);
    const auto base = summarize_window(window, vel);
    std::reverse(window.begin(), window.end());
    const auto flipped = summarize_window(window, vel);
    CHECK(base.mean == doctest::Approx(flipped.mean));
    CHECK(base.median == doctest::Approx(flipped.median));
    CHECK(base.iqr == doctest::Approx(flipped.iqr));
    CHECK(base.stddev == doctest::Approx(flipped.stddev));
}

TEST_CASE("a threshold-separable problem is learned exactly") {
    Rng rng(72);
    std::vector<std::size_t> labels;
    const auto features = separable_features(labels, 60, rng);
    ForestOptions opts;
    opts.n_trees = 30;
    opts.seed = 5;
    const auto forest = fit_forest(features, labels, 2, opts);
    for (std::size_t i = 0; i < features.rows; ++i)
        CHECK(predict_window(forest, std::span(features[i], 7)) == labels[i]);
    CHECK(oob_accuracy(forest, features, labels) > 0.95);
}

TEST_CASE("identical seeds give identical predictions") {
    Rng rng(73);
    std::vector<std::size_t> labels;
    const auto features = separable_features(labels, 40, rng);
    ForestOptions opts;
    opts.n_trees = 15;
    opts.seed = 9;
    const auto f1 = fit_forest(features, labels, 2, opts);
    const auto f2 = fit_forest(features, labels, 2, opts);
    for (std::size_t i = 0; i < features.rows; ++i)
        CHECK(predict_window(f1, std::span(features[i], 7)) ==
              predict_window(f2, std::span(features[i], 7)));
}

TEST_CASE("shuffled labels leave out-of-bag accuracy at chance level") {
    Rng rng(74);
    const std::size_t n = 400, n_classes = 4;
    Matrix features(n, 7);
    for (double& v : features.data) v = rng.uniform(-1, 1);
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::size_t>(rng.below(n_classes));

    ForestOptions opts;
    opts.n_trees = 50;
    opts.seed = 3;
    const auto forest = fit_forest(features, labels, n_classes, opts);
    const double acc = oob_accuracy(forest, features, labels);
    const double p = 1.0 / n_classes;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    CHECK(std::abs(acc - p) < 3.0 * sigma + 0.02);
}

TEST_CASE("degenerate single-class input is rejected") {
    Matrix features(10, 7);
    const std::vector<std::size_t> labels(10, 0);
    CHECK_THROWS_AS(fit_forest(features, labels, 2, {}), data_error);
}

TEST_CASE("segment classification is a window majority with low-index ties") {
    // hand-built forest of one leaf-pair tree: feature 0 <= 0 -> class 0
    Forest forest;
    forest.n_classes = 2;
    forest.n_features = 1;
    DecisionTree tree;
    TreeNode root;
    root.feature = 0;
    root.threshold = 0.0;
    root.left = 1;
    root.right = 2;
    TreeNode left;
    left.histogram = {5, 0};
    TreeNode right;
    right.histogram = {0, 5};
    tree.nodes = {root, left, right};
    forest.trees = {tree};

    Matrix windows(5, 1);
    windows.at(0, 0) = -1.0;
    windows.at(1, 0) = -1.0;
    windows.at(2, 0) = -1.0;
    windows.at(3, 0) = 1.0;
    windows.at(4, 0) = 1.0;
    CHECK(classify_segment(forest, windows) == 0);  // 3 vs 2 majority

    Matrix tied(2, 1);
    tied.at(0, 0) = -1.0;
    tied.at(1, 0) = 1.0;
    CHECK(classify_segment(forest, tied) == 0);  // tie -> lowest index
}

TEST_CASE("monotone per-feature rescaling leaves predictions unchanged") {
    Rng rng(75);
    std::vector<std::size_t> labels;
    auto features = separable_features(labels, 50, rng);

    Matrix test(40, 7);
    for (double& v : test.data) v = rng.uniform(-1, 1);

    ForestOptions opts;
    opts.n_trees = 25;
    opts.seed = 11;
    const auto base = fit_forest(features, labels, 2, opts);
    std::vector<std::size_t> base_pred;
    for (std::size_t i = 0; i < test.rows; ++i)
        base_pred.push_back(predict_window(base, std::span(test[i], 7)));

    // strictly monotone map x -> x^3 applied to train and test alike
    auto cube = [](double v) { return v * v * v; };
    Matrix warped_train = features;
    for (double& v : warped_train.data) v = cube(v);
    Matrix warped_test = test;
    for (double& v : warped_test.data) v = cube(v);

    const auto warped = fit_forest(warped_train, labels, 2, opts);
    for (std::size_t i = 0; i < test.rows; ++i)
        CHECK(predict_window(warped, std::span(warped_test[i], 7)) == base_pred[i]);
}

TEST_CASE("out-of-bag accuracy on the separable 15-driver fleet beats 5x chance") {
    SynthConfig cfg;
    cfg.n_drivers = 15;
    cfg.jitter_ms = 0.0;
    cfg.missing_rate = 0.0;
    cfg.gps_outage_rate = 0.0;
    cfg.seed = 99;
    const auto profiles = make_profiles(cfg);

    const std::size_t w = 35;
    const std::size_t windows_per_driver = 6000 / w;  // one clean 10-minute trip each
    Matrix features(15 * windows_per_driver, 7);
    std::vector<std::size_t> labels(features.rows);
    std::size_t row = 0;
    for (std::size_t d = 0; d < profiles.size(); ++d) {
        Rng rng(1000 + d);
        const auto samples = gen_trip(profiles[d], 600.0, rng, cfg);
        std::vector<double> steering(samples.size()), velocity(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            steering[i] = *samples[i].steering;
            velocity[i] = *samples[i].velocity;
        }
        for (std::size_t k = 0; k < windows_per_driver; ++k) {
            const auto f = summarize_window(std::span(steering).subspan(k * w, w),
                                            std::span(velocity).subspan(k * w, w));
            const auto arr = f.as_array();
            std::copy(arr.begin(), arr.end(), features[row]);
            labels[row] = d;
            ++row;
        }
    }

    ForestOptions opts;
    opts.n_trees = 60;
    opts.seed = 17;
    const auto forest = fit_forest(features, labels, 15, opts);
    CHECK(oob_accuracy(forest, features, labels) >= 5.0 / 15.0);
}

TEST_CASE("forest persists through its binary format") {
    namespace fs = std::filesystem;
    Rng rng(76);
    std::vector<std::size_t> labels;
    const auto features = separable_features(labels, 30, rng);
    ForestOptions opts;
    opts.n_trees = 10;
    opts.seed = 2;
    const auto forest = fit_forest(features, labels, 2, opts);

    const fs::path path = fs::temp_directory_path() / "steerid_forest.bin";
    save_forest(forest, path);
    const auto loaded = load_forest(path);
    CHECK(loaded.n_classes == 2);
    REQUIRE(loaded.trees.size() == forest.trees.size());
    for (std::size_t i = 0; i < features.rows; ++i)
        CHECK(predict_window(loaded, std::span(features[i], 7)) ==
              predict_window(forest, std::span(features[i], 7)));

    fs::resize_file(path, fs::file_size(path) / 3);
    CHECK_THROWS_AS(load_forest(path), checkpoint_error);
}
