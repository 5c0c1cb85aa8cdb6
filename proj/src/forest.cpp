#include "steerid/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "steerid/errors.hpp"

namespace steerid {

SummaryFeatures summarize_window(std::span<const double> window, std::span<const double> velocity) {
    const std::size_t n = window.size();
    if (n < 2) throw data_error("summary window needs at least 2 samples");

    SummaryFeatures f;
    double sum = 0.0, sq = 0.0;
    for (double v : window) {
        sum += v;
        sq += v * v;
    }
    f.mean = sum / static_cast<double>(n);
    const double var = std::max((sq - sum * sum / static_cast<double>(n)) / static_cast<double>(n - 1), 0.0);
    f.stddev = std::sqrt(var);

    std::vector<double> sorted(window.begin(), window.end());
    std::sort(sorted.begin(), sorted.end());
    f.min = sorted.front();
    f.max = sorted.back();

    // linear interpolation between order statistics at p*(n-1)
    auto quantile = [&sorted, n](double p) {
        const double pos = p * static_cast<double>(n - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(lo);
        if (lo + 1 >= n) return sorted[n - 1];
        return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    };
    f.median = quantile(0.5);
    f.iqr = quantile(0.75) - quantile(0.25);

    double vsum = 0.0;
    for (double v : velocity) vsum += v;
    f.mean_velocity = velocity.empty() ? 0.0 : vsum / static_cast<double>(velocity.size());
    return f;
}

namespace {

double gini(std::span<const std::size_t> counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

struct TreeBuilder {
    const Matrix& features;
    std::span<const std::size_t> labels;
    std::size_t n_classes;
    const ForestOptions& opts;
    Rng rng;
    std::vector<TreeNode> nodes;

    std::int32_t build(std::vector<std::uint32_t>& samples, std::size_t depth) {
        std::vector<std::size_t> counts(n_classes, 0);
        for (auto s : samples) ++counts[labels[s]];
        const std::size_t total = samples.size();
        const bool pure = *std::max_element(counts.begin(), counts.end()) == total;

        if (pure || depth >= opts.max_depth || total < opts.min_node_size) return make_leaf(counts);

        // sqrt(d) feature candidates, sampled without replacement
        const auto d = features.cols;
        auto n_candidates = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
        n_candidates = std::max<std::size_t>(n_candidates, 1);
        std::vector<std::size_t> pool(d);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < n_candidates; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(d - i));
            std::swap(pool[i], pool[j]);
        }

        const double parent_gini = gini(counts, total);
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::pair<double, std::size_t>> order(total);
        std::vector<std::size_t> left_counts(n_classes);
        for (std::size_t ci = 0; ci < n_candidates; ++ci) {
            const std::size_t feat = pool[ci];
            for (std::size_t i = 0; i < total; ++i)
                order[i] = {features.at(samples[i], feat), labels[samples[i]]};
            std::sort(order.begin(), order.end());

            std::fill(left_counts.begin(), left_counts.end(), 0);
            for (std::size_t i = 0; i + 1 < total; ++i) {
                ++left_counts[order[i].second];
                if (order[i].first == order[i + 1].first) continue;  // split only between distinct values
                const std::size_t n_left = i + 1;
                const std::size_t n_right = total - n_left;
                std::vector<std::size_t> right_counts(n_classes);
                for (std::size_t c = 0; c < n_classes; ++c) right_counts[c] = counts[c] - left_counts[c];
                const double child =
                    (static_cast<double>(n_left) * gini(left_counts, n_left) +
                     static_cast<double>(n_right) * gini(right_counts, n_right)) /
                    static_cast<double>(total);
                const double gain = parent_gini - child;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(feat);
                    best_threshold = order[i].first;  // go left iff x <= this observed value
                }
            }
        }

        if (best_feature < 0) return make_leaf(counts);

        std::vector<std::uint32_t> left, right;
        for (auto s : samples) {
            if (features.at(s, static_cast<std::size_t>(best_feature)) <= best_threshold)
                left.push_back(s);
            else
                right.push_back(s);
        }
        if (left.empty() || right.empty()) return make_leaf(counts);
        samples.clear();
        samples.shrink_to_fit();

        const auto index = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(index)].feature = best_feature;
        nodes[static_cast<std::size_t>(index)].threshold = best_threshold;
        const auto l = build(left, depth + 1);
        const auto r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(index)].left = l;
        nodes[static_cast<std::size_t>(index)].right = r;
        return index;
    }

    std::int32_t make_leaf(const std::vector<std::size_t>& counts) {
        const auto index = static_cast<std::int32_t>(nodes.size());
        TreeNode leaf;
        leaf.histogram.assign(counts.begin(), counts.end());
        nodes.push_back(std::move(leaf));
        return index;
    }
};

std::size_t leaf_vote(const TreeNode& leaf) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < leaf.histogram.size(); ++c)
        if (leaf.histogram[c] > leaf.histogram[best]) best = c;
    return best;
}

}  // namespace

std::size_t DecisionTree::predict(std::span<const double> x) const {
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const auto& n = nodes[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                              : n.right);
    }
    return leaf_vote(nodes[node]);
}

Forest fit_forest(const Matrix& features, std::span<const std::size_t> labels, std::size_t n_classes,
                  const ForestOptions& opts) {
    const std::size_t n = features.rows;
    if (n != labels.size()) throw config_error("feature/label count mismatch");
    if (n_classes < 2) throw data_error("forest needs at least 2 classes");
    std::vector<bool> seen(n_classes, false);
    for (auto l : labels) seen[l] = true;
    if (std::count(seen.begin(), seen.end(), true) < 2)
        throw data_error("degenerate single-class training input");

    Forest forest;
    forest.n_classes = n_classes;
    forest.n_features = features.cols;
    forest.trees.resize(opts.n_trees);
    forest.oob.resize(opts.n_trees);

    Rng root(opts.seed);
    const auto n_trees = static_cast<std::int64_t>(opts.n_trees);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::int64_t t = 0; t < n_trees; ++t) {
        Rng tree_rng = root.child(static_cast<std::uint64_t>(t));
        std::vector<std::uint32_t> bootstrap(n);
        std::vector<bool> in_bag(n, false);
        for (std::size_t i = 0; i < n; ++i) {
            const auto pick = static_cast<std::uint32_t>(tree_rng.below(n));
            bootstrap[i] = pick;
            in_bag[pick] = true;
        }
        TreeBuilder builder{features, labels, n_classes, opts, tree_rng.child(0xB00), {}};
        builder.build(bootstrap, 0);
        forest.trees[static_cast<std::size_t>(t)].nodes = std::move(builder.nodes);
        auto& oob = forest.oob[static_cast<std::size_t>(t)];
        for (std::size_t i = 0; i < n; ++i)
            if (!in_bag[i]) oob.push_back(static_cast<std::uint32_t>(i));
    }
    return forest;
}

std::size_t predict_window(const Forest& forest, std::span<const double> x) {
    std::vector<std::size_t> votes(forest.n_classes, 0);
    for (const auto& tree : forest.trees) ++votes[tree.predict(x)];
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return best;
}

std::size_t classify_segment(const Forest& forest, const Matrix& segment_windows) {
    std::vector<std::size_t> votes(forest.n_classes, 0);
    for (std::size_t r = 0; r < segment_windows.rows; ++r)
        ++votes[predict_window(forest, std::span(segment_windows[r], segment_windows.cols))];
    std::size_t best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = c;
    return best;
}

double oob_accuracy(const Forest& forest, const Matrix& features, std::span<const std::size_t> labels) {
    const std::size_t n = features.rows;
    Matrix votes(n, forest.n_classes);
    for (std::size_t t = 0; t < forest.trees.size(); ++t)
        for (auto s : forest.oob[t])
            votes.at(s, forest.trees[t].predict(std::span(features[s], features.cols))) += 1.0;

    std::size_t correct = 0, counted = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        std::size_t best = 0;
        for (std::size_t c = 0; c < forest.n_classes; ++c) {
            total += votes.at(i, c);
            if (votes.at(i, c) > votes.at(i, best)) best = c;
        }
        if (total == 0.0) continue;
        ++counted;
        if (best == labels[i]) ++correct;
    }
    if (counted == 0) throw data_error("no out-of-bag samples");
    return static_cast<double>(correct) / static_cast<double>(counted);
}

namespace {
constexpr std::uint32_t kForestMagic = 0x46444953;  // shares the artifact prefix
constexpr std::uint32_t kForestVersion = 2;

template <typename T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw checkpoint_error("truncated forest file");
    return v;
}
}  // namespace

void save_forest(const Forest& forest, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write forest " + path.string());
    put(out, kForestMagic);
    put(out, kForestVersion);
    put(out, static_cast<std::uint32_t>(forest.n_classes));
    put(out, static_cast<std::uint32_t>(forest.n_features));
    put(out, static_cast<std::uint32_t>(forest.trees.size()));
    for (const auto& tree : forest.trees) {
        put(out, static_cast<std::uint32_t>(tree.nodes.size()));
        for (const auto& node : tree.nodes) {
            put(out, static_cast<std::int32_t>(node.feature));
            put(out, node.threshold);
            put(out, node.left);
            put(out, node.right);
            put(out, static_cast<std::uint32_t>(node.histogram.size()));
            for (auto h : node.histogram) put(out, h);
        }
    }
    if (!out) throw io_error("write failed for " + path.string());
}

Forest load_forest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open forest " + path.string());
    if (get<std::uint32_t>(in) != kForestMagic) throw checkpoint_error("not a forest file: " + path.string());
    if (get<std::uint32_t>(in) != kForestVersion) throw checkpoint_error("unsupported forest version");
    Forest forest;
    forest.n_classes = get<std::uint32_t>(in);
    forest.n_features = get<std::uint32_t>(in);
    forest.trees.resize(get<std::uint32_t>(in));
    for (auto& tree : forest.trees) {
        tree.nodes.resize(get<std::uint32_t>(in));
        for (auto& node : tree.nodes) {
            node.feature = get<std::int32_t>(in);
            node.threshold = get<double>(in);
            node.left = get<std::int32_t>(in);
            node.right = get<std::int32_t>(in);
            node.histogram.resize(get<std::uint32_t>(in));
            for (auto& h : node.histogram) h = get<std::uint32_t>(in);
        }
    }
    forest.oob.resize(forest.trees.size());
    return forest;
}

}  // namespace steerid
