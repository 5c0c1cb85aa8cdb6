#include "steerid/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "steerid/dft.hpp"
#include "steerid/errors.hpp"
#include "steerid/trip.hpp"

namespace steerid {

SplitPlan make_split(const std::vector<UniformTrip>& trips, std::uint64_t seed,
                     const ProtocolConfig& cfg) {
    const auto streams = concat_streams(trips);
    if (streams.empty()) throw data_error("no trips to split");

    const auto seg_samples = static_cast<std::size_t>(std::llround(cfg.segment_min * 60.0 * 10.0));
    const auto train_samples = static_cast<std::size_t>(std::llround(cfg.train_min * 60.0 * 10.0));
    const auto test_samples = static_cast<std::size_t>(std::llround(cfg.test_min * 60.0 * 10.0));

    SplitPlan plan;
    for (const auto& [driver, stream] : streams) plan.drivers.push_back(driver);
    std::sort(plan.drivers.begin(), plan.drivers.end());

    plan.train.resize(plan.drivers.size());
    std::vector<std::vector<RawSegment>> test_candidates(plan.drivers.size());

    for (std::size_t c = 0; c < plan.drivers.size(); ++c) {
        const auto& stream = streams.at(plan.drivers[c]);
        const std::size_t total = stream.steering.size();
        if (total < train_samples + test_samples)
            throw data_error("driver '" + plan.drivers[c] + "' has " +
                             std::to_string(total / 600) + " min, needs " +
                             std::to_string((train_samples + test_samples) / 600));
        plan.train[c] = cut_stream(stream, 0, train_samples, seg_samples);
        test_candidates[c] = cut_stream(stream, train_samples, total, seg_samples);
    }

    plan.train_per_driver = plan.train.front().size();
    std::size_t min_test = test_candidates.front().size();
    std::size_t poorest = 0;
    for (std::size_t c = 0; c < test_candidates.size(); ++c)
        if (test_candidates[c].size() < min_test) {
            min_test = test_candidates[c].size();
            poorest = c;
        }
    const std::size_t required_test = test_samples / seg_samples;
    if (min_test < std::max<std::size_t>(required_test, 1))
        throw data_error("driver '" + plan.drivers[poorest] +
                         "' leaves too little data for balanced test segments");
    plan.test_per_driver = min_test;

    // seeded downsampling of the richer drivers; chronological order kept
    Rng rng(seed);
    plan.test.resize(plan.drivers.size());
    for (std::size_t c = 0; c < plan.drivers.size(); ++c) {
        auto& cand = test_candidates[c];
        if (cand.size() == min_test) {
            plan.test[c] = std::move(cand);
            continue;
        }
        Rng pick = rng.child(c);
        std::vector<std::size_t> idx(cand.size());
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < min_test; ++i) {
            const auto j = i + static_cast<std::size_t>(pick.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(min_test);
        std::sort(idx.begin(), idx.end());
        for (auto i : idx) plan.test[c].push_back(std::move(cand[i]));
    }
    return plan;
}

SegmentPool build_pool(const std::vector<std::string>& classes,
                       const std::vector<std::vector<RawSegment>>& segments,
                       std::size_t window_samples) {
    if (classes.size() != segments.size()) throw config_error("class/segment count mismatch");
    SegmentPool pool;
    pool.classes = classes;
    pool.per_class.resize(classes.size());
    const DftPlan plan(window_samples);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        pool.per_class[c].reserve(segments[c].size());
        for (const auto& seg : segments[c])
            pool.per_class[c].push_back(build_segment_matrix(seg, window_samples, plan));
    }
    return pool;
}

std::size_t cumulative_decision(const std::vector<VoteVector>& votes, std::size_t k) {
    if (votes.empty() || k == 0) throw config_error("cumulative_decision needs k >= 1 votes");
    k = std::min(k, votes.size());
    std::vector<double> sum(votes.front().size(), 0.0);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += votes[i][c];
    std::size_t best = 0;
    for (std::size_t c = 1; c < sum.size(); ++c)
        if (sum[c] > sum[best]) best = c;
    return best;
}

AccuracyCurve accuracy_from_votes(const std::vector<std::vector<VoteVector>>& votes,
                                  const std::vector<std::size_t>& labels, std::size_t n_classes) {
    if (votes.empty() || votes.size() != labels.size())
        throw config_error("vote/label count mismatch");
    const std::size_t n_votes = votes.front().size();

    AccuracyCurve curve;
    curve.n_segments = votes.size();
    curve.n_classes = n_classes;
    curve.accuracy.assign(n_votes, 0.0);
    for (std::size_t s = 0; s < votes.size(); ++s) {
        if (votes[s].size() != n_votes) throw config_error("ragged vote sequences");
        std::vector<double> sum(n_classes, 0.0);
        for (std::size_t k = 0; k < n_votes; ++k) {
            for (std::size_t c = 0; c < n_classes; ++c) sum[c] += votes[s][k][c];
            std::size_t best = 0;
            for (std::size_t c = 1; c < n_classes; ++c)
                if (sum[c] > sum[best]) best = c;
            if (best == labels[s]) curve.accuracy[k] += 1.0;
        }
    }
    for (double& a : curve.accuracy) a /= static_cast<double>(votes.size());
    return curve;
}

ConfusionMatrix confusion_from_votes(const std::vector<std::vector<VoteVector>>& votes,
                                     const std::vector<std::size_t>& labels, std::size_t n_classes) {
    if (votes.empty() || votes.size() != labels.size())
        throw config_error("vote/label count mismatch");
    ConfusionMatrix cm;
    cm.counts = Matrix(n_classes, n_classes);
    cm.total = votes.size();
    for (std::size_t s = 0; s < votes.size(); ++s) {
        const auto predicted = cumulative_decision(votes[s], votes[s].size());
        cm.counts.at(labels[s], predicted) += 1.0;
    }
    cm.normalized = Matrix(n_classes, n_classes);
    for (std::size_t r = 0; r < n_classes; ++r) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) row_sum += cm.counts.at(r, c);
        if (row_sum > 0.0)
            for (std::size_t c = 0; c < n_classes; ++c)
                cm.normalized.at(r, c) = cm.counts.at(r, c) / row_sum;
    }
    return cm;
}

namespace {

// eval-mode votes for every segment of the pool, in class-major order
void collect_votes(const ModelParams& params, const SegmentPool& pool,
                   std::vector<std::vector<VoteVector>>& votes, std::vector<std::size_t>& labels) {
    std::vector<const SegmentMatrix*> segments;
    for (std::size_t c = 0; c < pool.n_classes(); ++c)
        for (const auto& seg : pool.per_class[c]) {
            segments.push_back(&seg);
            labels.push_back(c);
        }
    votes.resize(segments.size());
    const auto n = static_cast<std::int64_t>(segments.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::int64_t i = 0; i < n; ++i) {
        Rng unused(0);
        votes[static_cast<std::size_t>(i)] =
            encode_segment(params, *segments[static_cast<std::size_t>(i)], Mode::Eval, unused);
    }
}

}  // namespace

AccuracyCurve accuracy_over_time(const ModelParams& params, const SegmentPool& test_pool) {
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    collect_votes(params, test_pool, votes, labels);
    return accuracy_from_votes(votes, labels, params.n_classes);
}

ConfusionMatrix confusion(const ModelParams& params, const SegmentPool& test_pool) {
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    collect_votes(params, test_pool, votes, labels);
    return confusion_from_votes(votes, labels, params.n_classes);
}

std::vector<double> default_sweep_windows() {
    std::vector<double> windows;
    for (int i = 5; i <= 20; ++i) windows.push_back(static_cast<double>(i) * 0.5);
    return windows;
}

namespace {
void validate_sweep_windows(const std::vector<double>& windows) {
    if (windows.empty()) throw config_error("sweep needs at least one window");
    for (double w : windows) {
        const double snapped = static_cast<double>(std::llround(w * 2.0)) / 2.0;
        if (std::abs(snapped - w) > 1e-9 || w < 2.5 - 1e-9 || w > 10.0 + 1e-9)
            throw config_error("sweep windows must lie in [2.5, 10] s on the 0.5 s grid");
    }
}
}  // namespace

std::vector<SweepRow> window_sweep(const std::vector<UniformTrip>& trips, const SweepOptions& opts) {
    validate_sweep_windows(opts.windows_s);
    if (opts.repetitions == 0) throw config_error("sweep needs at least one repetition");

    std::set<std::string> driver_set;
    for (const auto& trip : trips) driver_set.insert(trip.driver_id);
    std::vector<std::string> all_drivers(driver_set.begin(), driver_set.end());
    const std::size_t subset =
        opts.subset_size == 0 ? all_drivers.size() : std::min(opts.subset_size, all_drivers.size());

    Rng root(opts.seed);
    const std::size_t n_cells = opts.windows_s.size() * opts.repetitions;
    std::vector<double> cell_acc(n_cells, 0.0);

    // the subset and split depend only on the repetition: every window sees
    // the same drivers and trips
    std::vector<std::vector<UniformTrip>> rep_trips(opts.repetitions);
    for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
        Rng pick = root.child(0x5000 + rep);
        std::vector<std::string> chosen = all_drivers;
        for (std::size_t i = 0; i < subset; ++i) {
            const auto j = i + static_cast<std::size_t>(pick.below(chosen.size() - i));
            std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(subset);
        std::sort(chosen.begin(), chosen.end());
        for (const auto& trip : trips)
            if (std::find(chosen.begin(), chosen.end(), trip.driver_id) != chosen.end())
                rep_trips[rep].push_back(trip);
    }

    const auto cells = static_cast<std::int64_t>(n_cells);
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::int64_t cell = 0; cell < cells; ++cell) {
        const std::size_t wi = static_cast<std::size_t>(cell) / opts.repetitions;
        const std::size_t rep = static_cast<std::size_t>(cell) % opts.repetitions;
        const double window_s = opts.windows_s[wi];
        const auto w_samples = static_cast<std::size_t>(std::llround(window_s * 10.0));

        const SplitPlan split = make_split(rep_trips[rep], root.child(0x6000 + rep).seed(), opts.protocol);
        const SegmentPool train_pool = build_pool(split.drivers, split.train, w_samples);
        const SegmentPool test_pool = build_pool(split.drivers, split.test, w_samples);

        TrainOptions cell_opts = opts.train;
        cell_opts.seed = root.child(0x7000 + static_cast<std::uint64_t>(cell)).seed();
        const TrainedModel model = train_model(train_pool, test_pool, cell_opts);
        cell_acc[static_cast<std::size_t>(cell)] = final_vote_accuracy(model.params, test_pool);
    }

    std::vector<SweepRow> rows;
    for (std::size_t wi = 0; wi < opts.windows_s.size(); ++wi) {
        SweepRow row;
        row.window_s = opts.windows_s[wi];
        double sum = 0.0;
        for (std::size_t rep = 0; rep < opts.repetitions; ++rep)
            sum += cell_acc[wi * opts.repetitions + rep];
        row.mean_acc = sum / static_cast<double>(opts.repetitions);
        if (opts.repetitions > 1) {
            double sq = 0.0;
            for (std::size_t rep = 0; rep < opts.repetitions; ++rep) {
                const double d = cell_acc[wi * opts.repetitions + rep] - row.mean_acc;
                sq += d * d;
            }
            row.std_acc = std::sqrt(sq / static_cast<double>(opts.repetitions - 1));
        }
        rows.push_back(row);
    }
    return rows;
}

Matrix summary_matrix(const RawSegment& segment, std::size_t window_samples) {
    const std::size_t w = window_samples;
    const std::size_t n_windows = segment.steering.size() / w;
    Matrix rows(n_windows, 7);
    for (std::size_t i = 0; i < n_windows; ++i) {
        const auto feat = summarize_window(std::span(segment.steering).subspan(i * w, w),
                                           std::span(segment.velocity).subspan(i * w, w));
        const auto arr = feat.as_array();
        std::copy(arr.begin(), arr.end(), rows[i]);
    }
    return rows;
}

BaselineResult run_baseline(const SplitPlan& split, std::size_t window_samples,
                            const ForestOptions& opts) {
    // training matrix: every window of every train segment
    std::vector<Matrix> test_matrices;
    std::vector<std::size_t> test_labels;
    std::size_t n_rows = 0;
    std::vector<Matrix> train_matrices;
    std::vector<std::size_t> train_labels;
    for (std::size_t c = 0; c < split.drivers.size(); ++c) {
        for (const auto& seg : split.train[c]) {
            train_matrices.push_back(summary_matrix(seg, window_samples));
            train_labels.push_back(c);
            n_rows += train_matrices.back().rows;
        }
        for (const auto& seg : split.test[c]) {
            test_matrices.push_back(summary_matrix(seg, window_samples));
            test_labels.push_back(c);
        }
    }

    Matrix train(n_rows, 7);
    std::vector<std::size_t> labels(n_rows);
    std::size_t row = 0;
    for (std::size_t i = 0; i < train_matrices.size(); ++i)
        for (std::size_t r = 0; r < train_matrices[i].rows; ++r) {
            std::copy(train_matrices[i][r], train_matrices[i][r] + 7, train[row]);
            labels[row] = train_labels[i];
            ++row;
        }

    BaselineResult result;
    result.forest = fit_forest(train, labels, split.drivers.size(), opts);

    const std::size_t n_classes = split.drivers.size();
    result.confusion.counts = Matrix(n_classes, n_classes);
    result.confusion.total = test_matrices.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_matrices.size(); ++i) {
        const auto predicted = classify_segment(result.forest, test_matrices[i]);
        result.confusion.counts.at(test_labels[i], predicted) += 1.0;
        if (predicted == test_labels[i]) ++correct;
    }
    result.final_acc = test_matrices.empty()
                           ? 0.0
                           : static_cast<double>(correct) / static_cast<double>(test_matrices.size());
    result.confusion.normalized = Matrix(n_classes, n_classes);
    for (std::size_t r = 0; r < n_classes; ++r) {
        double row_sum = 0.0;
        for (std::size_t c = 0; c < n_classes; ++c) row_sum += result.confusion.counts.at(r, c);
        if (row_sum > 0.0)
            for (std::size_t c = 0; c < n_classes; ++c)
                result.confusion.normalized.at(r, c) = result.confusion.counts.at(r, c) / row_sum;
    }
    return result;
}

}  // namespace steerid
