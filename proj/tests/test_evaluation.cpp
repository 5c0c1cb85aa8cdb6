#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "steerid/errors.hpp"
#include "steerid/evaluation.hpp"
#include "steerid/rng.hpp"
#include "steerid/trip.hpp"

using namespace steerid;

namespace {

UniformTrip noise_trip(const std::string& driver, const std::string& id, std::size_t samples,
                       std::uint64_t seed) {
    Rng rng(seed);
    UniformTrip t;
    t.driver_id = driver;
    t.trip_id = id;
    t.steering.resize(samples);
    t.velocity.resize(samples);
    double prev = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        prev = 0.8 * prev + rng.normal(0.0, 5.0);
        t.steering[i] = prev;
        t.velocity[i] = 12.0 + rng.normal(0.0, 0.5);
    }
    return t;
}

std::vector<UniformTrip> fleet_minutes(const std::vector<std::pair<std::string, double>>& spec) {
    std::vector<UniformTrip> trips;
    std::uint64_t seed = 100;
    for (const auto& [driver, minutes] : spec)
        trips.push_back(noise_trip(driver, driver + "_t", static_cast<std::size_t>(minutes * 600), seed++));
    return trips;
}

VoteVector vote_of(std::initializer_list<double> values) { return VoteVector(values); }

}  // namespace

TEST_CASE("cumulative decision sums votes and breaks ties low") {
    const std::vector<VoteVector> votes = {vote_of({0.6, 0.4}), vote_of({0.1, 0.9})};
    CHECK(cumulative_decision(votes, 1) == 0);
    CHECK(cumulative_decision(votes, 2) == 1);  // sums 0.7 vs 1.3

    const std::vector<VoteVector> uniform(3, vote_of({0.25, 0.25, 0.25, 0.25}));
    CHECK(cumulative_decision(uniform, 3) == 0);
}

TEST_CASE("cumulative decision is invariant to vote order") {
    Rng rng(81);
    std::vector<VoteVector> votes;
    for (int i = 0; i < 7; ++i) {
        VoteVector v(4);
        double sum = 0.0;
        for (double& p : v) {
            p = rng.uniform01();
            sum += p;
        }
        for (double& p : v) p /= sum;
        votes.push_back(v);
    }
    const auto base = cumulative_decision(votes, votes.size());
    std::reverse(votes.begin(), votes.end());
    CHECK(cumulative_decision(votes, votes.size()) == base);
}

TEST_CASE("accuracy curve of a perfect voter is constant 1") {
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    for (std::size_t cls = 0; cls < 3; ++cls)
        for (int s = 0; s < 4; ++s) {
            std::vector<VoteVector> seq(5, VoteVector(3, 0.0));
            for (auto& v : seq) v[cls] = 1.0;
            votes.push_back(seq);
            labels.push_back(cls);
        }
    const auto curve = accuracy_from_votes(votes, labels, 3);
    for (double a : curve.accuracy) CHECK(a == 1.0);
}

TEST_CASE("uniform-random votes score near chance for 15 classes") {
    Rng rng(82);
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    for (int s = 0; s < 1000; ++s) {
        std::vector<VoteVector> seq;
        for (int k = 0; k < 6; ++k) {
            VoteVector v(15);
            double sum = 0.0;
            for (double& p : v) {
                p = -std::log(1.0 - rng.uniform01());
                sum += p;
            }
            for (double& p : v) p /= sum;
            seq.push_back(v);
        }
        votes.push_back(seq);
        labels.push_back(static_cast<std::size_t>(rng.below(15)));
    }
    const auto curve = accuracy_from_votes(votes, labels, 15);
    const double p = 1.0 / 15.0;
    const double sigma = std::sqrt(p * (1 - p) / 1000.0);
    for (double a : curve.accuracy) CHECK(std::abs(a - p) <= 3.0 * sigma + 0.005);
}

TEST_CASE("confusion matrix counts, normalization, identity for a perfect voter") {
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    const std::size_t per_class = 21;
    for (std::size_t cls = 0; cls < 4; ++cls)
        for (std::size_t s = 0; s < per_class; ++s) {
            std::vector<VoteVector> seq(3, VoteVector(4, 0.0));
            for (auto& v : seq) v[cls] = 1.0;
            votes.push_back(seq);
            labels.push_back(cls);
        }
    const auto cm = confusion_from_votes(votes, labels, 4);
    CHECK(cm.total == 4 * per_class);
    for (std::size_t r = 0; r < 4; ++r) {
        double row_sum = 0.0, norm_sum = 0.0;
        for (std::size_t c = 0; c < 4; ++c) {
            row_sum += cm.counts.at(r, c);
            norm_sum += cm.normalized.at(r, c);
        }
        CHECK(row_sum == doctest::Approx(static_cast<double>(per_class)));
        CHECK(norm_sum == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(cm.counts.at(r, r) == doctest::Approx(static_cast<double>(per_class)));
    }
}

TEST_CASE("final-vote accuracy equals the confusion-matrix trace over total") {
    Rng rng(83);
    std::vector<std::vector<VoteVector>> votes;
    std::vector<std::size_t> labels;
    for (int s = 0; s < 60; ++s) {
        std::vector<VoteVector> seq;
        for (int k = 0; k < 4; ++k) {
            VoteVector v(5);
            double sum = 0.0;
            for (double& p : v) {
                p = rng.uniform01();
                sum += p;
            }
            for (double& p : v) p /= sum;
            seq.push_back(v);
        }
        votes.push_back(seq);
        labels.push_back(static_cast<std::size_t>(rng.below(5)));
    }
    const auto curve = accuracy_from_votes(votes, labels, 5);
    const auto cm = confusion_from_votes(votes, labels, 5);
    double trace = 0.0;
    for (std::size_t c = 0; c < 5; ++c) trace += cm.counts.at(c, c);
    CHECK(curve.accuracy.back() == doctest::Approx(trace / static_cast<double>(cm.total)));
}

TEST_CASE("split rejects a driver below the 240+30 minute floor") {
    const auto trips = fleet_minutes({{"a", 239.0 + 30.0}, {"b", 400.0}});
    CHECK_THROWS_WITH_AS(make_split(trips, 1), doctest::Contains("a"), data_error);
}

TEST_CASE("split names the driver whose test pool comes up empty") {
    ProtocolConfig cfg;
    cfg.train_min = 30.0;
    cfg.test_min = 10.0;
    cfg.segment_min = 15.0;
    // 41 minutes clears the 30+10 floor but leaves no whole test segment
    const auto trips = fleet_minutes({{"poor", 41.0}, {"rich", 120.0}});
    CHECK_THROWS_WITH_AS(make_split(trips, 1, cfg), doctest::Contains("poor"), data_error);
}

TEST_CASE("split: 300+60 minutes yields 16 train segments and balanced test pools") {
    const auto trips = fleet_minutes({{"a", 360.0}, {"b", 360.0}});
    const auto split = make_split(trips, 1);
    CHECK(split.train_per_driver == 16);  // 240 min / 15 min
    CHECK(split.test_per_driver == 8);    // remaining 120 min
    for (const auto& pool : split.train) CHECK(pool.size() == 16);
    for (const auto& pool : split.test) CHECK(pool.size() == 8);
}

TEST_CASE("split balances by downsampling the richer driver deterministically") {
    const auto trips = fleet_minutes({{"a", 300.0}, {"b", 420.0}});
    const auto s1 = make_split(trips, 7);
    const auto s2 = make_split(trips, 7);
    CHECK(s1.test_per_driver == 4);  // min(4, 12)
    for (std::size_t c = 0; c < s1.drivers.size(); ++c) {
        REQUIRE(s1.test[c].size() == s2.test[c].size());
        for (std::size_t i = 0; i < s1.test[c].size(); ++i)
            CHECK(s1.test[c][i].start_sample == s2.test[c][i].start_sample);
    }
    const auto s3 = make_split(trips, 8);
    bool any_difference = false;
    for (std::size_t i = 0; i < s1.test[1].size(); ++i)
        if (s1.test[1][i].start_sample != s3.test[1][i].start_sample) any_difference = true;
    CHECK(any_difference);  // a different seed picks a different subset
}

TEST_CASE("split spans are chronological and disjoint") {
    const auto trips = fleet_minutes({{"a", 330.0}, {"b", 330.0}});
    const auto split = make_split(trips, 3);
    const auto seg_len = static_cast<std::size_t>(15 * 600);
    for (std::size_t c = 0; c < split.drivers.size(); ++c) {
        std::size_t max_train_end = 0;
        std::set<std::size_t> starts;
        for (const auto& seg : split.train[c]) {
            CHECK(starts.insert(seg.start_sample).second);
            max_train_end = std::max(max_train_end, seg.start_sample + seg_len);
        }
        for (const auto& seg : split.test[c]) {
            CHECK(seg.start_sample >= max_train_end);  // earliest data trains
            CHECK(starts.insert(seg.start_sample).second);
        }
    }
}

TEST_CASE("default sweep covers 2.5 to 10 in half-second steps") {
    const auto windows = default_sweep_windows();
    REQUIRE(windows.size() == 16);
    CHECK(windows.front() == 2.5);
    CHECK(windows.back() == 10.0);
    for (std::size_t i = 1; i < windows.size(); ++i)
        CHECK(windows[i] - windows[i - 1] == doctest::Approx(0.5));
}

TEST_CASE("sweep validates its window grid") {
    SweepOptions opts;
    opts.windows_s = {2.7};
    CHECK_THROWS_AS(window_sweep({}, opts), config_error);
    opts.windows_s = {11.0};
    CHECK_THROWS_AS(window_sweep({}, opts), config_error);
}

TEST_CASE("sweep with one repetition reports zero std and reruns identically") {
    const auto trips = fleet_minutes({{"a", 80.0}, {"b", 80.0}});

    SweepOptions opts;
    opts.windows_s = {2.5, 3.0};
    opts.repetitions = 1;
    opts.seed = 5;
    opts.protocol.train_min = 45.0;
    opts.protocol.test_min = 15.0;
    opts.protocol.segment_min = 15.0;
    opts.train.steps = 4;
    opts.train.batch_size = 4;
    opts.train.eval_every = 4;
    opts.train.early_stop = false;
    opts.train.hyper.hidden = 4;

    const auto rows = window_sweep(trips, opts);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) CHECK(row.std_acc == 0.0);

    const auto rows2 = window_sweep(trips, opts);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].window_s == rows2[i].window_s);
        CHECK(rows[i].mean_acc == rows2[i].mean_acc);
        CHECK(rows[i].std_acc == rows2[i].std_acc);
    }
}

TEST_CASE("baseline runs on a split and reports a full confusion matrix") {
    const auto trips = fleet_minutes({{"a", 80.0}, {"b", 80.0}});
    ProtocolConfig cfg;
    cfg.train_min = 45.0;
    cfg.test_min = 15.0;
    const auto split = make_split(trips, 2, cfg);
    ForestOptions opts;
    opts.n_trees = 20;
    opts.seed = 4;
    const auto result = run_baseline(split, 25, opts);
    CHECK(result.confusion.total == split.test_per_driver * 2);
    CHECK(result.final_acc >= 0.0);
    CHECK(result.final_acc <= 1.0);
}
