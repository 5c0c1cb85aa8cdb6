#include <doctest.h>

#include <cmath>
#include <vector>

#include "steerid/errors.hpp"
#include "steerid/rng.hpp"
#include "steerid/stationarity.hpp"

using namespace steerid;

namespace {

std::vector<double> ar1(double phi, std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < n + 200; ++i) {
        prev = phi * prev + rng.normal();
        if (i >= 200) x[i - 200] = prev;
    }
    return x;
}

std::vector<double> random_walk(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += rng.normal();
        x[i] = acc;
    }
    return x;
}

std::vector<double> white_noise(std::size_t n, Rng& rng) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    return x;
}

}  // namespace

TEST_CASE("acf is exactly 1 at lag zero and bounded") {
    Rng rng(21);
    const auto x = ar1(0.7, 5000, rng);
    const auto p = acf(x, 100);
    CHECK(p.rho[0] == 1.0);
    for (double r : p.rho) CHECK(std::abs(r) <= 1.0 + 1e-9);
    for (std::size_t h = 1; h < p.band.size(); ++h) {
        CHECK(p.band[h] > 0.0);
        CHECK(p.band[h] >= p.band[h - 1]);
    }
}

TEST_CASE("acf of AR(1) phi=0.5 matches the analytic value") {
    Rng rng(22);
    const auto x = ar1(0.5, 10000, rng);
    const auto p = acf(x, 20);
    CHECK(p.rho[1] > 0.45);
    CHECK(p.rho[1] < 0.55);
    // phi^h decay through lag 10
    for (std::size_t h = 1; h <= 10; ++h)
        CHECK(std::abs(p.rho[h] - std::pow(0.5, static_cast<double>(h))) < 0.05);
}

TEST_CASE("white-noise acf stays inside the 1% band almost everywhere") {
    Rng rng(23);
    const auto x = white_noise(10000, rng);
    const auto p = acf(x, 100);
    int inside = 0;
    for (std::size_t h = 1; h <= 100; ++h)
        if (std::abs(p.rho[h]) < p.band[h]) ++inside;
    CHECK(inside >= 97);
}

TEST_CASE("acf is invariant to adding a constant") {
    Rng rng(24);
    auto x = ar1(0.6, 4000, rng);
    const auto p1 = acf(x, 50);
    for (double& v : x) v += 1234.5;
    const auto p2 = acf(x, 50);
    for (std::size_t h = 0; h <= 50; ++h) CHECK(p1.rho[h] == doctest::Approx(p2.rho[h]).epsilon(1e-7));
}

TEST_CASE("constant series is a degenerate signal") {
    const std::vector<double> x(500, 3.25);
    CHECK_THROWS_AS(acf(x, 10), data_error);
}

TEST_CASE("adf keeps the unit root on random walks and rejects on AR(1)") {
    int rw_rejects = 0, ar_rejects = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        if (adf_test(random_walk(3000, rng)).reject_unit_root) ++rw_rejects;
        Rng rng2(2000 + seed);
        if (adf_test(ar1(0.5, 3000, rng2)).reject_unit_root) ++ar_rejects;
    }
    CHECK(rw_rejects <= 2);  // 1% level, 20 draws
    CHECK(ar_rejects == 20);
}

TEST_CASE("adf decision field is consistent with the critical value") {
    Rng rng(25);
    const auto res = adf_test(ar1(0.5, 2000, rng));
    CHECK(res.reject_unit_root == (res.statistic < res.critical_1pct));
    CHECK(res.critical_1pct == doctest::Approx(-3.43).epsilon(0.01));
}

TEST_CASE("adf statistic is invariant to affine rescaling") {
    Rng rng(26);
    auto x = ar1(0.5, 3000, rng);
    const auto base = adf_test(x);
    for (double& v : x) v = -7.5 * v + 40.0;
    const auto scaled = adf_test(x);
    CHECK(scaled.statistic == doctest::Approx(base.statistic).epsilon(1e-8));
    CHECK(scaled.reject_unit_root == base.reject_unit_root);
    CHECK(scaled.lags_used == base.lags_used);
}

TEST_CASE("adf requires 50 samples") {
    const std::vector<double> x(49, 0.0);
    CHECK_THROWS_AS(adf_test(x), data_error);
}

TEST_CASE("correlated lag of white noise is found almost immediately") {
    Rng rng(27);
    const auto p = acf(white_noise(10000, rng), kAcfMaxLag);
    const auto lag = correlated_lag(p);
    REQUIRE(lag.has_value());
    CHECK(*lag <= 0.3);
}

TEST_CASE("correlated lag of AR(1) phi=0.9 matches the analytic crossing") {
    Rng rng(28);
    const auto x = ar1(0.9, 6000, rng);
    const auto p = acf(x, kAcfMaxLag);
    const auto lag = correlated_lag(p);
    REQUIRE(lag.has_value());

    // oracle: smallest h with phi^h below the Bartlett band built from the
    // analytic rho
    const double n = 6000.0;
    double cum = 0.0;
    double crossing = 0.0;
    for (std::size_t h = 1; h <= kAcfMaxLag; ++h) {
        const double band = kZ995 * std::sqrt((1.0 + 2.0 * cum) / n);
        const double rho = std::pow(0.9, static_cast<double>(h));
        if (rho < band) {
            crossing = static_cast<double>(h) / 10.0;
            break;
        }
        cum += rho * rho;
    }
    REQUIRE(crossing > 0.0);
    CHECK(*lag >= 0.7 * crossing);
    CHECK(*lag <= 1.3 * crossing);
}

TEST_CASE("correlated lag is none when the acf never settles") {
    AcfProfile p;
    p.n = 1000;
    p.rho.resize(kAcfMaxLag + 1);
    p.band.resize(kAcfMaxLag + 1, 0.01);
    for (std::size_t h = 0; h <= kAcfMaxLag; ++h) p.rho[h] = std::pow(0.999, static_cast<double>(h));
    CHECK_FALSE(correlated_lag(p).has_value());
}

TEST_CASE("widening the band can only shorten the correlated lag") {
    Rng rng(29);
    const auto x = ar1(0.85, 4000, rng);
    auto p = acf(x, kAcfMaxLag);
    const auto lag = correlated_lag(p);
    REQUIRE(lag.has_value());
    for (double& b : p.band) b *= 1.75;
    const auto wider = correlated_lag(p);
    REQUIRE(wider.has_value());
    CHECK(*wider <= *lag);
}

TEST_CASE("lag histogram: point mass") {
    const std::vector<double> lags(10, 3.6);
    const auto hist = aggregate_lag_histogram(lags);
    CHECK(hist.mode_s == doctest::Approx(3.6));
    CHECK(hist.median_s == doctest::Approx(3.6));
    CHECK(hist.mean_s == doctest::Approx(3.6));
}

TEST_CASE("lag histogram: hand-computed mixture") {
    const std::vector<double> lags = {2.0, 2.0, 2.0, 2.0, 2.0, 4.0, 4.0, 4.0};
    const auto hist = aggregate_lag_histogram(lags);
    CHECK(hist.mode_s == doctest::Approx(2.0));
    CHECK(hist.median_s == doctest::Approx(2.0));
    CHECK(hist.mean_s == doctest::Approx(2.75));
    std::size_t total = 0;
    for (auto c : hist.counts) total += c;
    CHECK(total == lags.size());
}

TEST_CASE("lag histogram rejects empty input") {
    CHECK_THROWS_AS(aggregate_lag_histogram(std::vector<double>{}), data_error);
}

TEST_CASE("window recommendation clamps and rounds to the half second") {
    LagHistogram hist;
    hist.mode_s = 3.6;
    CHECK(recommend_window(hist).h_opt_s == doctest::Approx(3.5));
    CHECK(recommend_window(hist).h_opt_samples == 35);
    hist.mode_s = 1.0;
    CHECK(recommend_window(hist).h_opt_s == doctest::Approx(2.5));
    hist.mode_s = 12.0;
    CHECK(recommend_window(hist).h_opt_s == doctest::Approx(10.0));
}
