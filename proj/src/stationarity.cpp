#include "steerid/stationarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <cstdint>

#include "steerid/errors.hpp"
#include "steerid/kernels.hpp"
#include "steerid/trip.hpp"

namespace steerid {

AcfProfile acf(std::span<const double> x, std::size_t h_max) {
    const std::size_t n = x.size();
    if (h_max < 1 || n <= h_max)
        throw data_error("acf needs more than h_max samples (n=" + std::to_string(n) + ")");

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);

    std::vector<double> centered(n);
    for (std::size_t i = 0; i < n; ++i) centered[i] = x[i] - mean;

    std::vector<double> gamma(h_max + 1, 0.0);
    const auto lags = static_cast<std::int64_t>(h_max);
#pragma omp parallel for schedule(static) num_threads(kernels::max_threads())
    for (std::int64_t h = 0; h <= lags; ++h) {
        double acc = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(h) < n; ++t)
            acc += centered[t] * centered[t + static_cast<std::size_t>(h)];
        gamma[static_cast<std::size_t>(h)] = acc / static_cast<double>(n);
    }

    if (gamma[0] <= 0.0) throw data_error("degenerate signal: zero variance");

    AcfProfile p;
    p.n = n;
    p.rho.resize(h_max + 1);
    p.band.resize(h_max + 1);
    for (std::size_t h = 0; h <= h_max; ++h) p.rho[h] = gamma[h] / gamma[0];
    p.rho[0] = 1.0;

    // Bartlett large-lag band: cumulative over rho(1..h-1)
    double cum = 0.0;
    for (std::size_t h = 0; h <= h_max; ++h) {
        p.band[h] = kZ995 * std::sqrt((1.0 + 2.0 * cum) / static_cast<double>(n));
        if (h >= 1) cum += p.rho[h] * p.rho[h];
    }
    return p;
}

namespace {

// OLS through the normal equations; the lag search reuses leading principal
// submatrices of X'X, so the Gram matrix is assembled once at full width.
struct GramSystem {
    Matrix gram;              // k x k
    std::vector<double> xty;  // k
    double yty = 0.0;
    std::size_t n_rows = 0;
};

struct OlsFit {
    std::vector<double> beta;
    double ssr = 0.0;
    std::size_t k = 0;
};

// Cholesky factorization of the leading k x k block. Returns false if not
// positive definite (singular regression).
bool cholesky(const Matrix& gram, std::size_t k, Matrix& chol) {
    chol = Matrix(k, k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = gram.at(i, j);
            for (std::size_t m = 0; m < j; ++m) acc -= chol.at(i, m) * chol.at(j, m);
            if (i == j) {
                if (acc <= 1e-12) return false;
                chol.at(i, i) = std::sqrt(acc);
            } else {
                chol.at(i, j) = acc / chol.at(j, j);
            }
        }
    }
    return true;
}

std::vector<double> chol_solve(const Matrix& chol, std::span<const double> rhs) {
    const std::size_t k = chol.rows;
    std::vector<double> y(k), x(k);
    for (std::size_t i = 0; i < k; ++i) {
        double acc = rhs[i];
        for (std::size_t j = 0; j < i; ++j) acc -= chol.at(i, j) * y[j];
        y[i] = acc / chol.at(i, i);
    }
    for (std::size_t ii = k; ii-- > 0;) {
        double acc = y[ii];
        for (std::size_t j = ii + 1; j < k; ++j) acc -= chol.at(j, ii) * x[j];
        x[ii] = acc / chol.at(ii, ii);
    }
    return x;
}

OlsFit ols_leading(const GramSystem& sys, std::size_t k) {
    Matrix chol;
    if (!cholesky(sys.gram, k, chol)) throw data_error("degenerate signal: singular ADF regression");
    OlsFit fit;
    fit.k = k;
    fit.beta = chol_solve(chol, std::span<const double>(sys.xty.data(), k));
    double bxty = 0.0;
    for (std::size_t i = 0; i < k; ++i) bxty += fit.beta[i] * sys.xty[i];
    fit.ssr = std::max(sys.yty - bxty, 0.0);
    return fit;
}

// design columns: [const, x_{t-1}, dx_{t-1}, ..., dx_{t-p_max}]
GramSystem build_gram(std::span<const double> x, std::size_t p_max) {
    const std::size_t n = x.size();
    std::vector<double> diff(n - 1);
    for (std::size_t t = 0; t + 1 < n; ++t) diff[t] = x[t + 1] - x[t];

    const std::size_t rows = diff.size() - p_max;  // usable observations
    const std::size_t k = 2 + p_max;
    GramSystem sys;
    sys.n_rows = rows;
    sys.gram = Matrix(k, k);
    sys.xty.assign(k, 0.0);

    std::vector<double> row(k);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = p_max + r;  // index into diff; y = diff[t]
        row[0] = 1.0;
        row[1] = x[t];  // level lagged one step behind diff[t]
        for (std::size_t j = 1; j <= p_max; ++j) row[1 + j] = diff[t - j];
        const double y = diff[t];
        for (std::size_t i = 0; i < k; ++i) {
            sys.xty[i] += row[i] * y;
            for (std::size_t j = 0; j <= i; ++j) sys.gram.at(i, j) += row[i] * row[j];
        }
        sys.yty += y * y;
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j) sys.gram.at(i, j) = sys.gram.at(j, i);
    return sys;
}

double aic(double ssr, std::size_t n, std::size_t k) {
    const double n_d = static_cast<double>(n);
    // OLS log-likelihood up to constants shared across candidates
    return n_d * std::log(ssr / n_d) + 2.0 * static_cast<double>(k);
}

// MacKinnon (2010) response surface, constant-only case, 1% level.
double mackinnon_crit_1pct(std::size_t nobs) {
    const double inv = 1.0 / static_cast<double>(nobs);
    return -3.43035 + inv * (-6.5393 + inv * (-16.786 + inv * -79.433));
}

struct TStat {
    double statistic;
    std::size_t nobs;
};

// t-ratio of the level coefficient in the ADF regression with p lagged diffs.
TStat adf_tstat(std::span<const double> x, std::size_t p) {
    const GramSystem sys = build_gram(x, p);
    const std::size_t k = 2 + p;
    Matrix chol;
    if (!cholesky(sys.gram, k, chol)) throw data_error("degenerate signal: singular ADF regression");
    const auto beta = chol_solve(chol, std::span<const double>(sys.xty.data(), k));
    double bxty = 0.0;
    for (std::size_t i = 0; i < k; ++i) bxty += beta[i] * sys.xty[i];
    const double ssr = std::max(sys.yty - bxty, 0.0);

    const std::size_t dof = sys.n_rows - k;
    if (dof == 0) throw data_error("degenerate signal: no ADF degrees of freedom");
    const double sigma2 = ssr / static_cast<double>(dof);

    // var(beta_1) = sigma^2 * (X'X)^{-1}_{11}
    std::vector<double> unit(k, 0.0);
    unit[1] = 1.0;
    const auto inv_col = chol_solve(chol, unit);
    const double se = std::sqrt(sigma2 * inv_col[1]);
    if (!(se > 0.0)) throw data_error("degenerate signal: zero ADF standard error");
    return {beta[1] / se, sys.n_rows};
}

}  // namespace

AdfResult adf_test(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 50) throw data_error("adf_test needs at least 50 samples, got " + std::to_string(n));

    std::size_t p_max =
        static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
    p_max = std::min(p_max, n / 2 - 2);

    // AIC over 0..p_max on the common (p_max-trimmed) sample
    const GramSystem sys = build_gram(x, p_max);
    std::size_t best_p = 0;
    double best_aic = 0.0;
    for (std::size_t p = 0; p <= p_max; ++p) {
        const OlsFit fit = ols_leading(sys, 2 + p);
        const double score = aic(fit.ssr, sys.n_rows, fit.k);
        if (p == 0 || score < best_aic) {
            best_aic = score;
            best_p = p;
        }
    }

    // refit with the chosen order on the longest usable sample
    const TStat t = adf_tstat(x, best_p);
    AdfResult res;
    res.statistic = t.statistic;
    res.critical_1pct = mackinnon_crit_1pct(t.nobs);
    res.reject_unit_root = res.statistic < res.critical_1pct;
    res.lags_used = static_cast<int>(best_p);
    return res;
}

std::optional<double> correlated_lag(const AcfProfile& p) {
    const std::size_t h_max = p.rho.size() - 1;
    for (std::size_t h = 1; h <= h_max; ++h) {
        const std::size_t stop = std::min(h + 9, h_max);
        bool inside = true;
        for (std::size_t k = h; k <= stop; ++k) {
            if (std::abs(p.rho[k]) >= p.band[k]) {
                inside = false;
                break;
            }
        }
        if (inside) return static_cast<double>(h) / 10.0;
    }
    return std::nullopt;
}

LagHistogram aggregate_lag_histogram(std::span<const double> lags_s) {
    if (lags_s.empty()) throw data_error("empty lag collection");

    LagHistogram hist;
    hist.counts.assign(201, 0);  // bins centered at 0.0 .. 20.0 s
    for (double lag : lags_s) {
        auto bin = static_cast<std::size_t>(std::llround(lag * 10.0));
        bin = std::min<std::size_t>(bin, 200);
        ++hist.counts[bin];
    }

    std::size_t best = 0;
    for (std::size_t b = 1; b < hist.counts.size(); ++b)
        if (hist.counts[b] > hist.counts[best]) best = b;  // ties keep the smaller lag
    hist.mode_s = static_cast<double>(best) / 10.0;

    std::vector<double> sorted(lags_s.begin(), lags_s.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    hist.median_s = (m % 2 == 1) ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    hist.mean_s = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(m);
    return hist;
}

WindowRecommendation recommend_window(const LagHistogram& hist) {
    WindowRecommendation rec;
    rec.source_mode_s = hist.mode_s;
    const double clamped = std::clamp(hist.mode_s, 2.5, 10.0);
    rec.h_opt_s = static_cast<double>(std::llround(clamped * 2.0)) / 2.0;
    rec.h_opt_samples = static_cast<std::size_t>(std::llround(rec.h_opt_s * 10.0));
    return rec;
}

FleetStationarity analyze_fleet(const std::vector<UniformTrip>& trips) {
    FleetStationarity fleet;
    fleet.trips.resize(trips.size());

    const auto count = static_cast<std::int64_t>(trips.size());
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads())
    for (std::int64_t i = 0; i < count; ++i) {
        const auto& trip = trips[static_cast<std::size_t>(i)];
        TripStationarity row;
        row.trip_id = trip.trip_id;
        const AdfResult adf_res = adf_test(trip.steering);
        row.adf_statistic = adf_res.statistic;
        row.reject = adf_res.reject_unit_root;
        row.h_cor_s = correlated_lag(acf(trip.steering));
        fleet.trips[static_cast<std::size_t>(i)] = std::move(row);
    }

    std::vector<double> lags;
    for (const auto& row : fleet.trips) {
        if (!row.reject) continue;
        ++fleet.n_stationary;
        if (row.h_cor_s) lags.push_back(*row.h_cor_s);
    }
    if (lags.empty()) throw data_error("no stationary trip produced a correlated lag");
    fleet.histogram = aggregate_lag_histogram(lags);
    fleet.recommendation = recommend_window(fleet.histogram);
    return fleet;
}

}  // namespace steerid
