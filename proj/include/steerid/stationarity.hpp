#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace steerid {

struct UniformTrip;

inline constexpr std::size_t kAcfMaxLag = 200;   // 20 s at 10 Hz
inline constexpr double kZ995 = 2.5758;          // two-sided 1% normal quantile

// Right-sided autocorrelation with a Bartlett significance band.
struct AcfProfile {
    std::vector<double> rho;   // rho[h], h = 0..h_max
    std::vector<double> band;  // per-lag half-width at the two-sided 1% level
    std::size_t n = 0;         // sample count
};

struct AdfResult {
    double statistic = 0.0;
    double critical_1pct = 0.0;
    bool reject_unit_root = false;  // statistic < critical_1pct
    int lags_used = 0;              // augmentation order picked by AIC
};

struct LagHistogram {
    double bin_width_s = 0.1;
    std::vector<std::size_t> counts;  // bins centered at 0.0, 0.1, ... 20.0 s
    double mode_s = 0.0;
    double median_s = 0.0;
    double mean_s = 0.0;
};

struct WindowRecommendation {
    double h_opt_s = 0.0;
    std::size_t h_opt_samples = 0;
    double source_mode_s = 0.0;
};

// rho(h) = gamma(h)/gamma(0) with the 1/n (positive semidefinite) estimator;
// band(h) = z * sqrt((1 + 2 * sum_{k<h} rho(k)^2) / n). Throws data_error on
// a constant series.
AcfProfile acf(std::span<const double> x, std::size_t h_max = kAcfMaxLag);

// Augmented Dickey-Fuller test, constant-only regression, AIC lag selection
// over 0..floor(12*(n/100)^0.25), MacKinnon 1% critical value.
AdfResult adf_test(std::span<const double> x);

// Smallest lag from which |rho| stays inside the band for a full second
// (10 consecutive lags, clipped at the profile end); none within 20 s -> nullopt.
std::optional<double> correlated_lag(const AcfProfile& p);

// 0.1 s bins over [0, 20] s; mode = center of the fullest bin (ties -> smaller
// lag); median and mean on the raw lags. Throws data_error when empty.
LagHistogram aggregate_lag_histogram(std::span<const double> lags_s);

// clamp(mode, 2.5, 10.0) rounded to the nearest 0.5 s.
WindowRecommendation recommend_window(const LagHistogram& hist);

// Per-trip stationarity report plus the fleet aggregate, as emitted by the
// CLI. Lags enter the histogram only for trips whose unit root is rejected.
struct TripStationarity {
    std::string trip_id;
    double adf_statistic = 0.0;
    bool reject = false;
    std::optional<double> h_cor_s;
};

struct FleetStationarity {
    std::vector<TripStationarity> trips;
    LagHistogram histogram;
    WindowRecommendation recommendation;
    std::size_t n_stationary = 0;
};

FleetStationarity analyze_fleet(const std::vector<UniformTrip>& trips);

}  // namespace steerid
