#include "steerid/report.hpp"

#include <charconv>
#include <fstream>

#include "steerid/errors.hpp"

namespace steerid::report {

namespace {
std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

nlohmann::json matrix_rows(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}
}  // namespace

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw io_error("write failed for " + path.string());
}

nlohmann::json stationarity_json(const FleetStationarity& fleet) {
    nlohmann::json trips = nlohmann::json::array();
    for (const auto& t : fleet.trips) {
        nlohmann::json row;
        row["trip_id"] = t.trip_id;
        row["adf_statistic"] = t.adf_statistic;
        row["reject"] = t.reject;
        if (t.h_cor_s)
            row["h_cor_s"] = *t.h_cor_s;
        else
            row["h_cor_s"] = nullptr;
        trips.push_back(std::move(row));
    }
    nlohmann::json j;
    j["trips"] = std::move(trips);
    j["fleet"] = {{"mode_s", fleet.histogram.mode_s},
                  {"median_s", fleet.histogram.median_s},
                  {"mean_s", fleet.histogram.mean_s},
                  {"recommended_window_s", fleet.recommendation.h_opt_s},
                  {"n_stationary", fleet.n_stationary},
                  {"n_trips", fleet.trips.size()}};
    return j;
}

nlohmann::json accuracy_curve_json(const AccuracyCurve& curve) {
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t k = 0; k < curve.accuracy.size(); ++k)
        points.push_back({{"k", k + 1}, {"acc", curve.accuracy[k]}});
    return {{"curve", std::move(points)},
            {"n_segments", curve.n_segments},
            {"n_classes", curve.n_classes}};
}

nlohmann::json confusion_json(const ConfusionMatrix& cm, const std::vector<std::string>& drivers) {
    return {{"drivers", drivers},
            {"counts", matrix_rows(cm.counts)},
            {"normalized", matrix_rows(cm.normalized)},
            {"total", cm.total}};
}

nlohmann::json sweep_json(const std::vector<SweepRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows)
        out.push_back({{"window_s", row.window_s}, {"mean_acc", row.mean_acc}, {"std_acc", row.std_acc}});
    return {{"sweep", std::move(out)}};
}

nlohmann::json train_metrics_json(const TrainMetrics& metrics) {
    nlohmann::json losses = nlohmann::json::array();
    for (const auto& [step, loss] : metrics.loss_curve) losses.push_back({{"step", step}, {"loss", loss}});
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& [step, acc] : metrics.eval_curve) evals.push_back({{"step", step}, {"acc", acc}});
    return {{"loss_curve", std::move(losses)},
            {"eval_curve", std::move(evals)},
            {"best_eval_acc", metrics.best_eval_acc},
            {"best_step", metrics.best_step},
            {"steps_run", metrics.steps_run}};
}

void write_accuracy_csv(const std::filesystem::path& path, const AccuracyCurve& curve) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "k,acc\n";
    for (std::size_t k = 0; k < curve.accuracy.size(); ++k)
        out << (k + 1) << ',' << fmt(curve.accuracy[k]) << "\n";
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         const std::vector<std::string>& drivers) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "true_driver";
    for (const auto& d : drivers) out << ',' << d;
    out << "\n";
    for (std::size_t r = 0; r < cm.counts.rows; ++r) {
        out << drivers[r];
        for (std::size_t c = 0; c < cm.counts.cols; ++c) out << ',' << fmt(cm.counts.at(r, c));
        out << "\n";
    }
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << "window_s,mean_acc,std_acc\n";
    for (const auto& row : rows)
        out << fmt(row.window_s) << ',' << fmt(row.mean_acc) << ',' << fmt(row.std_acc) << "\n";
}

void write_run_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                        const nlohmann::json& config) {
    nlohmann::json j;
    j["tool"] = "steerid";
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["config"] = config;
    write_json(out_dir / "run_manifest.json", j);
}

}  // namespace steerid::report
