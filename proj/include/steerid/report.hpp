#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "steerid/evaluation.hpp"
#include "steerid/stationarity.hpp"

namespace steerid::report {

inline constexpr const char* kVersion = "0.1.0";

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

nlohmann::json stationarity_json(const FleetStationarity& fleet);
nlohmann::json accuracy_curve_json(const AccuracyCurve& curve);
nlohmann::json confusion_json(const ConfusionMatrix& cm, const std::vector<std::string>& drivers);
nlohmann::json sweep_json(const std::vector<SweepRow>& rows);
nlohmann::json train_metrics_json(const TrainMetrics& metrics);

void write_accuracy_csv(const std::filesystem::path& path, const AccuracyCurve& curve);
void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm,
                         const std::vector<std::string>& drivers);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// config + seed + version, enough to reproduce the artifacts next to it
void write_run_manifest(const std::filesystem::path& out_dir, const std::string& subcommand,
                        const nlohmann::json& config);

}  // namespace steerid::report
