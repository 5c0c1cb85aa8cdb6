// steerid: driver identification from steering-wheel time series.
// Subcommands cover the full pipeline: synthetic fleet generation, ingest,
// stationarity analysis, GRU training, evaluation, window sweep, and the
// decision-forest baseline. All results go to --out as JSON/CSV; progress
// goes to stderr.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "steerid/dft.hpp"
#include "steerid/errors.hpp"
#include "steerid/evaluation.hpp"
#include "steerid/gru.hpp"
#include "steerid/report.hpp"
#include "steerid/stationarity.hpp"
#include "steerid/synth.hpp"
#include "steerid/trip.hpp"

namespace fs = std::filesystem;
using namespace steerid;

namespace {

int log_level() {
    const char* env = std::getenv("STEERID_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet") return 0;
    if (v == "debug") return 2;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "steerid: " << msg << "\n";
}

fs::path manifest_of(const fs::path& data) {
    if (fs::is_directory(data)) return data / "manifest.csv";
    return data;
}

struct CommonOpts {
    std::string data;
    std::string out;
    std::uint64_t seed = 1;
    int jobs = 1;
    double train_min = 240.0;
    double test_min = 30.0;
    double segment_min = 15.0;
};

ProtocolConfig protocol_of(const CommonOpts& c) {
    ProtocolConfig cfg;
    cfg.train_min = c.train_min;
    cfg.test_min = c.test_min;
    cfg.segment_min = c.segment_min;
    return cfg;
}

void add_protocol_flags(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--train-min", c.train_min, "training minutes per driver");
    cmd->add_option("--test-min", c.test_min, "minimum testing minutes per driver");
    cmd->add_option("--segment-min", c.segment_min, "segment length in minutes");
}

std::size_t window_samples_of(double window_s) {
    const auto samples = static_cast<std::size_t>(std::llround(window_s * 10.0));
    if (std::abs(static_cast<double>(samples) / 10.0 - window_s) > 1e-9 || window_s < 2.5 - 1e-9 ||
        window_s > 10.0 + 1e-9)
        throw config_error("--window-s must be a multiple of 0.1 in [2.5, 10]");
    return samples;
}

Activation activation_of(const std::string& name) {
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    throw config_error("--candidate-activation must be sigmoid or tanh");
}

nlohmann::json profiles_json(const std::vector<DriverProfile>& profiles) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : profiles)
        arr.push_back({{"driver_id", p.driver_id},
                       {"phi1", p.phi1},
                       {"phi2", p.phi2},
                       {"innovation_std", p.innovation_std},
                       {"resonance_hz", p.resonance_hz},
                       {"velocity_base", p.velocity_base},
                       {"velocity_coupling", p.velocity_coupling}});
    return arr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driver identification via the steering wheel"};
    app.require_subcommand(1);

    CommonOpts common;

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic driver fleet");
    SynthConfig synth_cfg;
    std::string preset = "separable";
    synth_cmd->add_option("--out", common.out, "output directory")->required();
    synth_cmd->add_option("--seed", common.seed, "rng seed");
    synth_cmd->add_option("--drivers", synth_cfg.n_drivers, "number of drivers");
    synth_cmd->add_option("--trips", synth_cfg.trips_per_driver, "trips per driver");
    synth_cmd->add_option("--trip-min-s", synth_cfg.trip_min_s, "shortest trip, seconds");
    synth_cmd->add_option("--trip-max-s", synth_cfg.trip_max_s, "longest trip, seconds");
    synth_cmd->add_option("--jitter-ms", synth_cfg.jitter_ms, "timestamp jitter");
    synth_cmd->add_option("--missing-rate", synth_cfg.missing_rate, "missing-cell rate");
    synth_cmd->add_option("--gps-outage-rate", synth_cfg.gps_outage_rate, "gps outage row fraction");
    synth_cmd->add_option("--preset", preset, "separable | hard");

    // ---- ingest ----
    auto* ingest_cmd = app.add_subcommand("ingest", "clean and resample a fleet to 10 Hz");
    ingest_cmd->add_option("--data", common.data, "raw fleet directory or manifest")->required();
    ingest_cmd->add_option("--out", common.out, "output directory")->required();

    // ---- stationarity ----
    auto* stat_cmd = app.add_subcommand("stationarity", "ADF tests, correlated lags, window choice");
    stat_cmd->add_option("--data", common.data, "fleet directory or manifest")->required();
    stat_cmd->add_option("--out", common.out, "output directory")->required();

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "train the GRU identifier");
    double window_s = 3.5;
    TrainOptions train_opts;
    std::string candidate = "sigmoid";
    train_cmd->add_option("--data", common.data, "fleet directory or manifest")->required();
    train_cmd->add_option("--out", common.out, "output directory")->required();
    train_cmd->add_option("--seed", common.seed, "rng seed")->required();
    train_cmd->add_option("--window-s", window_s, "window length in seconds");
    train_cmd->add_option("--hidden", train_opts.hyper.hidden, "GRU size");
    train_cmd->add_option("--lr", train_opts.hyper.learning_rate, "learning rate");
    train_cmd->add_option("--keep-prob", train_opts.hyper.keep_prob, "dropout keep probability");
    train_cmd->add_option("--l2", train_opts.hyper.l2_lambda, "L2 weight penalty");
    train_cmd->add_option("--candidate-activation", candidate, "sigmoid | tanh");
    train_cmd->add_option("--steps", train_opts.steps, "training step budget");
    train_cmd->add_option("--batch", train_opts.batch_size, "batch size");
    train_cmd->add_option("--eval-every", train_opts.eval_every, "steps between evaluations");
    train_cmd->add_option("--patience", train_opts.patience, "evaluations without improvement");
    bool no_early_stop = false;
    train_cmd->add_flag("--no-early-stop", no_early_stop, "run the full step budget");
    std::string cache_path;
    train_cmd->add_option("--feature-cache", cache_path, "dump training features to this file");
    add_protocol_flags(train_cmd, common);

    // ---- evaluate ----
    auto* eval_cmd = app.add_subcommand("evaluate", "accuracy curve and confusion matrix");
    std::string model_path;
    eval_cmd->add_option("--data", common.data, "fleet directory or manifest")->required();
    eval_cmd->add_option("--model", model_path, "checkpoint file")->required();
    eval_cmd->add_option("--out", common.out, "output directory")->required();
    eval_cmd->add_option("--seed", common.seed, "split seed (must match training)");
    add_protocol_flags(eval_cmd, common);

    // ---- sweep ----
    auto* sweep_cmd = app.add_subcommand("sweep", "window-size sweep with full retrains");
    SweepOptions sweep_opts;
    std::vector<double> windows;
    std::string sweep_candidate = "sigmoid";
    sweep_cmd->add_option("--data", common.data, "fleet directory or manifest")->required();
    sweep_cmd->add_option("--out", common.out, "output directory")->required();
    sweep_cmd->add_option("--seed", common.seed, "rng seed")->required();
    sweep_cmd->add_option("--windows", windows, "window lengths in seconds (default 2.5..10 by 0.5)");
    sweep_cmd->add_option("--reps", sweep_opts.repetitions, "repetitions per window");
    sweep_cmd->add_option("--subset", sweep_opts.subset_size, "drivers per repetition (0 = all)");
    sweep_cmd->add_option("--hidden", sweep_opts.train.hyper.hidden, "GRU size");
    sweep_cmd->add_option("--lr", sweep_opts.train.hyper.learning_rate, "learning rate");
    sweep_cmd->add_option("--keep-prob", sweep_opts.train.hyper.keep_prob, "dropout keep probability");
    sweep_cmd->add_option("--l2", sweep_opts.train.hyper.l2_lambda, "L2 weight penalty");
    sweep_cmd->add_option("--candidate-activation", sweep_candidate, "sigmoid | tanh");
    sweep_cmd->add_option("--steps", sweep_opts.train.steps, "training steps per cell");
    sweep_cmd->add_option("--batch", sweep_opts.train.batch_size, "batch size");
    sweep_cmd->add_option("--eval-every", sweep_opts.train.eval_every, "steps between evaluations");
    sweep_cmd->add_option("--patience", sweep_opts.train.patience, "early-stop patience");
    add_protocol_flags(sweep_cmd, common);

    // ---- baseline ----
    auto* base_cmd = app.add_subcommand("baseline", "decision-forest baseline on summary features");
    ForestOptions forest_opts;
    double base_window_s = 3.5;
    base_cmd->add_option("--data", common.data, "fleet directory or manifest")->required();
    base_cmd->add_option("--out", common.out, "output directory")->required();
    base_cmd->add_option("--seed", common.seed, "rng seed")->required();
    base_cmd->add_option("--window-s", base_window_s, "window length in seconds");
    base_cmd->add_option("--trees", forest_opts.n_trees, "number of trees");
    base_cmd->add_option("--max-depth", forest_opts.max_depth, "tree depth limit");
    add_protocol_flags(base_cmd, common);

    for (auto* cmd : {synth_cmd, ingest_cmd, stat_cmd, train_cmd, eval_cmd, sweep_cmd, base_cmd})
        cmd->add_option("--jobs", common.jobs, "worker threads (default 1, bit-reproducible)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    kernels::set_max_threads(common.jobs);

    try {
        const fs::path out_dir(common.out);
        if (!common.out.empty()) fs::create_directories(out_dir);

        if (app.got_subcommand(synth_cmd)) {
            synth_cfg.seed = common.seed;
            synth_cfg.preset = preset == "hard" ? FleetPreset::Hard : FleetPreset::Separable;
            if (preset != "hard" && preset != "separable")
                throw config_error("--preset must be separable or hard");
            const auto fleet = gen_fleet(synth_cfg, out_dir);
            report::write_json(out_dir / "profiles.json", profiles_json(fleet.profiles));
            report::write_run_manifest(out_dir, "synth",
                                       {{"seed", common.seed},
                                        {"drivers", synth_cfg.n_drivers},
                                        {"trips_per_driver", synth_cfg.trips_per_driver},
                                        {"trip_min_s", synth_cfg.trip_min_s},
                                        {"trip_max_s", synth_cfg.trip_max_s},
                                        {"jitter_ms", synth_cfg.jitter_ms},
                                        {"missing_rate", synth_cfg.missing_rate},
                                        {"gps_outage_rate", synth_cfg.gps_outage_rate},
                                        {"preset", preset}});
            info("wrote " + std::to_string(fleet.trips_written) + " trips to " + common.out);
        } else if (app.got_subcommand(ingest_cmd)) {
            IngestStats stats;
            const auto trips = ingest_fleet(manifest_of(common.data), &stats);
            std::vector<ManifestEntry> manifest;
            for (const auto& trip : trips) {
                std::string name = trip.trip_id;
                for (auto& ch : name)
                    if (ch == '#') ch = '_';
                name += "_u.csv";
                write_trip_csv(out_dir / name, trip);
                manifest.push_back({trip.driver_id, name});
            }
            write_manifest(out_dir / "manifest.csv", manifest);
            report::write_json(out_dir / "ingest_report.json",
                               {{"files", stats.files},
                                {"chunks", stats.chunks},
                                {"kept", stats.kept},
                                {"dismissed", stats.dismissed}});
            report::write_run_manifest(out_dir, "ingest", {{"data", common.data}});
            info("kept " + std::to_string(stats.kept) + " trips, dismissed " +
                 std::to_string(stats.dismissed));
        } else if (app.got_subcommand(stat_cmd)) {
            const auto trips = ingest_fleet(manifest_of(common.data));
            const auto fleet = analyze_fleet(trips);
            report::write_json(out_dir / "stationarity.json", report::stationarity_json(fleet));
            report::write_run_manifest(out_dir, "stationarity", {{"data", common.data}});
            info("recommended window " + std::to_string(fleet.recommendation.h_opt_s) + " s");
        } else if (app.got_subcommand(train_cmd)) {
            train_opts.hyper.candidate = activation_of(candidate);
            train_opts.early_stop = !no_early_stop;
            train_opts.seed = common.seed;
            const auto w = window_samples_of(window_s);

            const auto trips = ingest_fleet(manifest_of(common.data));
            const auto split = make_split(trips, common.seed, protocol_of(common));
            const auto train_pool = build_pool(split.drivers, split.train, w);
            const auto test_pool = build_pool(split.drivers, split.test, w);
            info("training on " + std::to_string(split.drivers.size()) + " drivers, " +
                 std::to_string(split.train_per_driver) + "/" + std::to_string(split.test_per_driver) +
                 " segments per driver");

            if (!cache_path.empty()) {
                std::vector<SegmentMatrix> flat;
                for (const auto& cls : train_pool.per_class)
                    flat.insert(flat.end(), cls.begin(), cls.end());
                write_feature_cache(cache_path, flat);
            }

            const auto model = train_model(train_pool, test_pool, train_opts);
            save_checkpoint(model.params, nullptr, out_dir / "checkpoint.bin");
            auto metrics = report::train_metrics_json(model.metrics);
            metrics["drivers"] = split.drivers;
            metrics["window_s"] = window_s;
            metrics["train_segments_per_driver"] = split.train_per_driver;
            metrics["test_segments_per_driver"] = split.test_per_driver;
            report::write_json(out_dir / "metrics.json", metrics);
            report::write_run_manifest(out_dir, "train",
                                       {{"data", common.data},
                                        {"seed", common.seed},
                                        {"window_s", window_s},
                                        {"hidden", train_opts.hyper.hidden},
                                        {"lr", train_opts.hyper.learning_rate},
                                        {"keep_prob", train_opts.hyper.keep_prob},
                                        {"l2", train_opts.hyper.l2_lambda},
                                        {"candidate_activation", candidate},
                                        {"steps", train_opts.steps},
                                        {"batch", train_opts.batch_size},
                                        {"train_min", common.train_min},
                                        {"test_min", common.test_min},
                                        {"segment_min", common.segment_min}});
            info("best eval accuracy " + std::to_string(model.metrics.best_eval_acc));
        } else if (app.got_subcommand(eval_cmd)) {
            const auto ck = load_checkpoint(model_path);
            const auto w = ck.params.input_dim - 1;  // feature dim is w+1

            const auto trips = ingest_fleet(manifest_of(common.data));
            const auto split = make_split(trips, common.seed, protocol_of(common));
            if (split.drivers.size() != ck.params.n_classes)
                throw config_error("checkpoint has " + std::to_string(ck.params.n_classes) +
                                   " classes, fleet has " + std::to_string(split.drivers.size()));
            const auto test_pool = build_pool(split.drivers, split.test, w);

            const auto curve = accuracy_over_time(ck.params, test_pool);
            const auto cm = confusion(ck.params, test_pool);
            report::write_json(out_dir / "accuracy_curve.json", report::accuracy_curve_json(curve));
            report::write_accuracy_csv(out_dir / "accuracy_curve.csv", curve);
            report::write_json(out_dir / "confusion.json", report::confusion_json(cm, split.drivers));
            report::write_confusion_csv(out_dir / "confusion.csv", cm, split.drivers);
            report::write_run_manifest(out_dir, "evaluate",
                                       {{"data", common.data},
                                        {"model", model_path},
                                        {"seed", common.seed},
                                        {"train_min", common.train_min},
                                        {"test_min", common.test_min},
                                        {"segment_min", common.segment_min}});
            info("final-vote accuracy " + std::to_string(curve.accuracy.back()));
        } else if (app.got_subcommand(sweep_cmd)) {
            sweep_opts.train.hyper.candidate = activation_of(sweep_candidate);
            sweep_opts.windows_s = windows.empty() ? default_sweep_windows() : windows;
            sweep_opts.seed = common.seed;
            sweep_opts.train.seed = common.seed;
            sweep_opts.protocol = protocol_of(common);

            const auto trips = ingest_fleet(manifest_of(common.data));
            const auto rows = window_sweep(trips, sweep_opts);
            report::write_json(out_dir / "sweep.json", report::sweep_json(rows));
            report::write_sweep_csv(out_dir / "sweep.csv", rows);
            report::write_run_manifest(out_dir, "sweep",
                                       {{"data", common.data},
                                        {"seed", common.seed},
                                        {"windows", sweep_opts.windows_s},
                                        {"reps", sweep_opts.repetitions},
                                        {"subset", sweep_opts.subset_size},
                                        {"steps", sweep_opts.train.steps},
                                        {"hidden", sweep_opts.train.hyper.hidden}});
            info("sweep finished: " + std::to_string(rows.size()) + " windows");
        } else if (app.got_subcommand(base_cmd)) {
            forest_opts.seed = common.seed;
            const auto w = window_samples_of(base_window_s);
            const auto trips = ingest_fleet(manifest_of(common.data));
            const auto split = make_split(trips, common.seed, protocol_of(common));
            const auto result = run_baseline(split, w, forest_opts);
            save_forest(result.forest, out_dir / "forest.bin");
            nlohmann::json j;
            j["final_acc"] = result.final_acc;
            j["confusion"] = report::confusion_json(result.confusion, split.drivers);
            report::write_json(out_dir / "baseline_metrics.json", j);
            report::write_run_manifest(out_dir, "baseline",
                                       {{"data", common.data},
                                        {"seed", common.seed},
                                        {"window_s", base_window_s},
                                        {"trees", forest_opts.n_trees},
                                        {"max_depth", forest_opts.max_depth},
                                        {"train_min", common.train_min},
                                        {"test_min", common.test_min},
                                        {"segment_min", common.segment_min}});
            info("baseline final accuracy " + std::to_string(result.final_acc));
        }
    } catch (const divergence_error& e) {
        std::cerr << "error: divergence: " << e.what() << "\n";
        return 3;
    } catch (const config_error& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: data: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
