#include "commands.hpp"

#include <filesystem>
#include <iostream>
#include <utility>
#include <vector>

#include "ft/baselines.hpp"
#include "ft/error.hpp"
#include "ft/eval.hpp"
#include "ft/pipeline.hpp"
#include "ft/plots.hpp"
#include "ft/synth.hpp"
#include "ft/train.hpp"

namespace fs = std::filesystem;

namespace ftcli {

namespace {

// Output directories are created one level deep; a missing parent is an
// environment problem, not something to paper over.
fs::path prepare_out_dir(const ft::RunConfig& cfg) {
    fs::path out = cfg.str("out_dir");
    if (out.empty()) throw ft::ConfigError("out_dir must not be empty");
    fs::path parent = out.parent_path();
    if (!parent.empty() && !fs::exists(parent))
        throw ft::DataError("parent of output directory does not exist: " + parent.string());
    fs::create_directories(out);
    return out;
}

struct LoadedScene {
    ft::Scene scene;
    std::vector<int> band_indices;
};

// Loads a scene directory and restricts the stack to the configured channel
// subset.
LoadedScene load_scene_subset(const ft::RunConfig& cfg, const std::string& dir_key) {
    const std::string dir = cfg.str(dir_key);
    if (dir.empty()) throw ft::ConfigError("config key '" + dir_key + "' must name a scene directory");
    ft::Scene scene = ft::load_scene(dir);
    std::vector<int> idx = ft::channel_subset_indices(scene.stack, cfg.str("channels"));
    if (static_cast<int>(idx.size()) != scene.stack.bands())
        scene.stack = ft::subset_channels(scene.stack, idx);
    return {std::move(scene), std::move(idx)};
}

ft::Checkpoint load_required_checkpoint(const ft::RunConfig& cfg, const std::string& key) {
    const std::string path = cfg.str(key);
    if (path.empty()) throw ft::ConfigError("config key '" + key + "' must name a checkpoint");
    return ft::load_checkpoint(path);
}

ft::KNNModel::Weighting knn_weighting(const ft::RunConfig& cfg) {
    const std::string w = cfg.str("knn_weighting");
    if (w == "inverse_distance") return ft::KNNModel::Weighting::inverse_distance;
    if (w == "uniform") return ft::KNNModel::Weighting::uniform;
    throw ft::ConfigError("knn_weighting must be inverse_distance or uniform, got '" + w + "'");
}

// Test-plot report for a prediction map.
ft::EvalReport map_report(const ft::HeightRaster& map, const ft::PlotTable& test_plots,
                          std::string method, std::string scenario = "full") {
    return ft::evaluate_plots([&map](const ft::PlotRecord& p) { return ft::map_lookup(map, p); },
                              test_plots, std::move(method), std::move(scenario));
}

ft::EvalReport knn_report(const ft::EOStack& stack, const ft::PlotTable& train_plots,
                          const ft::PlotTable& test_plots, const ft::RunConfig& cfg,
                          std::string scenario, ft::KNNModel* fitted = nullptr) {
    std::vector<ft::FeatureVector> train = ft::extract_plot_features(stack, train_plots);
    ft::KNNModel model = ft::knn_fit(train, static_cast<int>(cfg.integer("knn_k")), knn_weighting(cfg));
    model.reference_path = cfg.str("target_dir") + "/plots.csv";
    ft::EvalReport report = ft::evaluate_plots(
        [&](const ft::PlotRecord& p) {
            return ft::knn_predict(model, ft::extract_plot_features(stack, p).features);
        },
        test_plots, "knn", std::move(scenario));
    if (fitted) *fitted = std::move(model);
    return report;
}

} // namespace

void cmd_synth(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    const ft::SynthConfig sc = ft::synth_config(cfg);
    auto [source, target] = ft::gen_site_pair(sc);
    ft::save_scene(source, sc.source, sc.sensor, out / "source");
    ft::save_scene(target, sc.target, sc.sensor, out / "target");
    cfg.write_resolved(out / "config.resolved.json");
    std::cout << "synth: wrote " << (out / "source").string() << " and " << (out / "target").string()
              << "\n";
}

void cmd_pretrain(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    LoadedScene src = load_scene_subset(cfg, "source_dir");

    ft::PatchSet data =
        ft::build_dense_patchset(src.scene.stack, src.scene.truth, src.scene.mask, ft::dense_pipeline_config(cfg));
    const ft::ModelConfig mc = ft::model_config(cfg, src.scene.stack.bands());
    ft::TrainResult result = ft::pretrain(mc, data, ft::optimizer_config(cfg));

    ft::save_checkpoint(result.checkpoint, out / "checkpoint");
    ft::write_training_log(result.log, out / "training_log.csv");
    cfg.write_resolved(out / "config.resolved.json");
    std::cout << "pretrain: best val loss " << result.checkpoint.val_loss << " at epoch "
              << result.checkpoint.epoch << ", checkpoint " << (out / "checkpoint").string() << ".ckpt\n";
}

void cmd_finetune(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    const ft::Checkpoint pretrained = load_required_checkpoint(cfg, "checkpoint");
    LoadedScene tgt = load_scene_subset(cfg, "target_dir");
    if (tgt.scene.plots.empty()) throw ft::DataError("target scene has no plots to fine-tune on");

    const ft::PlotSplit split =
        ft::split_plots_by_attribute(tgt.scene.plots, ft::choose_split_attribute(tgt.scene.plots));
    ft::PatchSet data =
        ft::build_sparse_patchset(tgt.scene.stack, split.train, tgt.scene.mask, ft::sparse_pipeline_config(cfg));
    ft::TrainResult result = ft::finetune(pretrained, data, ft::optimizer_config(cfg));

    ft::save_checkpoint(result.checkpoint, out / "checkpoint_finetuned");
    ft::write_training_log(result.log, out / "training_log.csv");
    cfg.write_resolved(out / "config.resolved.json");
    std::cout << "finetune: best val loss " << result.checkpoint.val_loss << " at epoch "
              << result.checkpoint.epoch << ", checkpoint " << (out / "checkpoint_finetuned").string()
              << ".ckpt\n";
}

void cmd_predict(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    const ft::Checkpoint ckpt = load_required_checkpoint(cfg, "checkpoint");
    const std::string scene_key = cfg.str("scene_dir").empty() ? "target_dir" : "scene_dir";
    LoadedScene in = load_scene_subset(cfg, scene_key);

    ft::HeightRaster map = ft::predict_map(ckpt, in.scene.stack, in.scene.mask, ft::predict_options(cfg));
    ft::save_raster(map, out / "height_map");
    cfg.write_resolved(out / "config.resolved.json");
    std::cout << "predict: wrote " << (out / "height_map").string() << ".bin\n";
}

void cmd_evaluate(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    const ft::Checkpoint source_ckpt = load_required_checkpoint(cfg, "checkpoint");
    LoadedScene tgt = load_scene_subset(cfg, "target_dir");
    if (tgt.scene.plots.empty()) throw ft::DataError("target scene has no plots to evaluate against");

    const ft::PlotSplit split =
        ft::split_plots_by_attribute(tgt.scene.plots, ft::choose_split_attribute(tgt.scene.plots));
    const ft::PredictOptions opts = ft::predict_options(cfg);

    std::vector<ft::EvalReport> reports;
    {
        ft::HeightRaster map = ft::predict_map(source_ckpt, tgt.scene.stack, tgt.scene.mask, opts);
        reports.push_back(map_report(map, split.test, "seunet_source"));
    }
    if (!cfg.str("finetuned_checkpoint").empty()) {
        const ft::Checkpoint ft_ckpt = load_required_checkpoint(cfg, "finetuned_checkpoint");
        ft::HeightRaster map = ft::predict_map(ft_ckpt, tgt.scene.stack, tgt.scene.mask, opts);
        reports.push_back(map_report(map, split.test, "seunet_finetuned"));
    }

    ft::emit_report(reports, out);
    cfg.write_resolved(out / "config.resolved.json");
    for (const auto& r : reports)
        std::cout << "evaluate: " << r.method << " rmse " << r.metrics.rmse << " bias " << r.metrics.bias
                  << " (n=" << r.metrics.n << ")\n";
}

void cmd_baseline(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    LoadedScene tgt = load_scene_subset(cfg, "target_dir");
    if (tgt.scene.plots.empty()) throw ft::DataError("target scene has no plots for the baselines");

    const ft::PlotSplit split =
        ft::split_plots_by_attribute(tgt.scene.plots, ft::choose_split_attribute(tgt.scene.plots));
    std::vector<ft::FeatureVector> train = ft::extract_plot_features(tgt.scene.stack, split.train);

    const ft::MLRModel mlr = ft::mlr_fit(train);
    std::vector<ft::EvalReport> reports;
    reports.push_back(ft::evaluate_plots(
        [&](const ft::PlotRecord& p) {
            return ft::mlr_predict(mlr, ft::extract_plot_features(tgt.scene.stack, p).features);
        },
        split.test, "mlr"));

    ft::KNNModel knn;
    reports.push_back(knn_report(tgt.scene.stack, split.train, split.test, cfg, "full", &knn));

    ft::save_mlr(mlr, out / "mlr.json");
    ft::save_knn(knn, out / "knn.json");
    ft::emit_report(reports, out);
    cfg.write_resolved(out / "config.resolved.json");
    for (const auto& r : reports)
        std::cout << "baseline: " << r.method << " rmse " << r.metrics.rmse << " (n=" << r.metrics.n
                  << ")\n";
}

void cmd_experiment(const ft::RunConfig& cfg) {
    const fs::path out = prepare_out_dir(cfg);
    const ft::Checkpoint pretrained = load_required_checkpoint(cfg, "checkpoint");
    LoadedScene tgt = load_scene_subset(cfg, "target_dir");
    if (tgt.scene.plots.empty()) throw ft::DataError("target scene has no plots for the experiment");

    const ft::PlotSplit split =
        ft::split_plots_by_attribute(tgt.scene.plots, ft::choose_split_attribute(tgt.scene.plots));
    const ft::PredictOptions opts = ft::predict_options(cfg);
    const ft::OptimizerConfig ocfg = ft::optimizer_config(cfg);
    const ft::PipelineConfig pcfg = ft::sparse_pipeline_config(cfg);

    ft::ScenarioSpec spec;
    spec.fraction = cfg.number("scenario_fraction");
    spec.threshold_low_m = cfg.number("censor_low_m");
    spec.threshold_high_m = cfg.number("censor_high_m");
    spec.seed = cfg.seed();

    std::vector<ft::EvalReport> reports;
    for (const std::string name : {"full", "scarce_5pct", "censor_below_10m", "censor_above_25m"}) {
        spec.name = name;
        const ft::PlotTable scenario_train = ft::build_scenario(split.train, spec);

        reports.push_back(knn_report(tgt.scene.stack, scenario_train, split.test, cfg, name));

        ft::PatchSet data = ft::build_sparse_patchset(tgt.scene.stack, scenario_train, tgt.scene.mask, pcfg);
        ft::TrainResult tuned = ft::finetune(pretrained, data, ocfg);
        ft::HeightRaster map = ft::predict_map(tuned.checkpoint, tgt.scene.stack, tgt.scene.mask, opts);
        reports.push_back(map_report(map, split.test, "seunet_finetuned", name));
    }

    ft::emit_report(reports, out);
    cfg.write_resolved(out / "config.resolved.json");
    for (const auto& r : reports)
        std::cout << "experiment: " << r.method << " / " << r.scenario << " rmse " << r.metrics.rmse
                  << " bias " << r.metrics.bias << "\n";
}

} // namespace ftcli
