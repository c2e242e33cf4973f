#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ft/checkpoint.hpp"
#include "ft/plots.hpp"
#include "ft/raster.hpp"

namespace ft {

struct PlotPrediction {
    std::string plot_id;
    double reference_m = 0.0;  // y_i
    double predicted_m = 0.0;  // y_hat_i
};

/// Accuracy block: RMSE = sqrt(sum (y-yhat)^2 / n); rRMSE = RMSE/mean(y)*100;
/// bias = sum(y-yhat)/n (negative = overestimation); R2 = 1 - SSres/SStot,
/// never clamped. rRMSE and R2 are absent when their denominators degenerate.
struct Metrics {
    double rmse = 0.0;
    double bias = 0.0;
    std::optional<double> rrmse_pct;
    std::optional<double> r2;
    std::size_t n = 0;
};

/// Requires n >= 2.
Metrics compute_metrics(const std::vector<PlotPrediction>& records);

struct EvalReport {
    std::string method;
    std::string scenario = "full";
    Metrics metrics;
    std::vector<PlotPrediction> records;
};

EvalReport make_report(std::string method, std::string scenario, std::vector<PlotPrediction> records);

/// Runs the per-plot predictor over the test plots and assembles a report.
EvalReport evaluate_plots(const std::function<double(const PlotRecord&)>& predictor,
                          const PlotTable& test_plots, std::string method,
                          std::string scenario = "full");

/// Map value at the pixel containing the plot center. Throws DataError for
/// plots outside the map or on nodata pixels.
double map_lookup(const HeightRaster& map, const PlotRecord& plot);

struct PredictOptions {
    int window = 256;
    int margin = 64;
};

/// Full-scene prediction: windows of `window` px placed so that each
/// (window - 2*margin) px core block is covered once (edge blocks keep their
/// outer margins; window starts are clamped to the scene). Eval-mode forward
/// with the checkpoint's normalization; non-forest pixels become nodata.
HeightRaster predict_map(const Checkpoint& ckpt, const EOStack& stack, const ForestMask& mask,
                         const PredictOptions& opts = {});

/// Reference-data stress scenarios applied to the TRAINING plots only.
struct ScenarioSpec {
    std::string name = "full";  // full | scarce_5pct | censor_below_10m | censor_above_25m
    double fraction = 0.05;     // scarce subsample fraction
    double threshold_low_m = 10.0;
    double threshold_high_m = 25.0;
    std::uint64_t seed = 0;
};

/// scarce_5pct keeps a seeded uniform subsample of max(1, floor(fraction*n))
/// plots; censor_below_10m keeps heights >= threshold; censor_above_25m keeps
/// heights <= threshold. Throws DataError when the result is empty.
PlotTable build_scenario(const PlotTable& train_plots, const ScenarioSpec& spec);

/// Writes metrics.csv (method,scenario,rmse,rrmse_pct,bias,r2,n; blank fields
/// for undefined metrics) and one scatter_<method>[_<scenario>].csv
/// (plot_id,reference_m,predicted_m) per report.
void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& out_dir);

/// Reads a scatter CSV back into records.
std::vector<PlotPrediction> load_scatter(const std::filesystem::path& path);

} // namespace ft
