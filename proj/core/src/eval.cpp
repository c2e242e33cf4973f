#include "ft/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "ft/error.hpp"
#include "ft/rng.hpp"
#include "ft/seunet.hpp"
#include "ft/train.hpp"

namespace ft {

namespace {

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

Metrics compute_metrics(const std::vector<PlotPrediction>& records) {
    if (records.size() < 2) throw DataError("compute_metrics: need at least 2 records");
    const double n = static_cast<double>(records.size());

    double ss_err = 0.0, err_sum = 0.0, y_sum = 0.0;
    for (const auto& r : records) {
        const double e = r.reference_m - r.predicted_m;
        ss_err += e * e;
        err_sum += e;
        y_sum += r.reference_m;
    }
    const double y_mean = y_sum / n;
    double ss_tot = 0.0;
    for (const auto& r : records) {
        const double d = r.reference_m - y_mean;
        ss_tot += d * d;
    }

    Metrics m;
    m.n = records.size();
    m.rmse = std::sqrt(ss_err / n);
    m.bias = err_sum / n;
    if (y_mean != 0.0) m.rrmse_pct = m.rmse / y_mean * 100.0;
    if (ss_tot > 0.0) m.r2 = 1.0 - ss_err / ss_tot;
    return m;
}

EvalReport make_report(std::string method, std::string scenario, std::vector<PlotPrediction> records) {
    EvalReport report;
    report.method = std::move(method);
    report.scenario = std::move(scenario);
    report.metrics = compute_metrics(records);
    report.records = std::move(records);
    return report;
}

EvalReport evaluate_plots(const std::function<double(const PlotRecord&)>& predictor,
                          const PlotTable& test_plots, std::string method, std::string scenario) {
    std::vector<PlotPrediction> records;
    records.reserve(test_plots.size());
    for (const auto& plot : test_plots)
        records.push_back({plot.plot_id, plot.height_m, predictor(plot)});
    return make_report(std::move(method), std::move(scenario), std::move(records));
}

double map_lookup(const HeightRaster& map, const PlotRecord& plot) {
    const auto px = map.grid.world_to_pixel(plot.x, plot.y);
    if (!px) throw DataError("plot '" + plot.plot_id + "' lies outside the predicted map");
    const float v = map.at(px->row, px->col);
    if (!std::isfinite(v))
        throw DataError("plot '" + plot.plot_id + "' falls on a nodata map pixel");
    return v;
}

HeightRaster predict_map(const Checkpoint& ckpt, const EOStack& stack, const ForestMask& mask,
                         const PredictOptions& opts) {
    stack.validate();
    mask.validate();
    if (!stack.grid.same_extent(mask.grid))
        throw DataError("predict_map: stack and mask grids differ");
    if (stack.bands() != ckpt.config.in_channels)
        throw DataError("predict_map: checkpoint expects " + std::to_string(ckpt.config.in_channels) +
                        " channels, stack has " + std::to_string(stack.bands()));
    if (ckpt.normalization.mean.size() != static_cast<std::size_t>(stack.bands()))
        throw DataError("predict_map: checkpoint normalization does not match stack bands");
    const int H = stack.grid.height, W = stack.grid.width;
    const int win = opts.window, margin = opts.margin;
    const int core = win - 2 * margin;
    if (margin < 0 || core < 1) throw ConfigError("predict_map: margin too large for window");
    if (win % (1 << ckpt.config.depth) != 0)
        throw ConfigError("predict_map: window not divisible by 2^depth");
    if (H < win || W < win) throw DataError("predict_map: scene smaller than the prediction window");

    SeUNet model(ckpt.config);
    restore_model(ckpt, model);

    HeightRaster out;
    out.grid = stack.grid;
    out.grid.bands = 1;
    out.values.assign(out.grid.pixel_count(), std::numeric_limits<float>::quiet_NaN());

    const int C = stack.bands();
    const int blocks_y = (H + core - 1) / core;
    const int blocks_x = (W + core - 1) / core;
    Tensor input(C, win, win);
    for (int by = 0; by < blocks_y; ++by) {
        const int row_lo = by * core;
        const int row_hi = std::min(H, row_lo + core);
        const int ws_r = std::clamp(row_lo - margin, 0, H - win);
        for (int bx = 0; bx < blocks_x; ++bx) {
            const int col_lo = bx * core;
            const int col_hi = std::min(W, col_lo + core);
            const int ws_c = std::clamp(col_lo - margin, 0, W - win);

            for (int c = 0; c < C; ++c) {
                const double mean = ckpt.normalization.mean[c];
                const double sd = ckpt.normalization.stddev[c];
                double* ip = input.chan(c);
                for (int y = 0; y < win; ++y) {
                    const int gy = ws_r + y;
                    for (int x = 0; x < win; ++x) {
                        const int gx = ws_c + x;
                        const float v = stack.at(c, gy, gx);
                        ip[static_cast<std::size_t>(y) * win + x] =
                            mask.at(gy, gx) && std::isfinite(v) ? (v - mean) / sd : 0.0;
                    }
                }
            }
            const Tensor pred = model.forward(input, Mode::eval);
            for (int gy = row_lo; gy < row_hi; ++gy)
                for (int gx = col_lo; gx < col_hi; ++gx)
                    out.at(gy, gx) = static_cast<float>(pred.at(0, gy - ws_r, gx - ws_c));
        }
    }

    for (int gy = 0; gy < H; ++gy)
        for (int gx = 0; gx < W; ++gx)
            if (!mask.at(gy, gx)) out.at(gy, gx) = std::numeric_limits<float>::quiet_NaN();
    return out;
}

PlotTable build_scenario(const PlotTable& train_plots, const ScenarioSpec& spec) {
    if (train_plots.empty()) throw DataError("build_scenario: empty training plots");
    PlotTable out;
    if (spec.name == "full") {
        out = train_plots;
    } else if (spec.name == "scarce_5pct") {
        if (spec.fraction <= 0.0 || spec.fraction > 1.0)
            throw ConfigError("build_scenario: fraction must lie in (0,1]");
        const auto n = train_plots.size();
        const auto keep = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(spec.fraction * static_cast<double>(n))));
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        Rng rng(derive_seed(spec.seed, "scenario_scarce"));
        rng.shuffle(idx);
        idx.resize(keep);
        std::sort(idx.begin(), idx.end());  // preserve the input plot order
        for (auto i : idx) out.push_back(train_plots[i]);
    } else if (spec.name == "censor_below_10m") {
        for (const auto& p : train_plots)
            if (p.height_m >= spec.threshold_low_m) out.push_back(p);
    } else if (spec.name == "censor_above_25m") {
        for (const auto& p : train_plots)
            if (p.height_m <= spec.threshold_high_m) out.push_back(p);
    } else {
        throw ConfigError("build_scenario: unknown scenario '" + spec.name + "'");
    }
    if (out.empty()) throw DataError("build_scenario: scenario '" + spec.name + "' empties the training set");
    return out;
}

namespace {

std::string scatter_filename(const EvalReport& r) {
    std::string name = "scatter_" + r.method;
    if (r.scenario != "full" && !r.scenario.empty()) name += "_" + r.scenario;
    return name + ".csv";
}

} // namespace

void emit_report(const std::vector<EvalReport>& reports, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ofstream metrics(out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!metrics) throw DataError("cannot write metrics.csv in " + out_dir.string());
    metrics << "method,scenario,rmse,rrmse_pct,bias,r2,n\n";
    for (const auto& r : reports) {
        metrics << r.method << ',' << r.scenario << ',' << format_double(r.metrics.rmse) << ','
                << (r.metrics.rrmse_pct ? format_double(*r.metrics.rrmse_pct) : "") << ','
                << format_double(r.metrics.bias) << ','
                << (r.metrics.r2 ? format_double(*r.metrics.r2) : "") << ',' << r.metrics.n << '\n';
    }
    metrics.close();

    for (const auto& r : reports) {
        std::ofstream scatter(out_dir / scatter_filename(r), std::ios::binary | std::ios::trunc);
        if (!scatter) throw DataError("cannot write scatter file in " + out_dir.string());
        scatter << "plot_id,reference_m,predicted_m\n";
        for (const auto& rec : r.records)
            scatter << rec.plot_id << ',' << format_double(rec.reference_m) << ','
                    << format_double(rec.predicted_m) << '\n';
    }
}

std::vector<PlotPrediction> load_scatter(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing scatter file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "plot_id,reference_m,predicted_m")
        throw DataError("bad scatter header in " + path.string());
    std::vector<PlotPrediction> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw DataError("bad scatter row in " + path.string());
        PlotPrediction rec;
        rec.plot_id = line.substr(0, c1);
        const auto parse = [&](std::size_t lo, std::size_t hi, double& out_v) {
            const char* b = line.data() + lo;
            const char* e = line.data() + hi;
            auto [ptr, ec] = std::from_chars(b, e, out_v);
            if (ec != std::errc() || ptr != e) throw DataError("bad number in " + path.string());
        };
        parse(c1 + 1, c2, rec.reference_m);
        parse(c2 + 1, line.size(), rec.predicted_m);
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace ft
