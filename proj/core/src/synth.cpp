#include "ft/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <fftw3.h>
#include <json.hpp>

#include "ft/error.hpp"
#include "ft/rng.hpp"

namespace ft {

void SiteParams::validate(std::size_t sensor_channels) const {
    if (mean_height_m <= 0.0) throw ConfigError("site: mean_height_m must be > 0");
    if (height_spread_m < 0.0) throw ConfigError("site: height_spread_m must be >= 0");
    if (correlation_length_px < 1.0) throw ConfigError("site: correlation_length_px must be >= 1");
    if (forest_fraction <= 0.0 || forest_fraction > 1.0)
        throw ConfigError("site: forest_fraction must lie in (0,1]");
    for (const auto* v : {&channel_gains, &channel_offsets, &noise_sd_override})
        if (!v->empty() && v->size() != sensor_channels)
            throw ConfigError("site: per-channel perturbation length does not match sensor channels");
}

void SensorModel::validate() const {
    if (channels.empty()) throw ConfigError("sensor: no channels");
    for (const auto& c : channels) {
        if (c.name.empty()) throw ConfigError("sensor: unnamed channel");
        if (c.type != ChannelType::linear_height && c.h_sat_m <= 0.0)
            throw ConfigError("sensor: h_sat_m must be > 0 for channel " + c.name);
        if (c.noise_sd < 0.0) throw ConfigError("sensor: negative noise for channel " + c.name);
    }
}

SensorModel SensorModel::default14() {
    SensorModel m;
    // Optical saturates early (canopy closure), C-band is low-SNR, L-band
    // saturates late, and the interferometric channel reads height directly.
    m.channels = {
        {"s2_b02", ChannelType::saturating, 10.0, 0.9, 0.05, 0.14},
        {"s2_b03", ChannelType::saturating, 12.0, 1.0, 0.08, 0.15},
        {"s2_b04", ChannelType::saturating, 8.0, 0.8, 0.06, 0.12},
        {"s2_b05", ChannelType::saturating, 13.0, 1.1, 0.10, 0.16},
        {"s2_b06", ChannelType::saturating, 14.0, 1.2, 0.12, 0.17},
        {"s2_b07", ChannelType::saturating, 11.0, 1.3, 0.10, 0.18},
        {"s2_b08", ChannelType::saturating, 9.0, 1.0, 0.07, 0.15},
        {"s1_vv", ChannelType::weak, 20.0, 0.8, -8.5, 0.50},
        {"s1_vh", ChannelType::weak, 20.0, 1.0, -14.0, 0.60},
        {"l_hh", ChannelType::saturating, 14.0, 2.5, -7.0, 0.13},
        {"l_hv", ChannelType::saturating, 17.0, 3.0, -12.0, 0.13},
        {"x_ichm", ChannelType::linear_height, 1.0, 1.0, 0.0, 0.80},
        {"x_coh", ChannelType::weak, 25.0, -0.20, 0.65, 0.05},
        {"x_aux", ChannelType::weak, 20.0, 0.10, 0.20, 0.30},
    };
    return m;
}

double clean_channel_value(const ChannelSpec& spec, double height_m) {
    switch (spec.type) {
        case ChannelType::linear_height:
            return spec.amplitude * height_m + spec.offset;
        case ChannelType::saturating:
        case ChannelType::weak:
            return spec.amplitude * (1.0 - std::exp(-height_m / spec.h_sat_m)) + spec.offset;
    }
    return 0.0;
}

namespace {

/// Standardized (zero-mean, unit-sd) correlated field via spectral synthesis:
/// white noise shaped by a Gaussian kernel of the given length.
std::vector<double> correlated_field(int H, int W, double corr_len, std::uint64_t seed,
                                     const char* tag) {
    const std::size_t n = static_cast<std::size_t>(H) * W;
    double* field = fftw_alloc_real(n);
    fftw_complex* freq = fftw_alloc_complex(static_cast<std::size_t>(H) * (W / 2 + 1));

    Rng rng(derive_seed(seed, tag));
    for (std::size_t i = 0; i < n; ++i) field[i] = rng.normal();

    fftw_plan fwd = fftw_plan_dft_r2c_2d(H, W, field, freq, FFTW_ESTIMATE);
    fftw_execute(fwd);
    fftw_destroy_plan(fwd);

    const double two_pi2_l2 = 2.0 * M_PI * M_PI * corr_len * corr_len;
    for (int ky = 0; ky < H; ++ky) {
        const double fy = (ky <= H / 2 ? ky : ky - H) / static_cast<double>(H);
        for (int kx = 0; kx <= W / 2; ++kx) {
            const double fx = kx / static_cast<double>(W);
            const double g = std::exp(-two_pi2_l2 * (fy * fy + fx * fx));
            auto& c = freq[static_cast<std::size_t>(ky) * (W / 2 + 1) + kx];
            c[0] *= g;
            c[1] *= g;
        }
    }

    fftw_plan bwd = fftw_plan_dft_c2r_2d(H, W, freq, field, FFTW_ESTIMATE);
    fftw_execute(bwd);
    fftw_destroy_plan(bwd);
    fftw_free(freq);

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += field[i];
        sumsq += field[i] * field[i];
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::max(std::sqrt(std::max(0.0, sumsq / static_cast<double>(n) - mean * mean)),
                               1e-12);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (field[i] - mean) / sd;
    fftw_free(field);
    return out;
}

} // namespace

HeightRaster gen_height_field(const RasterGrid& grid, const SiteParams& site) {
    if (grid.width < 2 || grid.height < 2) throw DataError("gen_height_field: degenerate grid");
    site.validate(site.channel_gains.size());  // channel checks deferred to gen_eo_channels
    const auto z = correlated_field(grid.height, grid.width, site.correlation_length_px, site.seed,
                                    "height_field");
    HeightRaster out;
    out.grid = grid;
    out.grid.bands = 1;
    out.values.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        out.values[i] = static_cast<float>(std::max(0.0, site.mean_height_m + site.height_spread_m * z[i]));
    return out;
}

ForestMask gen_forest_mask(const RasterGrid& grid, const SiteParams& site) {
    if (grid.width < 2 || grid.height < 2) throw DataError("gen_forest_mask: degenerate grid");
    const auto z = correlated_field(grid.height, grid.width, 2.0 * site.correlation_length_px,
                                    site.seed, "forest_mask");
    std::vector<double> sorted = z;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::clamp(std::floor((1.0 - site.forest_fraction) * static_cast<double>(z.size())), 0.0,
                   static_cast<double>(z.size() - 1)));
    const double threshold = sorted[idx];

    ForestMask out;
    out.grid = grid;
    out.grid.bands = 1;
    out.mask.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out.mask[i] = z[i] >= threshold ? 1 : 0;
    return out;
}

EOStack gen_eo_channels(const HeightRaster& heights, const SensorModel& sensor, const SiteParams& site) {
    heights.validate();
    sensor.validate();
    site.validate(sensor.channels.size());

    EOStack stack;
    stack.grid = heights.grid;
    stack.grid.bands = static_cast<int>(sensor.channels.size());
    stack.data.resize(stack.grid.value_count());
    for (std::size_t c = 0; c < sensor.channels.size(); ++c) {
        const auto& spec = sensor.channels[c];
        stack.band_names.push_back(spec.name);
        const double gain = site.channel_gains.empty() ? 1.0 : site.channel_gains[c];
        const double offset = site.channel_offsets.empty() ? 0.0 : site.channel_offsets[c];
        const double noise_sd =
            site.noise_sd_override.empty() ? spec.noise_sd : site.noise_sd_override[c];
        Rng rng(derive_seed(site.seed, "channel:" + spec.name));
        float* band = stack.data.data() + c * heights.grid.pixel_count();
        for (std::size_t i = 0; i < heights.values.size(); ++i) {
            const double clean = clean_channel_value(spec, heights.values[i]);
            band[i] = static_cast<float>(gain * clean + offset + rng.normal(0.0, noise_sd));
        }
    }
    return stack;
}

PlotTable sample_plots(const HeightRaster& heights, const ForestMask& mask, int n, std::uint64_t seed) {
    heights.validate();
    mask.validate();
    if (!heights.grid.same_extent(mask.grid)) throw DataError("sample_plots: grid mismatch");
    if (n < 1) throw ConfigError("sample_plots: n must be >= 1");

    std::vector<std::size_t> forest;
    for (std::size_t i = 0; i < mask.mask.size(); ++i)
        if (mask.mask[i]) forest.push_back(i);
    if (forest.size() < static_cast<std::size_t>(n))
        throw DataError("sample_plots: " + std::to_string(n) + " plots requested but only " +
                        std::to_string(forest.size()) + " forest pixels available");

    Rng rng(derive_seed(seed, "sample_plots"));
    rng.shuffle(forest);
    forest.resize(static_cast<std::size_t>(n));
    std::sort(forest.begin(), forest.end());

    std::vector<double> sampled;
    sampled.reserve(forest.size());
    for (auto i : forest) sampled.push_back(heights.values[i]);
    std::vector<double> sorted = sampled;
    std::sort(sorted.begin(), sorted.end());
    const double t1 = sorted[sorted.size() / 3];
    const double t2 = sorted[2 * sorted.size() / 3];

    PlotTable plots;
    plots.reserve(forest.size());
    char id[32];
    for (std::size_t i = 0; i < forest.size(); ++i) {
        const int row = static_cast<int>(forest[i] / heights.grid.width);
        const int col = static_cast<int>(forest[i] % heights.grid.width);
        std::snprintf(id, sizeof id, "p%05zu", i + 1);
        PlotRecord p;
        p.plot_id = id;
        p.x = heights.grid.center_x(col);
        p.y = heights.grid.center_y(row);
        const double h = sampled[i];
        p.radius_m = h < t1 ? 5.64 : (h < t2 ? 9.0 : 12.62);
        p.height_m = h;
        plots.push_back(std::move(p));
    }
    return plots;
}

SparseLabelRaster dense_labels(const HeightRaster& truth, const ForestMask& mask) {
    truth.validate();
    mask.validate();
    if (!truth.grid.same_extent(mask.grid)) throw DataError("dense_labels: grid mismatch");
    SparseLabelRaster out;
    out.grid = truth.grid;
    out.values.resize(truth.values.size());
    out.valid.resize(truth.values.size());
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
        const bool lv = mask.mask[i] != 0 && std::isfinite(truth.values[i]);
        out.valid[i] = lv ? 1 : 0;
        out.values[i] = lv ? truth.values[i] : std::numeric_limits<float>::quiet_NaN();
    }
    return out;
}

SynthConfig SynthConfig::defaults(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.sensor = SensorModel::default14();

    cfg.source.name = "source";
    cfg.source.mean_height_m = 10.8;
    cfg.source.height_spread_m = 4.0;
    cfg.source.correlation_length_px = 12.0;
    cfg.source.forest_fraction = 0.7;
    cfg.source.seed = derive_seed(seed, "source_site");

    cfg.target.name = "target";
    cfg.target.mean_height_m = 15.0;
    cfg.target.height_spread_m = 7.0;
    cfg.target.correlation_length_px = 12.0;
    cfg.target.forest_fraction = 0.7;
    cfg.target.seed = derive_seed(seed, "target_site");
    // Calibration-style shift: every channel reads slightly "taller" at the
    // target site, so a blindly transferred source model overestimates.
    cfg.target.channel_gains = {1.06, 1.05, 1.07, 1.05, 1.06, 1.05, 1.06,
                                1.10, 1.08, 1.05, 1.06, 1.12, 0.97, 1.00};
    cfg.target.channel_offsets.resize(cfg.sensor.channels.size());
    for (std::size_t c = 0; c < cfg.sensor.channels.size(); ++c)
        cfg.target.channel_offsets[c] = 0.5 * cfg.sensor.channels[c].noise_sd;
    // Seasonal/acquisition degradation of the interferometric channel at the
    // target site: the clean pixelwise height readout available at the source
    // site is substantially noisier there.
    cfg.target.noise_sd_override.resize(cfg.sensor.channels.size());
    for (std::size_t c = 0; c < cfg.sensor.channels.size(); ++c)
        cfg.target.noise_sd_override[c] = cfg.sensor.channels[c].noise_sd;
    for (std::size_t c = 0; c < cfg.sensor.channels.size(); ++c)
        if (cfg.sensor.channels[c].type == ChannelType::linear_height)
            cfg.target.noise_sd_override[c] = 4.0;
    return cfg;
}

std::pair<Scene, Scene> gen_site_pair(const SynthConfig& cfg) {
    cfg.sensor.validate();
    RasterGrid grid;
    grid.width = cfg.width;
    grid.height = cfg.height;
    grid.bands = 1;
    grid.pixel_size = cfg.pixel_size;
    grid.origin_x = 0.0;
    grid.origin_y = cfg.height * cfg.pixel_size;
    grid.validate();

    Scene source;
    source.name = cfg.source.name;
    source.truth = gen_height_field(grid, cfg.source);
    source.mask = gen_forest_mask(grid, cfg.source);
    source.stack = gen_eo_channels(source.truth, cfg.sensor, cfg.source);

    Scene target;
    target.name = cfg.target.name;
    target.truth = gen_height_field(grid, cfg.target);
    target.mask = gen_forest_mask(grid, cfg.target);
    target.stack = gen_eo_channels(target.truth, cfg.sensor, cfg.target);
    target.plots = sample_plots(target.truth, target.mask, cfg.n_plots, cfg.target.seed);

    return {std::move(source), std::move(target)};
}

namespace {

const char* type_name(ChannelType t) {
    switch (t) {
        case ChannelType::saturating: return "saturating";
        case ChannelType::linear_height: return "linear_height";
        case ChannelType::weak: return "weak";
    }
    return "?";
}

} // namespace

void save_scene(const Scene& scene, const SiteParams& site, const SensorModel& sensor,
                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_raster(scene.stack, dir / "stack");
    save_raster(scene.mask, dir / "mask");
    save_raster(scene.truth, dir / "truth");
    if (!scene.plots.empty()) save_plots(scene.plots, dir / "plots.csv");

    nlohmann::json j;
    j["name"] = scene.name;
    j["site"] = {{"name", site.name},
                 {"mean_height_m", site.mean_height_m},
                 {"height_spread_m", site.height_spread_m},
                 {"correlation_length_px", site.correlation_length_px},
                 {"forest_fraction", site.forest_fraction},
                 {"channel_gains", site.channel_gains},
                 {"channel_offsets", site.channel_offsets},
                 {"noise_sd_override", site.noise_sd_override},
                 {"seed", site.seed}};
    nlohmann::json chans = nlohmann::json::array();
    for (const auto& c : sensor.channels)
        chans.push_back({{"name", c.name},
                         {"type", type_name(c.type)},
                         {"h_sat_m", c.h_sat_m},
                         {"amplitude", c.amplitude},
                         {"offset", c.offset},
                         {"noise_sd", c.noise_sd}});
    j["sensor"] = std::move(chans);

    std::ofstream out(dir / "scene.json", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write scene.json in " + dir.string());
    out << j.dump(2) << '\n';
}

Scene load_scene(const std::filesystem::path& dir) {
    Scene scene;
    scene.name = dir.filename().string();
    scene.stack = load_stack(dir / "stack");
    scene.mask = load_mask(dir / "mask");
    scene.truth = load_heights(dir / "truth");
    if (std::filesystem::exists(dir / "plots.csv")) scene.plots = load_plots(dir / "plots.csv");
    if (!scene.stack.grid.same_extent(scene.mask.grid) ||
        !scene.stack.grid.same_extent(scene.truth.grid))
        throw DataError("scene rasters in " + dir.string() + " do not share one grid");
    return scene;
}

} // namespace ft
