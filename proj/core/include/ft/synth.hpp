#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ft/plots.hpp"
#include "ft/raster.hpp"

namespace ft {

/// Site-level generation parameters. channel_gains / channel_offsets /
/// noise_sd_override are per-sensor-channel perturbations (empty = neutral);
/// they carry the source->target domain shift.
struct SiteParams {
    std::string name = "site";
    double mean_height_m = 10.8;
    double height_spread_m = 4.0;
    double correlation_length_px = 12.0;
    double forest_fraction = 0.7;
    std::vector<double> channel_gains;
    std::vector<double> channel_offsets;
    std::vector<double> noise_sd_override;
    std::uint64_t seed = 0;

    void validate(std::size_t sensor_channels) const;
};

enum class ChannelType { saturating, linear_height, weak };

/// value = amplitude * response(h) + offset + noise. Response is
/// 1 - exp(-h / h_sat) for saturating and weak channels, h itself for
/// linear_height channels; "weak" marks low signal-to-noise channels.
struct ChannelSpec {
    std::string name;
    ChannelType type = ChannelType::saturating;
    double h_sat_m = 20.0;
    double amplitude = 1.0;
    double offset = 0.0;
    double noise_sd = 0.1;
};

struct SensorModel {
    std::vector<ChannelSpec> channels;

    /// The paper-shaped 14-channel layout: 7 saturating optical channels
    /// (s2_*), 2 weak C-band channels (s1_*), 2 saturating L-band channels
    /// with larger h_sat (l_*), a linear interferometric-height channel
    /// (x_ichm), a weak coherence channel (x_coh), and a spare (x_aux).
    static SensorModel default14();

    void validate() const;
};

double clean_channel_value(const ChannelSpec& spec, double height_m);

/// Gaussian random field (FFT spectral synthesis, Gaussian kernel of the
/// site's correlation length) affinely mapped to mean/spread and clamped at
/// 0. Pure function of (grid, site params).
HeightRaster gen_height_field(const RasterGrid& grid, const SiteParams& site);

/// Smooth random mask covering approximately site.forest_fraction of the
/// grid (threshold at the matching sample quantile of a second field).
ForestMask gen_forest_mask(const RasterGrid& grid, const SiteParams& site);

/// Per-channel: gain * clean(h) + offset + N(0, noise_sd), with the site's
/// per-channel perturbations applied to the clean signal.
EOStack gen_eo_channels(const HeightRaster& heights, const SensorModel& sensor, const SiteParams& site);

/// n distinct forest-pixel centers, drawn uniformly under the seed. Plot
/// height is the truth at the center pixel; radius follows the height
/// terciles of the sample (short 5.64 m, mid 9 m, tall 12.62 m).
PlotTable sample_plots(const HeightRaster& heights, const ForestMask& mask, int n, std::uint64_t seed);

/// Dense ALS-style reference: valid on every forest pixel with finite truth.
SparseLabelRaster dense_labels(const HeightRaster& truth, const ForestMask& mask);

struct Scene {
    std::string name;
    EOStack stack;
    ForestMask mask;
    HeightRaster truth;
    PlotTable plots;  // empty for the dense-reference source site
};

struct SynthConfig {
    int width = 512;
    int height = 512;
    double pixel_size = 10.0;
    SiteParams source;
    SiteParams target;
    SensorModel sensor = SensorModel::default14();
    int n_plots = 1064;  // sampled on the target site

    /// Source at 10.8 m / neutral channels; target at 15.0 m with gain and
    /// offset shifts that make a blindly transferred source model
    /// overestimate (the paper's negative-bias pattern).
    static SynthConfig defaults(std::uint64_t seed);
};

/// Source scene (dense truth, no plots) + target scene (plots sampled from
/// its truth).
std::pair<Scene, Scene> gen_site_pair(const SynthConfig& cfg);

/// Writes stack/mask/truth rasters, plots.csv when plots exist, and a
/// scene.json parameter record.
void save_scene(const Scene& scene, const SiteParams& site, const SensorModel& sensor,
                const std::filesystem::path& dir);

/// Loads the raster/plot files back (scene.json is informational only).
Scene load_scene(const std::filesystem::path& dir);

} // namespace ft
