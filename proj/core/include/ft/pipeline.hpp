#pragma once

#include <cstdint>

#include "ft/patch.hpp"
#include "ft/plots.hpp"
#include "ft/raster.hpp"

namespace ft {

struct PipelineConfig {
    int patch_size = 256;
    double min_forest_fraction = 0.20;
    double test_fraction = 0.5;
    double val_fraction = 0.1;
    double augment_multiplier = 4.0;  // <= 1 disables augmentation
    int shift_step = 32;
    std::uint64_t seed = 0;
};

/// Dense (ALS-style) pretraining set: dense labels from the truth raster,
/// tile -> forest-fraction filter -> split -> augment train -> fit + apply
/// normalization. Returned normalized.
PatchSet build_dense_patchset(const EOStack& stack, const HeightRaster& truth, const ForestMask& mask,
                              const PipelineConfig& cfg);

/// Sparse fine-tuning set: rasterize the (training) plots, tile -> plot
/// filter -> split -> augment train. Returned UNNORMALIZED; fine-tuning
/// applies the pretrained checkpoint's statistics.
PatchSet build_sparse_patchset(const EOStack& stack, const PlotTable& train_plots, const ForestMask& mask,
                               const PipelineConfig& cfg);

} // namespace ft
