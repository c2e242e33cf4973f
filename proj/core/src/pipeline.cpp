#include "ft/pipeline.hpp"

#include "ft/error.hpp"
#include "ft/synth.hpp"

namespace ft {

PatchSet build_dense_patchset(const EOStack& stack, const HeightRaster& truth, const ForestMask& mask,
                              const PipelineConfig& cfg) {
    const SparseLabelRaster labels = dense_labels(truth, mask);
    auto tiles = tile_scene(stack, labels, mask, cfg.patch_size);
    tiles = filter_patches_dense(tiles, cfg.min_forest_fraction);
    if (tiles.empty()) throw DataError("dense pipeline: no patches pass the forest filter");
    PatchSet set = split_patches(std::move(tiles), cfg.test_fraction, cfg.val_fraction, cfg.seed);
    if (cfg.augment_multiplier > 1.0)
        set.train = augment(set.train, cfg.augment_multiplier, cfg.seed, cfg.shift_step);
    fit_and_apply_normalization(set);
    return set;
}

PatchSet build_sparse_patchset(const EOStack& stack, const PlotTable& train_plots, const ForestMask& mask,
                               const PipelineConfig& cfg) {
    const SparseLabelRaster labels = rasterize_plots(train_plots, stack.grid);
    auto tiles = tile_scene(stack, labels, mask, cfg.patch_size);
    tiles = filter_patches_sparse(tiles);
    if (tiles.empty()) throw DataError("sparse pipeline: no patch contains a plot");
    PatchSet set = split_patches(std::move(tiles), cfg.test_fraction, cfg.val_fraction, cfg.seed);
    if (cfg.augment_multiplier > 1.0)
        set.train = augment(set.train, cfg.augment_multiplier, cfg.seed, cfg.shift_step);
    return set;
}

} // namespace ft
