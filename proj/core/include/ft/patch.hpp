#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ft/raster.hpp"

namespace ft {

/// A square training window cut from a scene: EO channels, label values,
/// label validity and forest mask, all sharing one [size][size] footprint.
/// Non-forest pixels hold NaN in `eo` and are never valid in `labels`.
struct Patch {
    int channels = 0;
    int size = 0;
    std::vector<float> eo;             // [C][size][size]
    std::vector<float> labels;         // [size][size]
    std::vector<std::uint8_t> valid;   // [size][size]
    std::vector<std::uint8_t> forest;  // [size][size]
    int origin_row = 0;                // anchor in the parent grid
    int origin_col = 0;
    std::string augmentation_tag = "orig";
    bool normalized = false;

    std::size_t plane() const { return static_cast<std::size_t>(size) * size; }
    float eo_at(int c, int y, int x) const { return eo[(static_cast<std::size_t>(c) * size + y) * size + x]; }
    float label_at(int y, int x) const { return labels[static_cast<std::size_t>(y) * size + x]; }
    bool valid_at(int y, int x) const { return valid[static_cast<std::size_t>(y) * size + x] != 0; }
    bool forest_at(int y, int x) const { return forest[static_cast<std::size_t>(y) * size + x] != 0; }

    double forest_fraction() const;
    std::size_t valid_count() const;
};

/// Per-channel standardization statistics, fitted on training forest pixels.
struct NormalizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-6

    friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

struct PatchSet {
    std::vector<Patch> train;
    std::vector<Patch> val;
    std::vector<Patch> test;
    NormalizationStats normalization;
    std::uint64_t seed = 0;
    double test_fraction = 0.0;
    double val_fraction = 0.0;
};

/// Cuts the scene into non-overlapping patch_size x patch_size tiles anchored
/// at (0,0), row-major; partial edge tiles are discarded. Non-forest pixels
/// are set to nodata in the EO channels and invalid in the labels.
std::vector<Patch> tile_scene(const EOStack& stack, const SparseLabelRaster& labels,
                              const ForestMask& mask, int patch_size = 256);

/// Keeps patches whose forest cover fraction is >= the threshold.
std::vector<Patch> filter_patches_dense(const std::vector<Patch>& patches,
                                        double min_forest_fraction = 0.20);

/// Keeps patches holding at least one valid label pixel.
std::vector<Patch> filter_patches_sparse(const std::vector<Patch>& patches);

/// Seeded uniform permutation; first floor(n*test_fraction) patches become
/// test, the next floor(n*val_fraction) validation, the rest training.
PatchSet split_patches(std::vector<Patch> patches, double test_fraction = 0.5,
                       double val_fraction = 0.1, std::uint64_t seed = 0);

// Augmentation transform family: right-angle rotations, horizontal/vertical
// flips, and circular shifts in shift_step-pixel multiples, applied
// identically to eo/labels/valid/forest.
struct Transform {
    enum class Kind { rot90, rot180, rot270, flip_h, flip_v, shift };
    Kind kind = Kind::rot90;
    int shift_rows = 0;
    int shift_cols = 0;

    std::string tag() const;
};

Patch apply_transform(const Patch& patch, const Transform& t);

/// All distinct transforms for a given patch size (rotations, flips, nonzero
/// circular shifts in shift_step multiples).
std::vector<Transform> available_transforms(int patch_size, int shift_step = 32);

/// Originals plus seeded transformed copies. Total size is
/// min(llround(target_multiplier*n), distinct budget); output is ordered by
/// (origin, augmentation_tag).
std::vector<Patch> augment(const std::vector<Patch>& train_patches, double target_multiplier,
                           std::uint64_t seed, int shift_step = 32);

/// Per-channel mean/std over forest pixels of the given (training) patches.
NormalizationStats fit_normalization(const std::vector<Patch>& train_patches);

/// Standardizes EO channels in place: (x - mean) / std on forest pixels,
/// exactly 0 on nodata pixels. A patch can only be normalized once.
void apply_normalization(Patch& patch, const NormalizationStats& stats);

NormalizationStats fit_and_apply_normalization(PatchSet& set);
void apply_normalization(PatchSet& set, const NormalizationStats& stats);

/// Serializes a patch set as a directory of raster-format files plus a JSON
/// manifest {seed, fractions, counts, normalization, transforms, patches}.
void save_patchset(const PatchSet& set, const std::filesystem::path& dir);
PatchSet load_patchset(const std::filesystem::path& dir);

/// 64-bit fingerprint of the manifest-level content (counts, seed, origins,
/// tags, normalization), stored into checkpoints as data_fingerprint.
std::string patchset_fingerprint(const PatchSet& set);

} // namespace ft
