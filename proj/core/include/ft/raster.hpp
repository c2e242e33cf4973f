#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ft/grid.hpp"

namespace ft {

// On-disk raster format, bit-exact and byte-deterministic:
//   <name>.bin   little-endian IEEE-754 float32, C-order [band][row][col]
//   <name>.json  sidecar header: {"width","height","bands","pixel_size",
//                "origin_x","origin_y","band_names","nodata":"nan"}
// The nodata sentinel is NaN in the payload. Boolean masks are stored as
// float32 0.0/1.0. Either the .bin path or the extension-less stem may be
// passed to the IO functions below.

/// Generic multiband float32 raster as read from / written to disk.
struct RawRaster {
    RasterGrid grid;
    std::vector<float> data;  // [band][row][col]
    std::vector<std::string> band_names;

    float at(int band, int row, int col) const {
        return data[(static_cast<std::size_t>(band) * grid.height + row) * grid.width + col];
    }
    float& at(int band, int row, int col) {
        return data[(static_cast<std::size_t>(band) * grid.height + row) * grid.width + col];
    }
    void validate() const;
};

/// Co-registered multi-channel EO stack on a common grid.
struct EOStack {
    RasterGrid grid;
    std::vector<float> data;  // [band][row][col]
    std::vector<std::string> band_names;

    int bands() const { return grid.bands; }
    float at(int band, int row, int col) const {
        return data[(static_cast<std::size_t>(band) * grid.height + row) * grid.width + col];
    }
    float& at(int band, int row, int col) {
        return data[(static_cast<std::size_t>(band) * grid.height + row) * grid.width + col];
    }
    void validate() const;
};

/// Per-pixel forest flag (true = forest).
struct ForestMask {
    RasterGrid grid;  // bands == 1
    std::vector<std::uint8_t> mask;

    bool at(int row, int col) const { return mask[static_cast<std::size_t>(row) * grid.width + col] != 0; }
    std::size_t forest_count() const;
    void validate() const;
};

/// Single-band height raster; NaN marks nodata.
struct HeightRaster {
    RasterGrid grid;  // bands == 1
    std::vector<float> values;

    float at(int row, int col) const { return values[static_cast<std::size_t>(row) * grid.width + col]; }
    float& at(int row, int col) { return values[static_cast<std::size_t>(row) * grid.width + col]; }
    void validate() const;
};

/// Per-pixel label values plus validity mask. Values are finite and >= 0
/// wherever valid; invalid pixels hold the canonical quiet NaN.
struct SparseLabelRaster {
    RasterGrid grid;  // bands == 1
    std::vector<float> values;
    std::vector<std::uint8_t> valid;

    float value_at(int row, int col) const { return values[static_cast<std::size_t>(row) * grid.width + col]; }
    bool valid_at(int row, int col) const { return valid[static_cast<std::size_t>(row) * grid.width + col] != 0; }
    std::size_t valid_count() const;
    void validate() const;
};

// IO. save_* is byte-deterministic for identical input; load(save(r)) is
// bit-identical to r.
void save_raster(const RawRaster& raster, const std::filesystem::path& path);
void save_raster(const EOStack& stack, const std::filesystem::path& path);
void save_raster(const ForestMask& mask, const std::filesystem::path& path);
void save_raster(const HeightRaster& heights, const std::filesystem::path& path);
void save_raster(const SparseLabelRaster& labels, const std::filesystem::path& path);

RawRaster load_raster(const std::filesystem::path& path);

EOStack to_stack(RawRaster raw);
ForestMask to_mask(const RawRaster& raw);
HeightRaster to_heights(RawRaster raw);
SparseLabelRaster to_labels(const RawRaster& raw);

EOStack load_stack(const std::filesystem::path& path);
ForestMask load_mask(const std::filesystem::path& path);
HeightRaster load_heights(const std::filesystem::path& path);
SparseLabelRaster load_labels(const std::filesystem::path& path);

/// New stack holding the listed bands (in the given order) of `stack`.
EOStack subset_channels(const EOStack& stack, const std::vector<int>& band_indices);

/// Indices of bands whose names start with any of the given prefixes,
/// preserving stack order. Used for the s2 / s1s2 / ms channel selections.
std::vector<int> bands_with_prefixes(const EOStack& stack, const std::vector<std::string>& prefixes);

} // namespace ft
