#pragma once

#include <cmath>
#include <optional>

#include "ft/error.hpp"

namespace ft {

/// Pixel location as (row, col) in raster space. Row 0 is the northernmost row.
struct PixelIndex {
    int row = 0;
    int col = 0;
    friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

/// Axis-aligned, north-up affine grid shared by every raster of a scene.
/// (origin_x, origin_y) is the outer corner of pixel (0,0); x grows eastwards
/// with columns, y shrinks southwards with rows.
struct RasterGrid {
    int width = 0;   // pixels
    int height = 0;  // pixels
    int bands = 1;
    double pixel_size = 10.0;  // meters
    double origin_x = 0.0;     // meters
    double origin_y = 0.0;     // meters

    friend bool operator==(const RasterGrid&, const RasterGrid&) = default;

    void validate() const {
        if (width < 1 || height < 1 || bands < 1)
            throw DataError("RasterGrid: width, height and bands must be >= 1");
        if (!(pixel_size > 0.0))
            throw DataError("RasterGrid: pixel_size must be positive");
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t value_count() const { return pixel_count() * bands; }

    /// Spatial equality, ignoring the band count (a mask and a 14-band stack
    /// can share one grid).
    bool same_extent(const RasterGrid& o) const {
        return width == o.width && height == o.height && pixel_size == o.pixel_size &&
               origin_x == o.origin_x && origin_y == o.origin_y;
    }

    double center_x(int col) const { return origin_x + (col + 0.5) * pixel_size; }
    double center_y(int row) const { return origin_y - (row + 0.5) * pixel_size; }

    /// Pixel containing world point (x, y), or nullopt outside the extent.
    std::optional<PixelIndex> world_to_pixel(double x, double y) const {
        const int col = static_cast<int>(std::floor((x - origin_x) / pixel_size));
        const int row = static_cast<int>(std::floor((origin_y - y) / pixel_size));
        if (col < 0 || col >= width || row < 0 || row >= height) return std::nullopt;
        return PixelIndex{row, col};
    }

    bool contains(double x, double y) const { return world_to_pixel(x, y).has_value(); }
};

} // namespace ft
