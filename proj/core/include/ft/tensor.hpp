#pragma once

#include <cstddef>
#include <vector>

namespace ft {

/// Dense [channels][height][width] array of doubles. All network math runs in
/// 64-bit; raster storage stays float32 (see raster.hpp).
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c, int h, int w)
        : channels(c), height(h), width(w),
          data(static_cast<std::size_t>(c) * h * w, 0.0) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

    double* chan(int c) { return data.data() + static_cast<std::size_t>(c) * plane(); }
    const double* chan(int c) const { return data.data() + static_cast<std::size_t>(c) * plane(); }

    bool same_shape(const Tensor& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
};

} // namespace ft
