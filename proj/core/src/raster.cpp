#include "ft/raster.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ft/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "raster payloads are little-endian; big-endian hosts are unsupported");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace ft {

namespace {

constexpr float kNoData = std::numeric_limits<float>::quiet_NaN();

struct RasterPaths {
    std::filesystem::path bin;
    std::filesystem::path json;
};

RasterPaths raster_paths(const std::filesystem::path& path) {
    std::filesystem::path stem = path;
    if (stem.extension() == ".bin" || stem.extension() == ".json") stem.replace_extension();
    RasterPaths p;
    p.bin = stem;
    p.bin += ".bin";
    p.json = stem;
    p.json += ".json";
    return p;
}

void write_payload(const std::filesystem::path& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!out) throw DataError("write failed: " + path.string());
}

void write_sidecar(const std::filesystem::path& path, const RasterGrid& grid,
                   const std::vector<std::string>& band_names) {
    nlohmann::json j;
    j["width"] = grid.width;
    j["height"] = grid.height;
    j["bands"] = grid.bands;
    j["pixel_size"] = grid.pixel_size;
    j["origin_x"] = grid.origin_x;
    j["origin_y"] = grid.origin_y;
    j["band_names"] = band_names;
    j["nodata"] = "nan";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

void save_raw(const RasterGrid& grid, const std::vector<float>& data,
              const std::vector<std::string>& band_names, const std::filesystem::path& path) {
    grid.validate();
    if (data.size() != grid.value_count())
        throw DataError("raster data length does not match grid dimensions");
    if (band_names.size() != static_cast<std::size_t>(grid.bands))
        throw DataError("band_names length does not match band count");
    const auto paths = raster_paths(path);
    write_payload(paths.bin, data);
    write_sidecar(paths.json, grid, band_names);
}

} // namespace

void RawRaster::validate() const {
    grid.validate();
    if (data.size() != grid.value_count()) throw DataError("RawRaster: data length mismatch");
    if (band_names.size() != static_cast<std::size_t>(grid.bands))
        throw DataError("RawRaster: band_names length mismatch");
}

void EOStack::validate() const {
    grid.validate();
    if (data.size() != grid.value_count()) throw DataError("EOStack: data length mismatch");
    if (band_names.size() != static_cast<std::size_t>(grid.bands))
        throw DataError("EOStack: band_names length mismatch");
}

void ForestMask::validate() const {
    grid.validate();
    if (grid.bands != 1) throw DataError("ForestMask: must be single-band");
    if (mask.size() != grid.pixel_count()) throw DataError("ForestMask: mask length mismatch");
}

std::size_t ForestMask::forest_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m != 0;
    return n;
}

void HeightRaster::validate() const {
    grid.validate();
    if (grid.bands != 1) throw DataError("HeightRaster: must be single-band");
    if (values.size() != grid.pixel_count()) throw DataError("HeightRaster: values length mismatch");
}

void SparseLabelRaster::validate() const {
    grid.validate();
    if (grid.bands != 1) throw DataError("SparseLabelRaster: must be single-band");
    if (values.size() != grid.pixel_count() || valid.size() != grid.pixel_count())
        throw DataError("SparseLabelRaster: array length mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (valid[i] && !(std::isfinite(values[i]) && values[i] >= 0.0f))
            throw DataError("SparseLabelRaster: valid pixels must be finite and >= 0");
    }
}

std::size_t SparseLabelRaster::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
}

void save_raster(const RawRaster& raster, const std::filesystem::path& path) {
    raster.validate();
    save_raw(raster.grid, raster.data, raster.band_names, path);
}

void save_raster(const EOStack& stack, const std::filesystem::path& path) {
    stack.validate();
    save_raw(stack.grid, stack.data, stack.band_names, path);
}

void save_raster(const ForestMask& mask, const std::filesystem::path& path) {
    mask.validate();
    std::vector<float> data(mask.mask.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = mask.mask[i] ? 1.0f : 0.0f;
    save_raw(mask.grid, data, {"mask"}, path);
}

void save_raster(const HeightRaster& heights, const std::filesystem::path& path) {
    heights.validate();
    save_raw(heights.grid, heights.values, {"height_m"}, path);
}

void save_raster(const SparseLabelRaster& labels, const std::filesystem::path& path) {
    labels.validate();
    // Canonicalize: invalid pixels always hold the same quiet-NaN bit pattern.
    std::vector<float> data(labels.values.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = labels.valid[i] ? labels.values[i] : kNoData;
    save_raw(labels.grid, data, {"height_m"}, path);
}

RawRaster load_raster(const std::filesystem::path& path) {
    const auto paths = raster_paths(path);

    std::ifstream jin(paths.json, std::ios::binary);
    if (!jin) throw DataError("missing raster header: " + paths.json.string());
    nlohmann::json j;
    try {
        jin >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt raster header " + paths.json.string() + ": " + e.what());
    }

    RawRaster r;
    try {
        r.grid.width = j.at("width").get<int>();
        r.grid.height = j.at("height").get<int>();
        r.grid.bands = j.at("bands").get<int>();
        r.grid.pixel_size = j.at("pixel_size").get<double>();
        r.grid.origin_x = j.at("origin_x").get<double>();
        r.grid.origin_y = j.at("origin_y").get<double>();
        r.band_names = j.at("band_names").get<std::vector<std::string>>();
        if (j.at("nodata").get<std::string>() != "nan")
            throw DataError("unsupported nodata sentinel in " + paths.json.string());
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt raster header " + paths.json.string() + ": " + e.what());
    }
    if (j.contains("dtype") && j["dtype"].get<std::string>() != "float32")
        throw DataError("unsupported dtype in " + paths.json.string());
    r.grid.validate();
    if (r.band_names.size() != static_cast<std::size_t>(r.grid.bands))
        throw DataError("band_names length does not match band count in " + paths.json.string());

    std::ifstream bin(paths.bin, std::ios::binary | std::ios::ate);
    if (!bin) throw DataError("missing raster payload: " + paths.bin.string());
    const auto file_size = static_cast<std::size_t>(bin.tellg());
    const std::size_t expected = r.grid.value_count() * sizeof(float);
    if (file_size != expected)
        throw DataError("payload length mismatch: " + paths.bin.string() + " holds " +
                        std::to_string(file_size) + " bytes, header implies " + std::to_string(expected));
    bin.seekg(0);
    r.data.resize(r.grid.value_count());
    bin.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(expected));
    if (!bin) throw DataError("read failed: " + paths.bin.string());
    return r;
}

EOStack to_stack(RawRaster raw) {
    EOStack s;
    s.grid = raw.grid;
    s.data = std::move(raw.data);
    s.band_names = std::move(raw.band_names);
    s.validate();
    return s;
}

ForestMask to_mask(const RawRaster& raw) {
    if (raw.grid.bands != 1) throw DataError("forest mask must be single-band");
    ForestMask m;
    m.grid = raw.grid;
    m.mask.resize(raw.data.size());
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const float v = raw.data[i];
        m.mask[i] = (std::isfinite(v) && v != 0.0f) ? 1 : 0;  // nodata counts as non-forest
    }
    return m;
}

HeightRaster to_heights(RawRaster raw) {
    if (raw.grid.bands != 1) throw DataError("height raster must be single-band");
    HeightRaster h;
    h.grid = raw.grid;
    h.values = std::move(raw.data);
    return h;
}

SparseLabelRaster to_labels(const RawRaster& raw) {
    if (raw.grid.bands != 1) throw DataError("label raster must be single-band");
    SparseLabelRaster l;
    l.grid = raw.grid;
    l.values.resize(raw.data.size());
    l.valid.resize(raw.data.size());
    for (std::size_t i = 0; i < raw.data.size(); ++i) {
        const float v = raw.data[i];
        if (std::isfinite(v)) {
            l.values[i] = v;
            l.valid[i] = 1;
        } else {
            l.values[i] = kNoData;
            l.valid[i] = 0;
        }
    }
    l.validate();
    return l;
}

EOStack load_stack(const std::filesystem::path& path) { return to_stack(load_raster(path)); }
ForestMask load_mask(const std::filesystem::path& path) { return to_mask(load_raster(path)); }
HeightRaster load_heights(const std::filesystem::path& path) { return to_heights(load_raster(path)); }
SparseLabelRaster load_labels(const std::filesystem::path& path) { return to_labels(load_raster(path)); }

EOStack subset_channels(const EOStack& stack, const std::vector<int>& band_indices) {
    stack.validate();
    if (band_indices.empty()) throw DataError("subset_channels: empty band selection");
    EOStack out;
    out.grid = stack.grid;
    out.grid.bands = static_cast<int>(band_indices.size());
    out.data.resize(out.grid.value_count());
    const std::size_t plane = stack.grid.pixel_count();
    for (std::size_t i = 0; i < band_indices.size(); ++i) {
        const int b = band_indices[i];
        if (b < 0 || b >= stack.bands()) throw DataError("subset_channels: band index out of range");
        std::memcpy(out.data.data() + i * plane, stack.data.data() + static_cast<std::size_t>(b) * plane,
                    plane * sizeof(float));
        out.band_names.push_back(stack.band_names[b]);
    }
    return out;
}

std::vector<int> bands_with_prefixes(const EOStack& stack, const std::vector<std::string>& prefixes) {
    std::vector<int> out;
    for (int b = 0; b < stack.bands(); ++b) {
        for (const auto& p : prefixes) {
            if (stack.band_names[b].rfind(p, 0) == 0) {
                out.push_back(b);
                break;
            }
        }
    }
    return out;
}

} // namespace ft
