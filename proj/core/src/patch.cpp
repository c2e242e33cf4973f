#include "ft/patch.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "ft/error.hpp"
#include "ft/rng.hpp"

namespace ft {

namespace {

constexpr float kNoData = std::numeric_limits<float>::quiet_NaN();

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void check_uniform(const std::vector<Patch>& patches) {
    for (std::size_t i = 1; i < patches.size(); ++i) {
        if (patches[i].channels != patches[0].channels || patches[i].size != patches[0].size)
            throw DataError("patch set mixes channel counts or sizes");
    }
}

} // namespace

double Patch::forest_fraction() const {
    if (forest.empty()) return 0.0;
    std::size_t n = 0;
    for (auto f : forest) n += f != 0;
    return static_cast<double>(n) / static_cast<double>(forest.size());
}

std::size_t Patch::valid_count() const {
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    return n;
}

std::vector<Patch> tile_scene(const EOStack& stack, const SparseLabelRaster& labels,
                              const ForestMask& mask, int patch_size) {
    stack.validate();
    labels.validate();
    mask.validate();
    if (!stack.grid.same_extent(labels.grid) || !stack.grid.same_extent(mask.grid))
        throw DataError("tile_scene: stack, labels and mask must share one grid");
    if (patch_size < 1) throw ConfigError("tile_scene: patch_size must be >= 1");
    if (stack.grid.height < patch_size || stack.grid.width < patch_size)
        throw DataError("tile_scene: scene is smaller than one patch");

    const int tiles_y = stack.grid.height / patch_size;
    const int tiles_x = stack.grid.width / patch_size;
    const int C = stack.bands();
    const int S = patch_size;

    std::vector<Patch> patches;
    patches.reserve(static_cast<std::size_t>(tiles_y) * tiles_x);
    for (int ty = 0; ty < tiles_y; ++ty) {
        for (int tx = 0; tx < tiles_x; ++tx) {
            Patch p;
            p.channels = C;
            p.size = S;
            p.origin_row = ty * S;
            p.origin_col = tx * S;
            p.eo.resize(static_cast<std::size_t>(C) * S * S);
            p.labels.resize(p.plane());
            p.valid.resize(p.plane());
            p.forest.resize(p.plane());
            for (int y = 0; y < S; ++y) {
                for (int x = 0; x < S; ++x) {
                    const int gy = p.origin_row + y;
                    const int gx = p.origin_col + x;
                    const std::size_t li = static_cast<std::size_t>(y) * S + x;
                    const bool in_forest = mask.at(gy, gx);
                    p.forest[li] = in_forest ? 1 : 0;
                    const bool lv = in_forest && labels.valid_at(gy, gx);
                    p.valid[li] = lv ? 1 : 0;
                    p.labels[li] = lv ? labels.value_at(gy, gx) : kNoData;
                    for (int c = 0; c < C; ++c) {
                        const std::size_t ei = (static_cast<std::size_t>(c) * S + y) * S + x;
                        p.eo[ei] = in_forest ? stack.at(c, gy, gx) : kNoData;
                    }
                }
            }
            patches.push_back(std::move(p));
        }
    }
    return patches;
}

std::vector<Patch> filter_patches_dense(const std::vector<Patch>& patches, double min_forest_fraction) {
    std::vector<Patch> kept;
    for (const auto& p : patches)
        if (p.forest_fraction() >= min_forest_fraction) kept.push_back(p);
    return kept;
}

std::vector<Patch> filter_patches_sparse(const std::vector<Patch>& patches) {
    std::vector<Patch> kept;
    for (const auto& p : patches)
        if (p.valid_count() >= 1) kept.push_back(p);
    return kept;
}

PatchSet split_patches(std::vector<Patch> patches, double test_fraction, double val_fraction,
                       std::uint64_t seed) {
    if (patches.size() < 3) throw DataError("split_patches: need at least 3 patches");
    if (test_fraction < 0.0 || val_fraction < 0.0 || test_fraction + val_fraction > 1.0)
        throw ConfigError("split_patches: invalid fractions");

    std::vector<std::size_t> order(patches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "patch_split"));
    rng.shuffle(order);

    const std::size_t n = patches.size();
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * val_fraction));

    PatchSet set;
    set.seed = seed;
    set.test_fraction = test_fraction;
    set.val_fraction = val_fraction;
    for (std::size_t i = 0; i < n; ++i) {
        Patch& p = patches[order[i]];
        if (i < n_test)
            set.test.push_back(std::move(p));
        else if (i < n_test + n_val)
            set.val.push_back(std::move(p));
        else
            set.train.push_back(std::move(p));
    }
    return set;
}

std::string Transform::tag() const {
    switch (kind) {
        case Kind::rot90: return "rot90";
        case Kind::rot180: return "rot180";
        case Kind::rot270: return "rot270";
        case Kind::flip_h: return "flip_h";
        case Kind::flip_v: return "flip_v";
        case Kind::shift:
            return "shift_r" + std::to_string(shift_rows) + "_c" + std::to_string(shift_cols);
    }
    return "?";
}

namespace {

// Source pixel (y_src, x_src) feeding output pixel (y, x).
inline void source_index(const Transform& t, int S, int y, int x, int& ys, int& xs) {
    switch (t.kind) {
        case Transform::Kind::rot90:  // 90 degrees counterclockwise
            ys = x;
            xs = S - 1 - y;
            break;
        case Transform::Kind::rot180:
            ys = S - 1 - y;
            xs = S - 1 - x;
            break;
        case Transform::Kind::rot270:
            ys = S - 1 - x;
            xs = y;
            break;
        case Transform::Kind::flip_h:
            ys = y;
            xs = S - 1 - x;
            break;
        case Transform::Kind::flip_v:
            ys = S - 1 - y;
            xs = x;
            break;
        case Transform::Kind::shift:
            ys = (y - t.shift_rows % S + S) % S;
            xs = (x - t.shift_cols % S + S) % S;
            break;
    }
}

} // namespace

Patch apply_transform(const Patch& patch, const Transform& t) {
    const int S = patch.size;
    Patch out = patch;
    out.augmentation_tag = t.tag();
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            int ys = 0, xs = 0;
            source_index(t, S, y, x, ys, xs);
            const std::size_t di = static_cast<std::size_t>(y) * S + x;
            const std::size_t si = static_cast<std::size_t>(ys) * S + xs;
            out.labels[di] = patch.labels[si];
            out.valid[di] = patch.valid[si];
            out.forest[di] = patch.forest[si];
            for (int c = 0; c < patch.channels; ++c) {
                const std::size_t off = static_cast<std::size_t>(c) * patch.plane();
                out.eo[off + di] = patch.eo[off + si];
            }
        }
    }
    return out;
}

std::vector<Transform> available_transforms(int patch_size, int shift_step) {
    if (patch_size < 1) throw ConfigError("available_transforms: bad patch size");
    if (shift_step < 1) throw ConfigError("available_transforms: shift_step must be >= 1");
    std::vector<Transform> out;
    out.push_back({Transform::Kind::rot90, 0, 0});
    out.push_back({Transform::Kind::rot180, 0, 0});
    out.push_back({Transform::Kind::rot270, 0, 0});
    out.push_back({Transform::Kind::flip_h, 0, 0});
    out.push_back({Transform::Kind::flip_v, 0, 0});
    std::set<int> offsets;
    for (int s = 0; s < patch_size; s += shift_step) offsets.insert(s % patch_size);
    for (int dr : offsets) {
        for (int dc : offsets) {
            if (dr == 0 && dc == 0) continue;
            out.push_back({Transform::Kind::shift, dr, dc});
        }
    }
    return out;
}

std::vector<Patch> augment(const std::vector<Patch>& train_patches, double target_multiplier,
                           std::uint64_t seed, int shift_step) {
    if (train_patches.empty()) throw DataError("augment: empty input");
    check_uniform(train_patches);

    const std::size_t n = train_patches.size();
    const auto transforms = available_transforms(train_patches[0].size, shift_step);
    const std::size_t budget = n * (1 + transforms.size());

    auto target = static_cast<std::size_t>(std::max<long long>(
        static_cast<long long>(n), std::llround(target_multiplier * static_cast<double>(n))));
    target = std::min(target, budget);
    const std::size_t copies = target - n;

    // Seeded choice of (patch, transform) pairs without repetition.
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    pool.reserve(n * transforms.size());
    for (std::size_t t = 0; t < transforms.size(); ++t)
        for (std::size_t p = 0; p < n; ++p) pool.emplace_back(p, t);
    Rng rng(derive_seed(seed, "augment"));
    rng.shuffle(pool);

    std::vector<Patch> out = train_patches;
    out.reserve(target);
    for (std::size_t i = 0; i < copies; ++i) {
        const auto [p, t] = pool[i];
        out.push_back(apply_transform(train_patches[p], transforms[t]));
    }
    std::sort(out.begin(), out.end(), [](const Patch& a, const Patch& b) {
        if (a.origin_row != b.origin_row) return a.origin_row < b.origin_row;
        if (a.origin_col != b.origin_col) return a.origin_col < b.origin_col;
        return a.augmentation_tag < b.augmentation_tag;
    });
    return out;
}

NormalizationStats fit_normalization(const std::vector<Patch>& train_patches) {
    if (train_patches.empty()) throw DataError("fit_normalization: empty input");
    check_uniform(train_patches);
    const int C = train_patches[0].channels;

    NormalizationStats stats;
    stats.mean.assign(C, 0.0);
    stats.stddev.assign(C, 0.0);
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sumsq = 0.0;
        std::size_t count = 0;
        for (const auto& p : train_patches) {
            const float* chan = p.eo.data() + static_cast<std::size_t>(c) * p.plane();
            for (std::size_t i = 0; i < p.plane(); ++i) {
                const float v = chan[i];
                if (p.forest[i] && std::isfinite(v)) {
                    sum += v;
                    sumsq += static_cast<double>(v) * v;
                    ++count;
                }
            }
        }
        if (count == 0) throw DataError("fit_normalization: no forest pixels in channel " + std::to_string(c));
        const double mean = sum / static_cast<double>(count);
        const double var = std::max(0.0, sumsq / static_cast<double>(count) - mean * mean);
        stats.mean[c] = mean;
        stats.stddev[c] = std::max(std::sqrt(var), 1e-6);
    }
    return stats;
}

void apply_normalization(Patch& patch, const NormalizationStats& stats) {
    if (patch.normalized) throw DataError("apply_normalization: patch is already normalized");
    if (stats.mean.size() != static_cast<std::size_t>(patch.channels) ||
        stats.stddev.size() != static_cast<std::size_t>(patch.channels))
        throw DataError("apply_normalization: stats channel count mismatch");
    for (int c = 0; c < patch.channels; ++c) {
        float* chan = patch.eo.data() + static_cast<std::size_t>(c) * patch.plane();
        const double mean = stats.mean[c];
        const double sd = stats.stddev[c];
        for (std::size_t i = 0; i < patch.plane(); ++i) {
            const float v = chan[i];
            // nodata pixels become exactly 0, i.e. the channel mean.
            chan[i] = std::isfinite(v) ? static_cast<float>((v - mean) / sd) : 0.0f;
        }
    }
    patch.normalized = true;
}

NormalizationStats fit_and_apply_normalization(PatchSet& set) {
    NormalizationStats stats = fit_normalization(set.train);
    apply_normalization(set, stats);
    return stats;
}

void apply_normalization(PatchSet& set, const NormalizationStats& stats) {
    for (auto* subset : {&set.train, &set.val, &set.test})
        for (auto& p : *subset) apply_normalization(p, stats);
    set.normalization = stats;
}

namespace {

const char* subset_name(int s) { return s == 0 ? "train" : (s == 1 ? "val" : "test"); }

RawRaster patch_to_raster(const Patch& p) {
    RawRaster r;
    r.grid.width = p.size;
    r.grid.height = p.size;
    r.grid.bands = p.channels + 3;
    r.grid.pixel_size = 10.0;
    r.grid.origin_x = 0.0;
    r.grid.origin_y = 0.0;
    r.data.reserve(r.grid.value_count());
    r.data.insert(r.data.end(), p.eo.begin(), p.eo.end());
    r.data.insert(r.data.end(), p.labels.begin(), p.labels.end());
    for (auto v : p.valid) r.data.push_back(v ? 1.0f : 0.0f);
    for (auto f : p.forest) r.data.push_back(f ? 1.0f : 0.0f);
    for (int c = 0; c < p.channels; ++c) r.band_names.push_back("c" + std::to_string(c));
    r.band_names.emplace_back("labels");
    r.band_names.emplace_back("valid");
    r.band_names.emplace_back("forest");
    return r;
}

Patch raster_to_patch(const RawRaster& r) {
    if (r.grid.bands < 4 || r.grid.width != r.grid.height)
        throw DataError("patch raster must be square with at least 4 bands");
    Patch p;
    p.channels = r.grid.bands - 3;
    p.size = r.grid.width;
    const std::size_t plane = p.plane();
    p.eo.assign(r.data.begin(), r.data.begin() + static_cast<std::ptrdiff_t>(p.channels * plane));
    p.labels.assign(r.data.begin() + static_cast<std::ptrdiff_t>(p.channels * plane),
                    r.data.begin() + static_cast<std::ptrdiff_t>((p.channels + 1) * plane));
    p.valid.resize(plane);
    p.forest.resize(plane);
    const float* valid = r.data.data() + (p.channels + 1) * plane;
    const float* forest = r.data.data() + (p.channels + 2) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
        p.valid[i] = valid[i] != 0.0f ? 1 : 0;
        p.forest[i] = forest[i] != 0.0f ? 1 : 0;
    }
    return p;
}

} // namespace

void save_patchset(const PatchSet& set, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = set.seed;
    manifest["test_fraction"] = set.test_fraction;
    manifest["val_fraction"] = set.val_fraction;
    manifest["counts"] = {{"train", set.train.size()}, {"val", set.val.size()}, {"test", set.test.size()}};
    manifest["normalization"] = {{"mean", set.normalization.mean}, {"stddev", set.normalization.stddev}};
    {
        std::vector<std::string> tags;
        if (!set.train.empty())
            for (const auto& t : available_transforms(set.train[0].size)) tags.push_back(t.tag());
        manifest["transforms"] = tags;
    }

    nlohmann::json entries = nlohmann::json::array();
    std::size_t index = 0;
    const std::vector<Patch>* subsets[3] = {&set.train, &set.val, &set.test};
    for (int s = 0; s < 3; ++s) {
        for (const auto& p : *subsets[s]) {
            char name[32];
            std::snprintf(name, sizeof name, "patch_%05zu", index);
            save_raster(patch_to_raster(p), dir / name);
            entries.push_back({{"file", name},
                               {"subset", subset_name(s)},
                               {"origin_row", p.origin_row},
                               {"origin_col", p.origin_col},
                               {"tag", p.augmentation_tag},
                               {"normalized", p.normalized}});
            ++index;
        }
    }
    manifest["patches"] = std::move(entries);

    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write patch manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

PatchSet load_patchset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw DataError("missing patch manifest: " + (dir / "manifest.json").string());
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt patch manifest: ") + e.what());
    }

    PatchSet set;
    set.seed = manifest.at("seed").get<std::uint64_t>();
    set.test_fraction = manifest.at("test_fraction").get<double>();
    set.val_fraction = manifest.at("val_fraction").get<double>();
    set.normalization.mean = manifest.at("normalization").at("mean").get<std::vector<double>>();
    set.normalization.stddev = manifest.at("normalization").at("stddev").get<std::vector<double>>();

    for (const auto& e : manifest.at("patches")) {
        Patch p = raster_to_patch(load_raster(dir / e.at("file").get<std::string>()));
        p.origin_row = e.at("origin_row").get<int>();
        p.origin_col = e.at("origin_col").get<int>();
        p.augmentation_tag = e.at("tag").get<std::string>();
        p.normalized = e.at("normalized").get<bool>();
        const auto subset = e.at("subset").get<std::string>();
        if (subset == "train")
            set.train.push_back(std::move(p));
        else if (subset == "val")
            set.val.push_back(std::move(p));
        else if (subset == "test")
            set.test.push_back(std::move(p));
        else
            throw DataError("patch manifest: unknown subset '" + subset + "'");
    }

    const auto& counts = manifest.at("counts");
    if (set.train.size() != counts.at("train").get<std::size_t>() ||
        set.val.size() != counts.at("val").get<std::size_t>() ||
        set.test.size() != counts.at("test").get<std::size_t>())
        throw DataError("patch manifest: counts do not match patch entries");
    return set;
}

std::string patchset_fingerprint(const PatchSet& set) {
    std::string blob;
    blob += "seed=" + std::to_string(set.seed);
    blob += ";tf=" + format_double(set.test_fraction);
    blob += ";vf=" + format_double(set.val_fraction);
    blob += ";counts=" + std::to_string(set.train.size()) + "," + std::to_string(set.val.size()) + "," +
            std::to_string(set.test.size());
    blob += ";norm=";
    for (std::size_t c = 0; c < set.normalization.mean.size(); ++c)
        blob += format_double(set.normalization.mean[c]) + "/" + format_double(set.normalization.stddev[c]) + ",";
    const std::vector<Patch>* subsets[3] = {&set.train, &set.val, &set.test};
    for (int s = 0; s < 3; ++s) {
        blob += ";";
        blob += subset_name(s);
        blob += ":";
        for (const auto& p : *subsets[s])
            blob += std::to_string(p.origin_row) + "," + std::to_string(p.origin_col) + "," +
                    p.augmentation_tag + ";";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a:%016llx", static_cast<unsigned long long>(fnv1a64(blob)));
    return buf;
}

} // namespace ft
