#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "ft/error.hpp"
#include "ft/patch.hpp"
#include "ft/rng.hpp"
#include "test_util.hpp"

using namespace ft;

namespace {

// Small synthetic scene: values encode (band, row, col) so transforms are
// easy to predict.
struct MiniScene {
    EOStack stack;
    SparseLabelRaster labels;
    ForestMask mask;
};

MiniScene mini_scene(int h, int w, int bands = 2) {
    MiniScene s;
    s.stack.grid = RasterGrid{w, h, bands, 10.0, 0.0, 10.0 * h};
    s.stack.data.resize(s.stack.grid.value_count());
    for (int b = 0; b < bands; ++b) {
        s.stack.band_names.push_back("s2_b" + std::to_string(b));
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                s.stack.at(b, y, x) = static_cast<float>(100 * b + 10 * y + x);
    }
    s.labels.grid = s.mask.grid = RasterGrid{w, h, 1, 10.0, 0.0, 10.0 * h};
    s.labels.values.assign(s.labels.grid.pixel_count(), 5.0f);
    s.labels.valid.assign(s.labels.grid.pixel_count(), 1);
    s.mask.mask.assign(s.mask.grid.pixel_count(), 1);
    return s;
}

Patch patch_of(const MiniScene& s, int size) {
    auto tiles = tile_scene(s.stack, s.labels, s.mask, size);
    REQUIRE(!tiles.empty());
    return tiles.front();
}

std::vector<Patch> dummy_patches(int n, int size = 4) {
    MiniScene s = mini_scene(size, size);
    Patch proto = patch_of(s, size);
    std::vector<Patch> out(n, proto);
    for (int i = 0; i < n; ++i) {
        out[i].origin_row = i * size;  // unique origins
        out[i].origin_col = 0;
    }
    return out;
}

} // namespace

TEST_SUITE("patch") {

TEST_CASE("tile_scene cuts row-major full tiles and drops partials") {
    MiniScene s = mini_scene(5, 7);
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 2);
    REQUIRE(tiles.size() == 6);  // 2 rows x 3 cols of full 2x2 tiles
    CHECK(tiles[0].origin_row == 0);
    CHECK(tiles[0].origin_col == 0);
    CHECK(tiles[1].origin_col == 2);
    CHECK(tiles[3].origin_row == 2);
    CHECK(tiles[5].origin_col == 4);
    CHECK(tiles[2].eo_at(0, 0, 0) == 4.0f);   // row 0, col 4
    CHECK(tiles[4].eo_at(1, 1, 1) == 133.0f); // band 1, row 3, col 3
    CHECK(tiles[0].valid_count() == 4);
}

TEST_CASE("non-forest pixels become nodata and invalid") {
    MiniScene s = mini_scene(2, 2);
    s.mask.mask = {1, 0, 0, 1};
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 2);
    REQUIRE(tiles.size() == 1);
    const Patch& p = tiles[0];
    CHECK(p.forest_at(0, 0));
    CHECK(!p.forest_at(0, 1));
    CHECK(std::isnan(p.eo_at(0, 0, 1)));
    CHECK(std::isnan(p.eo_at(1, 1, 0)));
    CHECK(!p.valid_at(0, 1));
    CHECK(p.valid_at(1, 1));
    CHECK(p.forest_fraction() == doctest::Approx(0.5));
}

TEST_CASE("grid mismatch is rejected") {
    MiniScene s = mini_scene(4, 4);
    MiniScene other = mini_scene(4, 6);
    CHECK_THROWS_AS(tile_scene(s.stack, other.labels, s.mask, 2), DataError);
}

TEST_CASE("dense filter keeps patches at or above the forest fraction") {
    MiniScene s = mini_scene(2, 4);
    s.mask.mask = {1, 1, 0, 0,
                   1, 1, 0, 1};  // left tile 4/4, right tile 1/4
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 2);
    REQUIRE(tiles.size() == 2);
    CHECK(filter_patches_dense(tiles, 0.20).size() == 2);
    CHECK(filter_patches_dense(tiles, 0.30).size() == 1);
    CHECK(filter_patches_dense(tiles, 1.00).size() == 1);
}

TEST_CASE("sparse filter keeps patches containing a valid label") {
    MiniScene s = mini_scene(2, 4);
    s.labels.valid = {0, 0, 0, 0,
                      1, 0, 0, 0};  // only left tile holds a label
    s.labels.values[4] = 12.0f;
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 2);
    auto kept = filter_patches_sparse(tiles);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].origin_col == 0);
}

TEST_CASE("split arithmetic: 614 patches -> 307 test / 61 val / 246 train") {
    PatchSet set = split_patches(dummy_patches(614), 0.5, 0.1, 3);
    CHECK(set.test.size() == 307);
    CHECK(set.val.size() == 61);
    CHECK(set.train.size() == 246);
    CHECK(set.seed == 3);

    // Deterministic and disjoint by origin.
    PatchSet again = split_patches(dummy_patches(614), 0.5, 0.1, 3);
    std::set<int> train_origins, other;
    for (const auto& p : set.train) train_origins.insert(p.origin_row);
    for (const auto& p : set.val) other.insert(p.origin_row);
    for (const auto& p : set.test) other.insert(p.origin_row);
    CHECK(train_origins.size() + other.size() == 614);
    REQUIRE(again.train.size() == set.train.size());
    for (std::size_t i = 0; i < set.train.size(); ++i)
        CHECK(again.train[i].origin_row == set.train[i].origin_row);
}

TEST_CASE("split rejects undersized sets") {
    CHECK_THROWS_AS(split_patches(dummy_patches(2), 0.5, 0.1, 0), DataError);
}

TEST_CASE("rot90 composes to rot180 and flips are involutions") {
    MiniScene s = mini_scene(4, 4);
    const Patch p = patch_of(s, 4);

    const Patch r90 = apply_transform(p, {Transform::Kind::rot90, 0, 0});
    const Patch r180_direct = apply_transform(p, {Transform::Kind::rot180, 0, 0});
    const Patch r180_composed = apply_transform(r90, {Transform::Kind::rot90, 0, 0});
    CHECK(r180_direct.eo == r180_composed.eo);
    CHECK(r180_direct.labels == r180_composed.labels);

    for (auto kind : {Transform::Kind::flip_h, Transform::Kind::flip_v}) {
        const Patch once = apply_transform(p, {kind, 0, 0});
        const Patch twice = apply_transform(once, {kind, 0, 0});
        CHECK(twice.eo == p.eo);
        CHECK(once.eo != p.eo);
    }
}

TEST_CASE("transforms permute, never invent, pixel values") {
    MiniScene s = mini_scene(4, 4);
    s.mask.mask[5] = 0;  // one nodata pixel in the middle
    const Patch p = patch_of(s, 4);
    for (const Transform& t : available_transforms(4, 2)) {
        const Patch q = apply_transform(p, t);
        CHECK(q.size == p.size);
        CHECK(q.channels == p.channels);
        CHECK(q.augmentation_tag == t.tag());
        // NaN-tolerant multiset comparison via forest mask + finite values.
        std::multiset<float> a, b;
        for (std::size_t i = 0; i < p.eo.size(); ++i)
            if (!std::isnan(p.eo[i])) a.insert(p.eo[i]);
        for (std::size_t i = 0; i < q.eo.size(); ++i)
            if (!std::isnan(q.eo[i])) b.insert(q.eo[i]);
        CHECK(a == b);
        CHECK(std::count(q.forest.begin(), q.forest.end(), 0) == 1);
    }
}

TEST_CASE("rot90 maps coordinates as expected") {
    MiniScene s = mini_scene(4, 4, 1);
    const Patch p = patch_of(s, 4);
    const Patch q = apply_transform(p, {Transform::Kind::rot90, 0, 0});
    // A counterclockwise quarter turn sends input (x, S-1-y) to output (y, x).
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(q.eo_at(0, y, x) == p.eo_at(0, x, 4 - 1 - y));
}

TEST_CASE("shift wraps circularly") {
    MiniScene s = mini_scene(4, 4, 1);
    const Patch p = patch_of(s, 4);
    const Patch q = apply_transform(p, {Transform::Kind::shift, 2, 0});
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) CHECK(q.eo_at(0, (y + 2) % 4, x) == p.eo_at(0, y, x));
}

TEST_CASE("available_transforms enumerates rotations, flips and shifts") {
    const auto ts = available_transforms(4, 2);
    // 5 rigid transforms + shifts (dr, dc) in {0,2}^2 minus the identity.
    CHECK(ts.size() == 5 + 3);
    std::set<std::string> tags;
    for (const auto& t : ts) tags.insert(t.tag());
    CHECK(tags.size() == ts.size());  // tags are unique

    const auto big = available_transforms(256, 32);
    CHECK(big.size() == 5 + 63);  // 8x8 shift lattice minus identity
}

TEST_CASE("augment hits the target count exactly: 246 -> 1433") {
    auto train = dummy_patches(246, 4);
    const double mult = 1433.0 / 246.0;
    auto out = augment(train, mult, 11, 2);
    CHECK(out.size() == 1433);

    // Originals all survive, tags unique per origin.
    std::set<std::pair<int, std::string>> seen;
    std::size_t originals = 0;
    for (const auto& p : out) {
        CHECK(seen.insert({p.origin_row, p.augmentation_tag}).second);
        if (p.augmentation_tag == "orig") ++originals;
    }
    CHECK(originals == 246);
}

TEST_CASE("augment is capped by the distinct-transform budget") {
    auto train = dummy_patches(2, 4);
    // 4x4 patches, step 2: budget = 2 * (1 + 8) = 18.
    auto out = augment(train, 100.0, 5, 2);
    CHECK(out.size() == 18);
    auto none = augment(train, 1.0, 5, 2);
    CHECK(none.size() == 2);
}

TEST_CASE("augment is deterministic in the seed") {
    auto train = dummy_patches(5, 4);
    auto a = augment(train, 3.0, 9, 2);
    auto b = augment(train, 3.0, 9, 2);
    auto c = augment(train, 3.0, 10, 2);
    REQUIRE(a.size() == b.size());
    bool same = true, diff = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same &= a[i].augmentation_tag == b[i].augmentation_tag &&
                a[i].origin_row == b[i].origin_row;
    }
    CHECK(same);
    if (a.size() == c.size())
        for (std::size_t i = 0; i < a.size(); ++i)
            diff |= a[i].augmentation_tag != c[i].augmentation_tag ||
                    a[i].origin_row != c[i].origin_row;
    CHECK(diff);
}

TEST_CASE("normalization: forest pixels standardized, nodata exactly 0") {
    MiniScene s = mini_scene(4, 4);
    s.mask.mask[3] = 0;
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 4);
    NormalizationStats stats = fit_normalization(tiles);
    REQUIRE(stats.mean.size() == 2);

    Patch p = tiles[0];
    apply_normalization(p, stats);
    CHECK(p.normalized);
    CHECK(p.eo[3] == 0.0f);  // nodata pixel

    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            if (p.forest_at(y, x)) {
                sum += p.eo_at(0, y, x);
                sq += p.eo_at(0, y, x) * p.eo_at(0, y, x);
                ++n;
            }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(1e-5));

    CHECK_THROWS_AS(apply_normalization(p, stats), DataError);  // double apply
}

TEST_CASE("patchset save/load round-trip preserves the fingerprint") {
    ft_test::TempDir tmp("patchset_rt");
    MiniScene s = mini_scene(8, 8);
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 4);
    PatchSet set = split_patches(tiles, 0.25, 0.25, 4);
    fit_and_apply_normalization(set);
    const std::string fp = patchset_fingerprint(set);

    save_patchset(set, tmp / "ps");
    const PatchSet r = load_patchset(tmp / "ps");
    CHECK(r.train.size() == set.train.size());
    CHECK(r.val.size() == set.val.size());
    CHECK(r.test.size() == set.test.size());
    CHECK(r.normalization == set.normalization);
    CHECK(r.seed == set.seed);
    CHECK(patchset_fingerprint(r) == fp);
    REQUIRE(!r.train.empty());
    CHECK(r.train[0].eo == set.train[0].eo);
    CHECK(r.train[0].normalized);
}

TEST_CASE("fingerprint shifts with content") {
    MiniScene s = mini_scene(8, 8);
    auto tiles = tile_scene(s.stack, s.labels, s.mask, 4);
    PatchSet a = split_patches(tiles, 0.25, 0.25, 4);
    PatchSet b = split_patches(tiles, 0.25, 0.25, 5);
    CHECK(patchset_fingerprint(a) != patchset_fingerprint(b));
}

} // TEST_SUITE
