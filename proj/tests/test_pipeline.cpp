#include <doctest.h>

#include <cmath>
#include <cstddef>

#include "ft/error.hpp"
#include "ft/pipeline.hpp"
#include "ft/synth.hpp"

using namespace ft;

namespace {

std::pair<Scene, Scene> small_pair(std::uint64_t seed) {
    SynthConfig cfg = SynthConfig::defaults(seed);
    cfg.width = 64;
    cfg.height = 64;
    cfg.n_plots = 30;
    return gen_site_pair(cfg);
}

PipelineConfig small_cfg() {
    PipelineConfig p;
    p.patch_size = 16;
    p.min_forest_fraction = 0.20;
    p.test_fraction = 0.25;
    p.val_fraction = 0.25;
    p.augment_multiplier = 1.0;
    p.seed = 11;
    return p;
}

std::size_t total_patches(const PatchSet& s) {
    return s.train.size() + s.val.size() + s.test.size();
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("dense pipeline output is normalized with split bookkeeping") {
    const auto [source, target] = small_pair(1);
    const PipelineConfig cfg = small_cfg();
    const PatchSet set = build_dense_patchset(source.stack, source.truth, source.mask, cfg);

    REQUIRE(!set.train.empty());
    const std::size_t n = total_patches(set);
    CHECK(n <= 16);  // 64/16 grid of tiles, minus filtered ones
    CHECK(set.test.size() == static_cast<std::size_t>(std::floor(static_cast<double>(n) * 0.25)));
    CHECK(set.val.size() == static_cast<std::size_t>(std::floor(static_cast<double>(n) * 0.25)));
    CHECK(set.seed == cfg.seed);
    CHECK(set.test_fraction == doctest::Approx(0.25));
    CHECK(set.val_fraction == doctest::Approx(0.25));

    REQUIRE(set.normalization.mean.size() == static_cast<std::size_t>(source.stack.bands()));
    for (double sd : set.normalization.stddev) CHECK(sd > 0.0);
    for (const auto* subset : {&set.train, &set.val, &set.test})
        for (const auto& p : *subset) {
            CHECK(p.normalized);
            CHECK(p.channels == source.stack.bands());
            CHECK(p.size == cfg.patch_size);
            CHECK(p.forest_fraction() >= cfg.min_forest_fraction);
        }

    // Train labels are the dense reference: valid exactly on forest pixels.
    for (const auto& p : set.train) {
        std::size_t forest = 0;
        for (std::size_t i = 0; i < p.plane(); ++i) forest += p.forest[i] ? 1 : 0;
        CHECK(p.valid_count() == forest);
    }
}

TEST_CASE("dense normalization standardizes the training forest pixels") {
    const auto [source, target] = small_pair(2);
    const PatchSet set = build_dense_patchset(source.stack, source.truth, source.mask, small_cfg());

    const int C = set.train[0].channels;
    for (int c = 0; c < C; ++c) {
        double sum = 0.0, sumsq = 0.0;
        std::size_t count = 0;
        for (const auto& p : set.train)
            for (std::size_t i = 0; i < p.plane(); ++i)
                if (p.forest[i]) {
                    const double v = p.eo[static_cast<std::size_t>(c) * p.plane() + i];
                    sum += v;
                    sumsq += v * v;
                    ++count;
                }
        REQUIRE(count > 0);
        const double mean = sum / static_cast<double>(count);
        const double var = sumsq / static_cast<double>(count) - mean * mean;
        CHECK(std::abs(mean) < 1e-3);
        CHECK(std::sqrt(std::max(0.0, var)) == doctest::Approx(1.0).epsilon(5e-3));
    }
}

TEST_CASE("dense augmentation multiplies the training subset only") {
    const auto [source, target] = small_pair(3);
    PipelineConfig cfg = small_cfg();
    const PatchSet base = build_dense_patchset(source.stack, source.truth, source.mask, cfg);

    cfg.augment_multiplier = 2.0;
    const PatchSet aug = build_dense_patchset(source.stack, source.truth, source.mask, cfg);
    CHECK(aug.train.size() == 2 * base.train.size());
    CHECK(aug.val.size() == base.val.size());
    CHECK(aug.test.size() == base.test.size());
    // Augmented copies are normalized too.
    for (const auto& p : aug.train) CHECK(p.normalized);
}

TEST_CASE("sparse pipeline stays unnormalized and keeps every plot") {
    const auto [source, target] = small_pair(4);
    PipelineConfig cfg = small_cfg();
    cfg.test_fraction = 0.0;
    cfg.val_fraction = 0.25;
    const PatchSet set = build_sparse_patchset(target.stack, target.plots, target.mask, cfg);

    CHECK(set.normalization.mean.empty());
    CHECK(set.test.empty());
    REQUIRE(!set.train.empty());
    std::size_t valid = 0;
    for (const auto* subset : {&set.train, &set.val, &set.test})
        for (const auto& p : *subset) {
            CHECK(!p.normalized);
            CHECK(p.valid_count() >= 1);  // sparse filter keeps plot patches only
            valid += p.valid_count();
        }
    // Every tile is covered, every plot center lands in exactly one tile.
    CHECK(valid == target.plots.size());
}

TEST_CASE("sparse labels match the plot heights") {
    const auto [source, target] = small_pair(5);
    PipelineConfig cfg = small_cfg();
    cfg.val_fraction = 0.0;
    cfg.test_fraction = 0.0;
    const PatchSet set = build_sparse_patchset(target.stack, target.plots, target.mask, cfg);

    for (const auto& plot : target.plots) {
        const auto px = target.stack.grid.world_to_pixel(plot.x, plot.y);
        REQUIRE(px.has_value());
        bool found = false;
        for (const auto& p : set.train) {
            const int r = px->row - p.origin_row;
            const int c = px->col - p.origin_col;
            if (r < 0 || c < 0 || r >= p.size || c >= p.size) continue;
            REQUIRE(p.valid_at(r, c));
            CHECK(p.label_at(r, c) == doctest::Approx(plot.height_m));
            found = true;
        }
        CHECK(found);
    }
}

TEST_CASE("pipelines are deterministic in the seed") {
    const auto [source, target] = small_pair(6);
    const PipelineConfig cfg = small_cfg();

    const PatchSet a = build_dense_patchset(source.stack, source.truth, source.mask, cfg);
    const PatchSet b = build_dense_patchset(source.stack, source.truth, source.mask, cfg);
    CHECK(patchset_fingerprint(a) == patchset_fingerprint(b));

    PipelineConfig other = cfg;
    other.seed = cfg.seed + 1;
    const PatchSet c = build_dense_patchset(source.stack, source.truth, source.mask, other);
    CHECK(patchset_fingerprint(a) != patchset_fingerprint(c));

    const PatchSet sa = build_sparse_patchset(target.stack, target.plots, target.mask, cfg);
    const PatchSet sb = build_sparse_patchset(target.stack, target.plots, target.mask, cfg);
    CHECK(patchset_fingerprint(sa) == patchset_fingerprint(sb));
}

TEST_CASE("empty pipelines are data errors") {
    const auto [source, target] = small_pair(7);
    PipelineConfig cfg = small_cfg();
    cfg.min_forest_fraction = 1.01;  // nothing can pass
    CHECK_THROWS_AS(build_dense_patchset(source.stack, source.truth, source.mask, cfg), DataError);

    const PlotTable none;
    CHECK_THROWS_AS(build_sparse_patchset(target.stack, none, target.mask, small_cfg()), DataError);
}

} // TEST_SUITE
