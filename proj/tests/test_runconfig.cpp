#include <doctest.h>

#include <fstream>
#include <string>

#include <json.hpp>

#include "ft/error.hpp"
#include "ft/runconfig.hpp"
#include "ft/synth.hpp"
#include "test_util.hpp"

using namespace ft;

namespace {

std::filesystem::path write_json(const ft_test::TempDir& tmp, const std::string& name,
                                 const std::string& body) {
    const auto p = tmp.path() / name;
    std::ofstream f(p, std::ios::binary);
    f << body;
    return p;
}

EOStack stack14() {
    EOStack s;
    s.grid.width = 2;
    s.grid.height = 2;
    const SensorModel sensor = SensorModel::default14();
    s.grid.bands = static_cast<int>(sensor.channels.size());
    s.data.assign(s.grid.value_count(), 0.0f);
    for (const auto& c : sensor.channels) s.band_names.push_back(c.name);
    return s;
}

} // namespace

TEST_SUITE("runconfig") {

TEST_CASE("default construction covers every registered key") {
    const RunConfig cfg;
    CHECK(cfg.seed() == 0);
    CHECK(cfg.str("out_dir") == "out");
    CHECK(cfg.str("channels") == "ms");
    CHECK(cfg.integer("patch_size") == 256);
    CHECK(cfg.number("max_lr") == doctest::Approx(1e-2));
    CHECK(cfg.number("weight_decay") == doctest::Approx(1e-4));
    CHECK(cfg.integer("epochs_pretrain") == 100);
    CHECK(cfg.boolean("freeze_bn_running_stats") == false);
    CHECK(cfg.str("scene_dir").empty());
    CHECK(cfg.has("knn_k"));
    CHECK(!cfg.has("not_a_key"));
}

TEST_CASE("load applies overrides and keeps other defaults") {
    ft_test::TempDir tmp("cfg_load");
    const auto p = write_json(tmp, "c.json",
                              R"({"seed": 42, "grid_width": 128, "max_lr": 0.005, "channels": "s2"})");
    const RunConfig cfg = RunConfig::load(p);
    CHECK(cfg.seed() == 42);
    CHECK(cfg.integer("grid_width") == 128);
    CHECK(cfg.number("max_lr") == doctest::Approx(0.005));
    CHECK(cfg.str("channels") == "s2");
    CHECK(cfg.integer("grid_height") == 512);  // untouched default
}

TEST_CASE("unknown keys and type mismatches are config errors") {
    ft_test::TempDir tmp("cfg_bad");
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "a.json", R"({"grit_width": 3})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "b.json", R"({"grid_width": "wide"})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "c.json", R"({"out_dir": 4})")), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "d.json", R"({"freeze_bn_running_stats": 1})")),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "e.json", R"([1, 2, 3])")), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "f.json", "{not json")), ConfigError);
    CHECK_THROWS_AS(RunConfig::load(tmp / "missing.json"), ConfigError);

    RunConfig cfg;
    CHECK_THROWS_AS(cfg.set("nope", 1), ConfigError);
    CHECK_NOTHROW(cfg.set("seed", 7));
    CHECK(cfg.seed() == 7);
}

TEST_CASE("integer keys accept whole-valued floats only") {
    ft_test::TempDir tmp("cfg_int");
    const RunConfig ok = RunConfig::load(write_json(tmp, "a.json", R"({"grid_width": 128.0})"));
    CHECK(ok.integer("grid_width") == 128);
    CHECK_THROWS_AS(RunConfig::load(write_json(tmp, "b.json", R"({"grid_width": 128.5})")), ConfigError);
}

TEST_CASE("write_resolved emits the full effective map and round-trips") {
    ft_test::TempDir tmp("cfg_resolved");
    RunConfig cfg;
    cfg.set("seed", 99);
    cfg.set("target_mean_height_m", 18.5);
    const auto p = tmp.path() / "resolved.json";
    cfg.write_resolved(p);

    std::ifstream f(p);
    nlohmann::json j;
    f >> j;
    CHECK(j.is_object());
    CHECK(j.size() == cfg.values().size());
    CHECK(j["seed"].get<long long>() == 99);
    CHECK(j["target_mean_height_m"].get<double>() == doctest::Approx(18.5));
    CHECK(j.contains("predict_window"));

    const RunConfig back = RunConfig::load(p);
    CHECK(back.values() == cfg.values());
}

TEST_CASE("synth builder maps keys and scales the domain shift") {
    RunConfig cfg;
    cfg.set("seed", 3);
    cfg.set("grid_width", 96);
    cfg.set("grid_height", 64);
    cfg.set("n_plots", 50);
    cfg.set("source_mean_height_m", 9.0);
    cfg.set("target_mean_height_m", 17.0);
    cfg.set("forest_fraction", 0.6);

    const SynthConfig s = synth_config(cfg);
    CHECK(s.width == 96);
    CHECK(s.height == 64);
    CHECK(s.n_plots == 50);
    CHECK(s.source.mean_height_m == doctest::Approx(9.0));
    CHECK(s.target.mean_height_m == doctest::Approx(17.0));
    CHECK(s.source.forest_fraction == doctest::Approx(0.6));
    CHECK(s.target.forest_fraction == doctest::Approx(0.6));

    // shift scale 1 reproduces the default perturbations exactly.
    const SynthConfig base = SynthConfig::defaults(3);
    REQUIRE(s.target.channel_gains.size() == base.target.channel_gains.size());
    for (std::size_t i = 0; i < base.target.channel_gains.size(); ++i) {
        CHECK(s.target.channel_gains[i] == doctest::Approx(base.target.channel_gains[i]));
        CHECK(s.target.channel_offsets[i] == doctest::Approx(base.target.channel_offsets[i]));
    }

    // shift scale 0 neutralizes the target site; scale 2 doubles the deltas.
    cfg.set("domain_shift_scale", 0.0);
    const SynthConfig s0 = synth_config(cfg);
    for (double g : s0.target.channel_gains) CHECK(g == doctest::Approx(1.0));
    for (double o : s0.target.channel_offsets) CHECK(o == doctest::Approx(0.0));
    for (std::size_t c = 0; c < s0.target.noise_sd_override.size(); ++c)
        CHECK(s0.target.noise_sd_override[c] == doctest::Approx(s0.sensor.channels[c].noise_sd));

    cfg.set("domain_shift_scale", 2.0);
    const SynthConfig s2 = synth_config(cfg);
    for (std::size_t i = 0; i < base.target.channel_gains.size(); ++i) {
        CHECK(s2.target.channel_gains[i] ==
              doctest::Approx(1.0 + 2.0 * (base.target.channel_gains[i] - 1.0)));
        CHECK(s2.target.channel_offsets[i] == doctest::Approx(2.0 * base.target.channel_offsets[i]));
    }
}

TEST_CASE("model/optimizer/pipeline/predict builders") {
    RunConfig cfg;
    cfg.set("seed", 5);
    cfg.set("base_width", 8);
    cfg.set("depth", 3);
    cfg.set("se_reduction", 4);
    const ModelConfig m = model_config(cfg, 9);
    CHECK(m.in_channels == 9);
    CHECK(m.base_width == 8);
    CHECK(m.depth == 3);
    CHECK(m.se_reduction == 4);
    CHECK(m.seed == 5);

    cfg.set("base_width", 6);  // 6 % 4 != 0
    CHECK_THROWS_AS(model_config(cfg, 9), ConfigError);
    cfg.set("base_width", 8);

    cfg.set("epochs_finetune", 12);
    cfg.set("batch_size", 4);
    const OptimizerConfig o = optimizer_config(cfg);
    CHECK(o.epochs_finetune == 12);
    CHECK(o.batch_size == 4);
    CHECK(o.seed == 5);
    cfg.set("warmup_fraction", 1.5);
    CHECK_THROWS_AS(optimizer_config(cfg), ConfigError);
    cfg.set("warmup_fraction", 0.3);

    cfg.set("patch_test_fraction", 0.4);
    cfg.set("finetune_patch_test_fraction", 0.0);
    cfg.set("finetune_augment_multiplier", 3.0);
    const PipelineConfig dense = dense_pipeline_config(cfg);
    const PipelineConfig sparse = sparse_pipeline_config(cfg);
    CHECK(dense.test_fraction == doctest::Approx(0.4));
    CHECK(sparse.test_fraction == doctest::Approx(0.0));
    CHECK(sparse.val_fraction == doctest::Approx(cfg.number("finetune_patch_val_fraction")));
    CHECK(sparse.augment_multiplier == doctest::Approx(3.0));
    CHECK(dense.patch_size == sparse.patch_size);
    CHECK(dense.seed == 5);

    cfg.set("predict_window", 128);
    cfg.set("predict_margin", 16);
    const PredictOptions p = predict_options(cfg);
    CHECK(p.window == 128);
    CHECK(p.margin == 16);
}

TEST_CASE("channel subsets on the default sensor layout") {
    const EOStack s = stack14();

    const auto ms = channel_subset_indices(s, "ms");
    REQUIRE(ms.size() == 14);
    for (int i = 0; i < 14; ++i) CHECK(ms[i] == i);

    const auto s2 = channel_subset_indices(s, "s2");
    REQUIRE(s2.size() == 7);
    for (int i : s2) CHECK(s.band_names[i].rfind("s2_", 0) == 0);

    const auto s1s2 = channel_subset_indices(s, "s1s2");
    REQUIRE(s1s2.size() == 9);
    for (int i : s1s2) {
        const bool s1 = s.band_names[i].rfind("s1_", 0) == 0;
        const bool s2p = s.band_names[i].rfind("s2_", 0) == 0;
        CHECK((s1 || s2p));
    }

    CHECK_THROWS_AS(channel_subset_indices(s, "s3"), ConfigError);

    EOStack unnamed = s;
    for (auto& n : unnamed.band_names) n = "x_" + n;
    CHECK_THROWS_AS(channel_subset_indices(unnamed, "s2"), DataError);
}

} // TEST_SUITE
