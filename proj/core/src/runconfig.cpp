#include "ft/runconfig.hpp"

#include <cmath>
#include <fstream>

#include "ft/error.hpp"

namespace ft {

namespace {

enum class KeyType { number, integer, boolean, text };

struct KeyDef {
    const char* name;
    KeyType type;
    nlohmann::json def;
};

// The full flat key registry: every module parameter plus IO paths.
const std::vector<KeyDef>& registry() {
    static const std::vector<KeyDef> keys = {
        // general
        {"seed", KeyType::integer, 0},
        {"out_dir", KeyType::text, "out"},
        {"channels", KeyType::text, "ms"},

        // scene IO
        {"source_dir", KeyType::text, "out/source"},
        {"target_dir", KeyType::text, "out/target"},
        {"scene_dir", KeyType::text, ""},  // predict input; empty = target_dir
        {"checkpoint", KeyType::text, ""},
        {"finetuned_checkpoint", KeyType::text, ""},

        // synth
        {"grid_width", KeyType::integer, 512},
        {"grid_height", KeyType::integer, 512},
        {"pixel_size", KeyType::number, 10.0},
        {"n_plots", KeyType::integer, 1064},
        {"source_mean_height_m", KeyType::number, 10.8},
        {"source_height_spread_m", KeyType::number, 4.0},
        {"target_mean_height_m", KeyType::number, 15.0},
        {"target_height_spread_m", KeyType::number, 7.0},
        {"correlation_length_px", KeyType::number, 12.0},
        {"forest_fraction", KeyType::number, 0.7},
        {"domain_shift_scale", KeyType::number, 1.0},

        // model
        {"base_width", KeyType::integer, 32},
        {"depth", KeyType::integer, 4},
        {"se_reduction", KeyType::integer, 8},

        // patch pipeline
        {"patch_size", KeyType::integer, 256},
        {"min_forest_fraction", KeyType::number, 0.20},
        {"patch_test_fraction", KeyType::number, 0.5},
        {"patch_val_fraction", KeyType::number, 0.1},
        {"augment_multiplier", KeyType::number, 4.0},
        {"shift_step", KeyType::integer, 32},
        {"finetune_patch_test_fraction", KeyType::number, 0.0},
        {"finetune_patch_val_fraction", KeyType::number, 0.1},
        {"finetune_augment_multiplier", KeyType::number, 1.0},

        // optimizer
        {"max_lr", KeyType::number, 1e-2},
        {"weight_decay", KeyType::number, 1e-4},
        {"beta1", KeyType::number, 0.9},
        {"beta2", KeyType::number, 0.999},
        {"epsilon", KeyType::number, 1e-8},
        {"batch_size", KeyType::integer, 8},
        {"epochs_pretrain", KeyType::integer, 100},
        {"epochs_finetune", KeyType::integer, 5},
        {"warmup_fraction", KeyType::number, 0.3},
        {"div_factor", KeyType::number, 25.0},
        {"final_div_factor", KeyType::number, 1e4},
        {"freeze_bn_running_stats", KeyType::boolean, false},

        // prediction
        {"predict_window", KeyType::integer, 256},
        {"predict_margin", KeyType::integer, 64},

        // baselines
        {"knn_k", KeyType::integer, 5},
        {"knn_weighting", KeyType::text, "inverse_distance"},

        // experiment scenarios
        {"scenario_fraction", KeyType::number, 0.05},
        {"censor_low_m", KeyType::number, 10.0},
        {"censor_high_m", KeyType::number, 25.0},
    };
    return keys;
}

const KeyDef* find_key(const std::string& name) {
    for (const auto& k : registry())
        if (name == k.name) return &k;
    return nullptr;
}

void check_type(const KeyDef& def, const nlohmann::json& v) {
    switch (def.type) {
        case KeyType::number:
            if (!v.is_number()) throw ConfigError("config key '" + std::string(def.name) + "' must be a number");
            break;
        case KeyType::integer:
            if (!(v.is_number_integer() ||
                  (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())))
                throw ConfigError("config key '" + std::string(def.name) + "' must be an integer");
            break;
        case KeyType::boolean:
            if (!v.is_boolean()) throw ConfigError("config key '" + std::string(def.name) + "' must be a boolean");
            break;
        case KeyType::text:
            if (!v.is_string()) throw ConfigError("config key '" + std::string(def.name) + "' must be a string");
            break;
    }
}

} // namespace

RunConfig::RunConfig() {
    for (const auto& k : registry()) values_[k.name] = k.def;
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config file must hold a flat JSON object");

    RunConfig cfg;
    for (const auto& [key, value] : j.items()) cfg.set(key, value);
    return cfg;
}

void RunConfig::set(const std::string& key, const nlohmann::json& value) {
    const KeyDef* def = find_key(key);
    if (!def) throw ConfigError("unknown config key '" + key + "'");
    check_type(*def, value);
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

double RunConfig::number(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get<double>();
}

long long RunConfig::integer(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return static_cast<long long>(it->second.get<double>());
}

bool RunConfig::boolean(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get<bool>();
}

std::string RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second.get<std::string>();
}

void RunConfig::write_resolved(const std::filesystem::path& path) const {
    nlohmann::json j(values_);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write resolved config: " + path.string());
    out << j.dump(2) << '\n';
}

SynthConfig synth_config(const RunConfig& cfg) {
    SynthConfig s = SynthConfig::defaults(cfg.seed());
    s.width = static_cast<int>(cfg.integer("grid_width"));
    s.height = static_cast<int>(cfg.integer("grid_height"));
    s.pixel_size = cfg.number("pixel_size");
    s.n_plots = static_cast<int>(cfg.integer("n_plots"));
    s.source.mean_height_m = cfg.number("source_mean_height_m");
    s.source.height_spread_m = cfg.number("source_height_spread_m");
    s.target.mean_height_m = cfg.number("target_mean_height_m");
    s.target.height_spread_m = cfg.number("target_height_spread_m");
    s.source.correlation_length_px = s.target.correlation_length_px = cfg.number("correlation_length_px");
    s.source.forest_fraction = s.target.forest_fraction = cfg.number("forest_fraction");
    const double shift = cfg.number("domain_shift_scale");
    for (auto& g : s.target.channel_gains) g = 1.0 + shift * (g - 1.0);
    for (auto& o : s.target.channel_offsets) o *= shift;
    for (std::size_t c = 0; c < s.target.noise_sd_override.size(); ++c) {
        const double base = s.sensor.channels[c].noise_sd;
        s.target.noise_sd_override[c] = base + shift * (s.target.noise_sd_override[c] - base);
    }
    return s;
}

ModelConfig model_config(const RunConfig& cfg, int in_channels) {
    ModelConfig m;
    m.in_channels = in_channels;
    m.base_width = static_cast<int>(cfg.integer("base_width"));
    m.depth = static_cast<int>(cfg.integer("depth"));
    m.se_reduction = static_cast<int>(cfg.integer("se_reduction"));
    m.seed = cfg.seed();
    m.validate();
    return m;
}

OptimizerConfig optimizer_config(const RunConfig& cfg) {
    OptimizerConfig o;
    o.max_lr = cfg.number("max_lr");
    o.weight_decay = cfg.number("weight_decay");
    o.beta1 = cfg.number("beta1");
    o.beta2 = cfg.number("beta2");
    o.epsilon = cfg.number("epsilon");
    o.batch_size = static_cast<int>(cfg.integer("batch_size"));
    o.epochs_pretrain = static_cast<int>(cfg.integer("epochs_pretrain"));
    o.epochs_finetune = static_cast<int>(cfg.integer("epochs_finetune"));
    o.warmup_fraction = cfg.number("warmup_fraction");
    o.div_factor = cfg.number("div_factor");
    o.final_div_factor = cfg.number("final_div_factor");
    o.freeze_bn_running_stats = cfg.boolean("freeze_bn_running_stats");
    o.seed = cfg.seed();
    o.validate();
    return o;
}

PipelineConfig dense_pipeline_config(const RunConfig& cfg) {
    PipelineConfig p;
    p.patch_size = static_cast<int>(cfg.integer("patch_size"));
    p.min_forest_fraction = cfg.number("min_forest_fraction");
    p.test_fraction = cfg.number("patch_test_fraction");
    p.val_fraction = cfg.number("patch_val_fraction");
    p.augment_multiplier = cfg.number("augment_multiplier");
    p.shift_step = static_cast<int>(cfg.integer("shift_step"));
    p.seed = cfg.seed();
    return p;
}

PipelineConfig sparse_pipeline_config(const RunConfig& cfg) {
    PipelineConfig p = dense_pipeline_config(cfg);
    p.test_fraction = cfg.number("finetune_patch_test_fraction");
    p.val_fraction = cfg.number("finetune_patch_val_fraction");
    p.augment_multiplier = cfg.number("finetune_augment_multiplier");
    return p;
}

PredictOptions predict_options(const RunConfig& cfg) {
    PredictOptions p;
    p.window = static_cast<int>(cfg.integer("predict_window"));
    p.margin = static_cast<int>(cfg.integer("predict_margin"));
    return p;
}

std::vector<int> channel_subset_indices(const EOStack& stack, const std::string& channels) {
    std::vector<int> idx;
    if (channels == "ms") {
        idx.resize(stack.bands());
        for (int i = 0; i < stack.bands(); ++i) idx[i] = i;
    } else if (channels == "s2") {
        idx = bands_with_prefixes(stack, {"s2_"});
    } else if (channels == "s1s2") {
        idx = bands_with_prefixes(stack, {"s1_", "s2_"});
    } else {
        throw ConfigError("channels must be one of s2|s1s2|ms, got '" + channels + "'");
    }
    if (idx.empty()) throw DataError("channel selection '" + channels + "' matches no bands");
    return idx;
}

} // namespace ft
