#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ft/eval.hpp"
#include "ft/pipeline.hpp"
#include "ft/seunet.hpp"
#include "ft/synth.hpp"
#include "ft/train.hpp"

namespace ft {

/// Flat key-value run configuration. Every key has a registered type and
/// default; unknown keys and type mismatches are rejected with ConfigError.
/// The effective (resolved) map is written beside every command's outputs.
class RunConfig {
public:
    RunConfig();  // all defaults

    static RunConfig load(const std::filesystem::path& file);

    /// CLI-level override (--seed, --channels, --out). Key must be registered.
    void set(const std::string& key, const nlohmann::json& value);

    bool has(const std::string& key) const;
    double number(const std::string& key) const;
    long long integer(const std::string& key) const;
    bool boolean(const std::string& key) const;
    std::string str(const std::string& key) const;
    std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

    /// Sorted-key JSON of the full effective configuration.
    void write_resolved(const std::filesystem::path& path) const;

    const std::map<std::string, nlohmann::json>& values() const { return values_; }

private:
    std::map<std::string, nlohmann::json> values_;
};

// Builders for the module-level configs.
SynthConfig synth_config(const RunConfig& cfg);
ModelConfig model_config(const RunConfig& cfg, int in_channels);
OptimizerConfig optimizer_config(const RunConfig& cfg);
PipelineConfig dense_pipeline_config(const RunConfig& cfg);
PipelineConfig sparse_pipeline_config(const RunConfig& cfg);
PredictOptions predict_options(const RunConfig& cfg);

/// Band indices for the channel selection: "s2" = optical only, "s1s2" =
/// optical + C-band SAR, "ms" = the full stack.
std::vector<int> channel_subset_indices(const EOStack& stack, const std::string& channels);

} // namespace ft
