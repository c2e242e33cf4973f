#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ft/patch.hpp"
#include "ft/seunet.hpp"

namespace ft {

/// One serialized parameter tensor. Values are stored as little-endian
/// float32; the in-memory model is double precision and is truncated on
/// snapshot.
struct NamedTensor {
    std::string name;
    ParamKind kind = ParamKind::kernel;
    std::vector<int> shape;
    std::vector<float> values;
};

/// Model state plus everything needed to reuse it: architecture, the
/// normalization frozen at pretraining, and a fingerprint of the patch set it
/// was trained on.
struct Checkpoint {
    ModelConfig config;
    std::uint64_t seed = 0;
    int epoch = -1;  // epoch whose validation loss is stored
    double val_loss = 0.0;
    NormalizationStats normalization;
    std::string data_fingerprint;
    std::vector<NamedTensor> tensors;
};

/// Copies the model parameters (float32-truncated) into a checkpoint shell;
/// metadata fields other than config are left for the caller.
Checkpoint snapshot_model(SeUNet& model);

/// Loads checkpoint tensors back into the model. Names and shapes must match
/// the model's parameter table exactly.
void restore_model(const Checkpoint& ckpt, SeUNet& model);

// On-disk form: <stem>.ckpt binary named-tensor table ("FTCKPT01" magic) +
// <stem>.json metadata {config, seed, epoch, val_loss, normalization,
// data_fingerprint}. Byte-deterministic.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace ft
