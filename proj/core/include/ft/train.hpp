#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ft/checkpoint.hpp"
#include "ft/patch.hpp"
#include "ft/seunet.hpp"
#include "ft/tensor.hpp"

namespace ft {

struct OptimizerConfig {
    double max_lr = 1e-2;
    double weight_decay = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int batch_size = 8;
    int epochs_pretrain = 100;
    int epochs_finetune = 5;
    double warmup_fraction = 0.3;
    double div_factor = 25.0;
    double final_div_factor = 1e4;
    std::uint64_t seed = 0;
    bool freeze_bn_running_stats = false;  // fine-tuning option

    void validate() const;  // throws ConfigError
};

/// Mean squared error over valid pixels only. pred and target are [1][H][W];
/// valid has H*W entries. Throws DataError when no pixel is valid.
double masked_mse(const Tensor& pred, const Tensor& target, const std::vector<std::uint8_t>& valid);

/// d(masked_mse)/d(pred): 2*(pred-target)/n_valid on valid pixels, 0 elsewhere.
Tensor masked_mse_grad(const Tensor& pred, const Tensor& target, const std::vector<std::uint8_t>& valid);

/// One-cycle schedule: cosine ramp max_lr/div_factor -> max_lr over
/// warmup_fraction*total_steps, cosine anneal to max_lr/(div*final_div) at the
/// last step. step must lie in [0, total_steps).
double one_cycle_lr(long long step, long long total_steps, const OptimizerConfig& cfg);

/// Adam moments per learnable tensor, in model.parameters() order.
struct TrainState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long long step = 0;
};

TrainState make_train_state(SeUNet& model);

/// AdamW update from the model's accumulated gradients: bias-corrected
/// moment step plus decoupled weight decay w *= (1 - lr*weight_decay), the
/// decay applied to kernel-kind tensors only (never biases or batch-norm).
/// Throws NumericError on non-finite gradients.
void adam_step(SeUNet& model, TrainState& state, double lr, const OptimizerConfig& cfg);

// Patch <-> tensor bridges. Inputs must be normalized (nodata already 0).
Tensor patch_input(const Patch& p);
Tensor patch_target(const Patch& p);  // invalid pixels hold 0; mask separately

/// Eval-mode mean masked MSE over a patch list.
double evaluate_loss(SeUNet& model, const std::vector<Patch>& patches);

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;  // last optimizer step of the epoch
};

struct TrainResult {
    Checkpoint checkpoint;  // best-validation parameters + metadata
    std::vector<EpochLog> log;
};

/// Shared epoch loop: seeded shuffling, batched gradient accumulation,
/// one-cycle schedule, best-validation checkpointing. An empty validation
/// subset falls back to the training loss for selection. The model is left at
/// its final-epoch state; the returned checkpoint holds the best epoch.
TrainResult train_model(SeUNet& model, const PatchSet& data, const OptimizerConfig& opt, int epochs);

/// Fresh model from `config` trained on a dense (ALS-style) patch set for
/// opt.epochs_pretrain epochs.
TrainResult pretrain(const ModelConfig& config, const PatchSet& patchset, const OptimizerConfig& opt);

/// Initializes from the pretrained checkpoint, applies its normalization to
/// `target` (which must arrive unnormalized, or normalized with identical
/// stats), and trains opt.epochs_finetune epochs on the sparse plot labels.
TrainResult finetune(const Checkpoint& pretrained, PatchSet& target, const OptimizerConfig& opt);

/// CSV `epoch,train_loss,val_loss,lr`, one row per epoch.
void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path);

} // namespace ft
