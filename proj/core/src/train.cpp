#include "ft/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "ft/error.hpp"
#include "ft/rng.hpp"

namespace ft {

void OptimizerConfig::validate() const {
    if (max_lr <= 0.0) throw ConfigError("optimizer: max_lr must be > 0");
    if (warmup_fraction <= 0.0 || warmup_fraction >= 1.0)
        throw ConfigError("optimizer: warmup_fraction must lie in (0,1)");
    if (batch_size < 1) throw ConfigError("optimizer: batch_size must be >= 1");
    if (epochs_pretrain < 0 || epochs_finetune < 0) throw ConfigError("optimizer: negative epoch count");
    if (div_factor <= 0.0 || final_div_factor <= 0.0) throw ConfigError("optimizer: bad div factors");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw ConfigError("optimizer: betas must lie in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("optimizer: negative weight decay");
}

double masked_mse(const Tensor& pred, const Tensor& target, const std::vector<std::uint8_t>& valid) {
    if (!pred.same_shape(target) || pred.channels != 1 || valid.size() != pred.plane())
        throw DataError("masked_mse: shape mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < valid.size(); ++i) {
        if (!valid[i]) continue;
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw DataError("masked_mse: no valid pixels (patch should have been filtered)");
    return acc / static_cast<double>(n);
}

Tensor masked_mse_grad(const Tensor& pred, const Tensor& target, const std::vector<std::uint8_t>& valid) {
    if (!pred.same_shape(target) || pred.channels != 1 || valid.size() != pred.plane())
        throw DataError("masked_mse: shape mismatch");
    std::size_t n = 0;
    for (auto v : valid) n += v != 0;
    if (n == 0) throw DataError("masked_mse: no valid pixels (patch should have been filtered)");
    Tensor grad(1, pred.height, pred.width);
    const double scale = 2.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < valid.size(); ++i)
        if (valid[i]) grad.data[i] = scale * (pred.data[i] - target.data[i]);
    return grad;
}

double one_cycle_lr(long long step, long long total_steps, const OptimizerConfig& cfg) {
    if (total_steps < 1) throw ConfigError("one_cycle_lr: total_steps must be >= 1");
    if (step < 0 || step >= total_steps) throw ConfigError("one_cycle_lr: step out of range");
    const double initial = cfg.max_lr / cfg.div_factor;
    const double final_lr = cfg.max_lr / (cfg.div_factor * cfg.final_div_factor);
    const double warm = cfg.warmup_fraction * static_cast<double>(total_steps);
    const double s = static_cast<double>(step);
    if (s <= warm) {
        const double p = warm > 0.0 ? s / warm : 1.0;
        return initial + (cfg.max_lr - initial) * 0.5 * (1.0 - std::cos(M_PI * p));
    }
    const double last = static_cast<double>(total_steps - 1);
    const double p = last > warm ? (s - warm) / (last - warm) : 1.0;
    return final_lr + (cfg.max_lr - final_lr) * 0.5 * (1.0 + std::cos(M_PI * p));
}

TrainState make_train_state(SeUNet& model) {
    TrainState state;
    for (const auto& p : model.parameters()) {
        if (!p.grads) continue;
        state.m.emplace_back(p.values->size(), 0.0);
        state.v.emplace_back(p.values->size(), 0.0);
    }
    return state;
}

void adam_step(SeUNet& model, TrainState& state, double lr, const OptimizerConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    std::size_t ti = 0;
    for (auto& p : model.parameters()) {
        if (!p.grads) continue;
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        ++ti;
        auto& w = *p.values;
        const auto& g = *p.grads;
        const double decay = p.kind == ParamKind::kernel ? 1.0 - lr * cfg.weight_decay : 1.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("non-finite gradient in parameter '" + p.name + "'");
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] = w[i] * decay - lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
}

Tensor patch_input(const Patch& p) {
    Tensor t(p.channels, p.size, p.size);
    for (std::size_t i = 0; i < p.eo.size(); ++i) t.data[i] = p.eo[i];
    return t;
}

Tensor patch_target(const Patch& p) {
    Tensor t(1, p.size, p.size);
    for (std::size_t i = 0; i < p.labels.size(); ++i) t.data[i] = p.valid[i] ? p.labels[i] : 0.0;
    return t;
}

double evaluate_loss(SeUNet& model, const std::vector<Patch>& patches) {
    if (patches.empty()) throw DataError("evaluate_loss: no patches");
    double acc = 0.0;
    for (const auto& p : patches) {
        const Tensor pred = model.forward(patch_input(p), Mode::eval);
        acc += masked_mse(pred, patch_target(p), p.valid);
    }
    return acc / static_cast<double>(patches.size());
}

TrainResult train_model(SeUNet& model, const PatchSet& data, const OptimizerConfig& opt, int epochs) {
    opt.validate();
    if (data.train.empty()) throw DataError("train: empty training set");
    for (const auto& p : data.train)
        if (!p.normalized) throw DataError("train: patches must be normalized first");

    TrainResult result;
    TrainState state = make_train_state(model);

    const long long n_train = static_cast<long long>(data.train.size());
    const long long steps_per_epoch = (n_train + opt.batch_size - 1) / opt.batch_size;
    const long long total_steps = std::max<long long>(1, steps_per_epoch * epochs);

    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    Checkpoint best;

    if (epochs == 0) {
        best = snapshot_model(model);
        best_val = evaluate_loss(model, data.val.empty() ? data.train : data.val);
    }

    std::vector<std::size_t> order(data.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    long long global_step = 0;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        Rng rng(derive_seed(opt.seed, "epoch" + std::to_string(epoch)));
        rng.shuffle(order);

        double loss_sum = 0.0;
        double last_lr = 0.0;
        for (long long b = 0; b < steps_per_epoch; ++b) {
            const std::size_t lo = static_cast<std::size_t>(b) * opt.batch_size;
            const std::size_t hi = std::min(order.size(), lo + opt.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(hi - lo);
            model.zero_grad();
            for (std::size_t i = lo; i < hi; ++i) {
                const Patch& p = data.train[order[i]];
                const Tensor pred = model.forward(patch_input(p), Mode::train);
                const Tensor target = patch_target(p);
                loss_sum += masked_mse(pred, target, p.valid);
                Tensor grad = masked_mse_grad(pred, target, p.valid);
                for (auto& v : grad.data) v *= inv_batch;
                model.backward(grad);
            }
            last_lr = one_cycle_lr(global_step, total_steps, opt);
            adam_step(model, state, last_lr, opt);
            ++global_step;
        }
        const double train_loss = loss_sum / static_cast<double>(n_train);
        if (!std::isfinite(train_loss))
            throw NumericError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));

        const double val_loss =
            data.val.empty() ? train_loss : evaluate_loss(model, data.val);
        result.log.push_back({epoch, train_loss, val_loss, last_lr});

        if (val_loss < best_val) {
            best_val = val_loss;
            best_epoch = epoch;
            best = snapshot_model(model);
        }
    }

    best.val_loss = best_val;
    best.epoch = best_epoch;
    best.seed = opt.seed;
    best.normalization = data.normalization;
    best.data_fingerprint = patchset_fingerprint(data);
    result.checkpoint = std::move(best);
    return result;
}

TrainResult pretrain(const ModelConfig& config, const PatchSet& patchset, const OptimizerConfig& opt) {
    config.validate();
    if (!patchset.train.empty() && patchset.train[0].channels != config.in_channels)
        throw DataError("pretrain: patch channel count does not match model config");
    SeUNet model(config);
    model.init_parameters(config.seed);
    return train_model(model, patchset, opt, opt.epochs_pretrain);
}

TrainResult finetune(const Checkpoint& pretrained, PatchSet& target, const OptimizerConfig& opt) {
    if (target.train.empty()) throw DataError("finetune: empty training set");
    if (target.train[0].channels != pretrained.config.in_channels)
        throw DataError("finetune: checkpoint expects " +
                        std::to_string(pretrained.config.in_channels) + " channels, target stack has " +
                        std::to_string(target.train[0].channels));
    if (target.train[0].normalized) {
        if (!(target.normalization == pretrained.normalization))
            throw DataError("finetune: target normalization differs from checkpoint normalization");
    } else {
        apply_normalization(target, pretrained.normalization);
    }

    SeUNet model(pretrained.config);
    restore_model(pretrained, model);
    model.set_update_running_stats(!opt.freeze_bn_running_stats);
    return train_model(model, target, opt, opt.epochs_finetune);
}

void write_training_log(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write training log: " + path.string());
    out << "epoch,train_loss,val_loss,lr\n";
    char buf[64];
    const auto fmt = [&buf](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, ptr);
    };
    for (const auto& e : log)
        out << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.val_loss) << ',' << fmt(e.lr) << '\n';
}

} // namespace ft
