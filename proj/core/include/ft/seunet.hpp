#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ft/tensor.hpp"

namespace ft {

/// Architecture hyperparameters. Shapes of every parameter tensor are a pure
/// function of this struct.
struct ModelConfig {
    int in_channels = 14;
    int base_width = 32;   // channels at the first encoder level, doubling per level
    int depth = 4;         // encoder levels before the bottleneck
    int se_reduction = 8;  // SE bottleneck ratio r
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Mode { train, eval };

enum class ParamKind : std::uint8_t {
    kernel = 0,           // conv kernels and SE FC matrices; the only kind weight decay touches
    bias = 1,
    bn_gamma = 2,
    bn_beta = 3,
    bn_running_mean = 4,  // buffer, not optimized
    bn_running_var = 5,
};

/// View into one named parameter tensor of the model. `grads` is null for
/// running-stat buffers.
struct ParamRef {
    std::string name;
    ParamKind kind;
    std::vector<int> shape;
    std::vector<double>* values;
    std::vector<double>* grads;
};

namespace detail {

struct Conv2D {
    int in_ch = 0, out_ch = 0, ksize = 3;
    bool has_bias = false;
    std::vector<double> w, b, gw, gb;
    Tensor x_cache;

    void init(int in, int out, int k, bool bias);
    Tensor forward(const Tensor& x, bool cache);
    Tensor backward(const Tensor& dy);
};

struct BatchNorm {
    int ch = 0;
    double eps = 1e-5;
    double momentum = 0.1;
    std::vector<double> gamma, beta, running_mean, running_var;
    std::vector<double> g_gamma, g_beta;
    Tensor x_cache;
    std::vector<double> mu_cache, var_cache;

    void init(int channels);
    // Train mode normalizes with per-sample spatial statistics and, when
    // update_running is set, folds them into the running buffers.
    Tensor forward(const Tensor& x, Mode mode, bool cache, bool update_running);
    Tensor backward(const Tensor& dy);
};

struct ReLU {
    Tensor y_cache;
    Tensor forward(const Tensor& x, bool cache);
    Tensor backward(const Tensor& dy);
};

struct MaxPool2 {
    int in_h = 0, in_w = 0;
    std::vector<std::size_t> argmax;  // input plane index per output element

    Tensor forward(const Tensor& x, bool cache);
    Tensor backward(const Tensor& dy);
};

struct Upsample2 {  // nearest-neighbor 2x, stateless
    static Tensor forward(const Tensor& x);
    static Tensor backward(const Tensor& dy);
};

struct SEBlock {
    int ch = 0, hidden = 0;
    std::vector<double> w1, b1, w2, b2;  // w1 [hidden][ch], w2 [ch][hidden]
    std::vector<double> gw1, gb1, gw2, gb2;
    Tensor x_cache;
    std::vector<double> s_cache, h_cache, gate_cache;

    void init(int channels, int reduction);
    Tensor forward(const Tensor& x, bool cache);
    Tensor backward(const Tensor& dy);
};

struct DoubleConv {
    Conv2D conv1, conv2;
    BatchNorm bn1, bn2;
    ReLU relu1, relu2;

    void init(int in, int out);
    Tensor forward(const Tensor& x, Mode mode, bool cache, bool update_running);
    Tensor backward(const Tensor& dy);
};

struct EncoderLevel {
    DoubleConv dc;
    SEBlock se;
    MaxPool2 pool;
};

struct DecoderLevel {
    Conv2D up;  // 3x3 conv after nearest upsampling, halves channels
    DoubleConv dc;
    SEBlock se;
};

} // namespace detail

/// UNet with squeeze-excitation channel attention and a linear 1x1 head.
/// Encoder: depth x (double_conv + SE + 2x2 maxpool); bottleneck double_conv
/// (no SE); decoder: depth x (nearest 2x upsample + 3x3 conv, skip concat,
/// double_conv + SE). Eval-mode output is clamped at 0 m.
class SeUNet {
public:
    explicit SeUNet(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }

    /// He fan-in init for kernels, zero biases, BN scale 1 / shift 0 / running
    /// (0, 1). Each tensor draws from its own name-derived stream, so the
    /// result depends only on (config, seed).
    void init_parameters(std::uint64_t seed);

    /// Input [in_channels][H][W] with H, W divisible by 2^depth. Returns
    /// [1][H][W]. Train mode caches activations for backward(); eval mode
    /// uses running BN statistics and clamps predictions at 0.
    Tensor forward(const Tensor& input, Mode mode);

    /// Accumulates parameter gradients from d(loss)/d(output) for the most
    /// recent train-mode forward; returns d(loss)/d(input).
    Tensor backward(const Tensor& d_output);

    void zero_grad();

    /// All parameter tensors in a fixed order (encoder, bottleneck, decoder,
    /// head), running-stat buffers included.
    std::vector<ParamRef> parameters();

    /// Number of learnable scalars (running stats excluded).
    std::size_t parameter_count();

    /// When false, train-mode forwards keep the BN running buffers frozen
    /// (fine-tuning option).
    void set_update_running_stats(bool update) { update_running_ = update; }

private:
    ModelConfig cfg_;
    bool update_running_ = true;
    bool has_cache_ = false;
    std::vector<detail::EncoderLevel> enc_;
    detail::DoubleConv bottleneck_;
    std::vector<detail::DecoderLevel> dec_;
    detail::Conv2D head_;
    std::vector<Tensor> skips_;  // post-SE encoder outputs for concatenation

    int level_width(int level) const { return cfg_.base_width << level; }
};

} // namespace ft
