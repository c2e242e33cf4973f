#include "ft/seunet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ft/error.hpp"
#include "ft/rng.hpp"

namespace ft {

void ModelConfig::validate() const {
    if (in_channels < 1) throw ConfigError("model: in_channels must be >= 1");
    if (base_width < 1) throw ConfigError("model: base_width must be >= 1");
    if (depth < 1) throw ConfigError("model: depth must be >= 1");
    if (se_reduction < 1) throw ConfigError("model: se_reduction must be >= 1");
    if (base_width % se_reduction != 0)
        throw ConfigError("model: base_width must be divisible by se_reduction");
}

namespace detail {

// ---- Conv2D ----------------------------------------------------------------

void Conv2D::init(int in, int out, int k, bool bias) {
    in_ch = in;
    out_ch = out;
    ksize = k;
    has_bias = bias;
    w.assign(static_cast<std::size_t>(out) * in * k * k, 0.0);
    gw.assign(w.size(), 0.0);
    if (bias) {
        b.assign(out, 0.0);
        gb.assign(out, 0.0);
    }
}

Tensor Conv2D::forward(const Tensor& x, bool cache) {
    if (x.channels != in_ch) throw DataError("conv: input channel mismatch");
    const int H = x.height, W = x.width, k = ksize, pad = ksize / 2;
    Tensor out(out_ch, H, W);
    for (int o = 0; o < out_ch; ++o) {
        double* op = out.chan(o);
        if (has_bias) std::fill(op, op + out.plane(), b[o]);
        for (int c = 0; c < in_ch; ++c) {
            const double* ip = x.chan(c);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = w[((static_cast<std::size_t>(o) * in_ch + c) * k + ky) * k + kx];
                    const int dy = ky - pad, dx = kx - pad;
                    const int y0 = std::max(0, -dy), y1 = std::min(H, H - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                    for (int y = y0; y < y1; ++y) {
                        const double* irow = ip + static_cast<std::size_t>(y + dy) * W + dx;
                        double* orow = op + static_cast<std::size_t>(y) * W;
                        for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
                    }
                }
            }
        }
    }
    if (cache) x_cache = x;
    return out;
}

Tensor Conv2D::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    if (x.channels != in_ch) throw std::logic_error("conv backward without cached forward");
    const int H = x.height, W = x.width, k = ksize, pad = ksize / 2;
    Tensor dx(in_ch, H, W);
    for (int o = 0; o < out_ch; ++o) {
        const double* dop = dy.chan(o);
        if (has_bias) {
            double acc = 0.0;
            for (std::size_t i = 0; i < dy.plane(); ++i) acc += dop[i];
            gb[o] += acc;
        }
        for (int c = 0; c < in_ch; ++c) {
            const double* ip = x.chan(c);
            double* dxp = dx.chan(c);
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const std::size_t wi = ((static_cast<std::size_t>(o) * in_ch + c) * k + ky) * k + kx;
                    const double wv = w[wi];
                    const int dyy = ky - pad, dxx = kx - pad;
                    const int y0 = std::max(0, -dyy), y1 = std::min(H, H - dyy);
                    const int x0 = std::max(0, -dxx), x1 = std::min(W, W - dxx);
                    double acc = 0.0;
                    for (int y = y0; y < y1; ++y) {
                        const double* irow = ip + static_cast<std::size_t>(y + dyy) * W + dxx;
                        double* dxrow = dxp + static_cast<std::size_t>(y + dyy) * W + dxx;
                        const double* drow = dop + static_cast<std::size_t>(y) * W;
                        for (int xx = x0; xx < x1; ++xx) {
                            acc += irow[xx] * drow[xx];
                            dxrow[xx] += wv * drow[xx];
                        }
                    }
                    gw[wi] += acc;
                }
            }
        }
    }
    return dx;
}

// ---- BatchNorm -------------------------------------------------------------

void BatchNorm::init(int channels) {
    ch = channels;
    gamma.assign(ch, 1.0);
    beta.assign(ch, 0.0);
    running_mean.assign(ch, 0.0);
    running_var.assign(ch, 1.0);
    g_gamma.assign(ch, 0.0);
    g_beta.assign(ch, 0.0);
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, bool cache, bool update_running) {
    if (x.channels != ch) throw DataError("batchnorm: channel mismatch");
    const std::size_t N = x.plane();
    Tensor out(x.channels, x.height, x.width);
    if (mode == Mode::eval) {
        for (int c = 0; c < ch; ++c) {
            const double inv = 1.0 / std::sqrt(running_var[c] + eps);
            const double g = gamma[c] * inv;
            const double off = beta[c] - g * running_mean[c];
            const double* xp = x.chan(c);
            double* op = out.chan(c);
            for (std::size_t i = 0; i < N; ++i) op[i] = g * xp[i] + off;
        }
        return out;
    }
    if (cache) {
        mu_cache.assign(ch, 0.0);
        var_cache.assign(ch, 0.0);
    }
    for (int c = 0; c < ch; ++c) {
        const double* xp = x.chan(c);
        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sum += xp[i];
            sumsq += xp[i] * xp[i];
        }
        const double mu = sum / static_cast<double>(N);
        const double var = std::max(0.0, sumsq / static_cast<double>(N) - mu * mu);
        const double inv = 1.0 / std::sqrt(var + eps);
        double* op = out.chan(c);
        for (std::size_t i = 0; i < N; ++i) op[i] = gamma[c] * (xp[i] - mu) * inv + beta[c];
        if (update_running) {
            running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
            running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
        }
        if (cache) {
            mu_cache[c] = mu;
            var_cache[c] = var;
        }
    }
    if (cache) x_cache = x;
    return out;
}

Tensor BatchNorm::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    if (x.channels != ch) throw std::logic_error("batchnorm backward without cached forward");
    const std::size_t N = x.plane();
    const double n = static_cast<double>(N);
    Tensor dx(x.channels, x.height, x.width);
    for (int c = 0; c < ch; ++c) {
        const double mu = mu_cache[c];
        const double inv = 1.0 / std::sqrt(var_cache[c] + eps);
        const double* xp = x.chan(c);
        const double* dp = dy.chan(c);
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            sum_dy += dp[i];
            sum_dy_xhat += dp[i] * (xp[i] - mu) * inv;
        }
        g_gamma[c] += sum_dy_xhat;
        g_beta[c] += sum_dy;
        const double scale = gamma[c] * inv / n;
        double* dxp = dx.chan(c);
        for (std::size_t i = 0; i < N; ++i) {
            const double xhat = (xp[i] - mu) * inv;
            dxp[i] = scale * (n * dp[i] - sum_dy - xhat * sum_dy_xhat);
        }
    }
    return dx;
}

// ---- ReLU ------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool cache) {
    Tensor out = x;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    if (cache) y_cache = out;
    return out;
}

Tensor ReLU::backward(const Tensor& dy) {
    if (!dy.same_shape(y_cache)) throw std::logic_error("relu backward without cached forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (y_cache.data[i] <= 0.0) dx.data[i] = 0.0;
    return dx;
}

// ---- MaxPool2 --------------------------------------------------------------

Tensor MaxPool2::forward(const Tensor& x, bool cache) {
    if (x.height % 2 != 0 || x.width % 2 != 0) throw DataError("maxpool: odd spatial size");
    const int H = x.height, W = x.width, OH = H / 2, OW = W / 2;
    in_h = H;
    in_w = W;
    Tensor out(x.channels, OH, OW);
    if (cache) argmax.assign(out.size(), 0);
    std::size_t oi = 0;
    for (int c = 0; c < x.channels; ++c) {
        const double* xp = x.chan(c);
        double* op = out.chan(c);
        for (int y = 0; y < OH; ++y) {
            for (int xx = 0; xx < OW; ++xx, ++oi) {
                // first maximum in scan order wins (deterministic tie-break)
                std::size_t best = static_cast<std::size_t>(2 * y) * W + 2 * xx;
                double bv = xp[best];
                const std::size_t cands[3] = {best + 1, best + W, best + W + 1};
                for (std::size_t cand : cands) {
                    if (xp[cand] > bv) {
                        bv = xp[cand];
                        best = cand;
                    }
                }
                op[static_cast<std::size_t>(y) * OW + xx] = bv;
                if (cache) argmax[oi] = best;
            }
        }
    }
    return out;
}

Tensor MaxPool2::backward(const Tensor& dy) {
    if (argmax.size() != dy.size()) throw std::logic_error("maxpool backward without cached forward");
    Tensor dx(dy.channels, in_h, in_w);
    std::size_t oi = 0;
    for (int c = 0; c < dy.channels; ++c) {
        double* dxp = dx.chan(c);
        const double* dp = dy.chan(c);
        for (std::size_t i = 0; i < dy.plane(); ++i, ++oi) dxp[argmax[oi]] += dp[i];
    }
    return dx;
}

// ---- Upsample2 -------------------------------------------------------------

Tensor Upsample2::forward(const Tensor& x) {
    Tensor out(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < x.channels; ++c) {
        const double* xp = x.chan(c);
        double* op = out.chan(c);
        for (int y = 0; y < out.height; ++y) {
            const double* irow = xp + static_cast<std::size_t>(y / 2) * x.width;
            double* orow = op + static_cast<std::size_t>(y) * out.width;
            for (int xx = 0; xx < out.width; ++xx) orow[xx] = irow[xx / 2];
        }
    }
    return out;
}

Tensor Upsample2::backward(const Tensor& dy) {
    Tensor dx(dy.channels, dy.height / 2, dy.width / 2);
    for (int c = 0; c < dy.channels; ++c) {
        const double* dp = dy.chan(c);
        double* dxp = dx.chan(c);
        for (int y = 0; y < dy.height; ++y) {
            const double* drow = dp + static_cast<std::size_t>(y) * dy.width;
            double* xrow = dxp + static_cast<std::size_t>(y / 2) * dx.width;
            for (int xx = 0; xx < dy.width; ++xx) xrow[xx / 2] += drow[xx];
        }
    }
    return dx;
}

// ---- SEBlock ---------------------------------------------------------------

void SEBlock::init(int channels, int reduction) {
    ch = channels;
    hidden = channels / reduction;
    if (hidden < 1) throw ConfigError("se block: reduction larger than channel count");
    w1.assign(static_cast<std::size_t>(hidden) * ch, 0.0);
    b1.assign(hidden, 0.0);
    w2.assign(static_cast<std::size_t>(ch) * hidden, 0.0);
    b2.assign(ch, 0.0);
    gw1.assign(w1.size(), 0.0);
    gb1.assign(b1.size(), 0.0);
    gw2.assign(w2.size(), 0.0);
    gb2.assign(b2.size(), 0.0);
}

Tensor SEBlock::forward(const Tensor& x, bool cache) {
    if (x.channels != ch) throw DataError("se block: channel mismatch");
    const std::size_t N = x.plane();

    std::vector<double> s(ch);
    for (int c = 0; c < ch; ++c) {
        const double* xp = x.chan(c);
        double sum = 0.0;
        for (std::size_t i = 0; i < N; ++i) sum += xp[i];
        s[c] = sum / static_cast<double>(N);
    }
    std::vector<double> h(hidden);
    for (int j = 0; j < hidden; ++j) {
        double acc = b1[j];
        const double* row = w1.data() + static_cast<std::size_t>(j) * ch;
        for (int c = 0; c < ch; ++c) acc += row[c] * s[c];
        h[j] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> gate(ch);
    for (int c = 0; c < ch; ++c) {
        double acc = b2[c];
        const double* row = w2.data() + static_cast<std::size_t>(c) * hidden;
        for (int j = 0; j < hidden; ++j) acc += row[j] * h[j];
        gate[c] = 1.0 / (1.0 + std::exp(-acc));
    }

    Tensor out(x.channels, x.height, x.width);
    for (int c = 0; c < ch; ++c) {
        const double g = gate[c];
        const double* xp = x.chan(c);
        double* op = out.chan(c);
        for (std::size_t i = 0; i < N; ++i) op[i] = g * xp[i];
    }
    if (cache) {
        x_cache = x;
        s_cache = std::move(s);
        h_cache = std::move(h);
        gate_cache = std::move(gate);
    }
    return out;
}

Tensor SEBlock::backward(const Tensor& dy) {
    const Tensor& x = x_cache;
    if (x.channels != ch) throw std::logic_error("se backward without cached forward");
    const std::size_t N = x.plane();

    Tensor dx(x.channels, x.height, x.width);
    std::vector<double> dgate(ch, 0.0);
    for (int c = 0; c < ch; ++c) {
        const double g = gate_cache[c];
        const double* xp = x.chan(c);
        const double* dp = dy.chan(c);
        double* dxp = dx.chan(c);
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            acc += dp[i] * xp[i];
            dxp[i] = dp[i] * g;
        }
        dgate[c] = acc;
    }

    std::vector<double> dh(hidden, 0.0);
    for (int c = 0; c < ch; ++c) {
        const double g = gate_cache[c];
        const double dz = dgate[c] * g * (1.0 - g);
        double* row = gw2.data() + static_cast<std::size_t>(c) * hidden;
        const double* wrow = w2.data() + static_cast<std::size_t>(c) * hidden;
        for (int j = 0; j < hidden; ++j) {
            row[j] += dz * h_cache[j];
            dh[j] += wrow[j] * dz;
        }
        gb2[c] += dz;
    }

    std::vector<double> ds(ch, 0.0);
    for (int j = 0; j < hidden; ++j) {
        if (h_cache[j] <= 0.0) continue;  // ReLU gate on the hidden unit
        const double d = dh[j];
        double* grow = gw1.data() + static_cast<std::size_t>(j) * ch;
        const double* wrow = w1.data() + static_cast<std::size_t>(j) * ch;
        for (int c = 0; c < ch; ++c) {
            grow[c] += d * s_cache[c];
            ds[c] += wrow[c] * d;
        }
        gb1[j] += d;
    }

    for (int c = 0; c < ch; ++c) {
        const double d = ds[c] / static_cast<double>(N);
        double* dxp = dx.chan(c);
        for (std::size_t i = 0; i < N; ++i) dxp[i] += d;
    }
    return dx;
}

// ---- DoubleConv ------------------------------------------------------------

void DoubleConv::init(int in, int out) {
    conv1.init(in, out, 3, false);
    conv2.init(out, out, 3, false);
    bn1.init(out);
    bn2.init(out);
}

Tensor DoubleConv::forward(const Tensor& x, Mode mode, bool cache, bool update_running) {
    Tensor t = conv1.forward(x, cache);
    t = bn1.forward(t, mode, cache, update_running);
    t = relu1.forward(t, cache);
    t = conv2.forward(t, cache);
    t = bn2.forward(t, mode, cache, update_running);
    return relu2.forward(t, cache);
}

Tensor DoubleConv::backward(const Tensor& dy) {
    Tensor d = relu2.backward(dy);
    d = bn2.backward(d);
    d = conv2.backward(d);
    d = relu1.backward(d);
    d = bn1.backward(d);
    return conv1.backward(d);
}

} // namespace detail

// ---- SeUNet ----------------------------------------------------------------

namespace {

using detail::Conv2D;
using detail::SEBlock;

void check_finite(const Tensor& t, const char* block) {
    for (double v : t.data)
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite activations in ") + block);
}

Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor out(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

void he_normal(std::vector<double>& w, int fan_in, Rng& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : w) v = rng.normal(0.0, sd);
}

} // namespace

SeUNet::SeUNet(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    enc_.resize(cfg_.depth);
    dec_.resize(cfg_.depth);
    int in = cfg_.in_channels;
    for (int i = 0; i < cfg_.depth; ++i) {
        enc_[i].dc.init(in, level_width(i));
        enc_[i].se.init(level_width(i), cfg_.se_reduction);
        in = level_width(i);
    }
    bottleneck_.init(level_width(cfg_.depth - 1), level_width(cfg_.depth));
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        dec_[i].up.init(level_width(i + 1), level_width(i), 3, true);
        dec_[i].dc.init(2 * level_width(i), level_width(i));
        dec_[i].se.init(level_width(i), cfg_.se_reduction);
    }
    head_.init(cfg_.base_width, 1, 1, true);
    skips_.resize(cfg_.depth);
}

void SeUNet::init_parameters(std::uint64_t seed) {
    for (auto& p : parameters()) {
        Rng rng(derive_seed(seed, p.name));
        switch (p.kind) {
            case ParamKind::kernel: {
                // shape is [out, in, k, k] or [out, in]; fan-in = product past dim 0
                int fan_in = 1;
                for (std::size_t d = 1; d < p.shape.size(); ++d) fan_in *= p.shape[d];
                he_normal(*p.values, fan_in, rng);
                break;
            }
            case ParamKind::bias:
            case ParamKind::bn_beta:
            case ParamKind::bn_running_mean:
                std::fill(p.values->begin(), p.values->end(), 0.0);
                break;
            case ParamKind::bn_gamma:
            case ParamKind::bn_running_var:
                std::fill(p.values->begin(), p.values->end(), 1.0);
                break;
        }
    }
}

Tensor SeUNet::forward(const Tensor& input, Mode mode) {
    if (input.channels != cfg_.in_channels) throw DataError("model: input channel mismatch");
    const int div = 1 << cfg_.depth;
    if (input.height % div != 0 || input.width % div != 0)
        throw DataError("model: input spatial size must be divisible by 2^depth");
    const bool cache = mode == Mode::train;
    const bool update = cache && update_running_;

    Tensor t = input;
    for (int i = 0; i < cfg_.depth; ++i) {
        Tensor s = enc_[i].se.forward(enc_[i].dc.forward(t, mode, cache, update), cache);
        check_finite(s, ("enc" + std::to_string(i)).c_str());
        t = enc_[i].pool.forward(s, cache);
        skips_[i] = std::move(s);
    }
    t = bottleneck_.forward(t, mode, cache, update);
    check_finite(t, "bottleneck");
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        Tensor up = dec_[i].up.forward(detail::Upsample2::forward(t), cache);
        t = dec_[i].se.forward(dec_[i].dc.forward(concat(skips_[i], up), mode, cache, update), cache);
        check_finite(t, ("dec" + std::to_string(i)).c_str());
        if (!cache) skips_[i] = Tensor();  // eval mode: free the skip immediately
    }
    t = head_.forward(t, cache);
    check_finite(t, "head");
    if (mode == Mode::eval)
        for (auto& v : t.data) v = std::max(v, 0.0);
    has_cache_ = cache;
    return t;
}

Tensor SeUNet::backward(const Tensor& d_output) {
    if (!has_cache_) throw std::logic_error("backward without a train-mode forward");
    Tensor d = head_.backward(d_output);
    std::vector<Tensor> d_skips(cfg_.depth);
    for (int i = 0; i < cfg_.depth; ++i) {
        d = dec_[i].dc.backward(dec_[i].se.backward(d));
        // split the concat gradient into the skip part and the upsampled part
        const int w = level_width(i);
        Tensor d_skip(w, d.height, d.width), d_up(w, d.height, d.width);
        std::copy(d.data.begin(), d.data.begin() + static_cast<std::ptrdiff_t>(d_skip.size()),
                  d_skip.data.begin());
        std::copy(d.data.begin() + static_cast<std::ptrdiff_t>(d_skip.size()), d.data.end(),
                  d_up.data.begin());
        d_skips[i] = std::move(d_skip);
        d = detail::Upsample2::backward(dec_[i].up.backward(d_up));
    }
    d = bottleneck_.backward(d);
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        Tensor ds = enc_[i].pool.backward(d);
        for (std::size_t j = 0; j < ds.data.size(); ++j) ds.data[j] += d_skips[i].data[j];
        d = enc_[i].dc.backward(enc_[i].se.backward(ds));
    }
    return d;
}

void SeUNet::zero_grad() {
    for (auto& p : parameters())
        if (p.grads) std::fill(p.grads->begin(), p.grads->end(), 0.0);
}

namespace {

void push_conv(std::vector<ParamRef>& out, const std::string& name, Conv2D& c) {
    out.push_back({name + ".w", ParamKind::kernel, {c.out_ch, c.in_ch, c.ksize, c.ksize}, &c.w, &c.gw});
    if (c.has_bias) out.push_back({name + ".b", ParamKind::bias, {c.out_ch}, &c.b, &c.gb});
}

void push_bn(std::vector<ParamRef>& out, const std::string& name, detail::BatchNorm& bn) {
    out.push_back({name + ".gamma", ParamKind::bn_gamma, {bn.ch}, &bn.gamma, &bn.g_gamma});
    out.push_back({name + ".beta", ParamKind::bn_beta, {bn.ch}, &bn.beta, &bn.g_beta});
    out.push_back({name + ".running_mean", ParamKind::bn_running_mean, {bn.ch}, &bn.running_mean, nullptr});
    out.push_back({name + ".running_var", ParamKind::bn_running_var, {bn.ch}, &bn.running_var, nullptr});
}

void push_double_conv(std::vector<ParamRef>& out, const std::string& name, detail::DoubleConv& dc) {
    push_conv(out, name + ".conv1", dc.conv1);
    push_bn(out, name + ".bn1", dc.bn1);
    push_conv(out, name + ".conv2", dc.conv2);
    push_bn(out, name + ".bn2", dc.bn2);
}

void push_se(std::vector<ParamRef>& out, const std::string& name, SEBlock& se) {
    out.push_back({name + ".fc1.w", ParamKind::kernel, {se.hidden, se.ch}, &se.w1, &se.gw1});
    out.push_back({name + ".fc1.b", ParamKind::bias, {se.hidden}, &se.b1, &se.gb1});
    out.push_back({name + ".fc2.w", ParamKind::kernel, {se.ch, se.hidden}, &se.w2, &se.gw2});
    out.push_back({name + ".fc2.b", ParamKind::bias, {se.ch}, &se.b2, &se.gb2});
}

} // namespace

std::vector<ParamRef> SeUNet::parameters() {
    std::vector<ParamRef> out;
    for (int i = 0; i < cfg_.depth; ++i) {
        const std::string base = "enc" + std::to_string(i);
        push_double_conv(out, base + ".dc", enc_[i].dc);
        push_se(out, base + ".se", enc_[i].se);
    }
    push_double_conv(out, "bottleneck.dc", bottleneck_);
    for (int i = cfg_.depth - 1; i >= 0; --i) {
        const std::string base = "dec" + std::to_string(i);
        push_conv(out, base + ".up", dec_[i].up);
        push_double_conv(out, base + ".dc", dec_[i].dc);
        push_se(out, base + ".se", dec_[i].se);
    }
    push_conv(out, "head", head_);
    return out;
}

std::size_t SeUNet::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : parameters())
        if (p.grads) n += p.values->size();
    return n;
}

} // namespace ft
