#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "camscope/nn/blas.hpp"
#include "camscope/nn/layer.hpp"

namespace camscope::nn {

// ---------------------------------------------------------------------------
// Convolution. im2col + sgemm for the general case, direct kernels for the
// 1x1 and depthwise cases that dominate the registry architectures.
// ---------------------------------------------------------------------------
class Conv2d : public Layer {
public:
    Conv2d(int in_c, int out_c, int kh, int kw, int sh, int sw, int ph, int pw,
           int groups = 1, bool bias = true)
        : in_c_(in_c), out_c_(out_c), kh_(kh), kw_(kw), sh_(sh), sw_(sw),
          ph_(ph), pw_(pw), groups_(groups), has_bias_(bias),
          w_("weight", {out_c, in_c / groups, kh, kw}),
          b_(bias ? Param("bias", {out_c}) : Param("bias")) {
        assert(in_c % groups == 0 && out_c % groups == 0);
    }

    // Square-kernel convenience.
    Conv2d(int in_c, int out_c, int k, int s, int p, int groups = 1, bool bias = true)
        : Conv2d(in_c, out_c, k, k, s, s, p, p, groups, bias) {}

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        assert(x.rank() == 4 && x.dim(1) == in_c_);
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int oh = out_size(h, kh_, sh_, ph_), ow = out_size(w, kw_, sw_, pw_);
        assert(oh > 0 && ow > 0);
        Tensor y({n, out_c_, oh, ow});

        if (is_depthwise()) {
            forward_depthwise(x, y, oh, ow);
        } else if (is_pointwise()) {
            // y[n] = W (OC x IC) * x[n] (IC x HW)
            const int hw = h * w;
            for (int i = 0; i < n; ++i)
                sgemm(false, false, out_c_, hw, in_c_, 1.0f, w_.value.data(), in_c_,
                      x.data() + static_cast<size_t>(i) * in_c_ * hw, hw, 0.0f,
                      y.data() + static_cast<size_t>(i) * out_c_ * hw, hw);
        } else {
            const int icg = in_c_ / groups_, ocg = out_c_ / groups_;
            const int krows = icg * kh_ * kw_, ohw = oh * ow;
            col_.assign(static_cast<size_t>(krows) * ohw, 0.0f);
            for (int i = 0; i < n; ++i)
                for (int g = 0; g < groups_; ++g) {
                    im2col(x, i, g * icg, icg, oh, ow, col_.data());
                    sgemm(false, false, ocg, ohw, krows, 1.0f,
                          w_.value.data() + static_cast<size_t>(g) * ocg * krows, krows,
                          col_.data(), ohw, 0.0f,
                          y.data() + (static_cast<size_t>(i) * out_c_ + g * ocg) * ohw, ohw);
                }
        }

        if (has_bias_)
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < out_c_; ++c) {
                    float* p = y.data() + (static_cast<size_t>(i) * out_c_ + c) * oh * ow;
                    const float bv = b_.value[c];
                    for (int k = 0; k < oh * ow; ++k) p[k] += bv;
                }
        return y;
    }

    std::vector<Tensor> backward(const std::vector<const Tensor*>& in,
                                 const Tensor& out, const Tensor& gout) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int oh = out.dim(2), ow = out.dim(3), ohw = oh * ow;
        Tensor gx({n, in_c_, h, w});

        if (has_bias_)
            for (int i = 0; i < n; ++i)
                for (int c = 0; c < out_c_; ++c) {
                    const float* p = gout.data() + (static_cast<size_t>(i) * out_c_ + c) * ohw;
                    float acc = 0.0f;
                    for (int k = 0; k < ohw; ++k) acc += p[k];
                    b_.grad[c] += acc;
                }

        if (is_depthwise()) {
            backward_depthwise(x, gout, gx, oh, ow);
        } else if (is_pointwise()) {
            const int hw = h * w;
            for (int i = 0; i < n; ++i) {
                const float* gy = gout.data() + static_cast<size_t>(i) * out_c_ * hw;
                const float* xi = x.data() + static_cast<size_t>(i) * in_c_ * hw;
                // gw += gy (OC x HW) * x^T (HW x IC)
                sgemm(false, true, out_c_, in_c_, hw, 1.0f, gy, hw, xi, hw, 1.0f,
                      w_.grad.data(), in_c_);
                // gx = W^T (IC x OC) * gy (OC x HW)
                sgemm(true, false, in_c_, hw, out_c_, 1.0f, w_.value.data(), in_c_, gy, hw,
                      0.0f, gx.data() + static_cast<size_t>(i) * in_c_ * hw, hw);
            }
        } else {
            const int icg = in_c_ / groups_, ocg = out_c_ / groups_;
            const int krows = icg * kh_ * kw_;
            col_.assign(static_cast<size_t>(krows) * ohw, 0.0f);
            colg_.assign(static_cast<size_t>(krows) * ohw, 0.0f);
            for (int i = 0; i < n; ++i)
                for (int g = 0; g < groups_; ++g) {
                    const float* gy = gout.data() + (static_cast<size_t>(i) * out_c_ + g * ocg) * ohw;
                    im2col(x, i, g * icg, icg, oh, ow, col_.data());
                    sgemm(false, true, ocg, krows, ohw, 1.0f, gy, ohw, col_.data(), ohw,
                          1.0f, w_.grad.data() + static_cast<size_t>(g) * ocg * krows, krows);
                    sgemm(true, false, krows, ohw, ocg, 1.0f,
                          w_.value.data() + static_cast<size_t>(g) * ocg * krows, krows,
                          gy, ohw, 0.0f, colg_.data(), ohw);
                    col2im(colg_.data(), i, g * icg, icg, oh, ow, gx);
                }
        }
        return {std::move(gx)};
    }

    std::vector<Param*> params() override {
        if (has_bias_) return {&w_, &b_};
        return {&w_};
    }

    int out_rank(const std::vector<int>&) const override { return 4; }

    int fan_in() const { return (in_c_ / groups_) * kh_ * kw_; }
    Param& weight() { return w_; }
    Param& bias() { return b_; }

    static int out_size(int in, int k, int s, int p) { return (in + 2 * p - k) / s + 1; }

private:
    bool is_depthwise() const { return groups_ == in_c_ && groups_ == out_c_; }
    bool is_pointwise() const {
        return kh_ == 1 && kw_ == 1 && sh_ == 1 && sw_ == 1 && ph_ == 0 && pw_ == 0 &&
               groups_ == 1;
    }

    void im2col(const Tensor& x, int n, int c0, int nc, int oh, int ow, float* col) const {
        const int h = x.dim(2), w = x.dim(3);
        float* dst = col;
        for (int c = c0; c < c0 + nc; ++c)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj) {
                    for (int i = 0; i < oh; ++i) {
                        const int y = i * sh_ - ph_ + ki;
                        if (y < 0 || y >= h) {
                            std::memset(dst, 0, sizeof(float) * ow);
                            dst += ow;
                            continue;
                        }
                        const float* src = x.data() +
                            ((static_cast<size_t>(n) * x.dim(1) + c) * h + y) * w;
                        for (int j = 0; j < ow; ++j) {
                            const int xx = j * sw_ - pw_ + kj;
                            *dst++ = (xx >= 0 && xx < w) ? src[xx] : 0.0f;
                        }
                    }
                }
    }

    void col2im(const float* col, int n, int c0, int nc, int oh, int ow, Tensor& gx) const {
        const int h = gx.dim(2), w = gx.dim(3);
        const float* src = col;
        for (int c = c0; c < c0 + nc; ++c)
            for (int ki = 0; ki < kh_; ++ki)
                for (int kj = 0; kj < kw_; ++kj) {
                    for (int i = 0; i < oh; ++i) {
                        const int y = i * sh_ - ph_ + ki;
                        if (y < 0 || y >= h) {
                            src += ow;
                            continue;
                        }
                        float* dst = gx.data() +
                            ((static_cast<size_t>(n) * gx.dim(1) + c) * h + y) * w;
                        for (int j = 0; j < ow; ++j) {
                            const int xx = j * sw_ - pw_ + kj;
                            if (xx >= 0 && xx < w) dst[xx] += src[j];
                        }
                        src += ow;
                    }
                }
    }

    void forward_depthwise(const Tensor& x, Tensor& y, int oh, int ow) const {
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < out_c_; ++c) {
                const float* xp = x.data() + (static_cast<size_t>(i) * in_c_ + c) * h * w;
                const float* wp = w_.value.data() + static_cast<size_t>(c) * kh_ * kw_;
                float* yp = y.data() + (static_cast<size_t>(i) * out_c_ + c) * oh * ow;
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        float acc = 0.0f;
                        const int y0 = r * sh_ - ph_, x0 = q * sw_ - pw_;
                        for (int ki = 0; ki < kh_; ++ki) {
                            const int yy = y0 + ki;
                            if (yy < 0 || yy >= h) continue;
                            for (int kj = 0; kj < kw_; ++kj) {
                                const int xx = x0 + kj;
                                if (xx < 0 || xx >= w) continue;
                                acc += wp[ki * kw_ + kj] * xp[yy * w + xx];
                            }
                        }
                        yp[r * ow + q] = acc;
                    }
            }
    }

    void backward_depthwise(const Tensor& x, const Tensor& gout, Tensor& gx,
                            int oh, int ow) {
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < out_c_; ++c) {
                const float* xp = x.data() + (static_cast<size_t>(i) * in_c_ + c) * h * w;
                const float* gy = gout.data() + (static_cast<size_t>(i) * out_c_ + c) * oh * ow;
                const float* wp = w_.value.data() + static_cast<size_t>(c) * kh_ * kw_;
                float* gwp = w_.grad.data() + static_cast<size_t>(c) * kh_ * kw_;
                float* gxp = gx.data() + (static_cast<size_t>(i) * in_c_ + c) * h * w;
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        const float g = gy[r * ow + q];
                        if (g == 0.0f) continue;
                        const int y0 = r * sh_ - ph_, x0 = q * sw_ - pw_;
                        for (int ki = 0; ki < kh_; ++ki) {
                            const int yy = y0 + ki;
                            if (yy < 0 || yy >= h) continue;
                            for (int kj = 0; kj < kw_; ++kj) {
                                const int xx = x0 + kj;
                                if (xx < 0 || xx >= w) continue;
                                gwp[ki * kw_ + kj] += g * xp[yy * w + xx];
                                gxp[yy * w + xx] += g * wp[ki * kw_ + kj];
                            }
                        }
                    }
            }
    }

    int in_c_, out_c_, kh_, kw_, sh_, sw_, ph_, pw_, groups_;
    bool has_bias_;
    Param w_, b_;
    std::vector<float> col_, colg_;
};

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel. Training mode uses batch
// statistics and updates running estimates; eval mode applies the running
// affine transform, which keeps capture() deterministic.
// ---------------------------------------------------------------------------
class BatchNorm2d : public Layer {
public:
    explicit BatchNorm2d(int channels, float eps = 1e-5f, float momentum = 0.1f)
        : c_(channels), eps_(eps), momentum_(momentum),
          gamma_("gamma", {channels}), beta_("beta", {channels}),
          rmean_("running_mean", {channels}), rvar_("running_var", {channels}) {
        for (int i = 0; i < channels; ++i) {
            gamma_.value[i] = 1.0f;
            rvar_.value[i] = 1.0f;
        }
    }

    Tensor forward(const std::vector<const Tensor*>& in, bool training) override {
        const Tensor& x = *in[0];
        assert(x.rank() == 4 && x.dim(1) == c_);
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int plane = h * w;
        const std::size_t count = static_cast<std::size_t>(n) * plane;
        train_mode_ = training;
        xhat_ = Tensor(x.shape());
        invstd_.assign(c_, 0.0f);
        Tensor y(x.shape());

        for (int c = 0; c < c_; ++c) {
            float mean, var;
            if (training) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) {
                    const float* p = x.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    for (int k = 0; k < plane; ++k) s += p[k];
                }
                mean = static_cast<float>(s / static_cast<double>(count));
                double sq = 0.0;
                for (int i = 0; i < n; ++i) {
                    const float* p = x.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    for (int k = 0; k < plane; ++k) {
                        const double d = p[k] - mean;
                        sq += d * d;
                    }
                }
                var = static_cast<float>(sq / static_cast<double>(count));
                const float unbiased = count > 1
                    ? static_cast<float>(sq / static_cast<double>(count - 1)) : var;
                rmean_.value[c] = (1.0f - momentum_) * rmean_.value[c] + momentum_ * mean;
                rvar_.value[c] = (1.0f - momentum_) * rvar_.value[c] + momentum_ * unbiased;
            } else {
                mean = rmean_.value[c];
                var = rvar_.value[c];
            }
            const float istd = 1.0f / std::sqrt(var + eps_);
            invstd_[c] = istd;
            const float g = gamma_.value[c], b = beta_.value[c];
            for (int i = 0; i < n; ++i) {
                const float* p = x.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                float* xh = xhat_.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                float* yp = y.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                for (int k = 0; k < plane; ++k) {
                    const float v = (p[k] - mean) * istd;
                    xh[k] = v;
                    yp[k] = g * v + b;
                }
            }
        }
        return y;
    }

    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int plane = h * w;
        const double count = static_cast<double>(n) * plane;
        Tensor gx(x.shape());

        for (int c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int i = 0; i < n; ++i) {
                const float* gy = gout.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                const float* xh = xhat_.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                for (int k = 0; k < plane; ++k) {
                    sum_dy += gy[k];
                    sum_dy_xhat += static_cast<double>(gy[k]) * xh[k];
                }
            }
            gamma_.grad[c] += static_cast<float>(sum_dy_xhat);
            beta_.grad[c] += static_cast<float>(sum_dy);

            const float g = gamma_.value[c], istd = invstd_[c];
            if (train_mode_) {
                const float k1 = static_cast<float>(g * istd / count);
                const float sdy = static_cast<float>(sum_dy);
                const float sdx = static_cast<float>(sum_dy_xhat);
                for (int i = 0; i < n; ++i) {
                    const float* gy = gout.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    const float* xh = xhat_.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    float* gp = gx.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    for (int k = 0; k < plane; ++k)
                        gp[k] = k1 * (static_cast<float>(count) * gy[k] - sdy - xh[k] * sdx);
                }
            } else {
                const float k1 = g * istd;
                for (int i = 0; i < n; ++i) {
                    const float* gy = gout.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    float* gp = gx.data() + (static_cast<size_t>(i) * c_ + c) * plane;
                    for (int k = 0; k < plane; ++k) gp[k] = k1 * gy[k];
                }
            }
        }
        return {std::move(gx)};
    }

    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<Param*> state() override { return {&rmean_, &rvar_}; }
    int out_rank(const std::vector<int>&) const override { return 4; }

private:
    int c_;
    float eps_, momentum_;
    Param gamma_, beta_, rmean_, rvar_;
    Tensor xhat_;
    std::vector<float> invstd_;
    bool train_mode_ = false;
};

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------
class ReLU : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        Tensor y = *in[0];
        for (std::size_t i = 0; i < y.numel(); ++i) y[i] = std::max(0.0f, y[i]);
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>&, const Tensor& out,
                                 const Tensor& gout) override {
        Tensor gx(gout.shape());
        for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] = out[i] > 0.0f ? gout[i] : 0.0f;
        return {std::move(gx)};
    }
};

class HardSwish : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        Tensor y(x.shape());
        for (std::size_t i = 0; i < y.numel(); ++i) {
            const float v = x[i];
            y[i] = v * std::clamp(v + 3.0f, 0.0f, 6.0f) / 6.0f;
        }
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        Tensor gx(gout.shape());
        for (std::size_t i = 0; i < gx.numel(); ++i) {
            const float v = x[i];
            float d;
            if (v <= -3.0f) d = 0.0f;
            else if (v >= 3.0f) d = 1.0f;
            else d = (2.0f * v + 3.0f) / 6.0f;
            gx[i] = gout[i] * d;
        }
        return {std::move(gx)};
    }
};

class HardSigmoid : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        Tensor y(x.shape());
        for (std::size_t i = 0; i < y.numel(); ++i)
            y[i] = std::clamp(x[i] + 3.0f, 0.0f, 6.0f) / 6.0f;
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        Tensor gx(gout.shape());
        for (std::size_t i = 0; i < gx.numel(); ++i)
            gx[i] = (x[i] > -3.0f && x[i] < 3.0f) ? gout[i] / 6.0f : 0.0f;
        return {std::move(gx)};
    }
};

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------
class MaxPool2d : public Layer {
public:
    MaxPool2d(int k, int s, int p = 0) : k_(k), s_(s), p_(p) {}

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const int oh = Conv2d::out_size(h, k_, s_, p_), ow = Conv2d::out_size(w, k_, s_, p_);
        Tensor y({n, c, oh, ow});
        argmax_.assign(y.numel(), 0);
        std::size_t oi = 0;
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float* xp = x.data() + (static_cast<size_t>(i) * c + ch) * h * w;
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q, ++oi) {
                        float best = -std::numeric_limits<float>::infinity();
                        std::size_t besti = 0;
                        const int y0 = r * s_ - p_, x0 = q * s_ - p_;
                        for (int ki = 0; ki < k_; ++ki) {
                            const int yy = y0 + ki;
                            if (yy < 0 || yy >= h) continue;
                            for (int kj = 0; kj < k_; ++kj) {
                                const int xx = x0 + kj;
                                if (xx < 0 || xx >= w) continue;
                                const float v = xp[yy * w + xx];
                                if (v > best) {
                                    best = v;
                                    besti = (static_cast<size_t>(i) * c + ch) *
                                                static_cast<size_t>(h) * w +
                                            static_cast<size_t>(yy) * w + xx;
                                }
                            }
                        }
                        y[oi] = best;
                        argmax_[oi] = besti;
                    }
            }
        return y;
    }

    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        Tensor gx(in[0]->shape());
        for (std::size_t i = 0; i < gout.numel(); ++i) gx[argmax_[i]] += gout[i];
        return {std::move(gx)};
    }

    int out_rank(const std::vector<int>&) const override { return 4; }

private:
    int k_, s_, p_;
    std::vector<std::size_t> argmax_;
};

class AvgPool2d : public Layer {
public:
    // count_include_pad semantics: divisor is always k*k.
    AvgPool2d(int k, int s, int p = 0) : k_(k), s_(s), p_(p) {}

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const int oh = Conv2d::out_size(h, k_, s_, p_), ow = Conv2d::out_size(w, k_, s_, p_);
        Tensor y({n, c, oh, ow});
        const float inv = 1.0f / static_cast<float>(k_ * k_);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float* xp = x.data() + (static_cast<size_t>(i) * c + ch) * h * w;
                float* yp = y.data() + (static_cast<size_t>(i) * c + ch) * oh * ow;
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        float acc = 0.0f;
                        const int y0 = r * s_ - p_, x0 = q * s_ - p_;
                        for (int ki = 0; ki < k_; ++ki) {
                            const int yy = y0 + ki;
                            if (yy < 0 || yy >= h) continue;
                            for (int kj = 0; kj < k_; ++kj) {
                                const int xx = x0 + kj;
                                if (xx >= 0 && xx < w) acc += xp[yy * w + xx];
                            }
                        }
                        yp[r * ow + q] = acc * inv;
                    }
            }
        return y;
    }

    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor& out,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const int oh = out.dim(2), ow = out.dim(3);
        Tensor gx(x.shape());
        const float inv = 1.0f / static_cast<float>(k_ * k_);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                float* gp = gx.data() + (static_cast<size_t>(i) * c + ch) * h * w;
                const float* gy = gout.data() + (static_cast<size_t>(i) * c + ch) * oh * ow;
                for (int r = 0; r < oh; ++r)
                    for (int q = 0; q < ow; ++q) {
                        const float g = gy[r * ow + q] * inv;
                        const int y0 = r * s_ - p_, x0 = q * s_ - p_;
                        for (int ki = 0; ki < k_; ++ki) {
                            const int yy = y0 + ki;
                            if (yy < 0 || yy >= h) continue;
                            for (int kj = 0; kj < k_; ++kj) {
                                const int xx = x0 + kj;
                                if (xx >= 0 && xx < w) gp[yy * w + xx] += g;
                            }
                        }
                    }
            }
        return {std::move(gx)};
    }

    int out_rank(const std::vector<int>&) const override { return 4; }

private:
    int k_, s_, p_;
};

// (N,C,H,W) -> (N,C)
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
        Tensor y({n, c});
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float* p = x.data() + (static_cast<size_t>(i) * c + ch) * plane;
                float acc = 0.0f;
                for (int k = 0; k < plane; ++k) acc += p[k];
                y.at(i, ch) = acc / static_cast<float>(plane);
            }
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
        Tensor gx(x.shape());
        const float inv = 1.0f / static_cast<float>(plane);
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float g = gout.at(i, ch) * inv;
                float* p = gx.data() + (static_cast<size_t>(i) * c + ch) * plane;
                for (int k = 0; k < plane; ++k) p[k] = g;
            }
        return {std::move(gx)};
    }
    int out_rank(const std::vector<int>&) const override { return 2; }
};

// ---------------------------------------------------------------------------
// Fully connected: (N,F) -> (N,O)
// ---------------------------------------------------------------------------
class Linear : public Layer {
public:
    Linear(int in_f, int out_f)
        : in_f_(in_f), out_f_(out_f), w_("weight", {out_f, in_f}), b_("bias", {out_f}) {}

    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        assert(x.rank() == 2 && x.dim(1) == in_f_);
        const int n = x.dim(0);
        Tensor y({n, out_f_});
        sgemm(false, true, n, out_f_, in_f_, 1.0f, x.data(), in_f_, w_.value.data(), in_f_,
              0.0f, y.data(), out_f_);
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out_f_; ++o) y.at(i, o) += b_.value[o];
        return y;
    }

    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        const int n = x.dim(0);
        // gw += gout^T (O x N) * x (N x F)
        sgemm(true, false, out_f_, in_f_, n, 1.0f, gout.data(), out_f_, x.data(), in_f_,
              1.0f, w_.grad.data(), in_f_);
        for (int i = 0; i < n; ++i)
            for (int o = 0; o < out_f_; ++o) b_.grad[o] += gout.at(i, o);
        Tensor gx({n, in_f_});
        sgemm(false, false, n, in_f_, out_f_, 1.0f, gout.data(), out_f_, w_.value.data(),
              in_f_, 0.0f, gx.data(), in_f_);
        return {std::move(gx)};
    }

    std::vector<Param*> params() override { return {&w_, &b_}; }
    int out_rank(const std::vector<int>&) const override { return 2; }
    int fan_in() const { return in_f_; }
    Param& weight() { return w_; }
    Param& bias() { return b_; }

private:
    int in_f_, out_f_;
    Param w_, b_;
};

// ---------------------------------------------------------------------------
// Structural layers
// ---------------------------------------------------------------------------
class Add : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        Tensor y = *in[0];
        y.add_(*in[1]);
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>&, const Tensor&,
                                 const Tensor& gout) override {
        return {gout, gout};
    }
};

// Channel-axis concatenation of any number of 4-D inputs.
class Concat : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const int n = in[0]->dim(0), h = in[0]->dim(2), w = in[0]->dim(3);
        int c_total = 0;
        for (const Tensor* t : in) c_total += t->dim(1);
        Tensor y({n, c_total, h, w});
        const int plane = h * w;
        for (int i = 0; i < n; ++i) {
            int c_off = 0;
            for (const Tensor* t : in) {
                const int tc = t->dim(1);
                std::memcpy(y.data() + (static_cast<size_t>(i) * c_total + c_off) * plane,
                            t->data() + static_cast<size_t>(i) * tc * plane,
                            sizeof(float) * static_cast<size_t>(tc) * plane);
                c_off += tc;
            }
        }
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor& out,
                                 const Tensor& gout) override {
        const int n = out.dim(0), c_total = out.dim(1), plane = out.dim(2) * out.dim(3);
        std::vector<Tensor> gins;
        gins.reserve(in.size());
        int c_off = 0;
        for (const Tensor* t : in) {
            const int tc = t->dim(1);
            Tensor g(t->shape());
            for (int i = 0; i < n; ++i)
                std::memcpy(g.data() + static_cast<size_t>(i) * tc * plane,
                            gout.data() + (static_cast<size_t>(i) * c_total + c_off) * plane,
                            sizeof(float) * static_cast<size_t>(tc) * plane);
            c_off += tc;
            gins.push_back(std::move(g));
        }
        return gins;
    }
};

// Squeeze-excitation gating: inputs {features (N,C,H,W), gate (N,C)}.
class ChannelScale : public Layer {
public:
    Tensor forward(const std::vector<const Tensor*>& in, bool) override {
        const Tensor& x = *in[0];
        const Tensor& g = *in[1];
        const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
        Tensor y(x.shape());
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float gv = g.at(i, ch);
                const float* xp = x.data() + (static_cast<size_t>(i) * c + ch) * plane;
                float* yp = y.data() + (static_cast<size_t>(i) * c + ch) * plane;
                for (int k = 0; k < plane; ++k) yp[k] = xp[k] * gv;
            }
        return y;
    }
    std::vector<Tensor> backward(const std::vector<const Tensor*>& in, const Tensor&,
                                 const Tensor& gout) override {
        const Tensor& x = *in[0];
        const Tensor& g = *in[1];
        const int n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
        Tensor gx(x.shape());
        Tensor gg(g.shape());
        for (int i = 0; i < n; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const float gv = g.at(i, ch);
                const float* xp = x.data() + (static_cast<size_t>(i) * c + ch) * plane;
                const float* gy = gout.data() + (static_cast<size_t>(i) * c + ch) * plane;
                float* gp = gx.data() + (static_cast<size_t>(i) * c + ch) * plane;
                float acc = 0.0f;
                for (int k = 0; k < plane; ++k) {
                    gp[k] = gy[k] * gv;
                    acc += gy[k] * xp[k];
                }
                gg.at(i, ch) = acc;
            }
        return {std::move(gx), std::move(gg)};
    }
    int out_rank(const std::vector<int>& in_ranks) const override { return in_ranks[0]; }
};

}  // namespace camscope::nn
