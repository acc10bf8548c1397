#pragma once

#include <cmath>
#include <vector>

#include "camscope/nn/layer.hpp"

namespace camscope::nn {

class Adam {
public:
    Adam(std::vector<Param*> params, float lr, float beta1 = 0.9f, float beta2 = 0.999f,
         float eps = 1e-8f)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        m_.reserve(params_.size());
        v_.reserve(params_.size());
        for (Param* p : params_) {
            m_.emplace_back(p->value.numel(), 0.0f);
            v_.emplace_back(p->value.numel(), 0.0f);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(static_cast<double>(b1_), t_);
        const double bc2 = 1.0 - std::pow(static_cast<double>(b2_), t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param& p = *params_[i];
            float* w = p.value.data();
            const float* g = p.grad.data();
            float* m = m_[i].data();
            float* v = v_[i].data();
            for (std::size_t k = 0; k < p.value.numel(); ++k) {
                m[k] = b1_ * m[k] + (1.0f - b1_) * g[k];
                v[k] = b2_ * v[k] + (1.0f - b2_) * g[k] * g[k];
                const double mh = m[k] / bc1;
                const double vh = v[k] / bc2;
                w[k] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
            }
        }
    }

    int steps() const { return t_; }
    float lr() const { return lr_; }

private:
    std::vector<Param*> params_;
    float lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace camscope::nn
