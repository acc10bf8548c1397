#pragma once

#include <cmath>
#include <vector>

#include "camscope/core/tensor.hpp"

namespace camscope::nn {

// Row-wise softmax of (N,K) logits, computed with the max-shift trick.
inline Tensor softmax(const Tensor& logits) {
    const int n = logits.dim(0), k = logits.dim(1);
    Tensor p(logits.shape());
    for (int i = 0; i < n; ++i) {
        float mx = logits.at(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(logits.at(i, j) - mx));
        for (int j = 0; j < k; ++j)
            p.at(i, j) = static_cast<float>(std::exp(static_cast<double>(logits.at(i, j) - mx)) / denom);
    }
    return p;
}

// Mean cross-entropy over the batch plus the logit gradient (softmax - onehot)/N.
struct CeResult {
    float loss;
    Tensor grad;
};

inline CeResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    CeResult r{0.0f, Tensor(logits.shape())};
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        float mx = logits.at(i, 0);
        for (int j = 1; j < k; ++j) mx = std::max(mx, logits.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(logits.at(i, j) - mx));
        const double lse = mx + std::log(denom);
        total += lse - logits.at(i, labels[i]);
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(static_cast<double>(logits.at(i, j) - mx)) / denom;
            r.grad.at(i, j) = static_cast<float>((p - (j == labels[i] ? 1.0 : 0.0)) / n);
        }
    }
    r.loss = static_cast<float>(total / n);
    return r;
}

// Lowest index wins ties, so results do not depend on accumulation noise sign.
inline int argmax_row(const Tensor& t, int row) {
    const int k = t.dim(1);
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (t.at(row, j) > t.at(row, best)) best = j;
    return best;
}

}  // namespace camscope::nn
