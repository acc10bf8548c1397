#pragma once

#include <memory>
#include <string>
#include <vector>

#include "camscope/core/tensor.hpp"

namespace camscope::nn {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n = "") : name(std::move(n)) {}
    Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(shape) {}
};

// A layer owns its parameters and whatever it needs to cache between a
// forward call and the matching backward call. Layers are not safe for
// concurrent use of a single instance.
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor forward(const std::vector<const Tensor*>& in, bool training) = 0;

    // Called after forward with the same inputs; returns grad w.r.t. each input.
    virtual std::vector<Tensor> backward(const std::vector<const Tensor*>& in,
                                         const Tensor& out, const Tensor& gout) = 0;

    // Trainable parameters.
    virtual std::vector<Param*> params() { return {}; }

    // Persistent non-trainable state (e.g. batch-norm running stats).
    virtual std::vector<Param*> state() { return {}; }

    // Output rank given input ranks; used to enumerate 4-D tap layers
    // without running a forward pass.
    virtual int out_rank(const std::vector<int>& in_ranks) const { return in_ranks.at(0); }
};

}  // namespace camscope::nn
