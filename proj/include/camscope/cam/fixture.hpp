#pragma once
// A tiny hand-specified network whose every intermediate value can be checked
// by hand: one 3x3 valid conv (1 -> 2 channels) on a 6x6 input, global average
// pooling, and a dense head to 3 classes. Channel 0 is a vertical-edge filter,
// channel 1 a horizontal-edge filter, so gradients and activations carry mixed
// signs and the ReLUs in every CAM variant do real work.

#include <memory>
#include <optional>
#include <vector>

#include "camscope/core/tensor.hpp"
#include "camscope/model/classifier.hpp"
#include "camscope/nn/layers.hpp"
#include "camscope/nn/network.hpp"

namespace camscope::cam {

struct CamFixture {
    nn::Network net;
    int conv_node = 0;
    Tensor input;  // (1,1,6,6)
    int n_classes = 3;
};

inline CamFixture make_cam_fixture() {
    CamFixture f;

    auto conv = std::make_unique<nn::Conv2d>(1, 2, 3, 1, 0);
    conv->weight().value = Tensor({2, 1, 3, 3}, {
        0.5f, 0.0f, -0.5f,   0.5f, 0.0f, -0.5f,   0.5f, 0.0f, -0.5f,
        0.25f, 0.25f, 0.25f, 0.0f, 0.0f, 0.0f,    -0.25f, -0.25f, -0.25f,
    });
    conv->bias().value = Tensor({2}, {0.05f, -0.05f});
    f.conv_node = f.net.add("conv", std::move(conv), {f.net.input()});

    const int gap = f.net.add("gap", std::make_unique<nn::GlobalAvgPool>(), {f.conv_node});
    auto fc = std::make_unique<nn::Linear>(2, 3);
    fc->weight().value = Tensor({3, 2}, {0.8f, -0.3f, -0.2f, 0.6f, 0.4f, 0.4f});
    fc->bias().value = Tensor({3}, {0.01f, -0.02f, 0.03f});
    f.net.add("fc", std::move(fc), {gap});

    f.input = Tensor({1, 1, 6, 6}, {
        0.10f, 0.20f, 0.30f, 0.40f, 0.50f, 0.60f,
        0.20f, 0.90f, 0.80f, 0.30f, 0.10f, 0.40f,
        0.30f, 0.85f, 0.95f, 0.25f, 0.15f, 0.30f,
        0.40f, 0.30f, 0.20f, 0.70f, 0.60f, 0.20f,
        0.50f, 0.10f, 0.15f, 0.65f, 0.75f, 0.10f,
        0.60f, 0.40f, 0.30f, 0.20f, 0.10f, 0.05f,
    });
    return f;
}

// Forward + reverse pass of logit[target] at the conv tap, mirroring what a
// full classifier's capture produces.
inline model::TapResult fixture_tap(CamFixture& f, std::optional<int> target = std::nullopt) {
    const Tensor& logits = f.net.forward(f.input, false);

    model::TapResult r;
    r.tap_layer = "conv";
    r.logits.assign(logits.data(), logits.data() + logits.numel());
    r.target_class = target ? *target : nn::argmax_row(logits, 0);

    Tensor gout(logits.shape());
    gout.at(0, r.target_class) = 1.0f;
    f.net.zero_grads();
    f.net.backward(gout);

    const Tensor& act = f.net.node_output(f.conv_node);
    const Tensor& grad = f.net.node_grad(f.conv_node);
    const int c = act.dim(1), h = act.dim(2), w = act.dim(3);
    r.activations = Tensor({c, h, w}, std::vector<float>(act.data(), act.data() + act.numel()));
    r.gradients = Tensor({c, h, w}, std::vector<float>(grad.data(), grad.data() + grad.numel()));
    return r;
}

}  // namespace camscope::cam
