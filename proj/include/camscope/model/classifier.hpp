#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/data/preprocess.hpp"
#include "camscope/model/builders.hpp"
#include "camscope/nn/loss.hpp"

namespace camscope::model {

// Activations and target-logit gradients captured at one tap layer for a
// single image.
struct TapResult {
    Tensor activations;  // (C,H,W)
    Tensor gradients;    // (C,H,W), d logit[target] / d activations
    std::vector<float> logits;
    int target_class = -1;
    std::string tap_layer;
};

// Feature extractor + GAP + dense head. Owns the graph; capture() and
// forward() mutate cached node state, so instances are not shareable across
// concurrent calls.
class ClassifierModel {
public:
    ClassifierModel(BackboneSpec spec, int n_classes, std::uint64_t seed)
        : spec_(resolve_spec(std::move(spec))), n_classes_(n_classes) {
        if (n_classes < 2) throw ConfigError("n_classes must be at least 2");

        Rng feat_rng(Rng::derive(seed, "init"));
        const BuiltFeatures feat = build_features(spec_.name, net_, feat_rng);
        feature_channels_ = feat.channels;

        const int gap = net_.add("gap", std::make_unique<nn::GlobalAvgPool>(), {feat.out_node});
        // zero-initialized head: a fresh classifier contributes no noise when
        // fine-tuning on pretrained features
        auto fc = std::make_unique<nn::Linear>(feat.channels, n_classes);
        fc->weight().value.zero();
        fc->bias().value.zero();
        head_ = fc.get();
        net_.add("fc", std::move(fc), {gap});

        tap_node_ = net_.find(spec_.last_conv_layer);
        if (tap_node_ < 0 || net_.rank(tap_node_) != 4)
            throw ConfigError("tap layer '" + spec_.last_conv_layer +
                              "' not found; available: " + join_taps());
    }

    const BackboneSpec& spec() const { return spec_; }
    int n_classes() const { return n_classes_; }
    int feature_channels() const { return feature_channels_; }
    nn::Network& network() { return net_; }

    const std::vector<std::string>& class_names() const { return class_names_; }
    void set_class_names(std::vector<std::string> names) {
        if (!names.empty() && static_cast<int>(names.size()) != n_classes_)
            throw DataError("class name count does not match n_classes");
        class_names_ = std::move(names);
    }

    const data::PreprocessConfig& preprocess() const { return preprocess_; }
    void set_preprocess(const data::PreprocessConfig& pp) { preprocess_ = pp; }

    // (N,3,side,side) -> (N,n_classes)
    const Tensor& forward(const Tensor& batch, bool training) {
        if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != spec_.input_side ||
            batch.dim(3) != spec_.input_side)
            throw DataError("model input must be (N,3," +
                            std::to_string(spec_.input_side) + "," +
                            std::to_string(spec_.input_side) + "), got " + batch.shape_str());
        return net_.forward(batch, training);
    }

    // Names of every 4-D activation in forward order.
    std::vector<std::string> list_tap_layers() const {
        std::vector<std::string> out;
        for (int i = 1; i < net_.size(); ++i)
            if (net_.rank(i) == 4) out.push_back(net_.name(i));
        return out;
    }

    // Node id for a named tap layer, validating that it is a 4-D activation.
    int resolve_tap(const std::string& layer) const {
        const int node = net_.find(layer);
        if (node < 0 || net_.rank(node) != 4)
            throw ConfigError("tap layer '" + layer + "' not found; available: " + join_taps());
        return node;
    }

    // One eval-mode forward plus one reverse pass of logit[target].
    // target = nullopt resolves to the predicted class (lowest-index ties).
    TapResult capture(const Tensor& input, const std::string& layer,
                      std::optional<int> target) {
        const int node = resolve_tap(layer);
        if (input.rank() != 4 || input.dim(0) != 1)
            throw DataError("capture expects a single-image batch, got " + input.shape_str());

        const Tensor& logits = forward(input, false);
        TapResult r;
        r.tap_layer = layer;
        r.logits.assign(logits.data(), logits.data() + logits.numel());
        r.target_class = target ? *target : nn::argmax_row(logits, 0);
        if (r.target_class < 0 || r.target_class >= n_classes_)
            throw ConfigError("target class out of range");

        Tensor gout(logits.shape());
        gout.at(0, r.target_class) = 1.0f;
        net_.zero_grads();
        net_.backward(gout);

        const Tensor& act = net_.node_output(node);
        const Tensor& grad = net_.node_grad(node);
        const int c = act.dim(1), h = act.dim(2), w = act.dim(3);
        r.activations = Tensor({c, h, w}, std::vector<float>(act.data(), act.data() + act.numel()));
        if (grad.empty()) {
            // tap not on any path to the output: gradient is identically zero
            r.gradients = Tensor({c, h, w});
        } else {
            r.gradients =
                Tensor({c, h, w}, std::vector<float>(grad.data(), grad.data() + grad.numel()));
        }
        return r;
    }

    int tap_node() const { return tap_node_; }
    nn::Linear& head() { return *head_; }

private:
    std::string join_taps() const {
        std::string s;
        for (const std::string& t : list_tap_layers()) {
            if (!s.empty()) s += ", ";
            s += t;
        }
        return s;
    }

    BackboneSpec spec_;
    int n_classes_;
    int feature_channels_ = 0;
    nn::Network net_;
    nn::Linear* head_ = nullptr;
    int tap_node_ = -1;
    std::vector<std::string> class_names_;
    data::PreprocessConfig preprocess_;
};

// Image (already resized to input_side, values in [0,1]) -> (1,3,S,S) tensor.
inline Tensor model_input(const Image& img) {
    Tensor chw = to_chw(replicate_to_rgb(img));
    return Tensor({1, chw.dim(0), chw.dim(1), chw.dim(2)},
                  std::vector<float>(chw.data(), chw.data() + chw.numel()));
}

}  // namespace camscope::model
