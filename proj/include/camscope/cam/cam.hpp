#pragma once
// GradCAM, GradCAM++, ScoreCAM, and LayerCAM heatmaps computed from tap
// activations, with shared postprocessing to normalized maps and overlays.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/core/tensor.hpp"
#include "camscope/data/preprocess.hpp"
#include "camscope/model/classifier.hpp"
#include "camscope/nn/loss.hpp"

namespace camscope::cam {

struct Heatmap {
    Tensor values;  // (H,W)
    bool normalized = false;
    std::string method;
    std::string tap_layer;
    int target_class = -1;
};

namespace detail {

inline void require_tap(const model::TapResult& tap) {
    if (tap.activations.rank() != 3 || tap.activations.numel() == 0)
        throw DataError("tap activations must be a non-empty (C,H,W) tensor");
    if (!tap.activations.same_shape(tap.gradients))
        throw DataError("tap activations and gradients must share a shape");
}

inline Heatmap raw_map(const model::TapResult& tap, std::string method, Tensor values) {
    Heatmap h;
    h.values = std::move(values);
    h.normalized = false;
    h.method = std::move(method);
    h.tap_layer = tap.tap_layer;
    h.target_class = tap.target_class;
    return h;
}

// (v - min) / (max - min); a constant map becomes identically zero. The
// division form keeps the maximum at exactly 1.
inline Tensor minmax_normalize(const Tensor& m) {
    Tensor out(m.shape());
    const float lo = m.min_value(), hi = m.max_value();
    if (hi == lo) return out;
    const float range = hi - lo;
    for (std::size_t i = 0; i < m.numel(); ++i) out[i] = (m[i] - lo) / range;
    return out;
}

inline Tensor upsample_map(const Tensor& m, int side) {
    const int h = m.dim(0), w = m.dim(1);
    Image img(h, w, 1);
    std::copy(m.data(), m.data() + m.numel(), img.px.begin());
    const Image up = data::resize_bilinear(img, side, side);
    return Tensor({side, side}, up.px);
}

}  // namespace detail

// map = ReLU(sum_k alpha_k A_k), alpha_k = spatial mean of the gradients
inline Heatmap grad_cam(const model::TapResult& tap) {
    detail::require_tap(tap);
    const int c = tap.activations.dim(0), h = tap.activations.dim(1),
              w = tap.activations.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor map({h, w});
    for (int k = 0; k < c; ++k) {
        const float* g = tap.gradients.data() + k * plane;
        const float* a = tap.activations.data() + k * plane;
        double alpha = 0.0;
        for (std::size_t i = 0; i < plane; ++i) alpha += g[i];
        alpha /= static_cast<double>(plane);
        for (std::size_t i = 0; i < plane; ++i)
            map[i] += static_cast<float>(alpha) * a[i];
    }
    for (std::size_t i = 0; i < plane; ++i) map[i] = std::max(0.0f, map[i]);
    return detail::raw_map(tap, "gradcam", std::move(map));
}

// alpha_ij^k = G_ij^2 / (2 G_ij^2 + sum_ab A_ab G_ab^3), zero denominator -> 0;
// w_k = sum_ij alpha_ij^k ReLU(G_ij); map = ReLU(sum_k w_k A_k)
inline Heatmap grad_cam_pp(const model::TapResult& tap) {
    detail::require_tap(tap);
    const int c = tap.activations.dim(0), h = tap.activations.dim(1),
              w = tap.activations.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor map({h, w});
    for (int k = 0; k < c; ++k) {
        const float* g = tap.gradients.data() + k * plane;
        const float* a = tap.activations.data() + k * plane;
        double s3 = 0.0;
        for (std::size_t i = 0; i < plane; ++i)
            s3 += static_cast<double>(a[i]) * g[i] * g[i] * g[i];
        double wk = 0.0;
        for (std::size_t i = 0; i < plane; ++i) {
            const double g2 = static_cast<double>(g[i]) * g[i];
            const double denom = 2.0 * g2 + s3;
            const double alpha = denom == 0.0 ? 0.0 : g2 / denom;
            wk += alpha * std::max(0.0, static_cast<double>(g[i]));
        }
        for (std::size_t i = 0; i < plane; ++i)
            map[i] += static_cast<float>(wk) * a[i];
    }
    for (std::size_t i = 0; i < plane; ++i) map[i] = std::max(0.0f, map[i]);
    return detail::raw_map(tap, "gradcampp", std::move(map));
}

// map = ReLU(sum_k ReLU(G_k) * A_k), elementwise
inline Heatmap layer_cam(const model::TapResult& tap) {
    detail::require_tap(tap);
    const int c = tap.activations.dim(0), h = tap.activations.dim(1),
              w = tap.activations.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor map({h, w});
    for (int k = 0; k < c; ++k) {
        const float* g = tap.gradients.data() + k * plane;
        const float* a = tap.activations.data() + k * plane;
        for (std::size_t i = 0; i < plane; ++i) map[i] += std::max(0.0f, g[i]) * a[i];
    }
    for (std::size_t i = 0; i < plane; ++i) map[i] = std::max(0.0f, map[i]);
    return detail::raw_map(tap, "layercam", std::move(map));
}

// Gradient-free CAM over any network: each channel's activation map is
// upsampled to input resolution, min-max normalized, and used to mask the
// input; the masked forward's target logit scores the channel, softmax over
// scores weights the channels. Exclusive use of `net` for the whole call;
// cached node outputs are left at the last masked batch.
inline Heatmap score_cam_net(nn::Network& net, int tap_node, const Tensor& input, int target,
                             int batch, const std::string& tap_layer_name) {
    if (input.rank() != 4 || input.dim(0) != 1)
        throw DataError("score_cam expects a single-image batch, got " + input.shape_str());
    if (batch < 1) throw ConfigError("score_cam batch must be >= 1");

    const Tensor& logits0 = net.forward(input, false);
    if (target < 0 || target >= logits0.dim(1)) throw ConfigError("target class out of range");

    const Tensor& tap_out = net.node_output(tap_node);
    const int c = tap_out.dim(1), th = tap_out.dim(2), tw = tap_out.dim(3);
    const Tensor acts({c, th, tw},
                      std::vector<float>(tap_out.data(), tap_out.data() + tap_out.numel()));

    const int ic = input.dim(1), sh = input.dim(2), sw = input.dim(3);
    const std::size_t in_plane = static_cast<std::size_t>(sh) * sw;
    const std::size_t tap_plane = static_cast<std::size_t>(th) * tw;

    std::vector<Tensor> masks;
    masks.reserve(c);
    for (int k = 0; k < c; ++k) {
        Tensor chan({th, tw}, std::vector<float>(acts.data() + k * tap_plane,
                                                 acts.data() + (k + 1) * tap_plane));
        masks.push_back(detail::minmax_normalize(detail::upsample_map(chan, sh)));
    }

    std::vector<double> scores(c);
    for (int lo = 0; lo < c; lo += batch) {
        const int hi = std::min(c, lo + batch);
        Tensor masked({hi - lo, ic, sh, sw});
        for (int k = lo; k < hi; ++k) {
            const Tensor& mask = masks[k];
            float* dst = masked.data() + static_cast<std::size_t>(k - lo) * ic * in_plane;
            for (int ch = 0; ch < ic; ++ch) {
                const float* src = input.data() + static_cast<std::size_t>(ch) * in_plane;
                for (std::size_t i = 0; i < in_plane; ++i) dst[ch * in_plane + i] = src[i] * mask[i];
            }
        }
        const Tensor& lg = net.forward(masked, false);
        for (int k = lo; k < hi; ++k) scores[k] = lg.at(k - lo, target);
    }

    const double smax = *std::max_element(scores.begin(), scores.end());
    double z = 0.0;
    for (double s : scores) z += std::exp(s - smax);
    Tensor map({th, tw});
    for (int k = 0; k < c; ++k) {
        const float wk = static_cast<float>(std::exp(scores[k] - smax) / z);
        const float* a = acts.data() + k * tap_plane;
        for (std::size_t i = 0; i < tap_plane; ++i) map[i] += wk * a[i];
    }
    for (std::size_t i = 0; i < tap_plane; ++i) map[i] = std::max(0.0f, map[i]);

    Heatmap h;
    h.values = std::move(map);
    h.normalized = false;
    h.method = "scorecam";
    h.tap_layer = tap_layer_name;
    h.target_class = target;
    return h;
}

// target = nullopt resolves to the predicted class (lowest-index ties)
inline Heatmap score_cam(model::ClassifierModel& model, const Tensor& input,
                         const std::string& tap_layer, std::optional<int> target,
                         int batch = 32) {
    const int node = model.resolve_tap(tap_layer);
    const Tensor& logits = model.forward(input, false);
    const int t = target ? *target : nn::argmax_row(logits, 0);
    return score_cam_net(model.network(), node, input, t, batch, tap_layer);
}

// bilinear upsample to target_side^2, then min-max normalize to [0,1];
// an identically-constant map comes out identically zero
inline Heatmap postprocess(const Heatmap& raw, int target_side) {
    if (raw.normalized) throw ConfigError("postprocess expects a raw (unnormalized) heatmap");
    if (raw.values.rank() != 2 || raw.values.numel() == 0)
        throw DataError("heatmap values must be a non-empty (H,W) tensor");
    if (target_side < 1) throw ConfigError("target_side must be positive");

    Heatmap out;
    out.values = detail::minmax_normalize(detail::upsample_map(raw.values, target_side));
    out.normalized = true;
    out.method = raw.method;
    out.tap_layer = raw.tap_layer;
    out.target_class = raw.target_class;
    return out;
}

// Blend a normalized heatmap, rendered through the viridis colormap, onto
// the grayscale-replicated image: out = (1-alpha) img + alpha colormap(map).
inline Image overlay(const Image& img, const Heatmap& map, double alpha) {
    if (!map.normalized) throw ConfigError("overlay expects a normalized heatmap");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must be in [0,1]");
    if (map.values.rank() != 2 || img.h != map.values.dim(0) || img.w != map.values.dim(1))
        throw DataError("image and heatmap sizes must match");

    cv::Mat gray(img.h, img.w, CV_8UC1);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x)
            gray.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(
                std::lround(std::clamp(map.values.at(y, x), 0.0f, 1.0f) * 255.0f));
    cv::Mat colored;
    cv::applyColorMap(gray, colored, cv::COLORMAP_VIRIDIS);

    const Image base = replicate_to_rgb(img);
    Image out(img.h, img.w, 3);
    const float a = static_cast<float>(alpha);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const auto& bgr = colored.at<cv::Vec3b>(y, x);
            for (int ch = 0; ch < 3; ++ch) {
                const float heat = static_cast<float>(bgr[2 - ch]) / 255.0f;
                out.at(y, x, ch) = (1.0f - a) * base.at(y, x, ch) + a * heat;
            }
        }
    }
    return out;
}

}  // namespace camscope::cam
