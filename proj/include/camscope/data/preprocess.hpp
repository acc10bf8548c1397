#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/core/rng.hpp"

namespace camscope::data {

struct AugmentConfig {
    double rotation_max_deg = 15.0;
    double hflip_prob = 0.5;
    double crop_fraction_lo = 0.85, crop_fraction_hi = 1.0;
    double brightness_delta_lo = -0.1, brightness_delta_hi = 0.1;
    double contrast_factor_lo = 0.9, contrast_factor_hi = 1.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (hflip_prob < 0.0 || hflip_prob > 1.0)
            throw ConfigError("hflip_prob must be in [0,1]");
        if (rotation_max_deg < 0.0) throw ConfigError("rotation_max_deg must be >= 0");
        if (crop_fraction_lo <= 0.0 || crop_fraction_hi > 1.0 ||
            crop_fraction_lo > crop_fraction_hi)
            throw ConfigError("crop_fraction range must satisfy 0 < lo <= hi <= 1");
        if (brightness_delta_lo > brightness_delta_hi)
            throw ConfigError("brightness_delta range must be ordered");
        if (contrast_factor_lo > contrast_factor_hi)
            throw ConfigError("contrast_factor range must be ordered");
    }
};

struct PreprocessConfig {
    int target_side = 256;
    bool normalize = true;
    std::optional<AugmentConfig> augment;

    void validate() const {
        if (target_side < 32) throw ConfigError("target_side must be at least 32");
        if (augment) augment->validate();
    }
};

// Bilinear resize with half-pixel centers. side == input side is an exact
// identity; constants are preserved.
inline Image resize_bilinear(const Image& in, int out_h, int out_w) {
    if (in.h == out_h && in.w == out_w) return in;
    Image out(out_h, out_w, in.c);
    const double sy = static_cast<double>(in.h) / out_h;
    const double sx = static_cast<double>(in.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            for (int c = 0; c < in.c; ++c)
                out.at(y, x, c) = bilinear_sample(in, static_cast<float>(fy),
                                                  static_cast<float>(fx), c);
        }
    }
    return out;
}

inline Image resize_square(const Image& in, int side) {
    return resize_bilinear(in, side, side);
}

// [0,255] -> [0,1]; refuses inputs outside the expected byte range.
inline Image normalize_unit(const Image& in) {
    Image out = in;
    for (float& v : out.px) {
        if (v < 0.0f || v > 255.0f)
            throw DataError("normalize: pixel outside [0,255]");
        v /= 255.0f;
    }
    return out;
}

namespace detail {

inline Image rotate_replicate(const Image& in, double deg) {
    if (deg == 0.0) return in;
    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (in.h - 1) / 2.0, cx = (in.w - 1) / 2.0;
    Image out(in.h, in.w, in.c);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            // inverse mapping into the source image
            const double dy = y - cy, dx = x - cx;
            const double sy = cy + (sn * dx + cs * dy);
            const double sx = cx + (cs * dx - sn * dy);
            for (int c = 0; c < in.c; ++c)
                out.at(y, x, c) = bilinear_sample(in, static_cast<float>(sy),
                                                  static_cast<float>(sx), c);
        }
    return out;
}

inline Image hflip(const Image& in) {
    Image out(in.h, in.w, in.c);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (int c = 0; c < in.c; ++c) out.at(y, x, c) = in.at(y, in.w - 1 - x, c);
    return out;
}

}  // namespace detail

// Stochastic training-time chain, applied in fixed order: rotate, flip,
// crop+resize back, brightness, contrast, clip. All random draws happen
// unconditionally so substreams stay aligned across config variations.
inline Image augment(const Image& in, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    const double angle = rng.uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
    const double flip_u = rng.uniform();
    const double crop_f = rng.uniform(cfg.crop_fraction_lo, cfg.crop_fraction_hi);
    const double crop_uy = rng.uniform();
    const double crop_ux = rng.uniform();
    const double delta = rng.uniform(cfg.brightness_delta_lo, cfg.brightness_delta_hi);
    const double factor = rng.uniform(cfg.contrast_factor_lo, cfg.contrast_factor_hi);

    Image img = detail::rotate_replicate(in, angle);
    if (flip_u < cfg.hflip_prob) img = detail::hflip(img);

    const int crop_h = std::max(1, static_cast<int>(std::lround(crop_f * img.h)));
    const int crop_w = std::max(1, static_cast<int>(std::lround(crop_f * img.w)));
    if (crop_h < img.h || crop_w < img.w) {
        const int y0 = static_cast<int>(crop_uy * (img.h - crop_h + 1));
        const int x0 = static_cast<int>(crop_ux * (img.w - crop_w + 1));
        Image crop(crop_h, crop_w, img.c);
        for (int y = 0; y < crop_h; ++y)
            for (int x = 0; x < crop_w; ++x)
                for (int c = 0; c < img.c; ++c)
                    crop.at(y, x, c) = img.at(y0 + y, x0 + x, c);
        img = resize_bilinear(crop, in.h, in.w);
    }

    if (delta != 0.0)
        for (float& v : img.px) v += static_cast<float>(delta);

    if (factor != 1.0) {
        for (int c = 0; c < img.c; ++c) {
            double mean = 0.0;
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x) mean += img.at(y, x, c);
            mean /= static_cast<double>(img.h) * img.w;
            for (int y = 0; y < img.h; ++y)
                for (int x = 0; x < img.w; ++x)
                    img.at(y, x, c) = static_cast<float>(
                        mean + factor * (img.at(y, x, c) - mean));
        }
    }

    for (float& v : img.px) v = std::clamp(v, 0.0f, 1.0f);
    return img;
}

// Deterministic eval-path chain: 3-channel expansion, Step-1 resize,
// unit normalization. Augmentation (train only) and the per-backbone input
// resize happen in the training loop around this.
inline Image preprocess_eval(const Image& raw, const PreprocessConfig& cfg) {
    cfg.validate();
    Image img = replicate_to_rgb(raw);
    img = resize_square(img, cfg.target_side);
    if (cfg.normalize) img = normalize_unit(img);
    return img;
}

}  // namespace camscope::data
