#pragma once

#include <algorithm>
#include <cassert>
#include <string>
#include <vector>

#include "camscope/core/tensor.hpp"

namespace camscope {

// Interleaved HWC float image. Stored intensities are 0..255 before
// normalization and 0..1 after.
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> px;

    Image() = default;
    Image(int h_, int w_, int c_, float fill = 0.0f)
        : h(h_), w(w_), c(c_), px(static_cast<size_t>(h_) * w_ * c_, fill) {}

    float& at(int y, int x, int ch) { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }
    float at(int y, int x, int ch) const { return px[(static_cast<size_t>(y) * w + x) * c + ch]; }

    std::size_t numel() const { return px.size(); }
};

struct LabeledImage {
    Image image;
    int label = 0;
    std::string source_id;
};

// Clamped fetch, replicate border.
inline float pixel_clamped(const Image& img, int y, int x, int ch) {
    y = std::clamp(y, 0, img.h - 1);
    x = std::clamp(x, 0, img.w - 1);
    return img.at(y, x, ch);
}

// Bilinear sample at a fractional position, replicate border.
inline float bilinear_sample(const Image& img, float fy, float fx, int ch) {
    float y0f = std::floor(fy);
    float x0f = std::floor(fx);
    int y0 = static_cast<int>(y0f);
    int x0 = static_cast<int>(x0f);
    float dy = fy - y0f;
    float dx = fx - x0f;
    float v00 = pixel_clamped(img, y0, x0, ch);
    float v01 = pixel_clamped(img, y0, x0 + 1, ch);
    float v10 = pixel_clamped(img, y0 + 1, x0, ch);
    float v11 = pixel_clamped(img, y0 + 1, x0 + 1, ch);
    float top = v00 + (v01 - v00) * dx;
    float bot = v10 + (v11 - v10) * dx;
    return top + (bot - top) * dy;
}

// Replicate a single channel to 3 so any backbone accepts the input.
inline Image replicate_to_rgb(const Image& img) {
    if (img.c == 3) return img;
    assert(img.c == 1);
    Image out(img.h, img.w, 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            float v = img.at(y, x, 0);
            out.at(y, x, 0) = v;
            out.at(y, x, 1) = v;
            out.at(y, x, 2) = v;
        }
    return out;
}

// HWC image -> (C,H,W) tensor.
inline Tensor to_chw(const Image& img) {
    Tensor t({img.c, img.h, img.w});
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) t.at(ch, y, x) = img.at(y, x, ch);
    return t;
}

// (C,H,W) tensor -> HWC image.
inline Image from_chw(const Tensor& t) {
    assert(t.rank() == 3);
    Image img(t.dim(1), t.dim(2), t.dim(0));
    for (int ch = 0; ch < img.c; ++ch)
        for (int y = 0; y < img.h; ++y)
            for (int x = 0; x < img.w; ++x) img.at(y, x, ch) = t.at(ch, y, x);
    return img;
}

}  // namespace camscope
