#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "camscope/core/error.hpp"
#include "camscope/core/image.hpp"
#include "camscope/core/rng.hpp"
#include "camscope/data/dataset.hpp"

namespace camscope::data {

inline const std::vector<std::string>& synthetic_class_names() {
    static const std::vector<std::string> names = {"disc", "square", "triangle", "cross",
                                                   "ring"};
    return names;
}

struct SyntheticSpec {
    int classes = 3;
    int per_class = 100;
    int side = 128;
    double noise_sigma = 0.05;  // on the unit intensity scale
    std::uint64_t seed = 0;

    void validate() const {
        if (classes < 2 || classes > 5)
            throw ConfigError("synthetic classes must be between 2 and 5");
        if (side < 64) throw ConfigError("synthetic side must be at least 64");
        if (per_class < 1) throw ConfigError("synthetic per_class must be positive");
        if (noise_sigma < 0) throw ConfigError("synthetic noise_sigma must be non-negative");
    }
};

struct SyntheticDataset {
    ClassRegistry registry;
    std::vector<LabeledImage> images;
    // inclusive pixel bounds [x0, y0, x1, y1] of the rendered primitive,
    // aligned with `images`; used by localization checks
    std::vector<std::array<int, 4>> bboxes;
};

namespace detail {

// foreground membership test for primitive `shape` centred at (cy,cx)
inline bool in_shape(int shape, double y, double x, double cy, double cx, double r) {
    const double dy = y - cy, dx = x - cx;
    switch (shape) {
        case 0:  // disc
            return dy * dy + dx * dx <= r * r;
        case 1:  // square
            return std::abs(dy) <= r && std::abs(dx) <= r;
        case 2: {  // upward triangle
            if (dy < -r || dy > r) return false;
            // width grows linearly from apex (dy=-r) to base (dy=+r)
            const double half = (dy + r) / 2.0;
            return std::abs(dx) <= half;
        }
        case 3: {  // cross
            const double arm = r / 3.0;
            return (std::abs(dx) <= arm && std::abs(dy) <= r) ||
                   (std::abs(dy) <= arm && std::abs(dx) <= r);
        }
        default: {  // ring
            const double d2 = dy * dy + dx * dx;
            return d2 <= r * r && d2 >= (0.55 * r) * (0.55 * r);
        }
    }
}

}  // namespace detail

// Renders one labeled image. Pixels come out in [0,255] on a uint8 grid,
// matching what a decoder would produce for a written PNG.
inline std::pair<LabeledImage, std::array<int, 4>> render_synthetic(int shape, int side,
                                                                    double noise_sigma,
                                                                    Rng& rng) {
    const double r = side * rng.uniform(0.14, 0.26);
    const double cy = side * rng.uniform(0.32, 0.68);
    const double cx = side * rng.uniform(0.32, 0.68);
    const double bg = rng.uniform(0.08, 0.18);
    const double fg = rng.uniform(0.78, 0.92);

    Image img(side, side, 1);
    std::array<int, 4> bbox = {side, side, -1, -1};
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            const bool inside = detail::in_shape(shape, y + 0.5, x + 0.5, cy, cx, r);
            double v = inside ? fg : bg;
            if (inside) {
                bbox[0] = std::min(bbox[0], x);
                bbox[1] = std::min(bbox[1], y);
                bbox[2] = std::max(bbox[2], x);
                bbox[3] = std::max(bbox[3], y);
            }
            if (noise_sigma > 0) v += noise_sigma * rng.normal();
            v = std::clamp(v, 0.0, 1.0);
            // quantize to the uint8 grid, scaled back to [0,255]
            img.at(y, x, 0) = static_cast<float>(std::lround(v * 255.0));
        }
    if (bbox[2] < 0) bbox = {0, 0, side - 1, side - 1};

    LabeledImage out;
    out.image = std::move(img);
    out.label = shape;
    return {std::move(out), bbox};
}

inline SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SyntheticDataset ds;
    std::vector<std::string> names(synthetic_class_names().begin(),
                                   synthetic_class_names().begin() + spec.classes);
    ds.registry = ClassRegistry(names);

    for (int c = 0; c < spec.classes; ++c)
        for (int i = 0; i < spec.per_class; ++i) {
            Rng rng(Rng::derive(spec.seed, static_cast<std::uint64_t>(c),
                                static_cast<std::uint64_t>(i)));
            auto [img, bbox] = render_synthetic(c, spec.side, spec.noise_sigma, rng);
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%04d", i);
            img.source_id = names[c] + "/" + names[c] + "_" + buf + ".png";
            ds.images.push_back(std::move(img));
            ds.bboxes.push_back(bbox);
        }
    return ds;
}

}  // namespace camscope::data
