#pragma once

#include <cmath>

#include "camscope/core/rng.hpp"
#include "camscope/nn/layer.hpp"

namespace camscope::nn {

// He-normal fill: std = sqrt(2 / fan_in).
inline void he_init(Param& p, int fan_in, Rng& rng) {
    const float sd = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (std::size_t i = 0; i < p.value.numel(); ++i)
        p.value[i] = sd * static_cast<float>(rng.normal());
}

inline void normal_init(Param& p, float sd, Rng& rng) {
    for (std::size_t i = 0; i < p.value.numel(); ++i)
        p.value[i] = sd * static_cast<float>(rng.normal());
}

}  // namespace camscope::nn
