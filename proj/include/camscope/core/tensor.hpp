#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

namespace camscope {

// Dense float32 tensor, row-major. Network activations use NCHW.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        v_.assign(numel_of(shape_), 0.0f);
    }

    Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)) {
        v_.assign(numel_of(shape_), fill);
    }

    Tensor(std::vector<int> shape, std::vector<float> values)
        : shape_(std::move(shape)), v_(std::move(values)) {
        assert(v_.size() == numel_of(shape_));
    }

    static std::size_t numel_of(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    std::size_t numel() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    float* data() { return v_.data(); }
    const float* data() const { return v_.data(); }

    float& operator[](std::size_t i) { return v_[i]; }
    float operator[](std::size_t i) const { return v_[i]; }

    // 4-D accessors (N,C,H,W)
    float& at(int n, int c, int h, int w) {
        return v_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    float at(int n, int c, int h, int w) const {
        return v_[((static_cast<size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    // 3-D accessors (C,H,W)
    float& at(int c, int h, int w) {
        return v_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    float at(int c, int h, int w) const {
        return v_[(static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w];
    }
    // 2-D accessors
    float& at(int i, int j) { return v_[static_cast<size_t>(i) * shape_[1] + j]; }
    float at(int i, int j) const { return v_[static_cast<size_t>(i) * shape_[1] + j]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void zero() { std::fill(v_.begin(), v_.end(), 0.0f); }

    void add_(const Tensor& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    }

    bool all_finite() const {
        for (float x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    float min_value() const {
        float m = v_.empty() ? 0.0f : v_[0];
        for (float x : v_) m = std::min(m, x);
        return m;
    }

    float max_value() const {
        float m = v_.empty() ? 0.0f : v_[0];
        for (float x : v_) m = std::max(m, x);
        return m;
    }

    std::string shape_str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    std::vector<int> shape_;
    std::vector<float> v_;
};

}  // namespace camscope
