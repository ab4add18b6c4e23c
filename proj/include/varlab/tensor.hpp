#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "varlab/errors.hpp"

namespace varlab {

/// Dense row-major binary32 tensor. All weights, activations and gradients
/// live in this type; scalar reductions that feed metrics happen in double
/// at the call site.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
        data.assign(element_count(shape), 0.0f);
    }

    Tensor(std::vector<int> shape_, std::vector<float> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (data.size() != element_count(shape)) {
            throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape product " +
                             std::to_string(element_count(shape)));
        }
    }

    static std::size_t element_count(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw ShapeError("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape.size()); }

    float* begin() { return data.data(); }
    float* end() { return data.data() + data.size(); }
    const float* begin() const { return data.data(); }
    const float* end() const { return data.data() + data.size(); }

    // 2-d accessors (rows = dim 0).
    float& at2(int r, int c) {
        return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) +
                    static_cast<std::size_t>(c)];
    }
    float at2(int r, int c) const {
        return data[static_cast<std::size_t>(r) * static_cast<std::size_t>(shape[1]) +
                    static_cast<std::size_t>(c)];
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

inline void require_shape(const Tensor& t, const std::vector<int>& shape, const char* what) {
    if (t.shape != shape) {
        throw ShapeError(std::string(what) + ": expected shape " + shape_string(shape) +
                         ", got " + shape_string(t.shape));
    }
}

}  // namespace varlab
