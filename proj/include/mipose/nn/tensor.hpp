#pragma once

// Dense row-major tensor. Feature maps are HWC ({H, W, C}), conv weights
// {KH, KW, Cin, Cout}, fully-connected weights {Out, In}, vectors {N},
// scalars {1}.

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mipose/common.hpp"

namespace mipose::nn {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(numel_of(shape), T(0));
    }
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != numel_of(shape))
            throw std::invalid_argument("Tensor: data length does not match shape");
    }

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: dims must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "{";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "}";
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

/// He-uniform fill: U(-b, b) with b = sqrt(6 / fan_in). The standard choice
/// for relu networks; keeps early activations in a trainable range.
template <typename T>
void fill_he_uniform(Tensor<T>& t, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
    for (const auto& v : t.data)
        if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
}

}  // namespace mipose::nn
