#pragma once

// Named tensor storage with deterministic (insertion) iteration order.
// Optimizer state lives here too, under the reserved "opt." prefix, so a
// checkpoint of the store captures everything needed to resume training.
// The version counter advances on every mutation; caches of derived
// activations use it to detect stale weights.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mipose/nn/tensor.hpp"

namespace mipose::nn {

inline constexpr const char* kOptStatePrefix = "opt.";

template <typename T>
class ParameterStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        if (map_.count(name))
            throw std::invalid_argument("ParameterStore: duplicate name '" + name + "'");
        order_.push_back(name);
        auto [it, ok] = map_.emplace(name, std::move(t));
        ++version_;
        return it->second;
    }

    bool has(const std::string& name) const { return map_.count(name) != 0; }

    const Tensor<T>& get(const std::string& name) const {
        auto it = map_.find(name);
        if (it == map_.end())
            throw std::out_of_range("ParameterStore: no tensor named '" + name + "'");
        return it->second;
    }

    /// Mutable access; bumps the store version.
    Tensor<T>& mutate(const std::string& name) {
        auto it = map_.find(name);
        if (it == map_.end())
            throw std::out_of_range("ParameterStore: no tensor named '" + name + "'");
        ++version_;
        return it->second;
    }

    /// All names in insertion order (optimizer state included).
    const std::vector<std::string>& names() const { return order_; }

    /// Model parameter names only (optimizer state excluded).
    std::vector<std::string> parameter_names() const {
        std::vector<std::string> out;
        for (const auto& n : order_)
            if (!is_opt_state(n)) out.push_back(n);
        return out;
    }

    /// Total scalar count over model parameters (optimizer state excluded).
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& name : order_)
            if (!is_opt_state(name)) n += get(name).numel();
        return n;
    }

    std::uint64_t version() const { return version_; }

    static bool is_opt_state(const std::string& name) {
        return name.rfind(kOptStatePrefix, 0) == 0;
    }

private:
    std::vector<std::string> order_;
    std::unordered_map<std::string, Tensor<T>> map_;
    std::uint64_t version_ = 0;
};

}  // namespace mipose::nn
