#pragma once

// In-place parameter updates. Optimizer state (momentum / moment estimates /
// step counter) is kept inside the ParameterStore under "opt." names, making
// checkpoints resume-exact.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mipose/nn/store.hpp"

namespace mipose::nn {

template <typename T>
using GradList = std::vector<std::pair<std::string, const Tensor<T>*>>;

namespace detail {

template <typename T>
Tensor<T>& ensure_state(ParameterStore<T>& store, const std::string& name,
                        const std::vector<int>& shape) {
    if (!store.has(name)) return store.add(name, Tensor<T>(shape));
    Tensor<T>& t = store.mutate(name);
    if (t.shape != shape)
        throw std::invalid_argument("optimizer state '" + name + "' has stale shape");
    return t;
}

template <typename T>
void check_aligned(const ParameterStore<T>& store, const std::string& name,
                   const Tensor<T>& grad) {
    const Tensor<T>& p = store.get(name);
    if (p.shape != grad.shape)
        throw std::invalid_argument("optimizer: gradient shape " + grad.shape_str() +
                                    " does not match parameter '" + name + "' " +
                                    p.shape_str());
}

}  // namespace detail

/// p <- p - lr * v, with v <- momentum * v + g. momentum = 0 is plain SGD.
template <typename T>
void sgd_step(ParameterStore<T>& store, const GradList<T>& grads, double lr,
              double momentum) {
    for (const auto& [name, grad] : grads) {
        detail::check_aligned(store, name, *grad);
        if (momentum == 0.0) {
            Tensor<T>& p = store.mutate(name);
            for (std::size_t i = 0; i < p.data.size(); ++i)
                p.data[i] -= static_cast<T>(lr) * grad->data[i];
            continue;
        }
        Tensor<T>& v = detail::ensure_state(store, std::string(kOptStatePrefix) +
                                                       "sgd.v." + name,
                                            grad->shape);
        Tensor<T>& p = store.mutate(name);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            v.data[i] = static_cast<T>(momentum) * v.data[i] + grad->data[i];
            p.data[i] -= static_cast<T>(lr) * v.data[i];
        }
    }
}

/// Bias-corrected Adam. The shared step counter lives in "opt.adam.t" (one
/// call to adam_step = one step).
template <typename T>
void adam_step(ParameterStore<T>& store, const GradList<T>& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    Tensor<T>& tc = detail::ensure_state(store, std::string(kOptStatePrefix) + "adam.t",
                                         std::vector<int>{1});
    tc.data[0] += T(1);
    const double t = static_cast<double>(tc.data[0]);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);

    for (const auto& [name, grad] : grads) {
        detail::check_aligned(store, name, *grad);
        Tensor<T>& m = detail::ensure_state(store, std::string(kOptStatePrefix) +
                                                       "adam.m." + name,
                                            grad->shape);
        Tensor<T>& v = detail::ensure_state(store, std::string(kOptStatePrefix) +
                                                       "adam.v." + name,
                                            grad->shape);
        Tensor<T>& p = store.mutate(name);
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double g = static_cast<double>(grad->data[i]);
            const double mi = beta1 * static_cast<double>(m.data[i]) + (1.0 - beta1) * g;
            const double vi = beta2 * static_cast<double>(v.data[i]) + (1.0 - beta2) * g * g;
            m.data[i] = static_cast<T>(mi);
            v.data[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            p.data[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

}  // namespace mipose::nn
