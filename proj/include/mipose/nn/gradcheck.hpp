#pragma once

// Central finite-difference validation of reverse-mode gradients. The
// builder callback reconstructs the forward graph from the current store
// values, so the checker can re-evaluate the loss under perturbed
// parameters. Relu kinks make one-sided curvature look like gradient error;
// when any relu input sits within 8 steps of zero the parameters are
// jittered and the check restarted.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/nn/graph.hpp"
#include "mipose/nn/store.hpp"

namespace mipose::nn {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked_elements = 0;
    int jitter_retries = 0;
};

/// `build` is invoked as build(graph) -> scalar loss ValueId and must
/// register every parameter it uses via graph.param(name, &store.get(name)).
/// `max_elements_per_param` limits the finite-difference probes per tensor
/// (0 = probe every element); probed indices are drawn deterministically.
template <typename T, typename BuildFn>
GradCheckReport grad_check(ParameterStore<T>& store, BuildFn&& build, double step,
                           double tolerance, std::size_t max_elements_per_param = 0,
                           std::uint64_t seed = 17) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check: step must be > 0");

    GradCheckReport report;
    constexpr int kMaxJitterRetries = 6;

    std::vector<std::pair<std::string, Tensor<T>>> analytic;
    for (int attempt = 0;; ++attempt) {
        Graph<T> g;
        auto loss = build(g);
        if (g.value(loss).numel() != 1)
            throw std::invalid_argument("grad_check: builder must return a scalar loss");
        g.backward(loss);
        if (g.min_relu_abs() >= 8.0 * step) {
            analytic.clear();
            for (const auto& [name, grad] : g.param_grads())
                analytic.emplace_back(name, *grad);
            break;
        }
        if (attempt >= kMaxJitterRetries)
            throw std::runtime_error(
                "grad_check: could not move relu inputs away from zero after jittering");
        ++report.jitter_retries;
        Rng jitter(mix_seed(seed, static_cast<std::uint64_t>(attempt) + 1));
        for (const auto& name : store.parameter_names()) {
            Tensor<T>& p = store.mutate(name);
            for (auto& v : p.data) v += static_cast<T>(jitter.uniform(-0.02, 0.02));
        }
    }

    auto eval = [&]() -> double {
        Graph<T> g;
        auto loss = build(g);
        return static_cast<double>(g.value(loss).data[0]);
    };

    Rng pick(mix_seed(seed, 0xfd));
    for (const auto& [name, grad] : analytic) {
        const std::size_t n = grad.numel();
        std::vector<std::size_t> indices;
        if (max_elements_per_param == 0 || n <= max_elements_per_param) {
            indices.resize(n);
            for (std::size_t i = 0; i < n; ++i) indices[i] = i;
        } else {
            indices.reserve(max_elements_per_param);
            for (std::size_t i = 0; i < max_elements_per_param; ++i)
                indices.push_back(static_cast<std::size_t>(
                    pick.uniform_int(0, static_cast<int>(n) - 1)));
        }

        Tensor<T>& p = store.mutate(name);
        for (std::size_t idx : indices) {
            const T saved = p.data[idx];
            p.data[idx] = saved + static_cast<T>(step);
            const double f_plus = eval();
            p.data[idx] = saved - static_cast<T>(step);
            const double f_minus = eval();
            p.data[idx] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * step);
            const double a = static_cast<double>(grad.data[idx]);
            const double rel =
                std::abs(a - numeric) / std::max({1e-6, std::abs(a), std::abs(numeric)});
            ++report.checked_elements;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = idx;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.pass = report.max_rel_err <= tolerance;
    return report;
}

}  // namespace mipose::nn
