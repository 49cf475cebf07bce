#pragma once

// Finite-difference gradient validation across every graph op and the full
// modulation block, each over many random shapes. Shared by the unit tests
// and the acceptance gate so both enforce the same bar.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/mimb.hpp"
#include "mipose/nn/gradcheck.hpp"
#include "mipose/nn/graph.hpp"
#include "mipose/nn/store.hpp"

namespace miptest {

struct GradSuiteResult {
    int cases = 0;
    double max_rel_err = 0.0;
    std::string worst_case;
    std::vector<std::string> failures;  // "<case>: rel err <e>" beyond tolerance
};

namespace detail {

using Store = mipose::nn::ParameterStore<double>;
using Graph = mipose::nn::Graph<double>;
using ValueId = Graph::ValueId;

inline mipose::nn::Tensor<double> rand_tensor(std::vector<int> shape, mipose::Rng& rng,
                                              double lo = -1.0, double hi = 1.0) {
    mipose::nn::Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

/// Reduce a rank-3 value to a scalar through weighted_mse against a fixed
/// random target (all channels active), which also exercises the loss path.
inline ValueId scalarize_hwc(Graph& g, ValueId y, const mipose::nn::Tensor<double>& target) {
    return g.weighted_mse(y, target,
                          std::vector<double>(static_cast<std::size_t>(target.dim(2)), 1.0));
}

struct Case {
    std::string name;
    Store store;
    std::function<ValueId(Graph&, Store&)> build;
};

inline void check_case(Case& c, double tolerance, GradSuiteResult& result) {
    auto report = mipose::nn::grad_check<double>(
        c.store, [&](Graph& g) { return c.build(g, c.store); },
        /*step=*/1e-5, tolerance, /*max_elements_per_param=*/6,
        /*seed=*/mipose::fnv1a64(c.name));
    ++result.cases;
    if (report.max_rel_err > result.max_rel_err) {
        result.max_rel_err = report.max_rel_err;
        result.worst_case = c.name + " param " + report.worst_param;
    }
    if (!report.pass)
        result.failures.push_back(c.name + ": rel err " +
                                  std::to_string(report.max_rel_err) + " at " +
                                  report.worst_param);
}

}  // namespace detail

/// Run the whole suite: every op x `shapes_per_op` random configurations.
inline GradSuiteResult run_gradcheck_suite(double tolerance, int shapes_per_op = 20,
                                           std::uint64_t seed = 2024) {
    using namespace detail;
    GradSuiteResult result;
    mipose::Rng rng(seed);

    auto run = [&](const std::string& name, Case c) {
        c.name = name;
        check_case(c, tolerance, result);
    };

    for (int i = 0; i < shapes_per_op; ++i) {
        const std::string tag = "#" + std::to_string(i);

        // conv2d: random spatial size, channels, kernel, stride, padding.
        {
            Case c;
            const int h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6);
            const int cin = rng.uniform_int(1, 3), cout = rng.uniform_int(1, 3);
            const int k = rng.uniform() < 0.5 ? 1 : 3;
            const int pad = k == 3 ? rng.uniform_int(0, 1) : 0;
            int stride = rng.uniform_int(1, 2);
            if ((h + 2 * pad - k) / stride + 1 < 1) stride = 1;
            c.store.add("x", rand_tensor({h, w, cin}, rng));
            c.store.add("w", rand_tensor({k, k, cin, cout}, rng));
            c.store.add("b", rand_tensor({cout}, rng));
            const int ho = (h + 2 * pad - k) / stride + 1;
            const int wo = (w + 2 * pad - k) / stride + 1;
            auto target = rand_tensor({ho, wo, cout}, rng);
            c.build = [=](Graph& g, Store& s) {
                auto y = g.conv2d(g.param("x", &s.get("x")), g.param("w", &s.get("w")),
                                  g.param("b", &s.get("b")), stride, pad);
                return scalarize_hwc(g, y, target);
            };
            run("conv2d" + tag, std::move(c));
        }

        // relu on a rank-3 map.
        {
            Case c;
            const int h = rng.uniform_int(2, 5), w = rng.uniform_int(2, 5);
            const int ch = rng.uniform_int(1, 4);
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            auto target = rand_tensor({h, w, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                return scalarize_hwc(g, g.relu(g.param("x", &s.get("x"))), target);
            };
            run("relu" + tag, std::move(c));
        }

        // sigmoid on a rank-3 map.
        {
            Case c;
            const int h = rng.uniform_int(2, 5), w = rng.uniform_int(2, 5);
            const int ch = rng.uniform_int(1, 4);
            c.store.add("x", rand_tensor({h, w, ch}, rng, -2.0, 2.0));
            auto target = rand_tensor({h, w, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                return scalarize_hwc(g, g.sigmoid(g.param("x", &s.get("x"))), target);
            };
            run("sigmoid" + tag, std::move(c));
        }

        // fully_connected chain down to a scalar.
        {
            Case c;
            const int in = rng.uniform_int(1, 6), out = rng.uniform_int(1, 6);
            c.store.add("x", rand_tensor({in}, rng));
            c.store.add("w", rand_tensor({out, in}, rng));
            c.store.add("b", rand_tensor({out}, rng));
            c.store.add("head.w", rand_tensor({1, out}, rng));
            c.store.add("head.b", rand_tensor({1}, rng));
            c.build = [=](Graph& g, Store& s) {
                auto y = g.fully_connected(g.param("x", &s.get("x")),
                                           g.param("w", &s.get("w")),
                                           g.param("b", &s.get("b")));
                return g.fully_connected(y, g.param("head.w", &s.get("head.w")),
                                         g.param("head.b", &s.get("head.b")));
            };
            run("fully_connected" + tag, std::move(c));
        }

        // global_avg_pool followed by a scalar projection.
        {
            Case c;
            const int h = rng.uniform_int(1, 5), w = rng.uniform_int(1, 5);
            const int ch = rng.uniform_int(1, 4);
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            c.store.add("head.w", rand_tensor({1, ch}, rng));
            c.store.add("head.b", rand_tensor({1}, rng));
            c.build = [=](Graph& g, Store& s) {
                auto y = g.global_avg_pool(g.param("x", &s.get("x")));
                return g.fully_connected(y, g.param("head.w", &s.get("head.w")),
                                         g.param("head.b", &s.get("head.b")));
            };
            run("global_avg_pool" + tag, std::move(c));
        }

        // upsample_nearest.
        {
            Case c;
            const int h = rng.uniform_int(1, 3), w = rng.uniform_int(1, 3);
            const int ch = rng.uniform_int(1, 3);
            const int f = rng.uniform_int(1, 3);
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            auto target = rand_tensor({h * f, w * f, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                return scalarize_hwc(g, g.upsample_nearest(g.param("x", &s.get("x")), f),
                                     target);
            };
            run("upsample_nearest" + tag, std::move(c));
        }

        // add / mul: elementwise and channel-broadcast forms.
        for (const bool is_mul : {false, true}) {
            const bool broadcast = rng.uniform() < 0.5;
            Case c;
            const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 4);
            const int ch = rng.uniform_int(1, 4);
            c.store.add("a", rand_tensor({h, w, ch}, rng));
            if (broadcast)
                c.store.add("b", rand_tensor({ch}, rng));
            else
                c.store.add("b", rand_tensor({h, w, ch}, rng));
            auto target = rand_tensor({h, w, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                auto a = g.param("a", &s.get("a"));
                auto b = g.param("b", &s.get("b"));
                auto y = is_mul ? g.mul(a, b) : g.add(a, b);
                return scalarize_hwc(g, y, target);
            };
            run(std::string(is_mul ? "mul" : "add") + (broadcast ? "_bcast" : "") + tag,
                std::move(c));
        }

        // scale by a random constant.
        {
            Case c;
            const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 4);
            const int ch = rng.uniform_int(1, 3);
            const double s_const = rng.uniform(-2.0, 2.0);
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            auto target = rand_tensor({h, w, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                return scalarize_hwc(g, g.scale(g.param("x", &s.get("x")), s_const),
                                     target);
            };
            run("scale" + tag, std::move(c));
        }

        // weighted_mse with a random 0/1 weight pattern (at least one active).
        {
            Case c;
            const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 4);
            const int ch = rng.uniform_int(1, 4);
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            auto target = rand_tensor({h, w, ch}, rng);
            std::vector<double> weights(static_cast<std::size_t>(ch), 0.0);
            weights[static_cast<std::size_t>(rng.uniform_int(0, ch - 1))] = 1.0;
            for (auto& wv : weights)
                if (rng.uniform() < 0.5) wv = 1.0;
            c.build = [=](Graph& g, Store& s) {
                return g.weighted_mse(g.param("x", &s.get("x")), target, weights);
            };
            run("weighted_mse" + tag, std::move(c));
        }

        // Full modulation block: squeeze + excite + selector embed + gating,
        // alternating hard and soft selectors.
        {
            Case c;
            const int h = rng.uniform_int(2, 4), w = rng.uniform_int(2, 4);
            const int red = rng.uniform_int(1, 2);
            const int ch = red * rng.uniform_int(2, 4);
            const int n = rng.uniform_int(1, 3);
            mipose::MimbConfig mc{ch, red, n};
            auto params =
                mipose::MimbParams<double>::create(c.store, "blk", mc, rng.next_u64());
            c.store.add("x", rand_tensor({h, w, ch}, rng));
            mipose::InstanceSelector sel = mipose::InstanceSelector::hard(0);
            if (i % 2 == 1 && n == 2)
                sel = mipose::InstanceSelector::soft({0.3, 0.7});
            else if (n > 1)
                sel = mipose::InstanceSelector::hard(i % n);
            auto target = rand_tensor({h, w, ch}, rng);
            c.build = [=](Graph& g, Store& s) {
                auto x = g.param("x", &s.get("x"));
                auto y = mipose::mimb_forward(g, x, sel, s, params);
                return scalarize_hwc(g, y, target);
            };
            run("mimb" + tag, std::move(c));
        }
    }
    return result;
}

}  // namespace miptest
