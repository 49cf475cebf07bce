#pragma once

// Selector-conditioned channel modulation block. The feature map is squeezed
// to a channel descriptor, excited through a bottleneck MLP into a gate e,
// and a second MLP embeds the instance selector into a gate v; the block
// output scales each input channel by v_c * e_c. Because only v depends on
// the selector, one shared backbone can produce several instance-specific
// predictions.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "mipose/common.hpp"
#include "mipose/nn/graph.hpp"
#include "mipose/nn/store.hpp"
#include "mipose/selector.hpp"

namespace mipose {

struct MimbConfig {
    int channels = 0;   // C, width of the feature map being gated
    int reduction = 4;  // bottleneck divisor; MLP hidden width is C/reduction
    int n_slots = 2;    // N, length of the selector one-hot

    int hidden() const { return channels / reduction; }

    void validate() const {
        if (channels < 1 || reduction < 1 || n_slots < 1)
            throw std::invalid_argument("MimbConfig: all fields must be >= 1");
        if (channels < reduction || channels % reduction != 0)
            throw std::invalid_argument(
                "MimbConfig: reduction must divide channels (got C=" +
                std::to_string(channels) + ", r=" + std::to_string(reduction) + ")");
    }
};

/// Names of one block's tensors inside a ParameterStore, plus creation and
/// the closed-form size used to audit parameter overhead.
template <typename T>
struct MimbParams {
    MimbConfig cfg;
    std::string prefix;

    std::string excite_w1() const { return prefix + ".excite.w1"; }
    std::string excite_b1() const { return prefix + ".excite.b1"; }
    std::string excite_w2() const { return prefix + ".excite.w2"; }
    std::string excite_b2() const { return prefix + ".excite.b2"; }
    std::string embed_w1() const { return prefix + ".embed.w1"; }
    std::string embed_b1() const { return prefix + ".embed.b1"; }
    std::string embed_w2() const { return prefix + ".embed.w2"; }
    std::string embed_b2() const { return prefix + ".embed.b2"; }

    /// Register the block's tensors (He-uniform weights, zero biases). Each
    /// tensor draws from its own name-derived stream so that adding or
    /// removing unrelated parameters elsewhere does not shift this block's
    /// initial values.
    static MimbParams create(nn::ParameterStore<T>& store, const std::string& prefix,
                             const MimbConfig& cfg, std::uint64_t init_seed) {
        cfg.validate();
        MimbParams p{cfg, prefix};
        const int c = cfg.channels, h = cfg.hidden(), n = cfg.n_slots;
        auto add_fc = [&](const std::string& wname, const std::string& bname, int out,
                          int in) {
            nn::Tensor<T> w({out, in});
            Rng rng(mix_seed(init_seed, fnv1a64(wname)));
            nn::fill_he_uniform(w, static_cast<std::size_t>(in), rng);
            store.add(wname, std::move(w));
            store.add(bname, nn::Tensor<T>({out}));
        };
        add_fc(p.excite_w1(), p.excite_b1(), h, c);
        add_fc(p.excite_w2(), p.excite_b2(), c, h);
        add_fc(p.embed_w1(), p.embed_b1(), h, n);
        add_fc(p.embed_w2(), p.embed_b2(), c, h);
        return p;
    }

    /// Bind to tensors that already exist (e.g. after checkpoint load),
    /// validating shapes.
    static MimbParams attach(const nn::ParameterStore<T>& store, const std::string& prefix,
                             const MimbConfig& cfg) {
        cfg.validate();
        MimbParams p{cfg, prefix};
        const int c = cfg.channels, h = cfg.hidden(), n = cfg.n_slots;
        auto expect = [&](const std::string& name, std::vector<int> shape) {
            if (store.get(name).shape != shape)
                throw std::invalid_argument("MimbParams: tensor '" + name +
                                            "' has unexpected shape " +
                                            store.get(name).shape_str());
        };
        expect(p.excite_w1(), {h, c});
        expect(p.excite_b1(), {h});
        expect(p.excite_w2(), {c, h});
        expect(p.excite_b2(), {c});
        expect(p.embed_w1(), {h, n});
        expect(p.embed_b1(), {h});
        expect(p.embed_w2(), {c, h});
        expect(p.embed_b2(), {c});
        return p;
    }

    static std::size_t parameter_count(const MimbConfig& cfg) {
        cfg.validate();
        const std::size_t c = static_cast<std::size_t>(cfg.channels);
        const std::size_t h = static_cast<std::size_t>(cfg.hidden());
        const std::size_t n = static_cast<std::size_t>(cfg.n_slots);
        const std::size_t excite = 2 * c * h + h + c;
        const std::size_t embed = n * h + h * c + h + c;
        return excite + embed;
    }
};

/// s_c = spatial mean of channel c.
template <typename T>
typename nn::Graph<T>::ValueId mimb_squeeze(nn::Graph<T>& g,
                                            typename nn::Graph<T>::ValueId x) {
    return g.global_avg_pool(x);
}

/// e = sigmoid(W2 relu(W1 s + b1) + b2), entries in (0,1).
template <typename T>
typename nn::Graph<T>::ValueId mimb_excite(nn::Graph<T>& g,
                                           typename nn::Graph<T>::ValueId s,
                                           const nn::ParameterStore<T>& store,
                                           const MimbParams<T>& p) {
    auto w1 = g.param(p.excite_w1(), &store.get(p.excite_w1()));
    auto b1 = g.param(p.excite_b1(), &store.get(p.excite_b1()));
    auto w2 = g.param(p.excite_w2(), &store.get(p.excite_w2()));
    auto b2 = g.param(p.excite_b2(), &store.get(p.excite_b2()));
    return g.sigmoid(g.fully_connected(g.relu(g.fully_connected(s, w1, b1)), w2, b2));
}

/// v = sigmoid(W2' relu(W1' sel + b1') + b2') where sel is the selector's
/// weight vector over the N slots (one-hot for hard selectors).
template <typename T>
typename nn::Graph<T>::ValueId mimb_embed(nn::Graph<T>& g, const InstanceSelector& sel,
                                          const nn::ParameterStore<T>& store,
                                          const MimbParams<T>& p) {
    const std::vector<double> w = sel.weights(p.cfg.n_slots);
    nn::Tensor<T> in({p.cfg.n_slots});
    for (int i = 0; i < p.cfg.n_slots; ++i)
        in.data[static_cast<std::size_t>(i)] = static_cast<T>(w[static_cast<std::size_t>(i)]);
    auto sel_id = g.input(std::move(in));
    auto w1 = g.param(p.embed_w1(), &store.get(p.embed_w1()));
    auto b1 = g.param(p.embed_b1(), &store.get(p.embed_b1()));
    auto w2 = g.param(p.embed_w2(), &store.get(p.embed_w2()));
    auto b2 = g.param(p.embed_b2(), &store.get(p.embed_b2()));
    return g.sigmoid(g.fully_connected(g.relu(g.fully_connected(sel_id, w1, b1)), w2, b2));
}

/// x'_c = (v_c * e_c) x_c, channel-wise.
template <typename T>
typename nn::Graph<T>::ValueId mimb_modulate(nn::Graph<T>& g,
                                             typename nn::Graph<T>::ValueId x,
                                             typename nn::Graph<T>::ValueId e,
                                             typename nn::Graph<T>::ValueId v) {
    return g.mul(x, g.mul(e, v));
}

/// Full block. `gate_bypass` forces both gates to 1 (a diagnostic control:
/// it makes the output selector-independent and equal to the input).
template <typename T>
typename nn::Graph<T>::ValueId mimb_forward(nn::Graph<T>& g,
                                            typename nn::Graph<T>::ValueId x,
                                            const InstanceSelector& sel,
                                            const nn::ParameterStore<T>& store,
                                            const MimbParams<T>& p,
                                            bool gate_bypass = false) {
    if (gate_bypass) return x;
    auto e = mimb_excite(g, mimb_squeeze(g, x), store, p);
    auto v = mimb_embed(g, sel, store, p);
    return mimb_modulate(g, x, e, v);
}

}  // namespace mipose
