#pragma once

// The selector-conditioned pose network P(x, selector) and its comparison
// variants. Architecture: a strided conv stem shrinks the crop to a deep
// low-resolution feature map; selector-gated body stages and a
// nearest-upsample decoder expand it back to quarter-resolution keypoint
// heatmaps.
//
//   stem   : stride-2 3x3 convs (selector-independent, cacheable)
//   body   : 3x3 convs, each optionally followed by a modulation block
//   decoder: (upsample x2 + 3x3 conv) stages
//   head   : 1x1 conv to K channels
//
// Because every selector-dependent computation happens after the stem, a
// multi-selector sweep reuses one stem evaluation; the stem is the bulk of
// the arithmetic, so predicting N instances costs far less than N forwards.
//
// Variants: `mipnet` (modulation blocks, N slots), `baseline_n1` (no blocks,
// single slot), `two_heads` (no blocks; two independent conv heads and the
// selector picks one).

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipose/assign.hpp"
#include "mipose/common.hpp"
#include "mipose/heatmap.hpp"
#include "mipose/mimb.hpp"
#include "mipose/nn/checkpoint.hpp"
#include "mipose/nn/graph.hpp"
#include "mipose/nn/store.hpp"
#include "mipose/selector.hpp"

namespace mipose {

enum class Variant { mipnet, baseline_n1, two_heads };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::mipnet: return "mipnet";
        case Variant::baseline_n1: return "baseline_n1";
        case Variant::two_heads: return "two_heads";
    }
    throw std::logic_error("variant_name: bad enum");
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "mipnet") return Variant::mipnet;
    if (s == "baseline_n1") return Variant::baseline_n1;
    if (s == "two_heads") return Variant::two_heads;
    throw std::invalid_argument("unknown model variant '" + s + "'");
}

struct ModelConfig {
    int input_h = 64;
    int input_w = 64;
    int keypoints = 5;
    int n_slots = 2;
    Variant variant = Variant::mipnet;
    std::vector<int> stem_channels{24, 48, 64, 64};  // one stride-2 stage each
    std::vector<int> body_channels{48, 48};          // stride-1 stages at stem resolution
    std::vector<int> decoder_channels{24, 16};       // one 2x upsample each
    std::vector<int> mimb_stages{0, 1};              // body stages that get a block
    int mimb_reduction = 4;
    int two_heads_width = 16;  // per-head 3x3 conv width ("light" head capacity)
    std::uint64_t init_seed = 1;

    int heatmap_h() const { return input_h / kHeatmapStride; }
    int heatmap_w() const { return input_w / kHeatmapStride; }

    /// Variant presets sharing the same trunk (and, via name-derived init
    /// streams, the same initial trunk weights for a given seed).
    static ModelConfig preset(Variant v, int n_slots = 2, std::uint64_t seed = 1) {
        ModelConfig c;
        c.variant = v;
        c.init_seed = seed;
        switch (v) {
            case Variant::mipnet:
                c.n_slots = n_slots;
                break;
            case Variant::baseline_n1:
                c.n_slots = 1;
                c.mimb_stages.clear();
                break;
            case Variant::two_heads:
                c.n_slots = 2;
                c.mimb_stages.clear();
                break;
        }
        return c;
    }

    void validate() const {
        if (keypoints < 1) throw std::invalid_argument("ModelConfig: keypoints must be >= 1");
        if (n_slots < 1) throw std::invalid_argument("ModelConfig: n_slots must be >= 1");
        if (stem_channels.empty() || decoder_channels.empty())
            throw std::invalid_argument("ModelConfig: stem and decoder must be non-empty");
        const int s = static_cast<int>(stem_channels.size());
        const int d = static_cast<int>(decoder_channels.size());
        if (s <= d || (1 << (s - d)) != kHeatmapStride)
            throw std::invalid_argument(
                "ModelConfig: stem/decoder depths must realize the input-to-heatmap "
                "stride of " + std::to_string(kHeatmapStride));
        if (input_h % (1 << s) != 0 || input_w % (1 << s) != 0 ||
            input_h < (1 << s) || input_w < (1 << s))
            throw std::invalid_argument("ModelConfig: input size must be a multiple of 2^" +
                                        std::to_string(s));
        for (int c : stem_channels)
            if (c < 1) throw std::invalid_argument("ModelConfig: bad stem width");
        for (int c : body_channels)
            if (c < 1) throw std::invalid_argument("ModelConfig: bad body width");
        for (int c : decoder_channels)
            if (c < 1) throw std::invalid_argument("ModelConfig: bad decoder width");
        for (std::size_t i = 0; i < mimb_stages.size(); ++i) {
            const int idx = mimb_stages[i];
            if (idx < 0 || idx >= static_cast<int>(body_channels.size()))
                throw std::invalid_argument("ModelConfig: mimb stage index out of range");
            if (i > 0 && mimb_stages[i] <= mimb_stages[i - 1])
                throw std::invalid_argument("ModelConfig: mimb stages must be strictly increasing");
            MimbConfig{body_channels[static_cast<std::size_t>(idx)], mimb_reduction, n_slots}
                .validate();
        }
        switch (variant) {
            case Variant::mipnet:
                break;
            case Variant::baseline_n1:
                if (n_slots != 1 || !mimb_stages.empty())
                    throw std::invalid_argument(
                        "ModelConfig: baseline_n1 requires n_slots=1 and no modulation blocks");
                break;
            case Variant::two_heads:
                if (n_slots != 2 || !mimb_stages.empty())
                    throw std::invalid_argument(
                        "ModelConfig: two_heads requires n_slots=2 and no modulation blocks");
                if (two_heads_width < 1)
                    throw std::invalid_argument("ModelConfig: bad two_heads_width");
                break;
        }
    }

    nlohmann::json to_json() const {
        return {{"input_h", input_h},
                {"input_w", input_w},
                {"keypoints", keypoints},
                {"n_slots", n_slots},
                {"variant", variant_name(variant)},
                {"stem_channels", stem_channels},
                {"body_channels", body_channels},
                {"decoder_channels", decoder_channels},
                {"mimb_stages", mimb_stages},
                {"mimb_reduction", mimb_reduction},
                {"two_heads_width", two_heads_width},
                {"init_seed", init_seed}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.input_h = j.at("input_h").get<int>();
        c.input_w = j.at("input_w").get<int>();
        c.keypoints = j.at("keypoints").get<int>();
        c.n_slots = j.at("n_slots").get<int>();
        c.variant = variant_from_name(j.at("variant").get<std::string>());
        c.stem_channels = j.at("stem_channels").get<std::vector<int>>();
        c.body_channels = j.at("body_channels").get<std::vector<int>>();
        c.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
        c.mimb_stages = j.at("mimb_stages").get<std::vector<int>>();
        c.mimb_reduction = j.at("mimb_reduction").get<int>();
        c.two_heads_width = j.at("two_heads_width").get<int>();
        c.init_seed = j.at("init_seed").get<std::uint64_t>();
        c.validate();
        return c;
    }
};

/// Stem output for one input, reusable across selectors while the weights
/// stay untouched (the store version pins the weights it was computed with).
template <typename T>
struct StemCache {
    nn::Tensor<T> features;
    std::uint64_t store_version = 0;
};

template <typename T>
class Model {
public:
    using GraphT = nn::Graph<T>;
    using ValueId = typename GraphT::ValueId;

    /// Fresh parameters. Every tensor draws from a stream derived from
    /// (init_seed, tensor name), so trunk-identical variants start from
    /// identical trunk weights.
    static Model build(ModelConfig cfg) {
        cfg.validate();
        Model m(std::move(cfg));
        auto add_conv = [&](const std::string& name, int kh, int kw, int cin, int cout) {
            nn::Tensor<T> w({kh, kw, cin, cout});
            Rng rng(mix_seed(m.cfg_.init_seed, fnv1a64(name + ".w")));
            nn::fill_he_uniform(w, static_cast<std::size_t>(kh) * kw * cin, rng);
            m.store_.add(name + ".w", std::move(w));
            m.store_.add(name + ".b", nn::Tensor<T>({cout}));
        };

        int cin = 3;
        for (std::size_t i = 0; i < m.cfg_.stem_channels.size(); ++i) {
            add_conv("stem.conv" + std::to_string(i), 3, 3, cin, m.cfg_.stem_channels[i]);
            cin = m.cfg_.stem_channels[i];
        }
        for (std::size_t i = 0; i < m.cfg_.body_channels.size(); ++i) {
            add_conv("body.conv" + std::to_string(i), 3, 3, cin, m.cfg_.body_channels[i]);
            cin = m.cfg_.body_channels[i];
        }
        for (int stage : m.cfg_.mimb_stages) {
            MimbConfig mc{m.cfg_.body_channels[static_cast<std::size_t>(stage)],
                          m.cfg_.mimb_reduction, m.cfg_.n_slots};
            m.mimbs_.push_back(MimbParams<T>::create(
                m.store_, "body.mimb" + std::to_string(stage), mc, m.cfg_.init_seed));
        }
        for (std::size_t i = 0; i < m.cfg_.decoder_channels.size(); ++i) {
            add_conv("dec.conv" + std::to_string(i), 3, 3, cin, m.cfg_.decoder_channels[i]);
            cin = m.cfg_.decoder_channels[i];
        }
        if (m.cfg_.variant == Variant::two_heads) {
            for (int head = 0; head < 2; ++head) {
                const std::string p = "head" + std::to_string(head);
                add_conv(p + ".conv0", 3, 3, cin, m.cfg_.two_heads_width);
                add_conv(p + ".conv1", 1, 1, m.cfg_.two_heads_width, m.cfg_.keypoints);
            }
        } else {
            add_conv("head.conv", 1, 1, cin, m.cfg_.keypoints);
        }
        return m;
    }

    /// Rebuild a model around checkpointed tensors; the config is read from
    /// the checkpoint metadata. Returns the model and the full metadata.
    static std::pair<Model, nlohmann::json> from_checkpoint(const std::string& path) {
        nn::ParameterStore<T> store;
        nlohmann::json meta = nn::load_checkpoint(path, store);
        if (!meta.contains("model_config"))
            throw std::runtime_error("checkpoint " + path + " has no model_config");
        ModelConfig cfg = ModelConfig::from_json(meta.at("model_config"));
        Model m(cfg);
        m.store_ = std::move(store);
        m.bind_existing();
        return {std::move(m), std::move(meta)};
    }

    /// Write parameters (+ any optimizer state in the store) with the model
    /// config embedded in the metadata.
    void save(const std::string& path, nlohmann::json extra_meta = {}) const {
        nlohmann::json meta = std::move(extra_meta);
        meta["model_config"] = cfg_.to_json();
        nn::save_checkpoint(path, store_, meta);
    }

    const ModelConfig& config() const { return cfg_; }
    nn::ParameterStore<T>& store() { return store_; }
    const nn::ParameterStore<T>& store() const { return store_; }
    std::size_t parameter_count() const { return store_.parameter_count(); }

    /// Diagnostic control: force all modulation gates to 1, making the
    /// forward pass selector-independent.
    void set_gate_bypass(bool bypass) { gate_bypass_ = bypass; }
    bool gate_bypass() const { return gate_bypass_; }

    /// Full forward pass for one crop ({H,W,3} in [0,1]).
    HeatmapSet forward(const nn::Tensor<T>& x, const InstanceSelector& sel) const {
        return forward_cached(make_cache(x), sel);
    }

    StemCache<T> make_cache(const nn::Tensor<T>& x) const {
        check_input(x);
        GraphT g;
        ValueId feat = build_stem(g, g.input(x));
        ++stem_evals_;
        return StemCache<T>{g.value(feat), store_.version()};
    }

    HeatmapSet forward_cached(const StemCache<T>& cache, const InstanceSelector& sel) const {
        if (cache.store_version != store_.version())
            throw std::runtime_error(
                "forward_cached: cache is stale (weights changed since make_cache)");
        GraphT g;
        ValueId out = build_branch(g, g.input(cache.features), sel);
        return to_heatmaps(g.value(out));
    }

    /// N predictions from one stem evaluation, selectors 0..n-1.
    std::vector<HeatmapSet> sweep(const nn::Tensor<T>& x, int n) const {
        if (n < 1 || n > cfg_.n_slots)
            throw std::invalid_argument("sweep: n must be in [1, n_slots]");
        StemCache<T> cache = make_cache(x);
        std::vector<HeatmapSet> out;
        out.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            out.push_back(forward_cached(cache, InstanceSelector::hard(i)));
        return out;
    }

    /// Predictions for soft selectors [1-t, t] with t evenly spaced in
    /// [0, 1]; endpoints coincide with the hard selectors 0 and 1.
    std::vector<HeatmapSet> continuous_sweep(const nn::Tensor<T>& x, int steps) const {
        if (cfg_.n_slots != 2)
            throw std::invalid_argument("continuous_sweep: requires a 2-slot model");
        if (steps < 2) throw std::invalid_argument("continuous_sweep: steps must be >= 2");
        StemCache<T> cache = make_cache(x);
        std::vector<HeatmapSet> out;
        out.reserve(static_cast<std::size_t>(steps));
        for (int i = 0; i < steps; ++i) {
            const double t = static_cast<double>(i) / (steps - 1);
            out.push_back(forward_cached(cache, InstanceSelector::soft({1.0 - t, t})));
        }
        return out;
    }

    /// Training-loss graph for one sample: predictions for every slot share
    /// one stem, and the loss averages the per-slot weighted MSEs.
    ValueId build_training_loss(GraphT& g, const TrainingSample& sample) const {
        if (static_cast<int>(sample.targets.size()) != cfg_.n_slots)
            throw std::invalid_argument("build_training_loss: sample has " +
                                        std::to_string(sample.targets.size()) +
                                        " targets, model has " +
                                        std::to_string(cfg_.n_slots) + " slots");
        nn::Tensor<T> x({cfg_.input_h, cfg_.input_w, 3});
        if (sample.input_image.size() != x.numel())
            throw std::invalid_argument("build_training_loss: sample image size mismatch");
        for (std::size_t i = 0; i < x.data.size(); ++i)
            x.data[i] = static_cast<T>(sample.input_image[i]);

        ValueId feat = build_stem(g, g.input(std::move(x)));
        ValueId total = -1;
        for (int i = 0; i < cfg_.n_slots; ++i) {
            ValueId pred = build_branch(g, feat, InstanceSelector::hard(i));
            const HeatmapSet& hs = sample.targets[static_cast<std::size_t>(i)];
            nn::Tensor<T> target({hs.height, hs.width, hs.channels});
            for (std::size_t j = 0; j < target.data.size(); ++j)
                target.data[j] = static_cast<T>(hs.data[j]);
            ValueId term = g.weighted_mse(pred, target,
                                          sample.target_weights[static_cast<std::size_t>(i)]);
            total = i == 0 ? term : g.add(total, term);
        }
        return g.scale(total, T(1) / static_cast<T>(cfg_.n_slots));
    }

    /// Stem evaluations performed so far (forward, make_cache, sweeps); a
    /// sweep of any width adds exactly one.
    std::uint64_t stem_eval_count() const { return stem_evals_; }

private:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}

    void check_input(const nn::Tensor<T>& x) const {
        if (x.shape != std::vector<int>{cfg_.input_h, cfg_.input_w, 3})
            throw std::invalid_argument("model: expected input {" +
                                        std::to_string(cfg_.input_h) + "," +
                                        std::to_string(cfg_.input_w) + ",3}, got " +
                                        x.shape_str());
    }

    /// Validate that the store already holds every tensor build() would
    /// create, and wire up the block handles.
    void bind_existing() {
        cfg_.validate();
        Model fresh = build(cfg_);
        for (const auto& name : fresh.store_.parameter_names()) {
            if (!store_.has(name))
                throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
            if (store_.get(name).shape != fresh.store_.get(name).shape)
                throw std::runtime_error("checkpoint tensor '" + name +
                                         "' has shape " + store_.get(name).shape_str() +
                                         ", expected " +
                                         fresh.store_.get(name).shape_str());
        }
        mimbs_.clear();
        for (int stage : cfg_.mimb_stages) {
            MimbConfig mc{cfg_.body_channels[static_cast<std::size_t>(stage)],
                          cfg_.mimb_reduction, cfg_.n_slots};
            mimbs_.push_back(MimbParams<T>::attach(
                store_, "body.mimb" + std::to_string(stage), mc));
        }
    }

    ValueId conv_block(GraphT& g, ValueId x, const std::string& name, int stride,
                       int padding, bool activated = true) const {
        ValueId w = g.param(name + ".w", &store_.get(name + ".w"));
        ValueId b = g.param(name + ".b", &store_.get(name + ".b"));
        ValueId out = g.conv2d(x, w, b, stride, padding);
        return activated ? g.relu(out) : out;
    }

    ValueId build_stem(GraphT& g, ValueId x) const {
        for (std::size_t i = 0; i < cfg_.stem_channels.size(); ++i)
            x = conv_block(g, x, "stem.conv" + std::to_string(i), 2, 1);
        return x;
    }

    /// Everything after the stem: body stages (with their blocks), decoder,
    /// head. The selector only enters through the modulation blocks (or the
    /// head choice for two_heads).
    ValueId build_branch(GraphT& g, ValueId feat, const InstanceSelector& sel) const {
        // Validates slot arity for every variant (e.g. rejects selector 1 on
        // a single-slot baseline).
        (void)sel.weights(cfg_.n_slots);

        ValueId x = feat;
        std::size_t next_block = 0;
        for (std::size_t i = 0; i < cfg_.body_channels.size(); ++i) {
            x = conv_block(g, x, "body.conv" + std::to_string(i), 1, 1);
            if (next_block < mimbs_.size() &&
                cfg_.mimb_stages[next_block] == static_cast<int>(i)) {
                x = mimb_forward(g, x, sel, store_, mimbs_[next_block], gate_bypass_);
                ++next_block;
            }
        }
        for (std::size_t i = 0; i < cfg_.decoder_channels.size(); ++i) {
            x = g.upsample_nearest(x, 2);
            x = conv_block(g, x, "dec.conv" + std::to_string(i), 1, 1);
        }
        if (cfg_.variant == Variant::two_heads) {
            if (!sel.is_one_hot())
                throw std::invalid_argument(
                    "two_heads: selector must pick a single head (soft mixes unsupported)");
            const std::string p = "head" + std::to_string(sel.one_hot_index());
            x = conv_block(g, x, p + ".conv0", 1, 1);
            x = conv_block(g, x, p + ".conv1", 1, 0, /*activated=*/false);
        } else {
            x = conv_block(g, x, "head.conv", 1, 0, /*activated=*/false);
        }
        return x;
    }

    HeatmapSet to_heatmaps(const nn::Tensor<T>& out) const {
        HeatmapSet h(out.dim(0), out.dim(1), out.dim(2));
        for (std::size_t i = 0; i < out.data.size(); ++i)
            h.data[i] = static_cast<float>(out.data[i]);
        return h;
    }

    ModelConfig cfg_;
    nn::ParameterStore<T> store_;
    std::vector<MimbParams<T>> mimbs_;
    bool gate_bypass_ = false;
    mutable std::uint64_t stem_evals_ = 0;
};

}  // namespace mipose
