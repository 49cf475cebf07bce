#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "mipose/common.hpp"
#include "mipose/mimb.hpp"
#include "mipose/selector.hpp"
#include "test_util.hpp"

using namespace mipose;
using nn::Tensor;

namespace {

Tensor<double> rand_map(int h, int w, int c, Rng& rng) {
    Tensor<double> t({h, w, c});
    for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

// mimb_forward takes a ValueId; wrap the tensor first.
Tensor<double> run_block_tensor(const nn::ParameterStore<double>& store,
                                const MimbParams<double>& params,
                                const Tensor<double>& x, const InstanceSelector& sel,
                                bool bypass = false) {
    nn::Graph<double> g;
    auto out = mimb_forward(g, g.input(x), sel, store, params, bypass);
    return g.value(out);
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS((MimbConfig{0, 4, 2}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((MimbConfig{48, 5, 2}.validate()), std::invalid_argument);  // 5 ∤ 48
    CHECK_THROWS_AS((MimbConfig{2, 4, 2}.validate()), std::invalid_argument);   // C < r
    MimbConfig ok{48, 4, 2};
    ok.validate();
    CHECK(ok.hidden() == 12);
}

TEST_CASE("parameter count matches the closed form") {
    // C=48, r=4 (hidden 12), N=2:
    //   excite: 48*12 + 12 + 12*48 + 48 = 1212
    //   embed :  2*12 + 12 + 12*48 + 48 = 660
    MimbConfig cfg{48, 4, 2};
    CHECK(MimbParams<double>::parameter_count(cfg) == 1872);

    nn::ParameterStore<double> store;
    MimbParams<double>::create(store, "blk", cfg, 1);
    CHECK(store.parameter_count() == MimbParams<double>::parameter_count(cfg));

    // The count is exact for other shapes too.
    for (const MimbConfig c : {MimbConfig{16, 4, 1}, MimbConfig{32, 2, 3}}) {
        nn::ParameterStore<double> s;
        MimbParams<double>::create(s, "b", c, 9);
        CHECK(s.parameter_count() == MimbParams<double>::parameter_count(c));
    }
}

TEST_CASE("creation is deterministic in the seed and name") {
    nn::ParameterStore<double> a, b, c;
    MimbConfig cfg{16, 4, 2};
    MimbParams<double>::create(a, "blk", cfg, 42);
    MimbParams<double>::create(b, "blk", cfg, 42);
    MimbParams<double>::create(c, "blk", cfg, 43);
    CHECK(a.get("blk.excite.w1").data == b.get("blk.excite.w1").data);
    CHECK(a.get("blk.embed.w1").data == b.get("blk.embed.w1").data);
    CHECK(a.get("blk.excite.w1").data != c.get("blk.excite.w1").data);
}

TEST_CASE("attach validates tensor shapes") {
    nn::ParameterStore<double> store;
    MimbConfig cfg{16, 4, 2};
    MimbParams<double>::create(store, "blk", cfg, 1);
    CHECK_NOTHROW(MimbParams<double>::attach(store, "blk", cfg));
    MimbConfig wrong{16, 4, 3};  // different selector arity
    CHECK_THROWS_AS(MimbParams<double>::attach(store, "blk", wrong),
                    std::invalid_argument);
    CHECK_THROWS_AS(MimbParams<double>::attach(store, "nope", cfg), std::out_of_range);
}

TEST_CASE("gate bypass returns the input unchanged") {
    Rng rng(7);
    nn::ParameterStore<double> store;
    MimbConfig cfg{8, 4, 2};
    auto params = MimbParams<double>::create(store, "blk", cfg, 3);
    auto x = rand_map(4, 4, 8, rng);
    auto out = run_block_tensor(store, params, x, InstanceSelector::hard(0), true);
    CHECK(out.data == x.data);
}

TEST_CASE("gates shrink magnitudes and preserve signs") {
    // Output is x * e * v with e, v in (0,1): every element shrinks toward 0
    // without crossing it.
    Rng rng(9);
    nn::ParameterStore<double> store;
    MimbConfig cfg{8, 2, 2};
    auto params = MimbParams<double>::create(store, "blk", cfg, 5);
    auto x = rand_map(3, 5, 8, rng);
    auto out = run_block_tensor(store, params, x, InstanceSelector::hard(1));
    REQUIRE(out.shape == x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        CHECK(std::abs(out.data[i]) < std::abs(x.data[i]) + 1e-15);
        CHECK(out.data[i] * x.data[i] >= 0.0);
    }
}

TEST_CASE("the selector changes the output") {
    Rng rng(11);
    nn::ParameterStore<double> store;
    MimbConfig cfg{8, 4, 2};
    auto params = MimbParams<double>::create(store, "blk", cfg, 7);
    auto x = rand_map(4, 4, 8, rng);
    auto out0 = run_block_tensor(store, params, x, InstanceSelector::hard(0));
    auto out1 = run_block_tensor(store, params, x, InstanceSelector::hard(1));
    CHECK(out0.data != out1.data);

    // A soft selector interpolates the embedding input, giving yet another
    // valid output; endpoints coincide with hard selectors.
    auto soft0 = run_block_tensor(store, params, x, InstanceSelector::soft({1.0, 0.0}));
    CHECK(soft0.data == out0.data);
    auto mid = run_block_tensor(store, params, x, InstanceSelector::soft({0.5, 0.5}));
    CHECK(mid.data != out0.data);
    CHECK(mid.data != out1.data);
}

TEST_CASE("selector arity is validated against the block") {
    Rng rng(13);
    nn::ParameterStore<double> store;
    MimbConfig cfg{8, 4, 2};
    auto params = MimbParams<double>::create(store, "blk", cfg, 7);
    auto x = rand_map(2, 2, 8, rng);
    CHECK_THROWS_AS(run_block_tensor(store, params, x, InstanceSelector::hard(2)),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        run_block_tensor(store, params, x, InstanceSelector::soft({0.3, 0.3, 0.4})),
        std::invalid_argument);
}

TEST_CASE("selector helpers expose one-hot structure") {
    auto h = InstanceSelector::hard(1);
    CHECK(h.is_hard());
    CHECK(h.is_one_hot());
    CHECK(h.one_hot_index() == 1);
    CHECK(h.hard_index() == 1);
    CHECK(h.weights(3) == std::vector<double>{0.0, 1.0, 0.0});
    CHECK_THROWS_AS(h.weights(1), std::invalid_argument);
    CHECK(h.describe() == "1");

    auto s = InstanceSelector::soft({0.25, 0.75});
    CHECK_FALSE(s.is_hard());
    CHECK_FALSE(s.is_one_hot());
    CHECK_THROWS_AS(s.hard_index(), std::logic_error);
    CHECK(s.soft_weights() == std::vector<double>{0.25, 0.75});
    CHECK_THROWS_AS(s.weights(3), std::invalid_argument);
    CHECK(s.describe() == "soft[0.2500,0.7500]");

    auto onehot = InstanceSelector::soft({0.0, 1.0});
    CHECK(onehot.is_one_hot());
    CHECK(onehot.one_hot_index() == 1);

    CHECK_THROWS_AS(InstanceSelector::hard(-1), std::invalid_argument);
    CHECK_THROWS_AS(InstanceSelector::soft({0.5, 0.6}), std::invalid_argument);
    CHECK_THROWS_AS(InstanceSelector::soft({}), std::invalid_argument);
    CHECK_THROWS_AS(InstanceSelector::soft({-0.1, 1.1}), std::invalid_argument);
}
