#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mipose/common.hpp"
#include "mipose/model.hpp"
#include "mipose/synth.hpp"
#include "mipose/train.hpp"
#include "test_util.hpp"

using namespace mipose;

namespace {

/// Small in-memory dataset shared by the training tests (generated once).
const LoadedDataset& tiny_dataset() {
    static LoadedDataset data = [] {
        DatasetConfig cfg;
        cfg.split_counts = {{"train", 24}, {"val", 8}};
        cfg.mix = {{0.5, 1, 0.0, 0.0}, {0.5, 2, 0.4, 0.7}};
        cfg.inline_images = true;
        miptest::TempDir tmp("train_ds");
        DatasetManifest m = make_dataset(cfg, 77, tmp.str());
        return LoadedDataset::load(tmp.file("manifest.json"));
    }();
    return data;
}

TrainConfig fast_config(int epochs) {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 16;
    tc.learning_rate = 1e-3;
    tc.seed = 5;
    tc.workers = 1;
    return tc;
}

}  // namespace

TEST_CASE("learning-rate schedule steps down at 70% and 90%") {
    TrainConfig tc;
    tc.epochs = 30;
    tc.learning_rate = 1e-3;
    CHECK(lr_at_epoch(tc, 0) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(tc, 20) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(tc, 21) == doctest::Approx(1e-4));
    CHECK(lr_at_epoch(tc, 26) == doctest::Approx(1e-4));
    CHECK(lr_at_epoch(tc, 27) == doctest::Approx(1e-5));
    CHECK(lr_at_epoch(tc, 29) == doctest::Approx(1e-5));

    tc.epochs = 10;
    CHECK(lr_at_epoch(tc, 6) == doctest::Approx(1e-3));
    CHECK(lr_at_epoch(tc, 7) == doctest::Approx(1e-4));
    CHECK(lr_at_epoch(tc, 9) == doctest::Approx(1e-5));
}

TEST_CASE("train config json covers exactly the math-defining fields") {
    TrainConfig tc;
    tc.epochs = 4;
    tc.batch_size = 8;
    tc.learning_rate = 0.5;
    tc.seed = 9;
    tc.residual_mode = ResidualMode::dont_care;
    tc.workers = 7;   // runtime knob, not serialized
    tc.resume = true; // runtime knob, not serialized
    auto j = tc.to_json();
    CHECK_FALSE(j.contains("workers"));
    CHECK_FALSE(j.contains("resume"));
    TrainConfig back = TrainConfig::from_json(j);
    CHECK(back.epochs == 4);
    CHECK(back.batch_size == 8);
    CHECK(back.learning_rate == doctest::Approx(0.5));
    CHECK(back.seed == 9);
    CHECK(back.residual_mode == ResidualMode::dont_care);
    CHECK(back.to_json() == j);

    TrainConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("loss csv has the documented layout") {
    miptest::TempDir tmp("csv");
    std::vector<EpochLoss> curve{{1, 0.5, 0.6}, {2, 0.25, 0.3}};
    write_loss_csv(tmp.file("loss.csv"), curve, true);
    const std::string text = miptest::slurp(tmp.file("loss.csv"));
    CHECK(text.rfind("epoch,split,loss\n", 0) == 0);
    CHECK(text.find("1,train,0.5") != std::string::npos);
    CHECK(text.find("1,val,0.6") != std::string::npos);
    CHECK(text.find("2,train,0.25") != std::string::npos);

    write_loss_csv(tmp.file("noval.csv"), curve, false);
    CHECK(miptest::slurp(tmp.file("noval.csv")).find("val") == std::string::npos);

    auto back = curve_from_json(curve_to_json(curve));
    REQUIRE(back.size() == 2);
    CHECK(back[1].train_loss == doctest::Approx(0.25));
}

TEST_CASE("training reduces the loss and is deterministic in the seed") {
    const LoadedDataset& data = tiny_dataset();
    TrainConfig tc = fast_config(5);

    miptest::TempDir out_a("train_a");
    auto model_a = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 3));
    TrainResult ra = train_model(model_a, data, "train", "val", tc, out_a.str());
    REQUIRE(ra.curve.size() == 5);

    // The optimization must make real progress on the training objective.
    CHECK(ra.curve.back().train_loss < ra.curve.front().train_loss);
    CHECK(ra.curve.back().val_loss < ra.curve.front().val_loss);
    for (const auto& e : ra.curve) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(e.train_loss > 0.0);
    }

    // Identical seeds give bitwise-identical checkpoints and curves.
    miptest::TempDir out_b("train_b");
    auto model_b = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 3));
    TrainResult rb = train_model(model_b, data, "train", "val", tc, out_b.str());
    REQUIRE(rb.curve.size() == ra.curve.size());
    for (std::size_t i = 0; i < ra.curve.size(); ++i) {
        CHECK(ra.curve[i].train_loss == rb.curve[i].train_loss);
        CHECK(ra.curve[i].val_loss == rb.curve[i].val_loss);
    }
    CHECK(miptest::slurp(out_a.file("final.ckpt")) ==
          miptest::slurp(out_b.file("final.ckpt")));
    CHECK(miptest::slurp(out_a.file("loss.csv")) ==
          miptest::slurp(out_b.file("loss.csv")));

    // A different seed diverges.
    miptest::TempDir out_c("train_c");
    TrainConfig tc2 = tc;
    tc2.seed = 6;
    auto model_c = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 3));
    TrainResult rc = train_model(model_c, data, "train", "val", tc2, out_c.str());
    CHECK(rc.curve.back().train_loss != ra.curve.back().train_loss);
}

TEST_CASE("resuming a checkpointed run matches an uninterrupted run") {
    const LoadedDataset& data = tiny_dataset();
    TrainConfig tc = fast_config(3);

    // Reference: 3 epochs in one go.
    miptest::TempDir full("resume_full");
    auto model_full = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 11));
    train_model(model_full, data, "train", "val", tc, full.str());

    // Same run, but restarted through a checkpoint: seed the out dir with a
    // pre-training last.ckpt (identically initialized weights, no progress),
    // then resume with a model whose in-memory weights have been corrupted.
    // The checkpoint state must win and all epochs must replay identically.
    miptest::TempDir part("resume_part");
    auto model_ckpt = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 11));
    model_ckpt.save(part.file("last.ckpt"), {{"epochs_completed", 0},
                                             {"curve", nlohmann::json::array()},
                                             {"train_config", tc.to_json()}});
    auto model_other = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 11));
    for (auto& v : model_other.store().mutate("head.conv.w").data) v = -0.5f;
    TrainConfig tcr = tc;
    tcr.resume = true;
    TrainResult resumed = train_model(model_other, data, "train", "val", tcr, part.str());
    REQUIRE(resumed.curve.size() == 3);

    CHECK(miptest::slurp(full.file("final.ckpt")) ==
          miptest::slurp(part.file("final.ckpt")));
    CHECK(miptest::slurp(full.file("loss.csv")) == miptest::slurp(part.file("loss.csv")));
}

TEST_CASE("a run interrupted at the final save recovers via resume") {
    const LoadedDataset& data = tiny_dataset();
    TrainConfig tc = fast_config(2);

    miptest::TempDir full("int_full");
    auto model_full = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 31));
    train_model(model_full, data, "train", "val", tc, full.str());

    // Block the final.ckpt path so the run fails after its last epoch.
    miptest::TempDir part("int_part");
    std::filesystem::create_directories(part.file("final.ckpt"));
    auto model_a = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 31));
    CHECK_THROWS_AS(train_model(model_a, data, "train", "val", tc, part.str()),
                    std::runtime_error);
    CHECK(std::filesystem::exists(part.file("last.ckpt")));

    // Re-running the same command with resume completes the run.
    std::filesystem::remove(part.file("final.ckpt"));
    auto model_b = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 31));
    TrainConfig tcr = tc;
    tcr.resume = true;
    TrainResult resumed = train_model(model_b, data, "train", "val", tcr, part.str());
    REQUIRE(resumed.curve.size() == 2);
    CHECK(miptest::slurp(full.file("final.ckpt")) ==
          miptest::slurp(part.file("final.ckpt")));
}

TEST_CASE("resume refuses a mismatched train config") {
    const LoadedDataset& data = tiny_dataset();
    miptest::TempDir out("resume_bad");
    auto model = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 13));
    train_model(model, data, "train", "val", fast_config(1), out.str());

    auto model2 = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 13));
    TrainConfig changed = fast_config(2);
    changed.learning_rate = 5e-4;  // math-defining field differs
    changed.resume = true;
    CHECK_THROWS_AS(train_model(model2, data, "train", "val", changed, out.str()),
                    std::runtime_error);
}

TEST_CASE("a fully-trained checkpoint resumes to a no-op") {
    const LoadedDataset& data = tiny_dataset();
    miptest::TempDir out("resume_done");
    auto model = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 17));
    TrainConfig tc = fast_config(2);
    TrainResult first = train_model(model, data, "train", "val", tc, out.str());

    auto model2 = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 17));
    TrainConfig again = tc;
    again.resume = true;
    TrainResult second = train_model(model2, data, "train", "val", again, out.str());
    REQUIRE(second.curve.size() == first.curve.size());
    for (std::size_t i = 0; i < first.curve.size(); ++i)
        CHECK(first.curve[i].train_loss == doctest::Approx(second.curve[i].train_loss));
}

TEST_CASE("the dont-care residual mode trains") {
    const LoadedDataset& data = tiny_dataset();
    miptest::TempDir out("dontcare");
    auto model = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 19));
    TrainConfig tc = fast_config(2);
    tc.residual_mode = ResidualMode::dont_care;
    TrainResult r = train_model(model, data, "train", "val", tc, out.str());
    REQUIRE(r.curve.size() == 2);
    CHECK(std::isfinite(r.curve.back().train_loss));
    CHECK(r.curve.back().train_loss < r.curve.front().train_loss);
}

TEST_CASE("a poisoned parameter aborts with batch context") {
    const LoadedDataset& data = tiny_dataset();
    miptest::TempDir out("nan_abort");
    auto model = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 23));
    model.store().mutate("head.conv.w").data[0] = 1.0e30f;
    TrainConfig tc = fast_config(1);
    CHECK_THROWS_WITH_AS(train_model(model, data, "train", "", tc, out.str()),
                         doctest::Contains("training aborted"), std::runtime_error);
}

TEST_CASE("worker count does not change the result") {
    const LoadedDataset& data = tiny_dataset();
    TrainConfig one = fast_config(2);
    one.workers = 1;
    TrainConfig four = fast_config(2);
    four.workers = 4;

    miptest::TempDir out1("w1"), out4("w4");
    auto m1 = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 29));
    auto m4 = Model<float>::build(ModelConfig::preset(Variant::mipnet, 2, 29));
    TrainResult r1 = train_model(m1, data, "train", "val", one, out1.str());
    TrainResult r4 = train_model(m4, data, "train", "val", four, out4.str());
    CHECK(miptest::slurp(out1.file("final.ckpt")) ==
          miptest::slurp(out4.file("final.ckpt")));
    CHECK(r1.curve.back().val_loss == r4.curve.back().val_loss);
}
