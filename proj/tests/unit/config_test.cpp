// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>

#include <gtest/gtest.h>

#include "temp_dir.hpp"
#include "wbr/error.hpp"
#include "wbr/experiment.hpp"

namespace wbr {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;

const fs::path kFixtures = WBR_FIXTURE_DIR;

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

ExperimentConfig parse(const std::string& text, std::vector<std::string> overrides = {}) {
  return parse_experiment_config(text, kFixtures, overrides);
}

const char* kFeatures = R"(
[dataset]
kind = "features"
train = "synth6_train.wbrf"
test = "synth6_test.wbrf"
)";

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const std::string& value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    ::setenv(name, value.c_str(), 1);
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

TEST(ExperimentConfig, DefaultsFromMinimalFile) {
  const auto cfg = parse(kFeatures);
  EXPECT_EQ(cfg.dataset.kind, DatasetSpec::Kind::kFeatures);
  EXPECT_EQ(cfg.dataset.train_features, kFixtures / "synth6_train.wbrf");
  EXPECT_EQ(cfg.dataset.input_norm, InputNorm::kUnit);
  EXPECT_EQ(cfg.base, 0u);
  EXPECT_EQ(cfg.increment, 1u);
  EXPECT_EQ(cfg.hidden_layers, 0u);
  EXPECT_EQ(cfg.train.lr, 0.01);
  EXPECT_EQ(cfg.train.epochs_per_task, 10u);
  EXPECT_EQ(cfg.train.batch_size, 16u);
  EXPECT_FALSE(cfg.train.clip_new.enabled());
  EXPECT_FALSE(cfg.train.clip_memory.enabled());
  EXPECT_EQ(cfg.method, Method::kWbr);
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
  EXPECT_EQ(cfg.layer_dims(768, 100), (std::vector<std::size_t>{768, 100}));
}

TEST(ExperimentConfig, FullFixture) {
  const auto cfg = load_experiment_config(kFixtures / "synth6.toml");
  EXPECT_EQ(cfg.increment, 2u);
  EXPECT_EQ(cfg.train.lr, 0.05);
  EXPECT_EQ(cfg.train.clip_new, ClipPolicy::global_norm(0.5));
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1}));
  const auto t = cfg.train_config(1);
  EXPECT_EQ(t.seed, 1u);
  EXPECT_TRUE(t.replay_enabled);
}

TEST(ExperimentConfig, OverridesApplyBeforeValidation) {
  const auto cfg = parse(kFeatures, {"train.alpha=0.25", "train.clip_mode=element-clamp",
                                     "experiment.seeds=[3, 4]", "scenario.order_seed=5",
                                     "model.hidden_layers=2", "experiment.method=finetune"});
  EXPECT_EQ(cfg.train.clip_new, ClipPolicy::element_clamp(0.25));
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_EQ(cfg.order_seed, 5u);
  EXPECT_EQ(cfg.layer_dims(10, 4), (std::vector<std::size_t>{10, 32, 32, 4}));
  EXPECT_FALSE(cfg.train_config(0).replay_enabled);
  const auto off = parse(kFeatures, {"train.alpha=0.5", "train.alpha=none"});
  EXPECT_FALSE(off.train.clip_new.enabled());
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.lr"}); }), "--set");
}

TEST(ExperimentConfig, ErrorsNameTheField) {
  EXPECT_EQ(field_of([] { parse(std::string(kFeatures) + "[train]\nalhpa = 1\n"); }),
            "train.alhpa");
  EXPECT_EQ(field_of([] { parse(std::string(kFeatures) + "[optimizer]\nlr = 1\n"); }),
            "optimizer");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.lr=-0.1"}); }), "train.lr");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.lr=\"fast\""}); }), "train.lr");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.epochs=0"}); }), "train.epochs");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.batch_size=1.5"}); }), "train.batch_size");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.momentum=1"}); }), "train.momentum");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.alpha=-1"}); }), "train.alpha");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.beta=big"}); }), "train.beta");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.clip_mode=none"}); }), "train.clip_mode");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"train.importance=max"}); }), "train.importance");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"scenario.increment=0"}); }), "scenario.increment");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"scenario.base=-1"}); }), "scenario.base");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"experiment.method=ewc"}); }), "experiment.method");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"experiment.seeds=[]"}); }), "experiment.seeds");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"experiment.seeds=[1, 1]"}); }), "experiment.seeds");
  EXPECT_EQ(field_of([] { parse(kFeatures, {"dataset.input_norm=z"}); }), "dataset.input_norm");
  EXPECT_EQ(field_of([] { parse("[dataset]\nkind = \"features\"\n"); }), "dataset.train");
  EXPECT_EQ(field_of([] { parse("[dataset]\nkind = \"imagenet\"\n"); }), "dataset.kind");
  EXPECT_EQ(field_of([] { parse("[dataset\n"); }), "config");
  EXPECT_EQ(field_of([] { load_experiment_config("/nonexistent/x.toml"); }), "--config");
}

TEST(ExperimentConfig, MissingDatasetFileIsAConfigError) {
  const auto cfg = parse(kFeatures, {"dataset.test=absent.wbrf"});
  EXPECT_EQ(field_of([&] { load_experiment_data(cfg.dataset); }), "dataset.test");
  TempDir empty;
  const auto mnist = parse_experiment_config("[dataset]\nkind = \"mnist\"\n", empty.path());
  EXPECT_EQ(field_of([&] { load_experiment_data(mnist.dataset); }), "dataset.train_images");
}

TEST(ExperimentConfig, DataDirEnvironmentFallback) {
  TempDir root;
  fs::create_directories(root / "mnist");
  fs::copy_file(kFixtures / "synth6_train.wbrf", root / "tr.wbrf");
  ScopedEnv env("WBR_DATA_DIR", root.path().string());
  TempDir elsewhere;
  const auto mnist = parse_experiment_config("[dataset]\nkind = \"mnist\"\n", elsewhere.path());
  EXPECT_EQ(mnist.dataset.train_images, root / "mnist" / "train-images-idx3-ubyte");
  EXPECT_EQ(mnist.dataset.test_labels, root / "mnist" / "t10k-labels-idx1-ubyte");
  const auto feats = parse_experiment_config(
      "[dataset]\nkind = \"features\"\ntrain = \"tr.wbrf\"\ntest = \"te.wbrf\"\n", elsewhere.path());
  EXPECT_EQ(feats.dataset.train_features, root / "tr.wbrf");
  EXPECT_EQ(feats.dataset.test_features, elsewhere / "te.wbrf");  // not found anywhere
}

TEST(ExperimentConfig, CanonicalTomlAndJsonRoundTrip) {
  const auto cfg = parse(kFeatures, {"train.alpha=0.5", "train.beta=0.125", "train.lr=0.1",
                                     "train.momentum=0.9", "scenario.order_seed=7",
                                     "experiment.checkpoint=true", "train.importance=confidence",
                                     "train.joint_loss=true", "model.hidden_layers=1"});
  const std::string text = to_toml(cfg);
  const auto again = parse_experiment_config(text, "/");
  EXPECT_EQ(to_json(again), to_json(cfg));
  EXPECT_EQ(to_toml(again), text);
  EXPECT_EQ(again.train.lr, 0.1);
  EXPECT_EQ(again.train.clip_memory, ClipPolicy::global_norm(0.125));
  EXPECT_EQ(to_json(experiment_config_from_json(to_json(cfg))), to_json(cfg));
  EXPECT_EQ(to_json(cfg)["train"]["beta"], 0.125);
}

TEST(GridAxis, Parsing) {
  const auto a = parse_grid_axis("lr=0.1,0.01, 0.001");
  EXPECT_EQ(a.key, "lr");
  EXPECT_EQ(a.values, (std::vector<std::string>{"0.1", "0.01", "0.001"}));
  EXPECT_EQ(field_of([] { parse_grid_axis("lr="); }), "--axis lr");
  EXPECT_EQ(field_of([] { parse_grid_axis("lr=0.1,"); }), "--axis lr");
  EXPECT_EQ(field_of([] { parse_grid_axis("depth=1"); }), "--axis");
  EXPECT_EQ(field_of([] { parse_grid_axis("lr"); }), "--axis");
}

TEST(Grid, CartesianProductInAxisOrder) {
  const std::vector<GridAxis> axes{parse_grid_axis("lr=0.1,0.01,0.001"),
                                   parse_grid_axis("N=0,1,2"), parse_grid_axis("alpha=none,0.5")};
  const auto cells = expand_grid(axes);
  ASSERT_EQ(cells.size(), 18u);
  EXPECT_EQ(cells[0].label(), "lr=0.1, N=0, alpha=none");
  EXPECT_EQ(cells[1].label(), "lr=0.1, N=0, alpha=0.5");
  EXPECT_EQ(cells[17].label(), "lr=0.001, N=2, alpha=0.5");
  std::set<std::string> hashes;
  for (const auto& c : cells) {
    EXPECT_EQ(c.hash().size(), 16u);
    hashes.insert(c.hash());
  }
  EXPECT_EQ(hashes.size(), 18u);
  EXPECT_EQ(cells[5].hash(), expand_grid(axes)[5].hash());
  EXPECT_EQ(expand_grid({}).size(), 1u);
  const std::vector<GridAxis> twice{parse_grid_axis("lr=1"), parse_grid_axis("lr=2")};
  EXPECT_THROW(expand_grid(twice), ConfigError);
  const std::vector<GridAxis> empty{GridAxis{"lr", {}}};
  EXPECT_THROW(expand_grid(empty), ConfigError);
}

TEST(Grid, ApplyCellSetsFields) {
  const auto base = parse(kFeatures, {"train.clip_mode=element-clamp"});
  GridCell cell;
  cell.settings = {{"lr", "0.1"}, {"N", "2"}, {"alpha", "0.5"}, {"beta", "none"},
                   {"momentum", "0.9"}};
  const auto cfg = apply_cell(base, cell);
  EXPECT_EQ(cfg.train.lr, 0.1);
  EXPECT_EQ(cfg.hidden_layers, 2u);
  EXPECT_EQ(cfg.train.clip_new, ClipPolicy::element_clamp(0.5));
  EXPECT_FALSE(cfg.train.clip_memory.enabled());
  EXPECT_EQ(cfg.train.momentum, 0.9);
  EXPECT_EQ(cfg.output_dir, base.output_dir / "cells" / cell.hash());
  GridCell bad;
  bad.settings = {{"lr", "-1"}};
  EXPECT_THROW(apply_cell(base, bad), ConfigError);
  bad.settings = {{"N", "two"}};
  EXPECT_THROW(apply_cell(base, bad), ConfigError);
  bad.settings = {{"alpha", "0"}};
  EXPECT_THROW(apply_cell(base, bad), ConfigError);
}

TEST(SeedStats, SampleStandardDeviation) {
  const auto s = seed_stats(std::vector<double>{1, 2, 3});
  EXPECT_EQ(s.mean, 2.0);
  EXPECT_EQ(s.stddev, 1.0);
  EXPECT_EQ(seed_stats(std::vector<double>{4}).stddev, 0.0);
  EXPECT_THROW(seed_stats(std::vector<double>{}), MetricError);
}

}  // namespace
}  // namespace wbr
