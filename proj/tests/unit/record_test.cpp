// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "wbr/error.hpp"
#include "wbr/experiment.hpp"
#include "wbr/trainer.hpp"

namespace wbr {
namespace {

using testing::read_bytes;
using testing::TempDir;
using testing::write_bytes;

RunRecord sample_record() {
  const auto data = synthetic_gaussian_classes(4, 5, 10, 3, 5.0, 1.0, 2);
  const auto scenario = build_scenario(data.train, data.test, 0, 2, 11);
  TrainConfig cfg;
  cfg.epochs_per_task = 1;
  return run_continual(make_model({5, 4}, 0), scenario, data.train, data.test, cfg).record;
}

TEST(RunRecordJson, RoundTrips) {
  const RunRecord r = sample_record();
  const auto j = to_json(r);
  EXPECT_EQ(j.at("stages").size(), 2u);
  EXPECT_EQ(j.at("stages")[0].at("row_delta_old"), nullptr);
  EXPECT_EQ(j.at("final_accuracy").get<double>(), r.metrics.final_accuracy());
  const RunRecord back = run_record_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.metrics, r.metrics);
  EXPECT_EQ(back.scenario, r.scenario);
  EXPECT_EQ(back.seen_classes, r.seen_classes);
  EXPECT_EQ(back.layer_dims, r.layer_dims);
  EXPECT_EQ(back.memory_vectors, r.memory_vectors);
  ASSERT_EQ(back.balance.size(), r.balance.size());
  EXPECT_EQ(back.balance[1].old_mean, r.balance[1].old_mean);
  EXPECT_EQ(back.config, r.config);
}

TEST(RunRecordJson, MalformedIsAFormatError) {
  EXPECT_THROW(run_record_from_json(nlohmann::json::object()), FormatError);
  auto j = to_json(sample_record());
  j["per_task_matrix"].erase(0);
  EXPECT_THROW(run_record_from_json(j), FormatError);
}

TEST(StageRows, MirrorMetrics) {
  const RunRecord r = sample_record();
  const auto rows = r.stage_rows();
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].stage, 2u);
  EXPECT_EQ(rows[1].accuracy, r.metrics.stage_accuracy[1]);
  EXPECT_EQ(rows[1].seen_classes, 4u);
}

TEST(ModelCheckpoint, RoundTripsBitExactly) {
  TempDir dir;
  const MlpModel m = make_model({7, 5, 3}, 9);
  write_model_checkpoint(dir / "m.wbrm", m);
  EXPECT_EQ(load_model_checkpoint(dir / "m.wbrm"), m);
  EXPECT_EQ(read_bytes(dir / "m.wbrm").size(),
            4 + 4 + 4 + 3 * 8 + 8 * m.num_parameters());
}

TEST(ModelCheckpoint, RejectsDamagedFiles) {
  TempDir dir;
  write_model_checkpoint(dir / "m.wbrm", make_model({2, 2}, 1));
  const auto bytes = read_bytes(dir / "m.wbrm");
  auto cut = bytes;
  cut.pop_back();
  write_bytes(dir / "cut", cut);
  EXPECT_THROW(load_model_checkpoint(dir / "cut"), LengthError);
  auto extra = bytes;
  extra.push_back(0);
  write_bytes(dir / "extra", extra);
  EXPECT_THROW(load_model_checkpoint(dir / "extra"), FormatError);
  auto version = bytes;
  version[4] = 7;
  write_bytes(dir / "version", version);
  EXPECT_THROW(load_model_checkpoint(dir / "version"), VersionError);
  auto magic = bytes;
  magic[0] = 'X';
  write_bytes(dir / "magic", magic);
  EXPECT_THROW(load_model_checkpoint(dir / "magic"), FormatError);
  EXPECT_THROW(load_model_checkpoint(dir / "missing"), IoError);
}

}  // namespace
}  // namespace wbr
