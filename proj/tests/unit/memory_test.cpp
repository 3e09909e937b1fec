// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "temp_dir.hpp"
#include "wbr/error.hpp"
#include "wbr/memory.hpp"
#include "wbr/scenario.hpp"

namespace wbr {
namespace {

using testing::for_all;
using testing::random_matrix;
using testing::TempDir;

LabeledDataset dataset(Matrix features, std::vector<ClassId> labels, std::uint32_t classes) {
  LabeledDataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.num_classes = classes;
  return ds;
}

MemoryVector vec(ClassId c, std::vector<double> v) {
  return {c, Matrix::row_vector(v), 0};
}

TEST(ImportanceMode, Parsing) {
  EXPECT_EQ(parse_importance_mode("average"), ImportanceMode::kAverage);
  EXPECT_EQ(parse_importance_mode("confidence"), ImportanceMode::kConfidence);
  EXPECT_THROW(parse_importance_mode("max"), ConfigError);
}

TEST(AverageMemory, TwoPointMean) {
  const auto ds = dataset(Matrix::from_rows({{0, 2}, {5, 5}, {2, 0}}), {3, 1, 3}, 4);
  const std::vector<ClassId> ids{3, 1};
  const auto v = build_memory_average(ds, ids, 7);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].class_id, 3u);
  EXPECT_EQ(v[0].vector, Matrix::from_rows({{1, 1}}));
  EXPECT_EQ(v[1].vector, Matrix::from_rows({{5, 5}}));
  EXPECT_EQ(v[0].source_task, 7u);
  const std::vector<ClassId> missing{2};
  EXPECT_THROW(build_memory_average(ds, missing), EstimationError);
}

TEST(AverageMemoryProperty, InvariantToSampleOrder) {
  for_all(30, 71, [](SeededRng& rng, int) {
    const std::size_t n = 2 + rng.below(20), d = 1 + rng.below(6);
    auto ds = dataset(random_matrix(rng, n, d), std::vector<ClassId>(n, 0), 1);
    const std::vector<ClassId> ids{0};
    const auto a = build_memory_average(ds, ids);
    const auto perm = rng_shuffle(rng, n);
    const auto b = build_memory_average(ds.subset(perm), ids);
    for (std::size_t j = 0; j < d; ++j) {
      EXPECT_NEAR(a[0].vector(0, j), b[0].vector(0, j), 1e-12);
    }
  });
}

TEST(ConfidenceWeights, NormalizeAndDetectAllCertain) {
  const std::vector<double> p{1.0, 0.5};
  EXPECT_EQ(*confidence_weights(p), (std::vector<double>{0.0, 1.0}));
  const std::vector<double> q{0.2, 0.6, 0.8};
  const auto w = *confidence_weights(q);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
  EXPECT_NEAR(w[0], 0.8 / 1.4, 1e-15);
  const std::vector<double> certain{1.0, 1.0};
  EXPECT_FALSE(confidence_weights(certain).has_value());
}

TEST(ConfidenceMemory, SelectsTheUncertainSample) {
  // Linear 2-class model; the mask holds a single class so p_true == 1 for
  // every sample, which exercises the average fallback.
  const auto ds = dataset(Matrix::from_rows({{1, 0}, {0, 1}}), {0, 0}, 2);
  const std::vector<ClassId> ids{0};
  const MlpModel m = MlpModel::zeros({2, 2});
  const auto fallback = build_memory_confidence(ds, ids, m, ClassMask(2, ids));
  EXPECT_EQ(fallback[0].vector, build_memory_average(ds, ids)[0].vector);

  // With both classes masked: sample 0 gets p_true = 1/2 under a zero model,
  // sample 1 is pushed to near-certainty by its weight row.
  MlpModel sharp = MlpModel::zeros({2, 2});
  sharp.weights[0](0, 1) = 800.0;  // logit of class 0 for sample 1
  const auto ds2 = dataset(Matrix::from_rows({{1, 0}, {0, 1}}), {0, 0}, 2);
  const auto v = build_memory_confidence(ds2, ids, sharp, ClassMask::all(2));
  EXPECT_EQ(v[0].vector, Matrix::from_rows({{1, 0}}));
}

TEST(ConfidenceMemory, EqualConfidenceMatchesAverage) {
  SeededRng rng(72);
  const auto ds = dataset(random_matrix(rng, 6, 3), {0, 1, 0, 1, 0, 1}, 2);
  const std::vector<ClassId> ids{0, 1};
  const auto conf = build_memory_confidence(ds, ids, MlpModel::zeros({3, 2}), ClassMask::all(2));
  const auto avg = build_memory_average(ds, ids);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_NEAR(conf[k].vector(0, j), avg[k].vector(0, j), 1e-15);
}

TEST(MemoryStore, AppendBatchAndErrors) {
  MemoryStore store;
  EXPECT_TRUE(store.empty());
  EXPECT_TRUE(store.batch().empty());
  EXPECT_EQ(store.dim(), 0u);
  store.append({vec(2, {1, 2}), vec(0, {3, 4})});
  EXPECT_EQ(store.size(), 2u);
  EXPECT_TRUE(store.contains(0));
  const auto b = store.batch();
  EXPECT_EQ(b.inputs, Matrix::from_rows({{1, 2}, {3, 4}}));
  EXPECT_EQ(b.labels, (std::vector<ClassId>{2, 0}));
  EXPECT_THROW(store.append({vec(5, {1, 1}), vec(2, {0, 0})}), ProtocolError);
  EXPECT_EQ(store.size(), 2u);  // unchanged after a failed append
  EXPECT_THROW(store.append({vec(6, {1, 1}), vec(6, {1, 1})}), ProtocolError);
  EXPECT_THROW(store.append({vec(7, {1, 2, 3})}), ShapeError);
}

TEST(MemoryStore, SaveLoadRoundTrip) {
  TempDir dir;
  MemoryStore store(ImportanceMode::kConfidence);
  store.append({vec(9, {0.5, -1.5}), vec(3, {2.0, 4.0})});
  store.save(dir / "m.wbrf", 10);
  const auto back = MemoryStore::load(dir / "m.wbrf", ImportanceMode::kConfidence);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.vectors()[0].class_id, 9u);
  EXPECT_EQ(back.vectors()[1].vector, Matrix::from_rows({{2.0, 4.0}}));
  EXPECT_EQ(back.vectors()[0].source_task, MemoryVector::kUnknownTask);
  EXPECT_EQ(back.importance_mode(), ImportanceMode::kConfidence);
}

TEST(MemoryStoreProperty, SizeTracksSeenClasses) {
  for_all(25, 73, [](SeededRng& rng, int) {
    const auto classes = static_cast<std::uint32_t>(2 + rng.below(20));
    const std::size_t inc = 1 + rng.below(classes);
    LabeledDataset ds;
    ds.num_classes = classes;
    ds.features = random_matrix(rng, classes * 2, 3);
    for (std::size_t i = 0; i < classes * 2; ++i) ds.labels.push_back(static_cast<ClassId>(i % classes));
    const auto s = build_scenario(ds, ds, 0, inc, rng.next_u64());
    MemoryStore store;
    for (std::size_t b = 0; b < s.num_tasks(); ++b) {
      for (ClassId c : s.tasks[b].class_ids) EXPECT_FALSE(store.contains(c));
      store.append(build_memory_average(ds.subset(s.tasks[b].train_rows), s.tasks[b].class_ids, b));
      EXPECT_EQ(store.size(), seen_classes(s, b).size());
    }
  });
}

TEST(SampleDims, Parsing) {
  const auto d = SampleDims::parse("32x32x3");
  EXPECT_EQ(d.volume(), 3072u);
  EXPECT_THROW(SampleDims::parse("32x32"), ConfigError);
  EXPECT_THROW(SampleDims::parse("32x0x3"), ConfigError);
  EXPECT_THROW(SampleDims::parse("32x32x3x"), ConfigError);
  EXPECT_THROW(SampleDims::parse("axbxc"), ConfigError);
}

TEST(Footprint, PaperValues) {
  const auto cifar = SampleDims::parse("32x32x3");
  EXPECT_DOUBLE_EQ(memory_footprint_in_samples(95, 768, cifar), 23.75);
  EXPECT_DOUBLE_EQ(memory_footprint_in_samples(90, 768, cifar), 22.5);
  EXPECT_EQ(memory_footprint_in_samples(0, 768, cifar), 0.0);
  MemoryStore store;
  store.append({vec(0, {1, 2, 3, 4, 5, 6})});
  EXPECT_DOUBLE_EQ(memory_footprint_in_samples(store, SampleDims::parse("2x2x1")), 1.5);
}

}  // namespace
}  // namespace wbr
