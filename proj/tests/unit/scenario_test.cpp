// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wbr/error.hpp"
#include "wbr/scenario.hpp"

namespace wbr {
namespace {

using testing::for_all;

/// `per_class` rows of every class, interleaved.
LabeledDataset cyclic_dataset(std::uint32_t classes, std::size_t per_class) {
  LabeledDataset ds;
  ds.num_classes = classes;
  ds.features = Matrix(classes * per_class, 1);
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    ds.labels.push_back(static_cast<ClassId>(i % classes));
    ds.features(i, 0) = static_cast<double>(i);
  }
  return ds;
}

void expect_partition(const Scenario& s, const LabeledDataset& train, const LabeledDataset& test) {
  std::multiset<ClassId> all;
  for (const auto& t : s.tasks) all.insert(t.class_ids.begin(), t.class_ids.end());
  ASSERT_EQ(all.size(), train.num_classes);
  for (ClassId c = 0; c < train.num_classes; ++c) EXPECT_EQ(all.count(c), 1u) << "class " << c;
  for (const auto& t : s.tasks) {
    EXPECT_TRUE(std::is_sorted(t.class_ids.begin(), t.class_ids.end()));
    EXPECT_TRUE(std::is_sorted(t.train_rows.begin(), t.train_rows.end()));
    std::size_t expected_train = 0, expected_test = 0;
    for (std::size_t r = 0; r < train.size(); ++r) expected_train += t.contains(train.labels[r]);
    for (std::size_t r = 0; r < test.size(); ++r) expected_test += t.contains(test.labels[r]);
    EXPECT_EQ(t.train_rows.size(), expected_train);
    EXPECT_EQ(t.test_rows.size(), expected_test);
    for (auto r : t.train_rows) EXPECT_TRUE(t.contains(train.labels[r]));
    for (auto r : t.test_rows) EXPECT_TRUE(t.contains(test.labels[r]));
  }
}

TEST(Scenario, SplitMnistOneClassPerTask) {
  const auto train = cyclic_dataset(10, 6), test = cyclic_dataset(10, 2);
  const auto s = build_scenario(train, test, 0, 1);
  ASSERT_EQ(s.num_tasks(), 10u);
  for (std::size_t b = 0; b < 10; ++b) {
    EXPECT_EQ(s.tasks[b].task_index, b);
    EXPECT_EQ(s.tasks[b].class_ids, ClassSet{static_cast<ClassId>(b)});
    EXPECT_EQ(s.tasks[b].train_rows.size(), 6u);
  }
  expect_partition(s, train, test);
}

TEST(Scenario, HundredClassesInTenAndTwentyTasks) {
  const auto train = cyclic_dataset(100, 3), test = cyclic_dataset(100, 1);
  const auto ten = build_scenario(train, test, 0, 10);
  EXPECT_EQ(ten.num_tasks(), 10u);
  for (const auto& t : ten.tasks) EXPECT_EQ(t.class_ids.size(), 10u);
  expect_partition(ten, train, test);
  const auto twenty = build_scenario(train, test, 0, 5);
  EXPECT_EQ(twenty.num_tasks(), 20u);
  expect_partition(twenty, train, test);
}

TEST(Scenario, BaseTaskThenIncrements) {
  const auto ds = cyclic_dataset(10, 2);
  const auto s = build_scenario(ds, ds, 5, 1);
  ASSERT_EQ(s.num_tasks(), 6u);
  EXPECT_EQ(s.tasks[0].class_ids, (ClassSet{0, 1, 2, 3, 4}));
  EXPECT_EQ(s.tasks[5].class_ids, ClassSet{9});
}

TEST(Scenario, RemainderFormsASmallerLastTask) {
  const auto ds = cyclic_dataset(10, 2);
  const auto s = build_scenario(ds, ds, 0, 3);
  ASSERT_EQ(s.num_tasks(), 4u);
  EXPECT_EQ(s.tasks[3].class_ids, ClassSet{9});
}

TEST(Scenario, RejectsImpossibleSplits) {
  const auto ds = cyclic_dataset(10, 2);
  EXPECT_THROW(build_scenario(ds, ds, 0, 0), ConfigError);
  EXPECT_THROW(build_scenario(ds, ds, 0, 11), ConfigError);
  EXPECT_THROW(build_scenario(ds, ds, 10, 1), ConfigError);
}

TEST(Scenario, SeededClassOrderIsAReproduciblePermutation) {
  const auto ds = cyclic_dataset(20, 2);
  const auto a = build_scenario(ds, ds, 0, 4, 99);
  const auto b = build_scenario(ds, ds, 0, 4, 99);
  EXPECT_EQ(a.class_order, b.class_order);
  auto sorted = a.class_order;
  std::sort(sorted.begin(), sorted.end());
  std::vector<ClassId> iota(20);
  for (ClassId i = 0; i < 20; ++i) iota[i] = i;
  EXPECT_EQ(sorted, iota);
  EXPECT_NE(a.class_order, iota);
  expect_partition(a, ds, ds);
  EXPECT_EQ(build_scenario(ds, ds, 0, 4).class_order, iota);
}

TEST(Scenario, SeenClassesAccumulate) {
  const auto ds = cyclic_dataset(6, 1);
  const auto s = build_scenario(ds, ds, 2, 2);
  EXPECT_EQ(seen_classes(s, 0), (ClassSet{0, 1}));
  EXPECT_EQ(seen_classes(s, 2), (ClassSet{0, 1, 2, 3, 4, 5}));
  EXPECT_THROW(seen_classes(s, 3), RangeError);
}

TEST(ScenarioProperty, TasksPartitionClassesAndRows) {
  for_all(40, 21, [](SeededRng& rng, int) {
    const auto classes = static_cast<std::uint32_t>(2 + rng.below(30));
    const std::size_t inc = 1 + rng.below(classes);
    const std::size_t base = rng.below(classes - inc + 1);
    const auto train = cyclic_dataset(classes, 1 + rng.below(3));
    const auto test = cyclic_dataset(classes, 1);
    std::optional<std::uint64_t> seed;
    if (rng.below(2)) seed = rng.next_u64();
    const auto s = build_scenario(train, test, base, inc, seed);
    expect_partition(s, train, test);
    const std::size_t rest = classes - base;
    EXPECT_EQ(s.num_tasks(), (base > 0 ? 1 : 0) + (rest + inc - 1) / inc);
  });
}

}  // namespace
}  // namespace wbr
