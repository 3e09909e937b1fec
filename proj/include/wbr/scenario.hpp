// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wbr/data.hpp"

namespace wbr {

/// Sorted, duplicate-free set of class ids.
using ClassSet = std::vector<ClassId>;

/// One stage of a class-incremental sequence.
struct TaskSplit {
  std::size_t task_index = 0;
  ClassSet class_ids;
  /// Rows of the training dataset whose label is in class_ids, ascending.
  std::vector<std::size_t> train_rows;
  /// Rows of the test dataset whose label is in class_ids, ascending.
  std::vector<std::size_t> test_rows;

  bool contains(ClassId c) const;
};

/// Ordered task sequence with pairwise disjoint label sets covering every class.
struct Scenario {
  std::vector<ClassId> class_order;
  std::size_t base_size = 0;
  std::size_t increment = 0;
  std::optional<std::uint64_t> order_seed;
  std::vector<TaskSplit> tasks;

  std::size_t num_tasks() const noexcept { return tasks.size(); }
  std::size_t num_classes() const noexcept { return class_order.size(); }
};

/// Splits the classes into a base task of `base_size` classes (skipped when 0)
/// followed by tasks of `increment` classes; a final task holds any remainder.
/// Classes are taken in ascending order unless `class_order_seed` is given.
Scenario build_scenario(const LabeledDataset& train, const LabeledDataset& test,
                        std::size_t base_size, std::size_t increment,
                        std::optional<std::uint64_t> class_order_seed = std::nullopt);

/// Union of the class sets of tasks 0..through_task, sorted.
ClassSet seen_classes(const Scenario& scenario, std::size_t through_task);

}  // namespace wbr
