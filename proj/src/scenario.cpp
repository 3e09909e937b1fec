// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/scenario.hpp"

#include <algorithm>
#include <numeric>

#include "wbr/error.hpp"

namespace wbr {

bool TaskSplit::contains(ClassId c) const {
  return std::binary_search(class_ids.begin(), class_ids.end(), c);
}

Scenario build_scenario(const LabeledDataset& train, const LabeledDataset& test,
                        std::size_t base_size, std::size_t increment,
                        std::optional<std::uint64_t> class_order_seed) {
  if (increment == 0) throw ConfigError("increment must be at least 1", "scenario.increment");
  if (train.num_classes != test.num_classes) {
    throw ConsistencyError("train has " + std::to_string(train.num_classes) +
                           " classes but test has " + std::to_string(test.num_classes));
  }
  const std::size_t num_classes = train.num_classes;
  if (base_size + increment > num_classes) {
    throw ConfigError("base + increment (" + std::to_string(base_size + increment) +
                          ") exceeds the number of classes (" + std::to_string(num_classes) + ")",
                      "scenario");
  }

  Scenario s;
  s.base_size = base_size;
  s.increment = increment;
  s.order_seed = class_order_seed;
  s.class_order.resize(num_classes);
  std::iota(s.class_order.begin(), s.class_order.end(), ClassId{0});
  if (class_order_seed) {
    SeededRng rng(*class_order_seed);
    const auto perm = rng_shuffle(rng, num_classes);
    for (std::size_t i = 0; i < num_classes; ++i) s.class_order[i] = static_cast<ClassId>(perm[i]);
  }

  std::size_t cursor = 0;
  auto take = [&](std::size_t count) {
    TaskSplit task;
    task.task_index = s.tasks.size();
    const std::size_t end = std::min(num_classes, cursor + count);
    task.class_ids.assign(s.class_order.begin() + cursor, s.class_order.begin() + end);
    std::sort(task.class_ids.begin(), task.class_ids.end());
    cursor = end;
    s.tasks.push_back(std::move(task));
  };
  if (base_size > 0) take(base_size);
  while (cursor < num_classes) take(increment);

  // Map each class to its task once, then bucket rows in a single pass.
  std::vector<std::size_t> task_of(num_classes);
  for (const auto& task : s.tasks)
    for (ClassId c : task.class_ids) task_of[c] = task.task_index;
  for (std::size_t r = 0; r < train.size(); ++r) {
    s.tasks[task_of.at(train.labels[r])].train_rows.push_back(r);
  }
  for (std::size_t r = 0; r < test.size(); ++r) {
    s.tasks[task_of.at(test.labels[r])].test_rows.push_back(r);
  }
  return s;
}

ClassSet seen_classes(const Scenario& scenario, std::size_t through_task) {
  if (through_task >= scenario.num_tasks()) {
    throw RangeError("task index " + std::to_string(through_task) + " out of range (" +
                     std::to_string(scenario.num_tasks()) + " tasks)");
  }
  ClassSet seen;
  for (std::size_t t = 0; t <= through_task; ++t) {
    const auto& ids = scenario.tasks[t].class_ids;
    seen.insert(seen.end(), ids.begin(), ids.end());
  }
  std::sort(seen.begin(), seen.end());
  return seen;
}

}  // namespace wbr
