// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "wbr/data.hpp"

namespace wbr {

/// Top-1 accuracy in percent. Throws MetricError on empty input, ShapeError on
/// a length mismatch.
double accuracy(std::span<const ClassId> predictions, std::span<const ClassId> labels);

/// Arithmetic mean of per-stage accuracies. Throws MetricError when empty.
double average_accuracy(std::span<const double> stage_accuracy);

/// Accuracy bookkeeping over the stages of one run (all values in percent).
struct MetricsMatrix {
  /// A_b after each stage, over the test rows of every class seen so far.
  std::vector<double> stage_accuracy;
  /// Accuracy on the test rows of the task just learned.
  std::vector<double> new_task_accuracy;
  /// per_task[b][t], t <= b: accuracy on task t's test rows after stage b.
  std::vector<std::vector<double>> per_task;

  /// Appends one stage. per_task_row must have exactly num_stages() + 1 entries.
  void add_stage(double stage_acc, double new_task_acc, std::vector<double> per_task_row);

  std::size_t num_stages() const noexcept { return stage_accuracy.size(); }
  /// A_B.
  double final_accuracy() const;
  /// Mean of A_1..A_B.
  double average() const { return average_accuracy(stage_accuracy); }

  bool operator==(const MetricsMatrix&) const = default;
};

/// One line of the per-stage CSV.
struct StageRow {
  std::size_t stage = 0;
  double accuracy = 0.0;
  double new_task_accuracy = 0.0;
  std::size_t seen_classes = 0;
  double wall_ms = 0.0;
};

/// Header `stage,A_b,new_task_acc,seen_classes,wall_ms`, stages numbered from 1.
void write_stage_csv(std::ostream& out, std::span<const StageRow> rows);

/// Two-decimal rendering used in every report.
std::string format_percent(double value);

}  // namespace wbr
