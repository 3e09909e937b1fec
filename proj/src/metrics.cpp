// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/metrics.hpp"

#include <fmt/format.h>

#include "wbr/error.hpp"

namespace wbr {

double accuracy(std::span<const ClassId> predictions, std::span<const ClassId> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError(std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw MetricError("accuracy of an empty set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

double average_accuracy(std::span<const double> stage_accuracy) {
  if (stage_accuracy.empty()) throw MetricError("average accuracy of zero stages is undefined");
  double sum = 0.0;
  for (double a : stage_accuracy) sum += a;
  return sum / static_cast<double>(stage_accuracy.size());
}

void MetricsMatrix::add_stage(double stage_acc, double new_task_acc,
                              std::vector<double> per_task_row) {
  if (per_task_row.size() != num_stages() + 1) {
    throw ShapeError("stage " + std::to_string(num_stages() + 1) + " needs " +
                     std::to_string(num_stages() + 1) + " per-task entries, got " +
                     std::to_string(per_task_row.size()));
  }
  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  if (!in_range(stage_acc) || !in_range(new_task_acc)) {
    throw MetricError("accuracy outside [0, 100]");
  }
  for (double v : per_task_row)
    if (!in_range(v)) throw MetricError("accuracy outside [0, 100]");
  stage_accuracy.push_back(stage_acc);
  new_task_accuracy.push_back(new_task_acc);
  per_task.push_back(std::move(per_task_row));
}

double MetricsMatrix::final_accuracy() const {
  if (stage_accuracy.empty()) throw MetricError("no stages recorded");
  return stage_accuracy.back();
}

void write_stage_csv(std::ostream& out, std::span<const StageRow> rows) {
  out << "stage,A_b,new_task_acc,seen_classes,wall_ms\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{:.3f}\n", r.stage, format_percent(r.accuracy),
                       format_percent(r.new_task_accuracy), r.seen_classes, r.wall_ms);
  }
}

std::string format_percent(double value) { return fmt::format("{:.2f}", value); }

}  // namespace wbr
