// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbr/memory.hpp"
#include "wbr/metrics.hpp"
#include "wbr/model.hpp"
#include "wbr/optim.hpp"
#include "wbr/scenario.hpp"

namespace wbr {

/// Hyperparameters of one continual-learning run.
struct TrainConfig {
  double lr = 0.01;
  std::size_t epochs_per_task = 10;
  std::size_t batch_size = 16;
  double momentum = 0.0;
  /// Limit on new-task gradient steps (alpha).
  ClipPolicy clip_new;
  /// Limit on memory replay gradient steps (beta).
  ClipPolicy clip_memory;
  ImportanceMode importance_mode = ImportanceMode::kAverage;
  std::uint64_t seed = 0;
  /// false turns the loop into the finetune baseline.
  bool replay_enabled = true;
  /// Sum the two clipped gradients into one step instead of stepping twice.
  bool joint_loss = false;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);

/// Trains on one task. For every shuffled batch of the task's rows: a clipped
/// SGD step on the batch, then (when the store is non-empty and replay is on)
/// a clipped SGD step on the whole memory batch. Both use `mask`.
/// Throws ProtocolError if the store holds a class of the current task or a
/// batch row carries a label outside the task.
void wbr_train_task(MlpModel& model, const LabeledDataset& train, const TaskSplit& task,
                    const ClassMask& mask, const MemoryStore& store, const TrainConfig& cfg,
                    SgdState& state, SeededRng& shuffle_rng);

/// Change between two models of the same architecture.
struct LayerDelta {
  double weight_norm = 0.0;
  double bias_norm = 0.0;
  /// L2 norm of each weight row (one row per output unit of the layer).
  std::vector<double> row_norms;
};

struct WeightDelta {
  std::vector<LayerDelta> layers;

  /// Row deltas of the output layer, indexed by class id.
  const std::vector<double>& class_row_norms() const { return layers.back().row_norms; }
};

/// Throws ShapeError when the architectures differ.
WeightDelta weight_delta_probe(const MlpModel& before, const MlpModel& after);

/// Mean output-row delta of the classes just introduced against the mean over
/// classes from earlier tasks.
struct RowDeltaBalance {
  double new_mean = 0.0;
  /// Empty when there are no earlier classes.
  std::optional<double> old_mean;

  /// new_mean / old_mean; empty without earlier classes or when old_mean is 0.
  std::optional<double> ratio() const;
};

RowDeltaBalance row_delta_balance(const WeightDelta& delta, std::span<const ClassId> new_classes,
                                  std::span<const ClassId> old_classes);

struct ScenarioSummary {
  std::vector<ClassId> class_order;
  std::size_t base_size = 0;
  std::size_t increment = 0;
  std::size_t num_tasks = 0;

  bool operator==(const ScenarioSummary&) const = default;
};

ScenarioSummary summarize(const Scenario& scenario);

/// Everything recorded about one run.
struct RunRecord {
  std::string method;
  MetricsMatrix metrics;
  /// Number of classes seen after each stage.
  std::vector<std::size_t> seen_classes;
  /// Wall-clock time of each task, training plus memory construction.
  std::vector<double> wall_ms;
  /// Output-layer row-delta balance for each stage (empty for SimpleCIL).
  std::vector<RowDeltaBalance> balance;
  std::vector<std::size_t> layer_dims;
  std::size_t num_parameters = 0;
  std::size_t memory_vectors = 0;
  ScenarioSummary scenario;
  /// Echo of the configuration that produced the run.
  nlohmann::json config;

  std::vector<StageRow> stage_rows() const;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

/// Final model and memory of a run, kept for checkpointing.
struct RunOutput {
  RunRecord record;
  MlpModel model;
  MemoryStore store;
};

/// Called after every task with the stage index and the model before/after it.
using TaskObserver =
    std::function<void(std::size_t stage, const MlpModel& before, const MlpModel& after)>;

/// Sequentially trains every task of `scenario`, building memory vectors for
/// each task's classes after its training loop, and evaluates after each
/// stage over the test rows of all seen classes.
RunOutput run_continual(MlpModel model, const Scenario& scenario, const LabeledDataset& train,
                        const LabeledDataset& test, const TrainConfig& cfg,
                        const TaskObserver& observer = {});

/// Glorot-initialized network for `cfg.seed`. The shuffle stream used by
/// run_continual is a jumped copy of the same generator, so the two never overlap.
MlpModel make_model(const std::vector<std::size_t>& dims, std::uint64_t seed);

/// Training-free baseline: each class is represented by its mean training
/// feature and test rows are assigned to the most cosine-similar center.
RunRecord simplecil_run(const LabeledDataset& train, const LabeledDataset& test,
                        const Scenario& scenario);

/// Binary model checkpoint, little-endian:
///   "WBRM" | u32 version (1) | u32 layer-dim count L | L x u64 dims |
///   for each layer: weights (out x in, f64 row-major) then biases (out, f64).
void write_model_checkpoint(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_model_checkpoint(const std::filesystem::path& path);

}  // namespace wbr
