// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "wbr/error.hpp"

namespace wbr {

namespace {

/// Mean CE gradient of `inputs` under `mask`.
Gradients loss_gradients(const MlpModel& model, const Matrix& inputs,
                         std::span<const ClassId> labels, const ClassMask& mask) {
  auto fwd = forward(model, inputs, mask);
  const auto ce = softmax_ce(fwd.logits, labels, mask);
  return backward(model, fwd.cache, ce.d_logits);
}

struct Evaluation {
  double seen_accuracy = 0.0;
  std::vector<double> per_task;
};

template <typename Predict>
Evaluation evaluate_stage(const Scenario& scenario, const LabeledDataset& test, std::size_t stage,
                          Predict&& predict_rows) {
  std::vector<std::size_t> rows;
  std::vector<std::size_t> task_bounds{0};
  for (std::size_t t = 0; t <= stage; ++t) {
    const auto& task_rows = scenario.tasks[t].test_rows;
    if (task_rows.empty()) {
      throw MetricError("task " + std::to_string(t) + " has no test rows");
    }
    rows.insert(rows.end(), task_rows.begin(), task_rows.end());
    task_bounds.push_back(rows.size());
  }
  const Matrix inputs = gather_rows(test.features, rows);
  std::vector<ClassId> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = test.labels[rows[i]];
  const std::vector<ClassId> predictions = predict_rows(inputs);

  Evaluation ev;
  ev.seen_accuracy = accuracy(predictions, labels);
  for (std::size_t t = 0; t <= stage; ++t) {
    const auto begin = task_bounds[t];
    const auto count = task_bounds[t + 1] - begin;
    ev.per_task.push_back(accuracy(std::span(predictions).subspan(begin, count),
                                   std::span(labels).subspan(begin, count)));
  }
  return ev;
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("must be positive", "train.lr");
  if (epochs_per_task < 1) throw ConfigError("must be at least 1", "train.epochs");
  if (batch_size < 1) throw ConfigError("must be at least 1", "train.batch_size");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("must lie in [0, 1)", "train.momentum");
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  auto clip_json = [](const ClipPolicy& p) -> nlohmann::json {
    if (!p.enabled()) return nullptr;
    return {{"mode", std::string(to_string(p.mode()))}, {"threshold", *p.threshold()}};
  };
  return {{"lr", cfg.lr},
          {"epochs", cfg.epochs_per_task},
          {"batch_size", cfg.batch_size},
          {"momentum", cfg.momentum},
          {"alpha", clip_json(cfg.clip_new)},
          {"beta", clip_json(cfg.clip_memory)},
          {"importance", std::string(to_string(cfg.importance_mode))},
          {"seed", cfg.seed},
          {"replay", cfg.replay_enabled},
          {"joint_loss", cfg.joint_loss}};
}

void wbr_train_task(MlpModel& model, const LabeledDataset& train, const TaskSplit& task,
                    const ClassMask& mask, const MemoryStore& store, const TrainConfig& cfg,
                    SgdState& state, SeededRng& shuffle_rng) {
  cfg.validate();
  for (const auto& v : store.vectors()) {
    if (task.contains(v.class_id)) {
      throw ProtocolError("memory holds class " + std::to_string(v.class_id) +
                          " of the task being trained");
    }
  }
  const MemoryBatch memory = cfg.replay_enabled ? store.batch() : MemoryBatch{};
  const std::size_t n = task.train_rows.size();
  std::vector<std::size_t> rows;
  std::vector<ClassId> labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
    const auto perm = rng_shuffle(shuffle_rng, n);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      rows.clear();
      labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t r = task.train_rows[perm[i]];
        // Only the current task's raw samples may reach a gradient step.
        if (!task.contains(train.labels[r])) {
          throw ProtocolError("row " + std::to_string(r) + " with label " +
                              std::to_string(train.labels[r]) + " is not part of task " +
                              std::to_string(task.task_index));
        }
        rows.push_back(r);
        labels.push_back(train.labels[r]);
      }
      const Matrix inputs = gather_rows(train.features, rows);

      Gradients g_new = loss_gradients(model, inputs, labels, mask);
      clip_inplace(g_new, cfg.clip_new);
      if (memory.empty()) {
        sgd_step(model, g_new, state);
        continue;
      }
      if (cfg.joint_loss) {
        Gradients g_mem = loss_gradients(model, memory.inputs, memory.labels, mask);
        clip_inplace(g_mem, cfg.clip_memory);
        g_new += g_mem;
        sgd_step(model, g_new, state);
      } else {
        sgd_step(model, g_new, state);
        Gradients g_mem = loss_gradients(model, memory.inputs, memory.labels, mask);
        clip_inplace(g_mem, cfg.clip_memory);
        sgd_step(model, g_mem, state);
      }
    }
  }
}

WeightDelta weight_delta_probe(const MlpModel& before, const MlpModel& after) {
  if (!before.same_architecture(after) || before.num_layers() != after.num_layers()) {
    throw ShapeError("weight_delta_probe needs models of the same architecture");
  }
  WeightDelta delta;
  for (std::size_t l = 0; l < before.num_layers(); ++l) {
    const Matrix dw = after.weights[l] - before.weights[l];
    LayerDelta layer;
    layer.weight_norm = l2_norm(dw);
    layer.bias_norm = l2_norm(after.biases[l] - before.biases[l]);
    layer.row_norms.resize(dw.rows());
    for (std::size_t r = 0; r < dw.rows(); ++r) layer.row_norms[r] = l2_norm(dw.row(r));
    delta.layers.push_back(std::move(layer));
  }
  return delta;
}

std::optional<double> RowDeltaBalance::ratio() const {
  if (!old_mean || *old_mean == 0.0) return std::nullopt;
  return new_mean / *old_mean;
}

RowDeltaBalance row_delta_balance(const WeightDelta& delta, std::span<const ClassId> new_classes,
                                  std::span<const ClassId> old_classes) {
  const auto& rows = delta.class_row_norms();
  auto mean_of = [&rows](std::span<const ClassId> ids) {
    double sum = 0.0;
    for (ClassId c : ids) sum += rows.at(c);
    return sum / static_cast<double>(ids.size());
  };
  if (new_classes.empty()) throw ProtocolError("row_delta_balance needs at least one new class");
  RowDeltaBalance b;
  b.new_mean = mean_of(new_classes);
  if (!old_classes.empty()) b.old_mean = mean_of(old_classes);
  return b;
}

ScenarioSummary summarize(const Scenario& scenario) {
  return {scenario.class_order, scenario.base_size, scenario.increment, scenario.num_tasks()};
}

std::vector<StageRow> RunRecord::stage_rows() const {
  std::vector<StageRow> rows;
  for (std::size_t b = 0; b < metrics.num_stages(); ++b) {
    rows.push_back({b + 1, metrics.stage_accuracy[b], metrics.new_task_accuracy[b],
                    seen_classes.at(b), b < wall_ms.size() ? wall_ms[b] : 0.0});
  }
  return rows;
}

MlpModel make_model(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  SeededRng rng(seed);
  return MlpModel::create(dims, rng);
}

RunOutput run_continual(MlpModel model, const Scenario& scenario, const LabeledDataset& train,
                        const LabeledDataset& test, const TrainConfig& cfg,
                        const TaskObserver& observer) {
  cfg.validate();
  if (model.output_dim() < scenario.num_classes()) {
    throw ShapeError("model has " + std::to_string(model.output_dim()) + " outputs for " +
                     std::to_string(scenario.num_classes()) + " scenario classes");
  }
  if (model.input_dim() != train.dim() || model.input_dim() != test.dim()) {
    throw ShapeError("model input dim " + std::to_string(model.input_dim()) +
                     " does not match dataset dim " + std::to_string(train.dim()));
  }

  RunOutput out{RunRecord{}, std::move(model), MemoryStore(cfg.importance_mode)};
  MlpModel& net = out.model;
  RunRecord& record = out.record;
  record.method = cfg.replay_enabled ? "wbr" : "finetune";
  record.scenario = summarize(scenario);
  record.layer_dims = net.layer_dims;
  record.num_parameters = net.num_parameters();

  SgdState state(cfg.lr, cfg.momentum, net);
  SeededRng shuffle_rng = SeededRng(cfg.seed).fork();

  for (std::size_t b = 0; b < scenario.num_tasks(); ++b) {
    const TaskSplit& task = scenario.tasks[b];
    const ClassSet seen = seen_classes(scenario, b);
    const ClassMask mask(net.output_dim(), seen);
    const MlpModel before = net;
    const auto started = std::chrono::steady_clock::now();

    wbr_train_task(net, train, task, mask, out.store, cfg, state, shuffle_rng);

    if (cfg.replay_enabled) {
      const LabeledDataset task_data = train.subset(task.train_rows);
      auto vectors = cfg.importance_mode == ImportanceMode::kConfidence
                         ? build_memory_confidence(task_data, task.class_ids, net, mask, b)
                         : build_memory_average(task_data, task.class_ids, b);
      out.store.append(std::move(vectors));
    }
    record.wall_ms.push_back(elapsed_ms(started));

    std::vector<ClassId> previous;
    std::set_difference(seen.begin(), seen.end(), task.class_ids.begin(), task.class_ids.end(),
                        std::back_inserter(previous));
    record.balance.push_back(
        row_delta_balance(weight_delta_probe(before, net), task.class_ids, previous));
    if (observer) observer(b, before, net);

    const Evaluation ev = evaluate_stage(scenario, test, b, [&](const Matrix& inputs) {
      return predict(net, inputs, mask);
    });
    record.metrics.add_stage(ev.seen_accuracy, ev.per_task.back(), ev.per_task);
    record.seen_classes.push_back(seen.size());
  }
  record.memory_vectors = out.store.size();
  record.config = {{"train", to_json(cfg)}};
  return out;
}

RunRecord simplecil_run(const LabeledDataset& train, const LabeledDataset& test,
                        const Scenario& scenario) {
  RunRecord record;
  record.method = "simplecil";
  record.scenario = summarize(scenario);
  record.layer_dims = {train.dim()};
  PrototypeClassifier proto;
  for (std::size_t b = 0; b < scenario.num_tasks(); ++b) {
    const TaskSplit& task = scenario.tasks[b];
    const auto started = std::chrono::steady_clock::now();
    const LabeledDataset task_data = train.subset(task.train_rows);
    proto.append(class_centers(task_data.features, task_data.labels, task.class_ids));
    record.wall_ms.push_back(elapsed_ms(started));

    const Evaluation ev = evaluate_stage(scenario, test, b, [&](const Matrix& inputs) {
      return cosine_classify(proto, inputs);
    });
    record.metrics.add_stage(ev.seen_accuracy, ev.per_task.back(), ev.per_task);
    record.seen_classes.push_back(proto.class_ids.size());
  }
  record.num_parameters = proto.centers.size();
  return record;
}

}  // namespace wbr
