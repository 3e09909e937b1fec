// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "wbr/data.hpp"
#include "wbr/model.hpp"

namespace wbr {

/// How per-sample contributions are weighted when a class is collapsed into
/// its memory vector.
enum class ImportanceMode {
  /// Plain mean of the class's inputs.
  kAverage,
  /// Weight 1 - p(true class) under the post-task model, normalized to sum 1.
  kConfidence,
};

std::string_view to_string(ImportanceMode mode) noexcept;
/// Accepts "average" and "confidence".
ImportanceMode parse_importance_mode(std::string_view text);

/// Single replay vector standing in for every training sample of one class.
struct MemoryVector {
  static constexpr std::size_t kUnknownTask = static_cast<std::size_t>(-1);

  ClassId class_id = 0;
  /// 1 x dim row in model-input space.
  Matrix vector;
  std::size_t source_task = kUnknownTask;
};

/// Replay inputs and their labels as one batch.
struct MemoryBatch {
  Matrix inputs;
  std::vector<ClassId> labels;

  bool empty() const noexcept { return labels.empty(); }
};

/// At most one memory vector per class, in insertion order.
class MemoryStore {
 public:
  explicit MemoryStore(ImportanceMode mode = ImportanceMode::kAverage) : mode_(mode) {}

  ImportanceMode importance_mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  bool empty() const noexcept { return vectors_.empty(); }
  /// Width of the stored vectors; 0 for an empty store.
  std::size_t dim() const noexcept;
  bool contains(ClassId c) const noexcept;
  const std::vector<MemoryVector>& vectors() const noexcept { return vectors_; }

  /// Throws ProtocolError on a class that is already stored (including
  /// duplicates within `vectors`), ShapeError on a width mismatch. The store
  /// is unchanged when it throws.
  void append(std::vector<MemoryVector> vectors);

  /// All stored vectors as one batch, in insertion order.
  MemoryBatch batch() const;

  /// Writes the store as a WBRF file: vectors as rows, class ids as labels.
  void save(const std::filesystem::path& path, std::uint32_t num_classes) const;
  /// Inverse of save(); source_task is not persisted and reads back as unknown.
  static MemoryStore load(const std::filesystem::path& path,
                          ImportanceMode mode = ImportanceMode::kAverage);

 private:
  ImportanceMode mode_;
  std::vector<MemoryVector> vectors_;
};

/// Per-class mean of `task_data` rows, one vector per entry of `class_ids`.
/// Throws EstimationError when a class has no rows.
std::vector<MemoryVector> build_memory_average(const LabeledDataset& task_data,
                                               std::span<const ClassId> class_ids,
                                               std::size_t source_task = 0);

/// Normalized weights 1 - p_i; empty when every p_i is 1 (all weights zero).
std::optional<std::vector<double>> confidence_weights(std::span<const double> true_class_prob);

/// Per-class confidence-weighted mean. `mask` is the softmax mask the model was
/// trained under. Falls back to the plain mean, with a logged notice, for a
/// class whose samples are all predicted with probability 1.
std::vector<MemoryVector> build_memory_confidence(const LabeledDataset& task_data,
                                                  std::span<const ClassId> class_ids,
                                                  const MlpModel& model, const ClassMask& mask,
                                                  std::size_t source_task = 0);

/// Image shape used to express memory size in units of raw samples.
struct SampleDims {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t volume() const noexcept { return height * width * channels; }
  /// Parses "HxWxC", e.g. "32x32x3". Throws ConfigError on malformed input.
  static SampleDims parse(std::string_view text);
};

/// (num_vectors * vector_dim) / (h * w * c).
double memory_footprint_in_samples(std::size_t num_vectors, std::size_t vector_dim,
                                   const SampleDims& sample);
double memory_footprint_in_samples(const MemoryStore& store, const SampleDims& sample);

}  // namespace wbr
