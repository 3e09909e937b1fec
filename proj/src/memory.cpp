// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/memory.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <spdlog/spdlog.h>

#include "wbr/error.hpp"

namespace wbr {

namespace {

std::vector<std::size_t> rows_of_class(const LabeledDataset& data, ClassId c) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (data.labels[r] == c) rows.push_back(r);
  if (rows.empty()) throw EstimationError("class " + std::to_string(c) + " has no samples");
  return rows;
}

Matrix weighted_row_sum(const Matrix& features, std::span<const std::size_t> rows,
                        std::span<const double> weights) {
  Matrix out(1, features.cols());
  auto acc = out.row(0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto x = features.row(rows[i]);
    for (std::size_t c = 0; c < x.size(); ++c) acc[c] += weights[i] * x[c];
  }
  return out;
}

}  // namespace

std::string_view to_string(ImportanceMode mode) noexcept {
  return mode == ImportanceMode::kConfidence ? "confidence" : "average";
}

ImportanceMode parse_importance_mode(std::string_view text) {
  if (text == "average") return ImportanceMode::kAverage;
  if (text == "confidence") return ImportanceMode::kConfidence;
  throw ConfigError("unknown importance mode '" + std::string(text) +
                    "' (expected average or confidence)");
}

std::size_t MemoryStore::dim() const noexcept {
  return vectors_.empty() ? 0 : vectors_.front().vector.cols();
}

bool MemoryStore::contains(ClassId c) const noexcept {
  return std::any_of(vectors_.begin(), vectors_.end(),
                     [c](const MemoryVector& v) { return v.class_id == c; });
}

void MemoryStore::append(std::vector<MemoryVector> vectors) {
  std::set<ClassId> incoming;
  const std::size_t width = empty() ? (vectors.empty() ? 0 : vectors.front().vector.cols()) : dim();
  for (const auto& v : vectors) {
    if (v.vector.rows() != 1 || v.vector.cols() != width) {
      throw ShapeError("memory vector for class " + std::to_string(v.class_id) + " is " +
                       v.vector.shape_string() + ", expected 1x" + std::to_string(width));
    }
    if (!all_finite(v.vector)) {
      throw NumericError("memory vector for class " + std::to_string(v.class_id) +
                         " has non-finite entries");
    }
    if (contains(v.class_id) || !incoming.insert(v.class_id).second) {
      throw ProtocolError("class " + std::to_string(v.class_id) + " is already in memory");
    }
  }
  for (auto& v : vectors) vectors_.push_back(std::move(v));
}

MemoryBatch MemoryStore::batch() const {
  MemoryBatch b;
  std::vector<double> data;
  data.reserve(size() * dim());
  for (const auto& v : vectors_) {
    data.insert(data.end(), v.vector.data().begin(), v.vector.data().end());
    b.labels.push_back(v.class_id);
  }
  b.inputs = Matrix(size(), dim(), std::move(data));
  return b;
}

void MemoryStore::save(const std::filesystem::path& path, std::uint32_t num_classes) const {
  LabeledDataset ds;
  const MemoryBatch b = batch();
  ds.features = b.inputs;
  ds.labels = b.labels;
  ds.num_classes = num_classes;
  write_feature_file(path, ds);
}

MemoryStore MemoryStore::load(const std::filesystem::path& path, ImportanceMode mode) {
  const LabeledDataset ds = load_feature_file(path);
  std::vector<MemoryVector> vectors;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    vectors.push_back({ds.labels[r], Matrix::row_vector(ds.features.row(r)),
                       MemoryVector::kUnknownTask});
  }
  MemoryStore store(mode);
  store.append(std::move(vectors));
  return store;
}

std::vector<MemoryVector> build_memory_average(const LabeledDataset& task_data,
                                               std::span<const ClassId> class_ids,
                                               std::size_t source_task) {
  std::vector<MemoryVector> out;
  for (ClassId c : class_ids) {
    const auto rows = rows_of_class(task_data, c);
    const std::vector<double> ones(rows.size(), 1.0);
    Matrix mean = weighted_row_sum(task_data.features, rows, ones);
    mean *= 1.0 / static_cast<double>(rows.size());
    out.push_back({c, std::move(mean), source_task});
  }
  return out;
}

std::optional<std::vector<double>> confidence_weights(std::span<const double> true_class_prob) {
  std::vector<double> w(true_class_prob.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::max(0.0, 1.0 - true_class_prob[i]);
    total += w[i];
  }
  if (!(total > 0.0)) return std::nullopt;
  for (double& v : w) v /= total;
  return w;
}

std::vector<MemoryVector> build_memory_confidence(const LabeledDataset& task_data,
                                                  std::span<const ClassId> class_ids,
                                                  const MlpModel& model, const ClassMask& mask,
                                                  std::size_t source_task) {
  std::vector<MemoryVector> out;
  for (ClassId c : class_ids) {
    const auto rows = rows_of_class(task_data, c);
    const Matrix inputs = gather_rows(task_data.features, rows);
    const std::vector<ClassId> labels(rows.size(), c);
    const auto ce = softmax_ce(compute_logits(model, inputs), labels, mask);
    auto weights = confidence_weights(ce.true_class_probability);
    if (!weights) {
      spdlog::info("class {}: every sample has confidence 1, using the plain average", c);
      weights = std::vector<double>(rows.size(), 1.0 / static_cast<double>(rows.size()));
    }
    out.push_back({c, weighted_row_sum(task_data.features, rows, *weights), source_task});
  }
  return out;
}

SampleDims SampleDims::parse(std::string_view text) {
  SampleDims dims;
  std::size_t* fields[] = {&dims.height, &dims.width, &dims.channels};
  std::size_t index = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (index < 3) {
    const auto [next, ec] = std::from_chars(p, end, *fields[index]);
    if (ec != std::errc{} || *fields[index] == 0) {
      throw ConfigError("sample dims must look like HxWxC with positive integers, got '" +
                        std::string(text) + "'");
    }
    p = next;
    ++index;
    if (index < 3) {
      if (p == end || *p != 'x') {
        throw ConfigError("sample dims must look like HxWxC, got '" + std::string(text) + "'");
      }
      ++p;
    }
  }
  if (p != end) throw ConfigError("trailing characters in sample dims '" + std::string(text) + "'");
  return dims;
}

double memory_footprint_in_samples(std::size_t num_vectors, std::size_t vector_dim,
                                   const SampleDims& sample) {
  if (sample.volume() == 0) throw ConfigError("sample dims must be positive");
  return static_cast<double>(num_vectors * vector_dim) / static_cast<double>(sample.volume());
}

double memory_footprint_in_samples(const MemoryStore& store, const SampleDims& sample) {
  return memory_footprint_in_samples(store.size(), store.dim(), sample);
}

}  // namespace wbr
