// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "wbr/data.hpp"
#include "wbr/linalg.hpp"

namespace wbr {

/// Set of output units that take part in the softmax. Units outside the mask
/// get probability 0 and no gradient.
class ClassMask {
 public:
  ClassMask() = default;
  /// Throws RangeError when a class id is >= num_outputs.
  ClassMask(std::size_t num_outputs, std::span<const ClassId> classes);
  static ClassMask all(std::size_t num_outputs);

  bool contains(ClassId c) const noexcept { return c < flags_.size() && flags_[c]; }
  std::size_t num_outputs() const noexcept { return flags_.size(); }
  std::size_t count() const noexcept { return classes_.size(); }
  const std::vector<ClassId>& classes() const noexcept { return classes_; }

  bool operator==(const ClassMask&) const = default;

 private:
  std::vector<bool> flags_;
  std::vector<ClassId> classes_;
};

/// Fully connected ReLU network. weights[l] is (out x in) so that row k holds
/// the incoming weights of output unit k; biases[l] is 1 x out.
struct MlpModel {
  std::vector<std::size_t> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;

  /// Glorot-uniform weights from `rng`, zero biases. dims = {input, hidden..., output}.
  static MlpModel create(std::vector<std::size_t> dims, SeededRng& rng);
  static MlpModel zeros(std::vector<std::size_t> dims);

  std::size_t num_layers() const noexcept { return weights.size(); }
  std::size_t input_dim() const noexcept { return layer_dims.front(); }
  std::size_t output_dim() const noexcept { return layer_dims.back(); }
  std::size_t num_parameters() const noexcept;
  bool same_architecture(const MlpModel& other) const noexcept {
    return layer_dims == other.layer_dims;
  }
  bool operator==(const MlpModel&) const = default;
};

/// Per-parameter gradient buffers mirroring an MlpModel.
struct Gradients {
  std::vector<Matrix> d_weights;
  std::vector<Matrix> d_biases;

  static Gradients zeros_like(const MlpModel& model);

  /// Norm over every weight and bias entry jointly.
  double l2_norm() const;
  bool all_finite() const;
  bool matches(const MlpModel& model) const noexcept;
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor) noexcept;

  /// Applies `fn(double&)` to every entry.
  template <typename Fn>
  void for_each_value(Fn&& fn) {
    for (auto& m : d_weights)
      for (double& v : m.data()) fn(v);
    for (auto& m : d_biases)
      for (double& v : m.data()) fn(v);
  }

  bool operator==(const Gradients&) const = default;
};

/// Activations recorded by forward() for use by backward().
struct ForwardCache {
  std::vector<std::size_t> layer_dims;
  /// inputs[l] is the batch as seen by layer l (inputs[0] is the raw batch).
  std::vector<Matrix> inputs;
  /// Pre-activations of the hidden layers, needed for the ReLU derivative.
  std::vector<Matrix> hidden_pre_activations;
  ClassMask mask;
};

struct ForwardResult {
  Matrix logits;
  ForwardCache cache;
};

ForwardResult forward(const MlpModel& model, const Matrix& batch, const ClassMask& mask);
/// Logits only; no cache is kept.
Matrix compute_logits(const MlpModel& model, const Matrix& batch);
/// Argmax over the masked units for each row. Ties go to the lowest class id.
std::vector<ClassId> predict(const MlpModel& model, const Matrix& batch, const ClassMask& mask);

struct SoftmaxCeResult {
  /// Mean cross-entropy over the batch.
  double loss = 0.0;
  /// d loss / d logits, zero outside the mask.
  Matrix d_logits;
  /// Masked softmax probabilities, exactly zero outside the mask.
  Matrix probabilities;
  /// Probability assigned to each row's true class.
  std::vector<double> true_class_probability;
};

/// Softmax cross-entropy over the masked classes only. Throws ProtocolError if
/// a label lies outside the mask.
SoftmaxCeResult softmax_ce(const Matrix& logits, std::span<const ClassId> labels,
                           const ClassMask& mask);

/// Gradients of the loss whose logit gradient is `d_logits`. Throws ShapeError
/// when the cache does not come from a forward pass of this architecture.
Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_logits);

/// Classifier whose weight for each class is that class's mean feature.
struct PrototypeClassifier {
  Matrix centers;
  std::vector<ClassId> class_ids;

  /// Adds the rows of `other`; throws ProtocolError on a repeated class id.
  void append(const PrototypeClassifier& other);
};

/// Mean feature row of each requested class. Throws EstimationError naming
/// the first class that has no rows.
PrototypeClassifier class_centers(const Matrix& features, std::span<const ClassId> labels,
                                  std::span<const ClassId> class_ids);

/// Cosine similarity of every feature row to every center (rows x classes).
/// A pair involving a zero-norm vector scores 0.
Matrix cosine_scores(const PrototypeClassifier& proto, const Matrix& features);

/// Class id of the most cosine-similar center for each row; ties go to the
/// earlier center.
std::vector<ClassId> cosine_classify(const PrototypeClassifier& proto, const Matrix& features);

}  // namespace wbr
