// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wbr/error.hpp"

namespace wbr {

namespace {

void add_bias_rows(Matrix& m, const Matrix& bias) {
  const auto b = bias.row(0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
}

void relu_inplace(Matrix& m) {
  for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
}

void check_model(const MlpModel& model) {
  if (model.layer_dims.size() < 2 || model.weights.size() + 1 != model.layer_dims.size() ||
      model.biases.size() != model.weights.size()) {
    throw ShapeError("malformed model: " + std::to_string(model.layer_dims.size()) +
                     " layer dims for " + std::to_string(model.weights.size()) + " layers");
  }
}

}  // namespace

ClassMask::ClassMask(std::size_t num_outputs, std::span<const ClassId> classes)
    : flags_(num_outputs, false) {
  for (ClassId c : classes) {
    if (c >= num_outputs) {
      throw RangeError("class " + std::to_string(c) + " outside " + std::to_string(num_outputs) +
                       " outputs");
    }
    flags_[c] = true;
  }
  for (std::size_t c = 0; c < num_outputs; ++c)
    if (flags_[c]) classes_.push_back(static_cast<ClassId>(c));
}

ClassMask ClassMask::all(std::size_t num_outputs) {
  std::vector<ClassId> ids(num_outputs);
  for (std::size_t c = 0; c < num_outputs; ++c) ids[c] = static_cast<ClassId>(c);
  return ClassMask(num_outputs, ids);
}

MlpModel MlpModel::zeros(std::vector<std::size_t> dims) {
  if (dims.size() < 2) throw ShapeError("a model needs at least input and output dims");
  MlpModel m;
  m.layer_dims = std::move(dims);
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    m.weights.emplace_back(m.layer_dims[l + 1], m.layer_dims[l]);
    m.biases.emplace_back(1, m.layer_dims[l + 1]);
  }
  return m;
}

MlpModel MlpModel::create(std::vector<std::size_t> dims, SeededRng& rng) {
  MlpModel m = zeros(std::move(dims));
  for (auto& w : m.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
  }
  return m;
}

std::size_t MlpModel::num_parameters() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.d_weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.d_biases.emplace_back(1, model.biases[l].cols());
  }
  return g;
}

double Gradients::l2_norm() const {
  double acc = 0.0;
  for (const auto& m : d_weights) acc += sum_of_squares(m.data());
  for (const auto& m : d_biases) acc += sum_of_squares(m.data());
  return std::sqrt(acc);
}

bool Gradients::all_finite() const {
  return std::all_of(d_weights.begin(), d_weights.end(),
                     [](const Matrix& m) { return wbr::all_finite(m); }) &&
         std::all_of(d_biases.begin(), d_biases.end(),
                     [](const Matrix& m) { return wbr::all_finite(m); });
}

bool Gradients::matches(const MlpModel& model) const noexcept {
  if (d_weights.size() != model.num_layers() || d_biases.size() != model.num_layers()) {
    return false;
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    if (!d_weights[l].same_shape(model.weights[l]) || !d_biases[l].same_shape(model.biases[l])) {
      return false;
    }
  }
  return true;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.d_weights.size() != d_weights.size()) {
    throw ShapeError("gradient layer counts differ");
  }
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += other.d_weights[l];
    d_biases[l] += other.d_biases[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double factor) noexcept {
  for_each_value([factor](double& v) { v *= factor; });
  return *this;
}

ForwardResult forward(const MlpModel& model, const Matrix& batch, const ClassMask& mask) {
  check_model(model);
  if (batch.cols() != model.input_dim()) {
    throw ShapeError("batch is " + batch.shape_string() + " but model input dim is " +
                     std::to_string(model.input_dim()));
  }
  if (mask.num_outputs() != model.output_dim()) {
    throw ShapeError("mask covers " + std::to_string(mask.num_outputs()) +
                     " outputs, model has " + std::to_string(model.output_dim()));
  }
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.layer_dims = model.layer_dims;
  cache.mask = mask;
  cache.inputs.reserve(model.num_layers());
  cache.inputs.push_back(batch);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = matmul_transposed_b(cache.inputs[l], model.weights[l]);
    add_bias_rows(z, model.biases[l]);
    if (l + 1 == model.num_layers()) {
      result.logits = std::move(z);
    } else {
      cache.hidden_pre_activations.push_back(z);
      relu_inplace(z);
      cache.inputs.push_back(std::move(z));
    }
  }
  return result;
}

Matrix compute_logits(const MlpModel& model, const Matrix& batch) {
  check_model(model);
  if (batch.cols() != model.input_dim()) {
    throw ShapeError("batch is " + batch.shape_string() + " but model input dim is " +
                     std::to_string(model.input_dim()));
  }
  Matrix a = batch;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = matmul_transposed_b(a, model.weights[l]);
    add_bias_rows(z, model.biases[l]);
    if (l + 1 < model.num_layers()) relu_inplace(z);
    a = std::move(z);
  }
  return a;
}

std::vector<ClassId> predict(const MlpModel& model, const Matrix& batch, const ClassMask& mask) {
  if (mask.count() == 0) throw ProtocolError("cannot predict with an empty class mask");
  const Matrix logits = compute_logits(model, batch);
  std::vector<ClassId> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    ClassId best = mask.classes().front();
    for (ClassId c : mask.classes())
      if (row[c] > row[best]) best = c;
    out[r] = best;
  }
  return out;
}

SoftmaxCeResult softmax_ce(const Matrix& logits, std::span<const ClassId> labels,
                           const ClassMask& mask) {
  if (logits.rows() != labels.size()) {
    throw ShapeError("logits are " + logits.shape_string() + " but there are " +
                     std::to_string(labels.size()) + " labels");
  }
  if (logits.cols() != mask.num_outputs()) {
    throw ShapeError("logits are " + logits.shape_string() + " but mask covers " +
                     std::to_string(mask.num_outputs()) + " outputs");
  }
  if (labels.empty()) throw ShapeError("softmax_ce on an empty batch");

  const std::size_t n = logits.rows();
  SoftmaxCeResult out;
  out.probabilities = Matrix(n, logits.cols());
  out.d_logits = Matrix(n, logits.cols());
  out.true_class_probability.resize(n);
  const double inv_n = 1.0 / static_cast<double>(n);

  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const ClassId y = labels[r];
    if (!mask.contains(y)) {
      throw ProtocolError("label " + std::to_string(y) + " at row " + std::to_string(r) +
                          " is outside the class mask");
    }
    const auto z = logits.row(r);
    double max_z = -std::numeric_limits<double>::infinity();
    for (ClassId c : mask.classes()) max_z = std::max(max_z, z[c]);
    double denom = 0.0;
    for (ClassId c : mask.classes()) denom += std::exp(z[c] - max_z);
    const double log_denom = std::log(denom);

    auto p = out.probabilities.row(r);
    auto d = out.d_logits.row(r);
    for (ClassId c : mask.classes()) {
      p[c] = std::exp(z[c] - max_z - log_denom);
      d[c] = p[c] * inv_n;
    }
    d[y] -= inv_n;
    out.true_class_probability[r] = p[y];
    total += log_denom - (z[y] - max_z);
  }
  out.loss = total * inv_n;
  return out;
}

Gradients backward(const MlpModel& model, const ForwardCache& cache, const Matrix& d_logits) {
  check_model(model);
  if (cache.layer_dims != model.layer_dims || cache.inputs.size() != model.num_layers() ||
      cache.hidden_pre_activations.size() + 1 != model.num_layers()) {
    throw ShapeError("forward cache does not belong to this model architecture");
  }
  const std::size_t n = cache.inputs.front().rows();
  if (d_logits.rows() != n || d_logits.cols() != model.output_dim()) {
    throw ShapeError("d_logits is " + d_logits.shape_string() + ", expected " +
                     std::to_string(n) + "x" + std::to_string(model.output_dim()));
  }

  Gradients grads;
  grads.d_weights.resize(model.num_layers());
  grads.d_biases.resize(model.num_layers());
  Matrix delta = d_logits;
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    // dW = delta^T a, db = column sums of delta.
    grads.d_weights[l] = matmul_transposed_a(delta, cache.inputs[l]);
    Matrix db(1, delta.cols());
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db(0, c) += row[c];
    }
    grads.d_biases[l] = std::move(db);
    if (l == 0) break;
    Matrix upstream = matmul(delta, model.weights[l]);
    const Matrix& z = cache.hidden_pre_activations[l - 1];
    auto u = upstream.data();
    const auto zd = z.data();
    for (std::size_t i = 0; i < u.size(); ++i)
      if (zd[i] <= 0.0) u[i] = 0.0;
    delta = std::move(upstream);
  }
  return grads;
}

void PrototypeClassifier::append(const PrototypeClassifier& other) {
  if (!centers.empty() && other.centers.cols() != centers.cols()) {
    throw ShapeError("center dims differ: " + centers.shape_string() + " vs " +
                     other.centers.shape_string());
  }
  for (ClassId c : other.class_ids) {
    if (std::find(class_ids.begin(), class_ids.end(), c) != class_ids.end()) {
      throw ProtocolError("class " + std::to_string(c) + " already has a center");
    }
  }
  const std::size_t dim = centers.empty() ? other.centers.cols() : centers.cols();
  std::vector<double> merged(centers.data().begin(), centers.data().end());
  merged.insert(merged.end(), other.centers.data().begin(), other.centers.data().end());
  centers = Matrix(centers.rows() + other.centers.rows(), dim, std::move(merged));
  class_ids.insert(class_ids.end(), other.class_ids.begin(), other.class_ids.end());
}

PrototypeClassifier class_centers(const Matrix& features, std::span<const ClassId> labels,
                                  std::span<const ClassId> class_ids) {
  if (features.rows() != labels.size()) {
    throw ShapeError("features are " + features.shape_string() + " but there are " +
                     std::to_string(labels.size()) + " labels");
  }
  PrototypeClassifier proto;
  proto.class_ids.assign(class_ids.begin(), class_ids.end());
  proto.centers = Matrix(class_ids.size(), features.cols());
  for (std::size_t k = 0; k < class_ids.size(); ++k) {
    auto center = proto.centers.row(k);
    std::size_t count = 0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
      if (labels[r] != class_ids[k]) continue;
      const auto row = features.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) center[c] += row[c];
      ++count;
    }
    if (count == 0) {
      throw EstimationError("class " + std::to_string(class_ids[k]) + " has no samples");
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double& v : center) v *= inv;
  }
  return proto;
}

Matrix cosine_scores(const PrototypeClassifier& proto, const Matrix& features) {
  if (features.cols() != proto.centers.cols()) {
    throw ShapeError("features are " + features.shape_string() + " but centers are " +
                     proto.centers.shape_string());
  }
  std::vector<double> center_norms(proto.centers.rows());
  for (std::size_t k = 0; k < center_norms.size(); ++k)
    center_norms[k] = l2_norm(proto.centers.row(k));

  Matrix scores(features.rows(), proto.centers.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    const auto x = features.row(r);
    const double x_norm = l2_norm(x);
    for (std::size_t k = 0; k < center_norms.size(); ++k) {
      const double denom = x_norm * center_norms[k];
      if (denom == 0.0) continue;
      scores(r, k) = std::clamp(dot(x, proto.centers.row(k)) / denom, -1.0, 1.0);
    }
  }
  return scores;
}

std::vector<ClassId> cosine_classify(const PrototypeClassifier& proto, const Matrix& features) {
  if (proto.class_ids.empty()) throw ProtocolError("prototype classifier has no classes");
  const Matrix scores = cosine_scores(proto, features);
  std::vector<ClassId> out(features.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    const auto best = static_cast<std::size_t>(
        std::distance(row.begin(), std::max_element(row.begin(), row.end())));
    out[r] = proto.class_ids[best];
  }
  return out;
}

}  // namespace wbr
