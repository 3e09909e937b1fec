// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/optim.hpp"

#include <algorithm>
#include <cmath>

#include "wbr/error.hpp"

namespace wbr {

std::string_view to_string(ClipMode mode) noexcept {
  switch (mode) {
    case ClipMode::kNone:
      return "none";
    case ClipMode::kGlobalNorm:
      return "global-l2-norm";
    case ClipMode::kElementClamp:
      return "element-clamp";
  }
  return "none";
}

ClipMode parse_clip_mode(std::string_view text) {
  if (text == "none") return ClipMode::kNone;
  if (text == "global-l2-norm") return ClipMode::kGlobalNorm;
  if (text == "element-clamp") return ClipMode::kElementClamp;
  throw ConfigError("unknown clip mode '" + std::string(text) +
                    "' (expected none, global-l2-norm or element-clamp)");
}

ClipPolicy::ClipPolicy(ClipMode mode, double threshold) : mode_(mode) {
  if (mode_ == ClipMode::kNone) return;
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw ConfigError("clip threshold must be a positive finite number, got " +
                      std::to_string(threshold));
  }
  threshold_ = threshold;
}

std::optional<double> ClipPolicy::threshold() const noexcept {
  if (mode_ == ClipMode::kNone) return std::nullopt;
  return threshold_;
}

void clip_inplace(Gradients& grads, const ClipPolicy& policy) {
  if (!grads.all_finite()) throw NumericError("cannot clip non-finite gradients");
  switch (policy.mode()) {
    case ClipMode::kNone:
      return;
    case ClipMode::kGlobalNorm: {
      const double norm = grads.l2_norm();
      const double limit = *policy.threshold();
      // The slack absorbs rounding in the rescaled norm so a second clip is a no-op.
      constexpr double kNormSlack = 1e-13;
      if (norm > limit + kNormSlack) grads *= limit / norm;
      return;
    }
    case ClipMode::kElementClamp: {
      const double limit = *policy.threshold();
      grads.for_each_value([limit](double& v) { v = std::clamp(v, -limit, limit); });
      return;
    }
  }
}

Gradients clip(const Gradients& grads, const ClipPolicy& policy) {
  Gradients out = grads;
  clip_inplace(out, policy);
  return out;
}

SgdState::SgdState(double lr_, double momentum_, const MlpModel& model)
    : lr(lr_), momentum(momentum_) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive", "train.lr");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)", "train.momentum");
  }
  if (momentum > 0.0) velocity = Gradients::zeros_like(model);
}

void sgd_step(MlpModel& model, const Gradients& grads, SgdState& state) {
  if (!grads.matches(model)) throw ShapeError("gradient shapes do not match the model");
  const Gradients* step = &grads;
  if (state.momentum > 0.0) {
    if (!state.velocity || !state.velocity->matches(model)) {
      throw ShapeError("momentum buffers do not match the model");
    }
    Gradients& v = *state.velocity;
    v *= state.momentum;
    v += grads;
    step = &v;
  }
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    auto w = model.weights[l].data();
    const auto gw = step->d_weights[l].data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= state.lr * gw[i];
    auto b = model.biases[l].data();
    const auto gb = step->d_biases[l].data();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] -= state.lr * gb[i];
  }
}

}  // namespace wbr
