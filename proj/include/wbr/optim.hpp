// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "wbr/model.hpp"

namespace wbr {

enum class ClipMode { kNone, kGlobalNorm, kElementClamp };

std::string_view to_string(ClipMode mode) noexcept;
/// Accepts "none", "global-l2-norm", "element-clamp".
ClipMode parse_clip_mode(std::string_view text);

/// Gradient magnitude limit for one kind of update step.
class ClipPolicy {
 public:
  /// Unclipped.
  ClipPolicy() = default;
  /// Throws ConfigError unless threshold > 0 (ignored for kNone).
  ClipPolicy(ClipMode mode, double threshold);

  static ClipPolicy none() { return {}; }
  static ClipPolicy global_norm(double threshold) { return {ClipMode::kGlobalNorm, threshold}; }
  static ClipPolicy element_clamp(double threshold) {
    return {ClipMode::kElementClamp, threshold};
  }

  ClipMode mode() const noexcept { return mode_; }
  /// Empty when mode is kNone.
  std::optional<double> threshold() const noexcept;
  bool enabled() const noexcept { return mode_ != ClipMode::kNone; }

  bool operator==(const ClipPolicy&) const = default;

 private:
  ClipMode mode_ = ClipMode::kNone;
  double threshold_ = 0.0;
};

/// global-l2-norm scales every tensor by min(1, threshold / joint norm);
/// element-clamp clamps each entry to [-threshold, threshold].
/// Throws NumericError on non-finite input.
Gradients clip(const Gradients& grads, const ClipPolicy& policy);
/// In-place variant used by the training loop.
void clip_inplace(Gradients& grads, const ClipPolicy& policy);

/// Plain SGD; with momentum m > 0 the velocity follows v <- m v + g and the
/// step is -lr v.
struct SgdState {
  double lr = 0.01;
  double momentum = 0.0;
  std::optional<Gradients> velocity;

  /// Throws ConfigError on lr <= 0 or momentum outside [0, 1).
  SgdState(double lr, double momentum, const MlpModel& model);
};

void sgd_step(MlpModel& model, const Gradients& grads, SgdState& state);

}  // namespace wbr
