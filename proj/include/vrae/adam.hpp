// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vrae/model.hpp"

namespace vrae {

/// Decay rates in the usual convention: m <- decay1 m + (1 - decay1) g.
struct AdamConfig {
  double decay1 = 0.95;
  double decay2 = 0.999;
  double epsilon = 1e-8;

  /// Betas given as decay complements (beta1 = 0.05 means decay1 = 0.95).
  static AdamConfig from_complements(double beta1, double beta2, double epsilon = 1e-8);

  void validate() const;
  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  Params first;
  Params second;
  std::uint64_t step = 0;

  static AdamState zeros(const ModelConfig& cfg);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam step. `ascent` is d lower_bound / d theta, so the
/// update moves params uphill (equivalently, Adam minimising -lower_bound).
/// Throws Error naming the group if any gradient entry is not finite.
void adam_step(AdamState& state, Params& params, const Gradients& ascent, double lr, const AdamConfig& cfg);

/// Rescales `grads` so its global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

struct LrSchedule {
  struct Point {
    std::size_t from_epoch;
    double rate;
    friend bool operator==(const Point&, const Point&) = default;
  };

  std::vector<Point> points{{0, 1e-3}};
  // Between points, interpolate log-linearly instead of holding the rate.
  bool geometric = false;

  /// Parses "epoch:rate,epoch:rate,...".
  static LrSchedule parse(std::string_view text, bool geometric = false);
  std::string to_string() const;
  void validate() const;
  friend bool operator==(const LrSchedule&, const LrSchedule&) = default;
};

double lr_at(const LrSchedule& schedule, std::size_t epoch);

}  // namespace vrae
