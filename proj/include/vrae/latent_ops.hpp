// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vrae/model.hpp"
#include "vrae/piano_roll.hpp"

namespace vrae {

struct LatentRow {
  std::size_t index = 0;
  std::string label;
  Vec mu;
  Vec log_sigma;

  friend bool operator==(const LatentRow&, const LatentRow&) = default;
};

using LatentTable = std::vector<LatentRow>;

/// Posterior mean and log standard deviation of every sequence; no sampling.
LatentTable encode_dataset(const Params& p, const Dataset& dataset);

/// Header `index,label,mu_0..mu_{J-1},logsigma_0..logsigma_{J-1}`.
std::string format_latent_csv(const LatentTable& table);

Vec sample_prior(std::size_t latent_dim, std::uint64_t seed);

/// `steps` evenly spaced points from a to b inclusive; endpoints are exact.
std::vector<Vec> interpolate(const Vec& a, const Vec& b, std::size_t steps);

struct FeedbackPolicy {
  enum class Kind { kSample, kThreshold, kExpectation };

  Kind kind = Kind::kSample;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  static Kind parse_kind(std::string_view name);
  void validate() const;
};

std::string_view to_string(FeedbackPolicy::Kind kind);

struct Generated {
  PianoRoll roll;
  Mat probs;  // decoder output before binarisation, length x D
};

/// Free-runs the decoder from z for `length` frames, feeding each frame back
/// according to `policy`. Expectation feedback is written to the roll rounded
/// at 0.5 (ties to 1).
Generated generate(const Params& p, std::span<const double> z, std::size_t length, const FeedbackPolicy& policy,
                   double rate, const std::vector<int>& pitch_map);

/// Teacher-forced reconstruction of a sequence from its posterior mean.
Mat reconstruct(const Params& p, const Mat& input, const Mat& target);

/// Fraction of cells where reconstruct() thresholded at 0.5 equals the target.
double reconstruction_accuracy(const Params& p, const Dataset& dataset);

}  // namespace vrae
