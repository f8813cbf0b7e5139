// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/latent_ops.hpp"

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

LatentTable encode_dataset(const Params& p, const Dataset& dataset) {
  LatentTable table;
  table.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const EncoderTrace enc = encode(p, dataset.inputs[i]);
    table.push_back({i, dataset.labels[i], enc.stats.mu, enc.stats.log_sigma});
  }
  return table;
}

std::string format_latent_csv(const LatentTable& table) {
  const std::size_t latent = table.empty() ? 0 : table.front().mu.size();
  std::string out = "index,label";
  for (std::size_t j = 0; j < latent; ++j) out += fmt::format(",mu_{}", j);
  for (std::size_t j = 0; j < latent; ++j) out += fmt::format(",logsigma_{}", j);
  out += '\n';
  for (const auto& row : table) {
    out += fmt::format("{},{}", row.index, csv_field(row.label));
    for (double v : row.mu) out += fmt::format(",{}", v);
    for (double v : row.log_sigma) out += fmt::format(",{}", v);
    out += '\n';
  }
  return out;
}

Vec sample_prior(std::size_t latent_dim, std::uint64_t seed) {
  if (latent_dim < 1) throw ConfigError("latent dimension must be at least 1");
  GaussSource src(seed);
  return draw_standard_normal(src, latent_dim);
}

std::vector<Vec> interpolate(const Vec& a, const Vec& b, std::size_t steps) {
  if (a.size() != b.size()) throw DimensionError(fmt::format("interpolate: lengths {} and {}", a.size(), b.size()));
  if (steps < 2) throw ConfigError("interpolation needs at least 2 steps");
  std::vector<Vec> out;
  out.reserve(steps);
  out.push_back(a);
  for (std::size_t k = 1; k + 1 < steps; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(steps - 1);
    Vec z(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) z[j] = a[j] + frac * (b[j] - a[j]);
    out.push_back(std::move(z));
  }
  out.push_back(b);
  return out;
}

FeedbackPolicy::Kind FeedbackPolicy::parse_kind(std::string_view name) {
  if (name == "sample") return Kind::kSample;
  if (name == "threshold") return Kind::kThreshold;
  if (name == "expectation") return Kind::kExpectation;
  throw ConfigError(fmt::format("unknown feedback policy '{}' (sample, threshold, expectation)", name));
}

void FeedbackPolicy::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError(fmt::format("threshold {} outside (0, 1)", threshold));
}

std::string_view to_string(FeedbackPolicy::Kind kind) {
  switch (kind) {
    case FeedbackPolicy::Kind::kSample: return "sample";
    case FeedbackPolicy::Kind::kThreshold: return "threshold";
    case FeedbackPolicy::Kind::kExpectation: return "expectation";
  }
  return "unknown";
}

Generated generate(const Params& p, std::span<const double> z, std::size_t length, const FeedbackPolicy& policy,
                   double rate, const std::vector<int>& pitch_map) {
  policy.validate();
  const std::size_t dims = p.b_out.size();
  if (z.size() != p.w_z.cols) throw DimensionError(fmt::format("generate: z has {} entries, model expects {}", z.size(), p.w_z.cols));
  if (length < 1) throw ConfigError("generation length must be at least 1");

  Generated out{PianoRoll(length, dims, rate, pitch_map), Mat(length, dims)};
  Rng rng(policy.seed);
  Vec h = decoder_initial_state(p, z);
  Vec frame(dims);
  for (std::size_t t = 0; t < length; ++t) {
    const Vec logits = decoder_logits(p, h);
    for (std::size_t d = 0; d < dims; ++d) {
      const double prob = sigmoid(clamp_logit(logits[d]));
      out.probs(t, d) = prob;
      switch (policy.kind) {
        case FeedbackPolicy::Kind::kSample: frame[d] = rng.uniform() < prob ? 1.0 : 0.0; break;
        case FeedbackPolicy::Kind::kThreshold: frame[d] = prob >= policy.threshold ? 1.0 : 0.0; break;
        case FeedbackPolicy::Kind::kExpectation: frame[d] = prob; break;
      }
      out.roll.at(t, d) = frame[d] >= 0.5;
    }
    if (t + 1 < length) h = decoder_next_state(p, h, frame);
  }
  return out;
}

Mat reconstruct(const Params& p, const Mat& input, const Mat& target) {
  const LatentStats stats = encode(p, input).stats;
  return decode(p, stats.mu, target).probs;
}

double reconstruction_accuracy(const Params& p, const Dataset& dataset) {
  std::size_t correct = 0, total = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Mat probs = reconstruct(p, dataset.inputs[i], dataset.targets[i]);
    for (std::size_t k = 0; k < probs.data.size(); ++k) {
      correct += (probs.data[k] >= 0.5 ? 1.0 : 0.0) == dataset.targets[i].data[k];
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace vrae
