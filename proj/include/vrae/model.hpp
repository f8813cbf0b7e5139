// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vrae/numerics.hpp"

namespace vrae {

struct ModelConfig {
  std::size_t data_dim = 0;    // D
  std::size_t hidden_dim = 0;  // H
  std::size_t latent_dim = 0;  // J
  std::size_t seq_len = 0;     // T
  std::size_t mc_samples = 1;  // L
  // Multiplier on sum_j (1 + 2 log sigma_j - mu_j^2 - sigma_j^2). 0.5 gives the
  // exact Gaussian KL; 1.0 reproduces the unhalved estimator.
  double kl_scale = 0.5;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr double kLogSigmaClamp = 10.0;
inline constexpr double kLogitClamp = 30.0;
inline constexpr std::size_t kParamGroupCount = 14;

struct ParamGroup {
  std::string_view name;
  std::span<double> values;
  std::size_t rows;
  std::size_t cols;
};

struct ConstParamGroup {
  std::string_view name;
  std::span<const double> values;
  std::size_t rows;
  std::size_t cols;
};

/// Every weight and bias of encoder, latent heads and decoder. Matrices map
/// their column space to their row space, e.g. w_in is H x D.
struct Params {
  Mat w_enc, w_in;
  Vec b_enc;
  Mat w_mu;
  Vec b_mu;
  Mat w_sigma;
  Vec b_sigma;
  Mat w_z;
  Vec b_z;
  Mat w_dec, w_x;
  Vec b_dec;
  Mat w_out;
  Vec b_out;

  static Params zeros(const ModelConfig& cfg);

  /// The 14 groups in declaration order (the checkpoint order).
  std::array<ParamGroup, kParamGroupCount> groups();
  std::array<ConstParamGroup, kParamGroupCount> groups() const;

  std::size_t size() const;
  bool shaped_like(const ModelConfig& cfg) const;

  friend bool operator==(const Params&, const Params&) = default;
};

/// Gradients share the parameter layout.
using Gradients = Params;

/// grads += scale * other
void accumulate(Gradients& grads, const Gradients& other, double scale = 1.0);
void scale_in_place(Gradients& grads, double scale);

/// Order-sensitive hash of every parameter bit pattern.
std::uint64_t fingerprint(const Params& p);

/// Uniform Glorot initialisation of every matrix, zero biases.
Params init_params(const ModelConfig& cfg, std::uint64_t seed);

struct LatentStats {
  Vec mu;
  Vec log_sigma;  // clamped to [-kLogSigmaClamp, kLogSigmaClamp]

  friend bool operator==(const LatentStats&, const LatentStats&) = default;
};

struct EncoderTrace {
  LatentStats stats;
  Mat states;            // (T+1) x H; row 0 is the zero initial state
  Vec raw_log_sigma;     // before clamping
};

/// Runs the encoder over every frame of `x` (T x D).
EncoderTrace encode(const Params& p, const Mat& x);

Vec reparametrize(const LatentStats& stats, std::span<const double> eps);

/// kl_scale * sum_j (1 + 2 log sigma_j - mu_j^2 - sigma_j^2); with the default
/// 0.5 this is -KL(q || N(0, I)).
double kl_term(const LatentStats& stats, double kl_scale = 0.5);

struct DecoderTrace {
  Mat states;      // T x H; row t produces output t
  Mat raw_logits;  // T x D, before clamping
  Mat probs;       // T x D, sigmoid of the clamped logits
};

// Single decoder steps, shared with free-running generation.
Vec decoder_initial_state(const Params& p, std::span<const double> z);
Vec decoder_logits(const Params& p, std::span<const double> h);
Vec decoder_next_state(const Params& p, std::span<const double> h, std::span<const double> frame);
double clamp_logit(double a);

/// Teacher-forced decoding: output t comes from state t, and frame t of
/// `teacher` drives the transition to state t+1.
DecoderTrace decode(const Params& p, std::span<const double> z, const Mat& teacher);

/// Sum over cells of x log p + (1 - x) log(1 - p), probabilities clamped to
/// the logit clamp range.
double bernoulli_ll(const Mat& x, const Mat& probs);
/// Same quantity from logits: -x softplus(-a) - (1 - x) softplus(a).
double bernoulli_ll_logits(const Mat& x, const Mat& logits);

struct LossBreakdown {
  double recon_ll = 0.0;
  double neg_kl = 0.0;
  double lower_bound = 0.0;
  double per_timestep = 0.0;
};

struct ForwardTrace {
  struct Sample {
    Vec eps;
    Vec z;
    DecoderTrace decoder;
  };

  const Mat* input = nullptr;   // encoder view
  const Mat* target = nullptr;  // decoder teacher and likelihood target
  EncoderTrace encoder;
  std::vector<Sample> samples;
  double kl_scale = 0.5;
  std::uint64_t params_fingerprint = 0;
};

struct ElboResult {
  LossBreakdown loss;
  ForwardTrace trace;
};

/// Lower bound with the caller's noise, one J-vector per Monte-Carlo sample.
ElboResult elbo_with_noise(const Params& p, const Mat& input, const Mat& target, const std::vector<Vec>& eps,
                           const ModelConfig& cfg);
/// Draws cfg.mc_samples noise vectors from `src`.
ElboResult elbo(const Params& p, const Mat& input, const Mat& target, GaussSource& src, const ModelConfig& cfg);
ElboResult elbo(const Params& p, const Mat& x, GaussSource& src, const ModelConfig& cfg);

/// Exact gradient of trace's lower bound for its stored noise. Sign convention:
/// these are ascent directions (d lower_bound / d theta).
Gradients backward(const Params& p, const ForwardTrace& trace, const ModelConfig& cfg);

}  // namespace vrae
