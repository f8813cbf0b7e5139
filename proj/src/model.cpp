// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {

void ModelConfig::validate() const {
  if (data_dim < 1 || hidden_dim < 1 || latent_dim < 1 || seq_len < 1 || mc_samples < 1) {
    throw ConfigError(fmt::format("model dimensions must be positive (D={} H={} J={} T={} L={})", data_dim,
                                  hidden_dim, latent_dim, seq_len, mc_samples));
  }
  if (!std::isfinite(kl_scale) || kl_scale < 0.0) throw ConfigError(fmt::format("invalid kl_scale {}", kl_scale));
}

Params Params::zeros(const ModelConfig& cfg) {
  const std::size_t d = cfg.data_dim, h = cfg.hidden_dim, j = cfg.latent_dim;
  Params p;
  p.w_enc = Mat(h, h);
  p.w_in = Mat(h, d);
  p.b_enc = Vec(h, 0.0);
  p.w_mu = Mat(j, h);
  p.b_mu = Vec(j, 0.0);
  p.w_sigma = Mat(j, h);
  p.b_sigma = Vec(j, 0.0);
  p.w_z = Mat(h, j);
  p.b_z = Vec(h, 0.0);
  p.w_dec = Mat(h, h);
  p.w_x = Mat(h, d);
  p.b_dec = Vec(h, 0.0);
  p.w_out = Mat(d, h);
  p.b_out = Vec(d, 0.0);
  return p;
}

namespace {

template <typename Group, typename Self>
std::array<Group, kParamGroupCount> collect_groups(Self& p) {
  auto m = [](std::string_view name, auto& mat) { return Group{name, mat.data, mat.rows, mat.cols}; };
  auto v = [](std::string_view name, auto& vec) { return Group{name, vec, vec.size(), 1}; };
  return {m("W_enc", p.w_enc),     m("W_in", p.w_in),   v("b_enc", p.b_enc), m("W_mu", p.w_mu),
          v("b_mu", p.b_mu),       m("W_sigma", p.w_sigma), v("b_sigma", p.b_sigma), m("W_z", p.w_z),
          v("b_z", p.b_z),         m("W_dec", p.w_dec), m("W_x", p.w_x),     v("b_dec", p.b_dec),
          m("W_out", p.w_out),     v("b_out", p.b_out)};
}

}  // namespace

std::array<ParamGroup, kParamGroupCount> Params::groups() { return collect_groups<ParamGroup>(*this); }

std::array<ConstParamGroup, kParamGroupCount> Params::groups() const {
  return collect_groups<ConstParamGroup>(*this);
}

std::size_t Params::size() const {
  std::size_t n = 0;
  for (const auto& g : groups()) n += g.values.size();
  return n;
}

bool Params::shaped_like(const ModelConfig& cfg) const {
  const auto ref = Params::zeros(cfg).groups();
  const auto mine = groups();
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    if (ref[i].rows != mine[i].rows || ref[i].cols != mine[i].cols || mine[i].values.size() != ref[i].values.size()) {
      return false;
    }
  }
  return true;
}

void accumulate(Gradients& grads, const Gradients& other, double scale) {
  auto dst = grads.groups();
  const auto src = other.groups();
  for (std::size_t i = 0; i < kParamGroupCount; ++i) axpy(scale, src[i].values, dst[i].values);
}

void scale_in_place(Gradients& grads, double scale) {
  for (auto& g : grads.groups()) {
    for (double& x : g.values) x *= scale;
  }
}

std::uint64_t fingerprint(const Params& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& g : p.groups()) {
    h = (h ^ g.values.size()) * 0x100000001b3ULL;
    for (double x : g.values) h = (h ^ std::bit_cast<std::uint64_t>(x)) * 0x100000001b3ULL;
  }
  return h;
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Params p = Params::zeros(cfg);
  Rng rng(seed);
  for (auto& g : p.groups()) {
    if (g.cols == 1) continue;  // biases stay zero
    const double bound = std::sqrt(6.0 / static_cast<double>(g.rows + g.cols));
    for (double& x : g.values) x = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return p;
}

EncoderTrace encode(const Params& p, const Mat& x) {
  const std::size_t hidden = p.b_enc.size();
  if (x.cols != p.w_in.cols) {
    throw DimensionError(fmt::format("encode: frames have {} dims, model expects {}", x.cols, p.w_in.cols));
  }
  if (x.rows < 1) throw DimensionError("encode: empty sequence");

  EncoderTrace out;
  out.states = Mat(x.rows + 1, hidden);
  for (std::size_t t = 0; t < x.rows; ++t) {
    auto next = out.states.row(t + 1);
    std::copy(p.b_enc.begin(), p.b_enc.end(), next.begin());
    matvec_add(p.w_enc, out.states.row(t), next);
    matvec_add(p.w_in, x.row(t), next);
    for (double& v : next) v = std::tanh(v);
  }

  const auto last = out.states.row(x.rows);
  out.stats.mu = p.b_mu;
  matvec_add(p.w_mu, last, out.stats.mu);
  out.raw_log_sigma = p.b_sigma;
  matvec_add(p.w_sigma, last, out.raw_log_sigma);
  out.stats.log_sigma = out.raw_log_sigma;
  for (double& v : out.stats.log_sigma) v = std::clamp(v, -kLogSigmaClamp, kLogSigmaClamp);
  return out;
}

Vec reparametrize(const LatentStats& stats, std::span<const double> eps) {
  if (eps.size() != stats.mu.size() || stats.log_sigma.size() != stats.mu.size()) {
    throw DimensionError(fmt::format("reparametrize: mu {} log_sigma {} eps {}", stats.mu.size(),
                                     stats.log_sigma.size(), eps.size()));
  }
  Vec z(eps.size());
  for (std::size_t j = 0; j < z.size(); ++j) z[j] = stats.mu[j] + std::exp(stats.log_sigma[j]) * eps[j];
  return z;
}

double kl_term(const LatentStats& stats, double kl_scale) {
  double sum = 0.0;
  for (std::size_t j = 0; j < stats.mu.size(); ++j) {
    const double ls = stats.log_sigma[j];
    sum += 1.0 + 2.0 * ls - stats.mu[j] * stats.mu[j] - std::exp(2.0 * ls);
  }
  return kl_scale * sum;
}

double clamp_logit(double a) { return std::clamp(a, -kLogitClamp, kLogitClamp); }

Vec decoder_initial_state(const Params& p, std::span<const double> z) {
  Vec h = p.b_z;
  matvec_add(p.w_z, z, h);
  for (double& v : h) v = std::tanh(v);
  return h;
}

Vec decoder_logits(const Params& p, std::span<const double> h) {
  Vec a = p.b_out;
  matvec_add(p.w_out, h, a);
  return a;
}

Vec decoder_next_state(const Params& p, std::span<const double> h, std::span<const double> frame) {
  Vec next = p.b_dec;
  matvec_add(p.w_dec, h, next);
  matvec_add(p.w_x, frame, next);
  for (double& v : next) v = std::tanh(v);
  return next;
}

DecoderTrace decode(const Params& p, std::span<const double> z, const Mat& teacher) {
  const std::size_t hidden = p.b_dec.size(), dims = p.b_out.size();
  if (teacher.cols != dims) {
    throw DimensionError(fmt::format("decode: teacher frames have {} dims, model expects {}", teacher.cols, dims));
  }
  if (teacher.rows < 1) throw DimensionError("decode: empty sequence");

  DecoderTrace out;
  out.states = Mat(teacher.rows, hidden);
  out.raw_logits = Mat(teacher.rows, dims);
  out.probs = Mat(teacher.rows, dims);
  Vec h = decoder_initial_state(p, z);
  for (std::size_t t = 0; t < teacher.rows; ++t) {
    std::copy(h.begin(), h.end(), out.states.row(t).begin());
    auto logits = out.raw_logits.row(t);
    std::copy(p.b_out.begin(), p.b_out.end(), logits.begin());
    matvec_add(p.w_out, h, logits);
    for (std::size_t d = 0; d < dims; ++d) out.probs(t, d) = sigmoid(clamp_logit(logits[d]));
    if (t + 1 < teacher.rows) h = decoder_next_state(p, h, teacher.row(t));
  }
  return out;
}

double bernoulli_ll(const Mat& x, const Mat& probs) {
  if (x.rows != probs.rows || x.cols != probs.cols) {
    throw DimensionError(fmt::format("bernoulli_ll: data {} vs probabilities {}", x.shape(), probs.shape()));
  }
  const double lo = sigmoid(-kLogitClamp), hi = sigmoid(kLogitClamp);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double pr = std::clamp(probs.data[i], lo, hi);
    sum += x.data[i] * std::log(pr) + (1.0 - x.data[i]) * std::log1p(-pr);
  }
  return sum;
}

double bernoulli_ll_logits(const Mat& x, const Mat& logits) {
  if (x.rows != logits.rows || x.cols != logits.cols) {
    throw DimensionError(fmt::format("bernoulli_ll_logits: data {} vs logits {}", x.shape(), logits.shape()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double a = clamp_logit(logits.data[i]);
    sum -= x.data[i] * softplus(-a) + (1.0 - x.data[i]) * softplus(a);
  }
  return sum;
}

ElboResult elbo_with_noise(const Params& p, const Mat& input, const Mat& target, const std::vector<Vec>& eps,
                           const ModelConfig& cfg) {
  if (input.rows != cfg.seq_len || target.rows != cfg.seq_len || input.cols != cfg.data_dim ||
      target.cols != cfg.data_dim) {
    throw DimensionError(fmt::format("elbo: sequences {} / {} do not match T={} D={}", input.shape(), target.shape(),
                                     cfg.seq_len, cfg.data_dim));
  }
  if (eps.empty()) throw DimensionError("elbo: at least one noise sample is required");

  ElboResult r;
  r.trace.input = &input;
  r.trace.target = &target;
  r.trace.kl_scale = cfg.kl_scale;
  r.trace.params_fingerprint = fingerprint(p);
  r.trace.encoder = encode(p, input);

  double recon = 0.0;
  for (const Vec& e : eps) {
    ForwardTrace::Sample s;
    s.eps = e;
    s.z = reparametrize(r.trace.encoder.stats, e);
    s.decoder = decode(p, s.z, target);
    recon += bernoulli_ll_logits(target, s.decoder.raw_logits);
    r.trace.samples.push_back(std::move(s));
  }
  r.loss.recon_ll = recon / static_cast<double>(eps.size());
  r.loss.neg_kl = kl_term(r.trace.encoder.stats, cfg.kl_scale);
  r.loss.lower_bound = r.loss.recon_ll + r.loss.neg_kl;
  r.loss.per_timestep = r.loss.lower_bound / static_cast<double>(cfg.seq_len);
  return r;
}

ElboResult elbo(const Params& p, const Mat& input, const Mat& target, GaussSource& src, const ModelConfig& cfg) {
  std::vector<Vec> eps;
  eps.reserve(cfg.mc_samples);
  for (std::size_t l = 0; l < cfg.mc_samples; ++l) eps.push_back(draw_standard_normal(src, cfg.latent_dim));
  return elbo_with_noise(p, input, target, eps, cfg);
}

ElboResult elbo(const Params& p, const Mat& x, GaussSource& src, const ModelConfig& cfg) {
  return elbo(p, x, x, src, cfg);
}

Gradients backward(const Params& p, const ForwardTrace& trace, const ModelConfig& cfg) {
  if (trace.input == nullptr || trace.target == nullptr || trace.samples.empty()) {
    throw Error("backward: trace is empty");
  }
  if (trace.params_fingerprint != fingerprint(p)) {
    throw Error("backward: trace was produced with different parameters");
  }
  if (trace.target->rows != cfg.seq_len || trace.encoder.states.rows != trace.input->rows + 1 ||
      trace.encoder.stats.mu.size() != cfg.latent_dim) {
    throw DimensionError("backward: trace shapes do not match the model configuration");
  }

  const std::size_t steps = trace.target->rows, hidden = cfg.hidden_dim, dims = cfg.data_dim,
                    latent = cfg.latent_dim;
  const Mat& target = *trace.target;
  const LatentStats& stats = trace.encoder.stats;
  Gradients g = Params::zeros(cfg);

  // Analytic KL contribution to the latent statistics.
  Vec d_mu(latent), d_log_sigma(latent);
  for (std::size_t j = 0; j < latent; ++j) {
    const double sigma = std::exp(stats.log_sigma[j]);
    d_mu[j] = -2.0 * trace.kl_scale * stats.mu[j];
    d_log_sigma[j] = 2.0 * trace.kl_scale * (1.0 - sigma * sigma);
  }

  const double sample_weight = 1.0 / static_cast<double>(trace.samples.size());
  Vec d_logits(dims), d_h(hidden), delta(hidden);
  for (const auto& sample : trace.samples) {
    const DecoderTrace& dec = sample.decoder;
    std::fill(d_h.begin(), d_h.end(), 0.0);
    for (std::size_t t = steps; t-- > 0;) {
      // d_h holds the gradient flowing into state t from state t+1.
      for (std::size_t d = 0; d < dims; ++d) {
        const double raw = dec.raw_logits(t, d);
        d_logits[d] = std::abs(raw) > kLogitClamp ? 0.0 : sample_weight * (target(t, d) - dec.probs(t, d));
      }
      axpy(1.0, d_logits, g.b_out);
      outer_add(g.w_out, d_logits, dec.states.row(t));
      matvec_transposed_add(p.w_out, d_logits, d_h);

      const auto h = dec.states.row(t);
      for (std::size_t k = 0; k < hidden; ++k) delta[k] = d_h[k] * (1.0 - h[k] * h[k]);
      std::fill(d_h.begin(), d_h.end(), 0.0);
      if (t == 0) {
        axpy(1.0, delta, g.b_z);
        outer_add(g.w_z, delta, sample.z);
        Vec d_z(latent, 0.0);
        matvec_transposed_add(p.w_z, delta, d_z);
        for (std::size_t j = 0; j < latent; ++j) {
          d_mu[j] += d_z[j];
          d_log_sigma[j] += d_z[j] * sample.eps[j] * std::exp(stats.log_sigma[j]);
        }
      } else {
        // state t = tanh(W_dec state(t-1) + W_x target(t-1) + b_dec)
        axpy(1.0, delta, g.b_dec);
        outer_add(g.w_dec, delta, dec.states.row(t - 1));
        outer_add(g.w_x, delta, target.row(t - 1));
        matvec_transposed_add(p.w_dec, delta, d_h);
      }
    }
  }

  for (std::size_t j = 0; j < latent; ++j) {
    if (std::abs(trace.encoder.raw_log_sigma[j]) > kLogSigmaClamp) d_log_sigma[j] = 0.0;
  }

  const Mat& enc = trace.encoder.states;
  const Mat& input = *trace.input;
  const std::size_t in_steps = input.rows;
  axpy(1.0, d_mu, g.b_mu);
  outer_add(g.w_mu, d_mu, enc.row(in_steps));
  axpy(1.0, d_log_sigma, g.b_sigma);
  outer_add(g.w_sigma, d_log_sigma, enc.row(in_steps));

  std::fill(d_h.begin(), d_h.end(), 0.0);
  matvec_transposed_add(p.w_mu, d_mu, d_h);
  matvec_transposed_add(p.w_sigma, d_log_sigma, d_h);
  for (std::size_t t = in_steps; t >= 1; --t) {
    const auto h = enc.row(t);
    for (std::size_t k = 0; k < hidden; ++k) delta[k] = d_h[k] * (1.0 - h[k] * h[k]);
    axpy(1.0, delta, g.b_enc);
    outer_add(g.w_enc, delta, enc.row(t - 1));
    outer_add(g.w_in, delta, input.row(t - 1));
    if (t > 1) {
      std::fill(d_h.begin(), d_h.end(), 0.0);
      matvec_transposed_add(p.w_enc, delta, d_h);
    }
  }
  return g;
}

}  // namespace vrae
