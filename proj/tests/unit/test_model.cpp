// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "vrae/error.hpp"
#include "vrae/gradcheck.hpp"
#include "vrae/model.hpp"

using namespace vrae;

namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix as_rows(const Mat& m) {
  Matrix out(m.rows, std::vector<double>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[r][c] = m(r, c);
  return out;
}

// Scalar-loop recurrences written directly from the model equations, sharing
// nothing with the library's kernels.
std::vector<double> oracle_affine_tanh(const Matrix& w1, const std::vector<double>& a, const Matrix& w2,
                                       const std::vector<double>& b, const std::vector<double>& bias) {
  std::vector<double> out(bias.size());
  for (std::size_t i = 0; i < bias.size(); ++i) {
    long double s = bias[i];
    for (std::size_t k = 0; k < a.size(); ++k) s += static_cast<long double>(w1[i][k]) * a[k];
    for (std::size_t k = 0; k < b.size(); ++k) s += static_cast<long double>(w2[i][k]) * b[k];
    out[i] = std::tanh(static_cast<double>(s));
  }
  return out;
}

std::vector<double> oracle_mu(const Params& p, const Mat& x) {
  std::vector<double> h(p.b_enc.size(), 0.0);
  for (std::size_t t = 0; t < x.rows; ++t) {
    std::vector<double> frame(x.row(t).begin(), x.row(t).end());
    h = oracle_affine_tanh(as_rows(p.w_enc), h, as_rows(p.w_in), frame, p.b_enc);
  }
  std::vector<double> mu(p.b_mu);
  for (std::size_t j = 0; j < mu.size(); ++j)
    for (std::size_t k = 0; k < h.size(); ++k) mu[j] += p.w_mu(j, k) * h[k];
  return mu;
}

std::vector<std::vector<double>> oracle_decode(const Params& p, const std::vector<double>& z, const Mat& teacher) {
  std::vector<double> h = oracle_affine_tanh(as_rows(p.w_z), z, Matrix(p.b_z.size()), {}, p.b_z);
  std::vector<std::vector<double>> probs;
  for (std::size_t t = 0; t < teacher.rows; ++t) {
    std::vector<double> row;
    for (std::size_t d = 0; d < p.b_out.size(); ++d) {
      double a = p.b_out[d];
      for (std::size_t k = 0; k < h.size(); ++k) a += p.w_out(d, k) * h[k];
      row.push_back(1.0 / (1.0 + std::exp(-a)));
    }
    probs.push_back(row);
    std::vector<double> frame(teacher.row(t).begin(), teacher.row(t).end());
    h = oracle_affine_tanh(as_rows(p.w_dec), h, as_rows(p.w_x), frame, p.b_dec);
  }
  return probs;
}

ModelConfig small_config(std::size_t d, std::size_t h, std::size_t j, std::size_t t) {
  ModelConfig cfg;
  cfg.data_dim = d;
  cfg.hidden_dim = h;
  cfg.latent_dim = j;
  cfg.seq_len = t;
  return cfg;
}

Mat random_binary(Rng& rng, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  for (double& v : m.data) v = rng.uniform() < 0.5;
  return m;
}

Params randomised(const ModelConfig& cfg, std::uint64_t seed, double bias_scale = 0.3) {
  Params p = init_params(cfg, seed);
  Rng rng(seed * 31 + 7);
  for (auto& g : p.groups())
    if (g.cols == 1)
      for (double& b : g.values) b = bias_scale * (2 * rng.uniform() - 1);
  return p;
}

}  // namespace

TEST_CASE("init_params") {
  const ModelConfig cfg = small_config(100, 100, 3, 4);
  const Params a = init_params(cfg, 5);
  CHECK(a == init_params(cfg, 5));
  CHECK(a != init_params(cfg, 6));
  CHECK(a.shaped_like(cfg));
  for (const auto& g : a.groups()) {
    if (g.cols == 1) CHECK(std::all_of(g.values.begin(), g.values.end(), [](double v) { return v == 0.0; }));
  }
  const double bound = std::sqrt(6.0 / 200.0);
  for (double v : a.w_in.data) CHECK(std::abs(v) <= bound);
  CHECK(*std::max_element(a.w_in.data.begin(), a.w_in.data.end()) > 0.9 * bound);
  CHECK_THROWS_AS(init_params(small_config(0, 1, 1, 1), 1), ConfigError);
}

TEST_CASE("encode") {
  SUBCASE("zero parameters give the prior") {
    const Params p = Params::zeros(small_config(3, 4, 2, 5));
    Rng rng(1);
    const auto enc = encode(p, random_binary(rng, 5, 3));
    CHECK(enc.stats.mu == Vec{0, 0});
    CHECK(enc.stats.log_sigma == Vec{0, 0});
  }
  SUBCASE("bias-only encoder ignores its input") {
    Params p = Params::zeros(small_config(3, 4, 2, 5));
    p.b_enc = {0.1, -0.2, 0.3, 2.0};
    Rng rng(2);
    const auto enc = encode(p, random_binary(rng, 5, 3));
    for (std::size_t k = 0; k < 4; ++k) CHECK(enc.states(5, k) == std::tanh(p.b_enc[k]));
  }
  SUBCASE("matches the scalar-loop oracle") {
    const ModelConfig cfg = small_config(2, 3, 2, 2);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Params p = randomised(cfg, seed);
      Rng rng(seed);
      const Mat x = random_binary(rng, 2, 2);
      const auto mu = encode(p, x).stats.mu;
      const auto expected = oracle_mu(p, x);
      for (std::size_t j = 0; j < 2; ++j) CHECK(mu[j] == doctest::Approx(expected[j]).epsilon(1e-12));
    }
  }
  SUBCASE("prefix states ignore later frames") {
    const ModelConfig cfg = small_config(3, 5, 2, 6);
    const Params p = randomised(cfg, 9);
    Rng rng(9);
    const Mat x = random_binary(rng, 6, 3);
    Mat y = x;
    for (std::size_t d = 0; d < 3; ++d) y(4, d) = 1 - y(4, d);
    const auto a = encode(p, x), b = encode(p, y);
    for (std::size_t t = 0; t <= 4; ++t)
      for (std::size_t k = 0; k < 5; ++k) CHECK(a.states(t, k) == b.states(t, k));
    CHECK(a.states.row(5)[0] != b.states.row(5)[0]);
  }
  SUBCASE("log sigma is clamped") {
    Params p = Params::zeros(small_config(1, 1, 2, 1));
    p.b_sigma = {50.0, -50.0};
    const auto enc = encode(p, Mat(1, 1));
    CHECK(enc.stats.log_sigma == Vec{kLogSigmaClamp, -kLogSigmaClamp});
  }
  SUBCASE("shape mismatch") {
    const Params p = Params::zeros(small_config(3, 4, 2, 5));
    CHECK_THROWS_AS(encode(p, Mat(5, 2)), DimensionError);
  }
}

TEST_CASE("reparametrize") {
  const LatentStats stats{{1.5, -2.0}, {0.3, -0.1}};
  CHECK(reparametrize(stats, Vec{0, 0}) == stats.mu);
  CHECK(reparametrize({{0, 0}, {0, 0}}, Vec{0.7, -1.2}) == Vec{0.7, -1.2});
  CHECK(reparametrize({{1.0}, {std::log(2.0)}}, Vec{0.5})[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(reparametrize(stats, Vec{1}), DimensionError);
}

TEST_CASE("kl_term") {
  CHECK(kl_term({{0, 0}, {0, 0}}) == 0.0);
  CHECK(kl_term({{1.0}, {0.0}}) == -0.5);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    LatentStats s{{rng.uniform() * 4 - 2, rng.uniform() * 4 - 2}, {rng.uniform() * 3 - 2, rng.uniform() * 3 - 2}};
    CHECK(kl_term(s) < 0.0);
  }
}

TEST_CASE("kl_term matches a Monte-Carlo estimate") {
  GaussSource src(10);
  const LatentStats stats{{0.8, -1.5, 0.0}, {-0.5, 0.4, 0.0}};
  const int n = 1'000'000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double e = src.next();
      const double z = stats.mu[j] + std::exp(stats.log_sigma[j]) * e;
      acc += -0.5 * z * z - (-0.5 * e * e - stats.log_sigma[j]);
    }
  }
  const double mc = acc / n;
  CHECK(std::abs(kl_term(stats) - mc) <= std::max(0.01 * std::abs(mc), 0.005));
}

TEST_CASE("decode") {
  SUBCASE("zero parameters predict one half") {
    const Params p = Params::zeros(small_config(3, 4, 2, 5));
    Rng rng(3);
    const auto dec = decode(p, Vec{0.3, -1}, random_binary(rng, 5, 3));
    for (double v : dec.probs.data) CHECK(v == 0.5);
  }
  SUBCASE("state collapses without recurrent or input weights") {
    Params p = randomised(small_config(3, 4, 2, 5), 4);
    std::fill(p.w_dec.data.begin(), p.w_dec.data.end(), 0.0);
    std::fill(p.w_x.data.begin(), p.w_x.data.end(), 0.0);
    Rng rng(4);
    const auto dec = decode(p, Vec{0.3, -1}, random_binary(rng, 5, 3));
    for (std::size_t t = 2; t < 5; ++t)
      for (std::size_t d = 0; d < 3; ++d) CHECK(dec.probs(t, d) == dec.probs(1, d));
  }
  SUBCASE("matches the scalar-loop oracle") {
    const ModelConfig cfg = small_config(3, 4, 2, 6);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Params p = randomised(cfg, seed);
      Rng rng(seed + 100);
      const Mat teacher = random_binary(rng, 6, 3);
      const Vec z{rng.uniform() * 2 - 1, rng.uniform() * 2 - 1};
      const auto dec = decode(p, z, teacher);
      const auto expected = oracle_decode(p, z, teacher);
      for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t d = 0; d < 3; ++d) CHECK(std::abs(dec.probs(t, d) - expected[t][d]) < 1e-12);
    }
  }
}

TEST_CASE("bernoulli_ll") {
  SUBCASE("uniform prediction") {
    Rng rng(1);
    const Mat x = random_binary(rng, 4, 5);
    CHECK(bernoulli_ll(x, Mat(4, 5, 0.5)) == doctest::Approx(20 * std::log(0.5)).epsilon(1e-14));
    CHECK(bernoulli_ll_logits(x, Mat(4, 5, 0.0)) == doctest::Approx(20 * std::log(0.5)).epsilon(1e-14));
  }
  SUBCASE("scalar example") {
    const double v = bernoulli_ll(Mat::from_rows({{1, 0}}), Mat::from_rows({{0.9, 0.2}}));
    CHECK(v == doctest::Approx(std::log(0.9) + std::log(0.8)).epsilon(1e-14));
    CHECK(v == doctest::Approx(-0.32850).epsilon(1e-5));
  }
  SUBCASE("perfect prediction at the clamp") {
    const Mat x = Mat::from_rows({{1, 0, 1}, {0, 0, 1}});
    Mat logits(2, 3);
    for (std::size_t i = 0; i < 6; ++i) logits.data[i] = x.data[i] ? 1e3 : -1e3;
    const double v = bernoulli_ll_logits(x, logits);
    CHECK(v <= 0.0);
    // log(sigmoid(c)) evaluated accurately as -softplus(-c).
    CHECK(v >= 6 * -softplus(-kLogitClamp) * (1 + 1e-12));
    Mat probs(2, 3);
    for (std::size_t i = 0; i < 6; ++i) probs.data[i] = x.data[i];
    CHECK(bernoulli_ll(x, probs) >= 6 * std::log(sigmoid(kLogitClamp)) * (1 + 1e-3));
  }
  SUBCASE("logit and probability forms agree and are permutation invariant") {
    Rng rng(12);
    const Mat x = random_binary(rng, 3, 4);
    Mat logits(3, 4), probs(3, 4);
    for (std::size_t i = 0; i < 12; ++i) {
      logits.data[i] = rng.uniform() * 10 - 5;
      probs.data[i] = sigmoid(logits.data[i]);
    }
    const double v = bernoulli_ll_logits(x, logits);
    CHECK(v <= 0.0);
    CHECK(bernoulli_ll(x, probs) == doctest::Approx(v).epsilon(1e-12));
    Mat px(3, 4), pp(3, 4);
    const std::size_t perm[4] = {2, 0, 3, 1};
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t d = 0; d < 4; ++d) {
        px(t, d) = x(t, perm[d]);
        pp(t, d) = probs(t, perm[d]);
      }
    CHECK(bernoulli_ll(px, pp) == doctest::Approx(bernoulli_ll(x, probs)).epsilon(1e-14));
  }
}

TEST_CASE("elbo") {
  SUBCASE("zero parameters, zero data") {
    const ModelConfig cfg = small_config(2, 3, 2, 2);
    GaussSource src(1);
    const auto r = elbo(Params::zeros(cfg), Mat(2, 2), src, cfg);
    CHECK(r.loss.neg_kl == 0.0);
    CHECK(r.loss.recon_ll == doctest::Approx(4 * std::log(0.5)).epsilon(1e-14));
    CHECK(r.loss.lower_bound == doctest::Approx(-2.77259).epsilon(1e-5));
    CHECK(r.loss.per_timestep == doctest::Approx(r.loss.lower_bound / 2).epsilon(1e-15));
  }
  SUBCASE("bound decomposes and is reproducible") {
    const ModelConfig cfg = small_config(3, 5, 2, 4);
    const Params p = randomised(cfg, 2);
    Rng rng(2);
    const Mat x = random_binary(rng, 4, 3);
    GaussSource a(99), b(99);
    const auto ra = elbo(p, x, a, cfg), rb = elbo(p, x, b, cfg);
    CHECK(ra.loss.lower_bound == ra.loss.recon_ll + ra.loss.neg_kl);
    CHECK(ra.loss.lower_bound == rb.loss.lower_bound);
    CHECK(ra.loss.neg_kl <= 0.0);
  }
  SUBCASE("multiple samples average the reconstruction term") {
    ModelConfig cfg = small_config(3, 5, 2, 4);
    cfg.mc_samples = 3;
    const Params p = randomised(cfg, 3);
    Rng rng(3);
    const Mat x = random_binary(rng, 4, 3);
    GaussSource src(5);
    const auto r = elbo(p, x, src, cfg);
    REQUIRE(r.trace.samples.size() == 3);
    double sum = 0.0;
    for (const auto& s : r.trace.samples) sum += bernoulli_ll(x, s.decoder.probs);
    CHECK(r.loss.recon_ll == doctest::Approx(sum / 3).epsilon(1e-12));
  }
}

TEST_CASE("elbo lower-bounds an importance-sampled log-likelihood") {
  const ModelConfig cfg = small_config(3, 4, 1, 3);
  const Params p = randomised(cfg, 17, 0.5);
  Rng rng(17);
  const Mat x = random_binary(rng, 3, 3);
  const LatentStats q = encode(p, x).stats;
  const double sigma = std::exp(q.log_sigma[0]);

  // Proposal q(z|x): log p(x) ~= logmeanexp(log p(x|z) + log p(z) - log q(z|x)).
  GaussSource src(18);
  const int n = 100'000;
  std::vector<double> logw(n);
  for (int i = 0; i < n; ++i) {
    const double e = src.next();
    const double z = q.mu[0] + sigma * e;
    const auto dec = decode(p, Vec{z}, x);
    logw[i] = bernoulli_ll(x, dec.probs) - 0.5 * z * z + 0.5 * e * e + q.log_sigma[0];
  }
  const double m = *std::max_element(logw.begin(), logw.end());
  double s = 0.0, s2 = 0.0;
  for (double lw : logw) {
    const double w = std::exp(lw - m);
    s += w;
    s2 += w * w;
  }
  const double mean_w = s / n;
  const double se_rel = std::sqrt(std::max(0.0, s2 / n - mean_w * mean_w) / n) / mean_w;
  const double log_px = m + std::log(mean_w);

  GaussSource noise(19);
  double bound = 0.0;
  for (int i = 0; i < 2000; ++i) bound += elbo(p, x, noise, cfg).loss.lower_bound;
  bound /= 2000;
  CHECK(bound <= log_px + 3 * se_rel + 0.01);
}

TEST_CASE("backward") {
  SUBCASE("output bias gradient at zero parameters") {
    const ModelConfig cfg = small_config(3, 4, 2, 1);
    const Params p = Params::zeros(cfg);
    const Mat x(1, 3);
    GaussSource src(1);
    const auto r = elbo(p, x, src, cfg);
    const Gradients g = backward(p, r.trace, cfg);
    CHECK(g.b_out == Vec{-0.5, -0.5, -0.5});
  }
  SUBCASE("stale trace is rejected") {
    const ModelConfig cfg = small_config(3, 4, 2, 2);
    Params p = randomised(cfg, 1);
    Rng rng(1);
    const Mat x = random_binary(rng, 2, 3);
    GaussSource src(1);
    const auto r = elbo(p, x, src, cfg);
    p.w_out(0, 0) += 1e-3;
    CHECK_THROWS_AS(backward(p, r.trace, cfg), Error);
    CHECK_THROWS_AS(backward(p, ForwardTrace{}, cfg), Error);
  }
  SUBCASE("summing a duplicated sequence doubles the gradient") {
    const ModelConfig cfg = small_config(3, 4, 2, 3);
    const Params p = randomised(cfg, 8);
    Rng rng(8);
    const Mat x = random_binary(rng, 3, 3);
    const std::vector<Vec> eps{{0.3, -0.7}};
    const Gradients once = backward(p, elbo_with_noise(p, x, x, eps, cfg).trace, cfg);
    Gradients twice = Params::zeros(cfg);
    accumulate(twice, once);
    accumulate(twice, backward(p, elbo_with_noise(p, x, x, eps, cfg).trace, cfg));
    Gradients doubled = once;
    scale_in_place(doubled, 2.0);
    CHECK(twice == doubled);
  }
}

TEST_CASE("backward matches central differences for every group") {
  // Independent of gradient_check(): a direct loop over a different shape,
  // with reversed encoder input and two Monte-Carlo samples.
  ModelConfig cfg = small_config(3, 6, 3, 4);
  cfg.mc_samples = 2;
  cfg.kl_scale = 0.7;
  Params p = randomised(cfg, 23);
  Rng rng(23);
  const Mat target = random_binary(rng, 4, 3);
  Mat input(4, 3);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t d = 0; d < 3; ++d) input(t, d) = target(3 - t, d);
  const std::vector<Vec> eps{{0.4, -1.1, 0.9}, {-0.2, 0.5, 1.3}};
  const Gradients g = backward(p, elbo_with_noise(p, input, target, eps, cfg).trace, cfg);

  const double h = 1e-5;
  auto groups = p.groups();
  const auto grads = g.groups();
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    double worst = 0.0;
    for (std::size_t k = 0; k < groups[i].values.size(); ++k) {
      double& w = groups[i].values[k];
      const double saved = w;
      w = saved + h;
      const double up = elbo_with_noise(p, input, target, eps, cfg).loss.lower_bound;
      w = saved - h;
      const double down = elbo_with_noise(p, input, target, eps, cfg).loss.lower_bound;
      w = saved;
      const double n = (up - down) / (2 * h), a = grads[i].values[k];
      worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8}));
    }
    INFO(groups[i].name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("gradient_check on the reference shape") {
  for (std::uint64_t seed : {1, 7, 42}) {
    const auto report = gradient_check(gradcheck_reference_config(), seed);
    for (const auto& g : report.groups) {
      INFO(g.name);
      CHECK(g.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("clamped log sigma receives no gradient") {
  const ModelConfig cfg = small_config(2, 3, 2, 2);
  Params p = randomised(cfg, 4);
  p.b_sigma = {40.0, 0.0};
  Rng rng(4);
  const Mat x = random_binary(rng, 2, 2);
  const Gradients g = backward(p, elbo_with_noise(p, x, x, {{0.5, 0.5}}, cfg).trace, cfg);
  CHECK(g.b_sigma[0] == 0.0);
  CHECK(g.b_sigma[1] != 0.0);
  for (std::size_t k = 0; k < 3; ++k) CHECK(g.w_sigma(0, k) == 0.0);
}

TEST_CASE("lower bound stays finite under large single-weight perturbations") {
  const ModelConfig cfg = small_config(3, 4, 2, 4);
  Params p = randomised(cfg, 6);
  Rng rng(6);
  const Mat x = random_binary(rng, 4, 3);
  const std::vector<Vec> eps{{1.0, -1.0}};
  for (auto& g : p.groups()) {
    for (double delta : {-10.0, 10.0}) {
      for (std::size_t k = 0; k < g.values.size(); k += 3) {
        const double saved = g.values[k];
        g.values[k] += delta;
        const auto r = elbo_with_noise(p, x, x, eps, cfg);
        CHECK(std::isfinite(r.loss.lower_bound));
        CHECK(all_finite(backward(p, r.trace, cfg).b_out));
        g.values[k] = saved;
      }
    }
  }
}
