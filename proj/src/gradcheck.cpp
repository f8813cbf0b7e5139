// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vrae {

ModelConfig gradcheck_reference_config() {
  ModelConfig cfg;
  cfg.data_dim = 4;
  cfg.hidden_dim = 8;
  cfg.latent_dim = 2;
  cfg.seq_len = 5;
  cfg.mc_samples = 1;
  return cfg;
}

GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed, double step) {
  cfg.validate();
  Params params = init_params(cfg, seed);
  Rng rng(seed ^ 0x5eedULL);
  // Nonzero biases so every group sees a generic operating point.
  for (auto& g : params.groups()) {
    if (g.cols == 1) {
      for (double& b : g.values) b = 0.2 * (2.0 * rng.uniform() - 1.0);
    }
  }
  Mat x(cfg.seq_len, cfg.data_dim);
  for (double& v : x.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  GaussSource noise(seed + 1);
  std::vector<Vec> eps;
  for (std::size_t l = 0; l < cfg.mc_samples; ++l) eps.push_back(draw_standard_normal(noise, cfg.latent_dim));

  const ElboResult base = elbo_with_noise(params, x, x, eps, cfg);
  const Gradients analytic = backward(params, base.trace, cfg);

  GradCheckReport report;
  auto groups = params.groups();
  const auto grads = analytic.groups();
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    GroupError& ge = report.groups[i];
    ge.name = groups[i].name;
    ge.entries = groups[i].values.size();
    for (std::size_t k = 0; k < groups[i].values.size(); ++k) {
      double& w = groups[i].values[k];
      const double saved = w;
      w = saved + step;
      const double up = elbo_with_noise(params, x, x, eps, cfg).loss.lower_bound;
      w = saved - step;
      const double down = elbo_with_noise(params, x, x, eps, cfg).loss.lower_bound;
      w = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = grads[i].values[k];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ge.max_rel_error = std::max(ge.max_rel_error, err);
    }
    report.max_rel_error = std::max(report.max_rel_error, ge.max_rel_error);
  }
  return report;
}

}  // namespace vrae
