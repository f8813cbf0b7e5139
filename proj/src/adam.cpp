// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/adam.hpp"

#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {

AdamConfig AdamConfig::from_complements(double beta1, double beta2, double epsilon) {
  AdamConfig cfg{1.0 - beta1, 1.0 - beta2, epsilon};
  cfg.validate();
  return cfg;
}

void AdamConfig::validate() const {
  if (!(decay1 >= 0.0 && decay1 < 1.0)) throw ConfigError(fmt::format("decay1 {} outside [0, 1)", decay1));
  if (!(decay2 >= 0.0 && decay2 < 1.0)) throw ConfigError(fmt::format("decay2 {} outside [0, 1)", decay2));
  if (!(epsilon > 0.0)) throw ConfigError(fmt::format("epsilon {} must be positive", epsilon));
}

AdamState AdamState::zeros(const ModelConfig& cfg) { return {Params::zeros(cfg), Params::zeros(cfg), 0}; }

void adam_step(AdamState& state, Params& params, const Gradients& ascent, double lr, const AdamConfig& cfg) {
  const auto grads = ascent.groups();
  for (const auto& g : grads) {
    if (!all_finite(g.values)) throw Error(fmt::format("adam_step: non-finite gradient in {}", g.name));
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.decay1, t);
  const double correction2 = 1.0 - std::pow(cfg.decay2, t);

  auto p = params.groups();
  auto m = state.first.groups();
  auto v = state.second.groups();
  for (std::size_t i = 0; i < kParamGroupCount; ++i) {
    if (p[i].values.size() != grads[i].values.size()) {
      throw DimensionError(fmt::format("adam_step: gradient for {} has {} entries, parameter has {}", p[i].name,
                                       grads[i].values.size(), p[i].values.size()));
    }
    for (std::size_t k = 0; k < p[i].values.size(); ++k) {
      const double g = grads[i].values[k];
      double& mk = m[i].values[k];
      double& vk = v[i].values[k];
      mk = cfg.decay1 * mk + (1.0 - cfg.decay1) * g;
      vk = cfg.decay2 * vk + (1.0 - cfg.decay2) * g * g;
      p[i].values[k] += lr * (mk / correction1) / (std::sqrt(vk / correction2) + cfg.epsilon);
    }
  }
}

double clip_global_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& g : grads.groups()) sq += dot(g.values, g.values);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) scale_in_place(grads, max_norm / norm);
  return norm;
}

LrSchedule LrSchedule::parse(std::string_view text, bool geometric) {
  LrSchedule s;
  s.points.clear();
  s.geometric = geometric;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string item(text.substr(0, comma));
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(fmt::format("learning-rate entry '{}' is not epoch:rate", item));
    char* end = nullptr;
    const std::string epoch_text = item.substr(0, colon), rate_text = item.substr(colon + 1);
    const unsigned long long epoch = std::strtoull(epoch_text.c_str(), &end, 10);
    if (epoch_text.empty() || *end != '\0' || epoch_text[0] == '-') {
      throw ConfigError(fmt::format("bad epoch in learning-rate entry '{}'", item));
    }
    const double rate = std::strtod(rate_text.c_str(), &end);
    if (rate_text.empty() || *end != '\0') throw ConfigError(fmt::format("bad rate in learning-rate entry '{}'", item));
    s.points.push_back({static_cast<std::size_t>(epoch), rate});
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  s.validate();
  return s;
}

std::string LrSchedule::to_string() const {
  std::string out;
  for (const auto& p : points) out += fmt::format("{}{}:{}", out.empty() ? "" : ",", p.from_epoch, p.rate);
  return out;
}

void LrSchedule::validate() const {
  if (points.empty() || points.front().from_epoch != 0) {
    throw ConfigError("learning-rate schedule must start at epoch 0");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].rate > 0.0) || !std::isfinite(points[i].rate)) {
      throw ConfigError(fmt::format("learning rate {} must be positive", points[i].rate));
    }
    if (i > 0 && points[i].from_epoch <= points[i - 1].from_epoch) {
      throw ConfigError("learning-rate schedule epochs must be strictly increasing");
    }
  }
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
  std::size_t i = 0;
  while (i + 1 < schedule.points.size() && schedule.points[i + 1].from_epoch <= epoch) ++i;
  const auto& cur = schedule.points[i];
  if (!schedule.geometric || i + 1 == schedule.points.size()) return cur.rate;
  const auto& next = schedule.points[i + 1];
  const double frac = static_cast<double>(epoch - cur.from_epoch) / static_cast<double>(next.from_epoch - cur.from_epoch);
  return cur.rate * std::pow(next.rate / cur.rate, frac);
}

}  // namespace vrae
