// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {
namespace {

void write_metrics(const std::filesystem::path& path, const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write metrics to {}", path.string()));
  out << format_metrics_csv(rows);
}

}  // namespace

BatchResult batch_gradient(const Params& p, const Dataset& dataset, std::span<const std::size_t> indices,
                           const std::vector<std::vector<Vec>>& noise, const ModelConfig& model, bool batch_mean,
                           std::size_t threads) {
  if (noise.size() != indices.size()) {
    throw DimensionError(fmt::format("batch_gradient: {} noise sets for {} sequences", noise.size(), indices.size()));
  }
  if (threads < 1) throw ConfigError("thread count must be at least 1");

  struct Slot {
    LossBreakdown loss;
    Gradients grads;
  };
  auto evaluate = [&](std::size_t k, Slot& slot) {
    const std::size_t i = indices[k];
    ElboResult r = elbo_with_noise(p, dataset.inputs.at(i), dataset.targets.at(i), noise[k], model);
    slot = {r.loss, backward(p, r.trace, model)};
  };

  BatchResult out{Params::zeros(model), {}};
  out.losses.reserve(indices.size());
  std::vector<Slot> wave(std::min(threads, indices.size()));
  for (std::size_t w = 0; w < indices.size(); w += threads) {
    const std::size_t count = std::min(threads, indices.size() - w);
    {
      std::vector<std::jthread> workers;
      for (std::size_t k = 1; k < count; ++k) workers.emplace_back([&, k] { evaluate(w + k, wave[k]); });
      evaluate(w, wave[0]);
    }
    for (std::size_t k = 0; k < count; ++k) {
      out.losses.push_back(wave[k].loss);
      accumulate(out.grads, wave[k].grads);
    }
  }
  if (batch_mean && !indices.empty()) scale_in_place(out.grads, 1.0 / static_cast<double>(indices.size()));
  return out;
}

void TrainConfig::seed_all(std::uint64_t seed) {
  model_seed = seed;
  shuffle_seed = seed ^ 0x5348554646ULL;
  noise_seed = seed ^ 0x4e4f495345ULL;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (log_every < 1) throw ConfigError("log interval must be at least 1");
  if (threads < 1) throw ConfigError("thread count must be at least 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  schedule.validate();
  adam.validate();
}

Checkpoint initial_checkpoint(const Dataset& dataset, const ModelConfig& model, const DataConfig& data,
                              const TrainConfig& cfg) {
  model.validate();
  Checkpoint c;
  c.model = model;
  c.data = data;
  c.params = init_params(model, cfg.model_seed);
  c.adam = AdamState::zeros(model);
  c.shuffle_rng = Rng(cfg.shuffle_seed).state();
  c.noise = GaussSource(cfg.noise_seed).state();
  c.pitch_map = dataset.size() > 0 ? dataset.pitch_map() : std::vector<int>(model.data_dim, 0);
  return c;
}

TrainResult train(const Dataset& dataset, const ModelConfig& model, const DataConfig& data, const TrainConfig& cfg,
                  std::optional<Checkpoint> resume, const MetricCallback& on_metric) {
  cfg.validate();
  model.validate();
  if (dataset.size() == 0) throw ConfigError("training dataset is empty");
  if (dataset.dims() != model.data_dim || dataset.frames() != model.seq_len) {
    throw DimensionError(fmt::format("dataset windows are {}x{} but the model expects T={} D={}", dataset.frames(),
                                     dataset.dims(), model.seq_len, model.data_dim));
  }
  if (resume && !(resume->model == model)) {
    throw ConfigError("model configuration differs from the checkpoint being resumed");
  }

  TrainResult result;
  result.checkpoint = resume ? std::move(*resume) : initial_checkpoint(dataset, model, data, cfg);
  Checkpoint& ck = result.checkpoint;
  if (ck.epoch > cfg.epochs) {
    throw ConfigError(fmt::format("checkpoint is at epoch {}, beyond the requested {} epochs", ck.epoch, cfg.epochs));
  }

  Rng shuffle(0);
  shuffle.set_state(ck.shuffle_rng);
  GaussSource noise(0);
  noise.set_state(ck.noise);
  const double time_offset = ck.history.empty() ? 0.0 : ck.history.back().seconds;
  const auto started = std::chrono::steady_clock::now();
  std::string last_saved = "none";
  if (!cfg.checkpoint_path.empty() && std::filesystem::exists(cfg.checkpoint_path)) {
    last_saved = cfg.checkpoint_path.string();
  }

  const std::size_t n = dataset.size();
  const double steps_per_seq = static_cast<double>(model.seq_len);
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = ck.epoch; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);
    const double lr = lr_at(cfg.schedule, epoch);

    double sum_lb_ts = 0.0, sum_lb = 0.0, sum_recon = 0.0, sum_kl = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<std::vector<Vec>> eps(end - begin);
      for (auto& e : eps) {
        for (std::size_t l = 0; l < model.mc_samples; ++l) e.push_back(draw_standard_normal(noise, model.latent_dim));
      }

      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      BatchResult br = batch_gradient(ck.params, dataset, batch, eps, model, cfg.batch_mean, cfg.threads);
      for (const LossBreakdown& loss : br.losses) {
        if (!std::isfinite(loss.lower_bound)) {
          throw TrainingDiverged(fmt::format("non-finite lower bound at epoch {} (last good checkpoint: {})",
                                             epoch + 1, last_saved));
        }
        sum_lb_ts += loss.lower_bound / steps_per_seq;
        sum_lb += loss.lower_bound;
        sum_recon += loss.recon_ll;
        sum_kl += loss.neg_kl;
      }
      Gradients& batch_grad = br.grads;
      if (cfg.clip_norm) clip_global_norm(batch_grad, *cfg.clip_norm);
      try {
        adam_step(ck.adam, ck.params, batch_grad, lr, cfg.adam);
      } catch (const DimensionError&) {
        throw;
      } catch (const Error& e) {
        throw TrainingDiverged(fmt::format("{} at epoch {} (last good checkpoint: {})", e.what(), epoch + 1, last_saved));
      }
      ++result.optimizer_steps;
    }

    ck.epoch = epoch + 1;
    ck.shuffle_rng = shuffle.state();
    ck.noise = noise.state();
    if (ck.epoch % cfg.log_every == 0 || ck.epoch == cfg.epochs) {
      const double dn = static_cast<double>(n);
      MetricRow row{ck.epoch, sum_lb_ts / dn, sum_lb / dn, sum_recon / dn, sum_kl / dn, lr, 0.0};
      if (cfg.record_wall_time) {
        row.seconds = time_offset +
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      }
      ck.history.push_back(row);
      result.history.push_back(row);
      if (!cfg.metrics_path.empty()) write_metrics(cfg.metrics_path, ck.history);
      if (on_metric) on_metric(row);
    }
    if (!cfg.checkpoint_path.empty() && cfg.save_every > 0 && ck.epoch % cfg.save_every == 0) {
      save_checkpoint(ck, cfg.checkpoint_path);
      last_saved = fmt::format("{} (epoch {})", cfg.checkpoint_path.string(), ck.epoch);
    }
  }

  if (!cfg.checkpoint_path.empty()) save_checkpoint(ck, cfg.checkpoint_path);
  if (!cfg.metrics_path.empty() && result.history.empty()) write_metrics(cfg.metrics_path, ck.history);
  return result;
}

}  // namespace vrae
