// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vrae/adam.hpp"
#include "vrae/checkpoint.hpp"
#include "vrae/error.hpp"
#include "vrae/model.hpp"
#include "vrae/piano_roll.hpp"

namespace vrae {

struct TrainConfig {
  std::size_t epochs = 1;  // total epochs, counting any resumed ones
  std::size_t batch_size = 64;
  std::uint64_t model_seed = 1;
  std::uint64_t shuffle_seed = 2;
  std::uint64_t noise_seed = 3;
  LrSchedule schedule;
  AdamConfig adam;
  std::optional<double> clip_norm;
  bool batch_mean = true;  // otherwise the batch gradient is a plain sum
  std::size_t log_every = 1;
  std::size_t save_every = 0;  // 0: only at the end
  std::size_t threads = 1;
  // When false the `seconds` metric is written as 0 so that repeated runs
  // produce byte-identical metrics and checkpoints.
  bool record_wall_time = true;
  std::filesystem::path checkpoint_path;  // empty: do not write
  std::filesystem::path metrics_path;     // empty: do not write

  /// Derives all three seeds from one user-facing seed.
  void seed_all(std::uint64_t seed);
  void validate() const;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<MetricRow> history;
  std::size_t optimizer_steps = 0;  // taken in this call
};

struct BatchResult {
  Gradients grads;                    // ascent direction, mean or sum over the batch
  std::vector<LossBreakdown> losses;  // in batch order
};

/// Lower bounds and gradients for `indices`, with noise[i] used for
/// sequence indices[i]. Sequences are evaluated `threads` at a time and
/// reduced in batch order, so the result does not depend on `threads`.
BatchResult batch_gradient(const Params& p, const Dataset& dataset, std::span<const std::size_t> indices,
                           const std::vector<std::vector<Vec>>& noise, const ModelConfig& model, bool batch_mean,
                           std::size_t threads = 1);

using MetricCallback = std::function<void(const MetricRow&)>;

/// A fresh checkpoint at epoch 0 with initialised parameters and seeded RNGs.
Checkpoint initial_checkpoint(const Dataset& dataset, const ModelConfig& model, const DataConfig& data,
                              const TrainConfig& cfg);

/// Runs epochs [start, cfg.epochs) where start is resume->epoch or 0. Each
/// epoch shuffles the sequences, walks them in batches and takes one Adam step
/// per batch at lr_at(schedule, epoch). `model` must equal the resumed
/// checkpoint's configuration.
TrainResult train(const Dataset& dataset, const ModelConfig& model, const DataConfig& data, const TrainConfig& cfg,
                  std::optional<Checkpoint> resume = std::nullopt, const MetricCallback& on_metric = {});

}  // namespace vrae
