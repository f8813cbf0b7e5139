// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vrae/adam.hpp"
#include "vrae/model.hpp"
#include "vrae/numerics.hpp"

namespace vrae {

/// One logged point of the training curve. Per-datapoint quantities are
/// averages over the epoch's sequences.
struct MetricRow {
  std::size_t epoch = 0;
  double lb_per_ts = 0.0;
  double lb_per_dp = 0.0;
  double recon_per_dp = 0.0;
  double negkl_per_dp = 0.0;
  double lr = 0.0;
  double seconds = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr const char* kMetricsCsvHeader = "epoch,lb_per_ts,recon_per_dp,negkl_per_dp,lr,seconds";
std::string format_metrics_csv(const std::vector<MetricRow>& rows);

/// How the training windows were cut, so that later commands can rebuild the
/// same view of a roll.
struct DataConfig {
  std::size_t window = 0;
  std::size_t stride = 0;
  std::size_t limit = 0;
  bool reverse_input = false;
  double rate = 20.0;

  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  ModelConfig model;
  DataConfig data;
  Params params;
  AdamState adam;
  std::size_t epoch = 0;
  Rng::State shuffle_rng{};
  GaussSource::State noise{};
  std::vector<int> pitch_map;
  std::vector<MetricRow> history;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Layout: "VRAECKPT", u32 version, u64 header length, JSON header, then every
// parameter group followed by the Adam first and second moments, each as
// little-endian doubles in declaration order.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vrae
