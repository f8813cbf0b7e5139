// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "vrae/model.hpp"

namespace vrae {

struct GroupError {
  std::string_view name;
  double max_rel_error = 0.0;
  std::size_t entries = 0;
};

struct GradCheckReport {
  std::array<GroupError, kParamGroupCount> groups{};
  double max_rel_error = 0.0;
};

/// The model shape used by `vrae gradcheck` when no dimensions are given.
ModelConfig gradcheck_reference_config();

/// Compares backward() with central differences of the lower bound on a
/// randomly initialised model, random binary data and fixed noise. Relative
/// error is |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport gradient_check(const ModelConfig& cfg, std::uint64_t seed, double step = 1e-5);

}  // namespace vrae
