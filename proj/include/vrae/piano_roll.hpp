// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vrae/numerics.hpp"

namespace vrae {

/// A sounding note in absolute seconds; offset > onset, pitch in [0, 127].
struct NoteEvent {
  double onset = 0.0;
  double offset = 0.0;
  int pitch = 0;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Binary time x pitch matrix sampled at `rate` frames per second. Column d
/// holds MIDI pitch `pitch_map[d]`.
struct PianoRoll {
  std::size_t frames = 0;
  std::size_t dims = 0;
  double rate = 20.0;
  std::vector<std::uint8_t> cells;  // row-major frames x dims, each 0 or 1
  std::vector<int> pitch_map;

  PianoRoll() = default;
  PianoRoll(std::size_t t, std::size_t d, double r, std::vector<int> pitches);

  std::uint8_t& at(std::size_t t, std::size_t d) { return cells[t * dims + d]; }
  std::uint8_t at(std::size_t t, std::size_t d) const { return cells[t * dims + d]; }

  /// Frames as a T x D matrix of 0.0/1.0, optionally in reverse time order.
  Mat to_mat(bool reversed = false) const;

  friend bool operator==(const PianoRoll&, const PianoRoll&) = default;
};

inline constexpr double kDefaultRate = 20.0;
inline constexpr int kMidiPitches = 128;

/// Frame t covers [t/rate, (t+1)/rate); a cell is set when any note overlaps
/// that interval. Always 128 columns with pitch_map 0..127.
PianoRoll to_piano_roll(const std::vector<NoteEvent>& events, double rate = kDefaultRate);

/// Inverse of to_piano_roll for whole-frame runs: one event per maximal run.
std::vector<NoteEvent> roll_to_events(const PianoRoll& roll);

struct PruneResult {
  std::vector<PianoRoll> rolls;
  std::vector<int> kept;  // original pitches, increasing
};

/// Keeps pitch p iff it is active in at least `min_active` cells summed over
/// all rolls. Throws ConfigError if nothing survives.
PruneResult prune_pitches(const std::vector<PianoRoll>& rolls, std::size_t min_active);

/// Default pruning threshold: 1% of the total frame count, at least 1.
std::size_t default_min_active(const std::vector<PianoRoll>& rolls);

/// Start frames of every complete window, at most `limit` of them.
std::vector<std::size_t> window_starts(std::size_t frames, std::size_t window, std::size_t stride,
                                       std::size_t limit);

std::vector<PianoRoll> segment(const PianoRoll& roll, std::size_t window, std::size_t stride,
                               std::size_t limit);

struct LabeledRoll {
  std::string label;
  PianoRoll roll;
};

/// Fixed-length training windows. `inputs` is the encoder's view (time
/// reversed when reverse_input is set); `targets` is always forward order.
struct Dataset {
  std::vector<PianoRoll> windows;
  std::vector<std::string> labels;
  bool reverse_input = false;
  std::vector<Mat> inputs;
  std::vector<Mat> targets;

  std::size_t size() const { return windows.size(); }
  std::size_t frames() const { return windows.empty() ? 0 : windows.front().frames; }
  std::size_t dims() const { return windows.empty() ? 0 : windows.front().dims; }
  const std::vector<int>& pitch_map() const { return windows.front().pitch_map; }
};

Dataset build_dataset(const std::vector<LabeledRoll>& rolls, std::size_t window, std::size_t stride,
                      std::size_t limit, bool reverse_input);

// VRAE-ROLL v1 text format.
std::string format_roll(const PianoRoll& roll);
PianoRoll parse_roll(std::string_view text);
void save_roll(const PianoRoll& roll, const std::filesystem::path& path);
PianoRoll load_roll(const std::filesystem::path& path);

}  // namespace vrae
