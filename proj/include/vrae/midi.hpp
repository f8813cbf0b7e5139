// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vrae/piano_roll.hpp"

namespace vrae {

struct MidiParse {
  std::vector<NoteEvent> notes;  // sorted by (onset, pitch, offset)
  std::vector<std::string> warnings;
};

/// Parses a format 0 or 1 Standard MIDI File with ticks-per-quarter division.
/// Tracks are merged; channels are ignored. Throws FormatError on malformed
/// input and UnsupportedFormat on format 2 or SMPTE division.
MidiParse read_midi(std::span<const std::uint8_t> bytes);
MidiParse read_midi_file(const std::filesystem::path& path);

inline constexpr int kExportVelocity = 80;
inline constexpr int kExportTicksPerFrame = 480;

/// Format-0 SMF with one quarter note per frame; each run of set cells becomes
/// a note-on/note-off pair.
std::vector<std::uint8_t> write_midi(const PianoRoll& roll, int velocity = kExportVelocity);

}  // namespace vrae
