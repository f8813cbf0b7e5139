// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/piano_roll.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {
namespace {

// Absorbs rounding when note times are exact multiples of the frame length.
constexpr double kFrameTolerance = 1e-9;

}  // namespace

PianoRoll::PianoRoll(std::size_t t, std::size_t d, double r, std::vector<int> pitches)
    : frames(t), dims(d), rate(r), cells(t * d, 0), pitch_map(std::move(pitches)) {
  if (pitch_map.size() != dims) {
    throw DimensionError(fmt::format("pitch map of length {} for {} dims", pitch_map.size(), dims));
  }
}

Mat PianoRoll::to_mat(bool reversed) const {
  Mat m(frames, dims);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t src = reversed ? frames - 1 - t : t;
    for (std::size_t d = 0; d < dims; ++d) m(t, d) = at(src, d);
  }
  return m;
}

PianoRoll to_piano_roll(const std::vector<NoteEvent>& events, double rate) {
  if (!(rate > 0.0)) throw ConfigError(fmt::format("rate must be positive, got {}", rate));
  std::vector<int> all(kMidiPitches);
  std::iota(all.begin(), all.end(), 0);

  double last = 0.0;
  for (const auto& e : events) {
    if (e.pitch < 0 || e.pitch >= kMidiPitches) throw Error(fmt::format("pitch {} outside 0..127", e.pitch));
    if (!(e.offset > e.onset) || e.onset < 0.0) {
      throw Error(fmt::format("note {} has invalid interval [{}, {})", e.pitch, e.onset, e.offset));
    }
    last = std::max(last, e.offset);
  }
  const auto frames =
      events.empty() ? std::size_t{0} : static_cast<std::size_t>(std::ceil(last * rate - kFrameTolerance));

  PianoRoll roll(frames, kMidiPitches, rate, std::move(all));
  for (const auto& e : events) {
    const auto first = static_cast<std::size_t>(std::floor(e.onset * rate + kFrameTolerance));
    const auto end = std::min(frames, static_cast<std::size_t>(std::ceil(e.offset * rate - kFrameTolerance)));
    for (std::size_t t = first; t < end; ++t) roll.at(t, static_cast<std::size_t>(e.pitch)) = 1;
  }
  return roll;
}

std::vector<NoteEvent> roll_to_events(const PianoRoll& roll) {
  std::vector<NoteEvent> events;
  for (std::size_t d = 0; d < roll.dims; ++d) {
    std::size_t t = 0;
    while (t < roll.frames) {
      if (!roll.at(t, d)) {
        ++t;
        continue;
      }
      const std::size_t start = t;
      while (t < roll.frames && roll.at(t, d)) ++t;
      events.push_back({start / roll.rate, t / roll.rate, roll.pitch_map[d]});
    }
  }
  std::sort(events.begin(), events.end(), [](const NoteEvent& a, const NoteEvent& b) {
    return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
  });
  return events;
}

PruneResult prune_pitches(const std::vector<PianoRoll>& rolls, std::size_t min_active) {
  PruneResult out;
  if (rolls.empty()) return out;
  const PianoRoll& ref = rolls.front();
  std::vector<std::size_t> counts(ref.dims, 0);
  for (const auto& roll : rolls) {
    if (roll.dims != ref.dims || roll.rate != ref.rate || roll.pitch_map != ref.pitch_map) {
      throw DimensionError("prune_pitches: rolls differ in rate or pitch dimensions");
    }
    for (std::size_t t = 0; t < roll.frames; ++t) {
      for (std::size_t d = 0; d < roll.dims; ++d) counts[d] += roll.at(t, d);
    }
  }

  std::vector<std::size_t> keep;
  for (std::size_t d = 0; d < ref.dims; ++d) {
    if (counts[d] >= min_active) {
      keep.push_back(d);
      out.kept.push_back(ref.pitch_map[d]);
    }
  }
  if (keep.empty()) {
    throw ConfigError(fmt::format("every pitch has fewer than {} active frames; nothing left after pruning",
                                  min_active));
  }

  for (const auto& roll : rolls) {
    PianoRoll pruned(roll.frames, keep.size(), roll.rate, out.kept);
    for (std::size_t t = 0; t < roll.frames; ++t) {
      for (std::size_t k = 0; k < keep.size(); ++k) pruned.at(t, k) = roll.at(t, keep[k]);
    }
    out.rolls.push_back(std::move(pruned));
  }
  return out;
}

std::size_t default_min_active(const std::vector<PianoRoll>& rolls) {
  std::size_t total = 0;
  for (const auto& r : rolls) total += r.frames;
  return std::max<std::size_t>(1, (total + 99) / 100);
}

std::vector<std::size_t> window_starts(std::size_t frames, std::size_t window, std::size_t stride,
                                       std::size_t limit) {
  if (window < 1) throw ConfigError("window must be at least 1");
  if (stride < 1 || stride > window) {
    throw ConfigError(fmt::format("stride {} must lie in [1, window={}]", stride, window));
  }
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + window <= frames && starts.size() < limit; s += stride) starts.push_back(s);
  return starts;
}

std::vector<PianoRoll> segment(const PianoRoll& roll, std::size_t window, std::size_t stride, std::size_t limit) {
  std::vector<PianoRoll> out;
  for (std::size_t start : window_starts(roll.frames, window, stride, limit)) {
    PianoRoll w(window, roll.dims, roll.rate, roll.pitch_map);
    std::copy_n(roll.cells.begin() + static_cast<std::ptrdiff_t>(start * roll.dims), window * roll.dims,
                w.cells.begin());
    out.push_back(std::move(w));
  }
  return out;
}

Dataset build_dataset(const std::vector<LabeledRoll>& rolls, std::size_t window, std::size_t stride,
                      std::size_t limit, bool reverse_input) {
  Dataset ds;
  ds.reverse_input = reverse_input;
  for (const auto& [label, roll] : rolls) {
    if (!rolls.empty() && (roll.dims != rolls.front().roll.dims || roll.pitch_map != rolls.front().roll.pitch_map)) {
      throw DimensionError(fmt::format("roll '{}' has {} dims; expected {}", label, roll.dims,
                                       rolls.front().roll.dims));
    }
    for (auto& w : segment(roll, window, stride, limit)) {
      ds.inputs.push_back(w.to_mat(reverse_input));
      ds.targets.push_back(w.to_mat(false));
      ds.windows.push_back(std::move(w));
      ds.labels.push_back(label);
    }
  }
  if (ds.windows.empty()) {
    throw ConfigError(fmt::format("no complete windows of {} frames in the supplied rolls", window));
  }
  return ds;
}

std::string format_roll(const PianoRoll& roll) {
  std::string out = fmt::format("VRAE-ROLL v1 T={} D={} rate={} pitches={}\n", roll.frames, roll.dims, roll.rate,
                                fmt::join(roll.pitch_map, ","));
  out.reserve(out.size() + roll.frames * (roll.dims + 1));
  for (std::size_t t = 0; t < roll.frames; ++t) {
    for (std::size_t d = 0; d < roll.dims; ++d) out.push_back(roll.at(t, d) ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view field, std::string_view key) {
  if (field.substr(0, key.size()) != key) {
    throw FormatError(fmt::format("roll header: expected '{}', got '{}'", key, field));
  }
  field.remove_prefix(key.size());
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    // from_chars for double is not available in every standard library we target.
    std::string s(field);
    char* end = nullptr;
    value = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw FormatError(fmt::format("roll header: bad number '{}'", s));
  } else {
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw FormatError(fmt::format("roll header: bad number '{}'", field));
    }
  }
  return value;
}

}  // namespace

PianoRoll parse_roll(std::string_view text) {
  const auto eol = text.find('\n');
  if (eol == std::string_view::npos) throw FormatError("roll: missing header line");
  std::istringstream header{std::string(text.substr(0, eol))};
  std::string magic, version, t_field, d_field, rate_field, pitch_field, extra;
  header >> magic >> version >> t_field >> d_field >> rate_field >> pitch_field;
  if (magic != "VRAE-ROLL" || version != "v1") throw FormatError("roll: not a VRAE-ROLL v1 file");
  if (header >> extra) throw FormatError(fmt::format("roll header: unexpected field '{}'", extra));

  const auto frames = parse_number<std::size_t>(t_field, "T=");
  const auto dims = parse_number<std::size_t>(d_field, "D=");
  const auto rate = parse_number<double>(rate_field, "rate=");
  if (pitch_field.rfind("pitches=", 0) != 0) throw FormatError("roll header: missing pitches field");
  std::vector<int> pitches;
  std::string_view list = std::string_view(pitch_field).substr(8);
  while (!list.empty()) {
    const auto comma = list.find(',');
    pitches.push_back(parse_number<int>(list.substr(0, comma), ""));
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  if (pitches.size() != dims) {
    throw FormatError(fmt::format("roll header: {} pitches listed for D={}", pitches.size(), dims));
  }
  for (std::size_t i = 0; i < pitches.size(); ++i) {
    if (pitches[i] < 0 || pitches[i] >= kMidiPitches || (i > 0 && pitches[i] <= pitches[i - 1])) {
      throw FormatError("roll header: pitches must be strictly increasing within 0..127");
    }
  }

  PianoRoll roll(frames, dims, rate, std::move(pitches));
  std::string_view body = text.substr(eol + 1);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto nl = body.find('\n');
    if (nl == std::string_view::npos) throw FormatError(fmt::format("roll: truncated at frame {}", t));
    const std::string_view line = body.substr(0, nl);
    if (line.size() != dims) throw FormatError(fmt::format("roll: frame {} has {} cells, expected {}", t, line.size(), dims));
    for (std::size_t d = 0; d < dims; ++d) {
      if (line[d] != '0' && line[d] != '1') throw FormatError(fmt::format("roll: invalid cell '{}' at frame {}", line[d], t));
      roll.at(t, d) = line[d] == '1';
    }
    body.remove_prefix(nl + 1);
  }
  if (!body.empty()) throw FormatError("roll: trailing data after last frame");
  return roll;
}

void save_roll(const PianoRoll& roll, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << format_roll(roll);
  if (!out) throw Error(fmt::format("write failed for {}", path.string()));
}

PianoRoll load_roll(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_roll(ss.str());
}

}  // namespace vrae
