// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/midi.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <tuple>
#include <utility>

#include <fmt/format.h>

#include "vrae/error.hpp"

namespace vrae {
namespace {

constexpr std::uint32_t kDefaultTempo = 500000;  // us per quarter note, 120 BPM

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  bool done() const { return pos_ >= end_; }
  std::size_t pos() const { return pos_; }

  std::uint8_t peek() const {
    need(1);
    return bytes_[pos_];
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] << 8 | bytes_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | bytes_[pos_++];
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = v << 7 | (b & 0x7F);
      if (!(b & 0x80)) return v;
    }
    throw FormatError(fmt::format("variable-length quantity longer than 4 bytes at offset {}", pos_));
  }
  std::string tag() {
    need(4);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError(fmt::format("truncated MIDI data at offset {}", pos_));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

struct TempoChange {
  std::uint64_t tick;
  std::uint32_t us_per_quarter;
};

struct TickNote {
  std::uint64_t on;
  std::uint64_t off;
  int pitch;
};

struct TrackResult {
  std::vector<TickNote> notes;
  std::vector<TempoChange> tempos;
};

TrackResult parse_track(Reader& r, int track_index, std::vector<std::string>& warnings) {
  TrackResult out;
  std::map<std::pair<int, int>, std::deque<std::uint64_t>> open;  // (channel, pitch) -> onsets
  std::uint64_t tick = 0;
  std::uint8_t running = 0;
  bool ended = false;

  while (!r.done() && !ended) {
    tick += r.vlq();
    std::uint8_t status = r.peek();
    if (status < 0x80) {
      if (running == 0) {
        throw FormatError(fmt::format("track {}: data byte 0x{:02x} at offset {} without a running status",
                                      track_index, status, r.pos()));
      }
      status = running;
    } else {
      r.u8();
    }

    if (status == 0xFF) {
      running = 0;
      const std::uint8_t type = r.u8();
      const std::uint32_t len = r.vlq();
      if (type == 0x51) {
        if (len != 3) throw FormatError(fmt::format("track {}: tempo event of length {}", track_index, len));
        const std::uint32_t tempo = static_cast<std::uint32_t>(r.u8()) << 16 |
                                    static_cast<std::uint32_t>(r.u8()) << 8 | r.u8();
        if (tempo == 0) throw FormatError(fmt::format("track {}: zero tempo", track_index));
        out.tempos.push_back({tick, tempo});
      } else {
        r.skip(len);
        if (type == 0x2F) ended = true;
      }
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      r.skip(r.vlq());
      continue;
    }
    if (status > 0xF0) {
      throw FormatError(fmt::format("track {}: status 0x{:02x} is not valid in a MIDI file", track_index, status));
    }

    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    const int data_len = (kind == 0xC0 || kind == 0xD0) ? 1 : 2;
    std::uint8_t data[2] = {0, 0};
    for (int i = 0; i < data_len; ++i) {
      data[i] = r.u8();
      if (data[i] & 0x80) {
        throw FormatError(fmt::format("track {}: status byte 0x{:02x} inside channel message at offset {}",
                                      track_index, data[i], r.pos() - 1));
      }
    }

    const bool note_on = kind == 0x90 && data[1] > 0;
    const bool note_off = kind == 0x80 || (kind == 0x90 && data[1] == 0);
    if (note_on) {
      open[{channel, data[0]}].push_back(tick);
    } else if (note_off) {
      auto it = open.find({channel, data[0]});
      if (it == open.end() || it->second.empty()) {
        warnings.push_back(fmt::format("track {}: note-off for pitch {} at tick {} without a note-on", track_index,
                                       data[0], tick));
        continue;
      }
      out.notes.push_back({it->second.front(), tick, data[0]});
      it->second.pop_front();
    }
  }

  for (auto& [key, onsets] : open) {
    for (std::uint64_t on : onsets) {
      warnings.push_back(fmt::format("track {}: note {} from tick {} never released; closed at track end tick {}",
                                     track_index, key.second, on, tick));
      out.notes.push_back({on, tick, key.second});
    }
  }
  return out;
}

class TempoMap {
 public:
  TempoMap(std::vector<TempoChange> changes, std::uint16_t division) : division_(division) {
    std::stable_sort(changes.begin(), changes.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    segments_.push_back({0, 0.0, kDefaultTempo});
    for (const auto& c : changes) {
      const Segment& last = segments_.back();
      const double start = last.seconds + span_seconds(c.tick - last.tick, last.tempo);
      if (c.tick == last.tick) {
        segments_.back().tempo = c.us_per_quarter;
      } else {
        segments_.push_back({c.tick, start, c.us_per_quarter});
      }
    }
  }

  double seconds(std::uint64_t tick) const {
    auto it = std::upper_bound(segments_.begin(), segments_.end(), tick,
                               [](std::uint64_t t, const Segment& s) { return t < s.tick; });
    const Segment& s = *std::prev(it);
    return s.seconds + span_seconds(tick - s.tick, s.tempo);
  }

 private:
  struct Segment {
    std::uint64_t tick;
    double seconds;
    std::uint32_t tempo;
  };

  double span_seconds(std::uint64_t ticks, std::uint32_t tempo) const {
    // Integer numerator keeps whole-frame exports exact up to one rounding.
    return static_cast<double>(ticks * tempo) / (static_cast<double>(division_) * 1e6);
  }

  std::uint16_t division_;
  std::vector<Segment> segments_;
};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_vlq(std::vector<std::uint8_t>& out, std::uint32_t v) {
  std::uint8_t buf[5];
  int n = 0;
  buf[n++] = v & 0x7F;
  while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

}  // namespace

MidiParse read_midi(std::span<const std::uint8_t> bytes) {
  Reader header(bytes, 0, bytes.size());
  if (bytes.size() < 4 || header.tag() != "MThd") throw FormatError("missing MThd header chunk");
  const std::uint32_t header_len = header.u32();
  if (header_len < 6) throw FormatError(fmt::format("MThd length {} is shorter than 6", header_len));
  const std::uint16_t format = header.u16();
  const std::uint16_t ntracks = header.u16();
  const std::uint16_t division = header.u16();
  header.skip(header_len - 6);
  if (format == 2) throw UnsupportedFormat("format-2 MIDI files are not supported");
  if (format > 2) throw FormatError(fmt::format("unknown MIDI format {}", format));
  if (division & 0x8000) throw UnsupportedFormat("SMPTE time division is not supported");
  if (division == 0) throw FormatError("division of zero ticks per quarter note");

  MidiParse result;
  std::vector<TickNote> notes;
  std::vector<TempoChange> tempos;
  int track_index = 0;
  std::size_t pos = header.pos();
  while (pos < bytes.size()) {
    Reader chunk(bytes, pos, bytes.size());
    const std::string id = chunk.tag();
    const std::uint32_t len = chunk.u32();
    const std::size_t body = chunk.pos();
    if (body + len > bytes.size()) {
      throw FormatError(fmt::format("chunk '{}' at offset {} declares {} bytes but only {} remain", id, pos, len,
                                    bytes.size() - body));
    }
    if (id == "MTrk") {
      Reader track(bytes, body, body + len);
      TrackResult t = parse_track(track, track_index++, result.warnings);
      notes.insert(notes.end(), t.notes.begin(), t.notes.end());
      tempos.insert(tempos.end(), t.tempos.begin(), t.tempos.end());
    }
    pos = body + len;
  }
  if (track_index != ntracks) {
    result.warnings.push_back(fmt::format("header declares {} tracks, found {}", ntracks, track_index));
  }

  const TempoMap tempo_map(std::move(tempos), division);
  for (const TickNote& n : notes) {
    if (n.off <= n.on) {
      result.warnings.push_back(fmt::format("dropped zero-length note {} at tick {}", n.pitch, n.on));
      continue;
    }
    result.notes.push_back({tempo_map.seconds(n.on), tempo_map.seconds(n.off), n.pitch});
  }
  std::sort(result.notes.begin(), result.notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
    return std::tie(a.onset, a.pitch, a.offset) < std::tie(b.onset, b.pitch, b.offset);
  });
  return result;
}

MidiParse read_midi_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return read_midi(bytes);
}

std::vector<std::uint8_t> write_midi(const PianoRoll& roll, int velocity) {
  if (velocity < 1 || velocity > 127) throw ConfigError(fmt::format("velocity {} outside 1..127", velocity));
  if (roll.rate <= 0.0) throw ConfigError("roll rate must be positive");

  std::vector<std::uint8_t> track;
  const auto tempo = static_cast<std::uint32_t>(std::llround(1e6 / roll.rate));
  put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x51, 0x03});
  track.push_back(static_cast<std::uint8_t>(tempo >> 16));
  track.push_back(static_cast<std::uint8_t>(tempo >> 8));
  track.push_back(static_cast<std::uint8_t>(tempo));

  std::uint64_t last_tick = 0;
  auto emit = [&](std::size_t frame, std::uint8_t status, std::size_t dim, std::uint8_t vel) {
    const std::uint64_t tick = static_cast<std::uint64_t>(frame) * kExportTicksPerFrame;
    put_vlq(track, static_cast<std::uint32_t>(tick - last_tick));
    last_tick = tick;
    track.push_back(status);
    track.push_back(static_cast<std::uint8_t>(roll.pitch_map[dim]));
    track.push_back(vel);
  };

  for (std::size_t t = 0; t <= roll.frames; ++t) {
    for (std::size_t d = 0; d < roll.dims; ++d) {
      const bool prev = t > 0 && roll.at(t - 1, d);
      const bool cur = t < roll.frames && roll.at(t, d);
      if (prev && !cur) emit(t, 0x80, d, 0);
    }
    for (std::size_t d = 0; d < roll.dims; ++d) {
      const bool prev = t > 0 && roll.at(t - 1, d);
      const bool cur = t < roll.frames && roll.at(t, d);
      if (cur && !prev) emit(t, 0x90, d, static_cast<std::uint8_t>(velocity));
    }
  }
  put_vlq(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<std::uint8_t> out{'M', 'T', 'h', 'd'};
  put_u32(out, 6);
  put_u16(out, 0);
  put_u16(out, 1);
  put_u16(out, kExportTicksPerFrame);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_u32(out, static_cast<std::uint32_t>(track.size()));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

}  // namespace vrae
