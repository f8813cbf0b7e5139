// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "vrae/error.hpp"

namespace vrae {
namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'V', 'R', 'A', 'E', 'C', 'K', 'P', 'T'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) {
    throw FormatError(fmt::format("checkpoint truncated at byte {}", pos));
  }
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

json model_to_json(const ModelConfig& m) {
  return {{"data_dim", m.data_dim},     {"hidden_dim", m.hidden_dim}, {"latent_dim", m.latent_dim},
          {"seq_len", m.seq_len},       {"mc_samples", m.mc_samples}, {"kl_scale", m.kl_scale}};
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.data_dim = j.at("data_dim").get<std::size_t>();
  m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  m.latent_dim = j.at("latent_dim").get<std::size_t>();
  m.seq_len = j.at("seq_len").get<std::size_t>();
  m.mc_samples = j.at("mc_samples").get<std::size_t>();
  m.kl_scale = j.at("kl_scale").get<double>();
  return m;
}

// Doubles that must survive bit-exactly travel as their IEEE bit patterns.
std::uint64_t bits(double x) { return std::bit_cast<std::uint64_t>(x); }
double from_bits(const json& j) { return std::bit_cast<double>(j.get<std::uint64_t>()); }

json header_json(const Checkpoint& c) {
  json metrics = json::array();
  for (const auto& r : c.history) {
    metrics.push_back({r.epoch, bits(r.lb_per_ts), bits(r.lb_per_dp), bits(r.recon_per_dp), bits(r.negkl_per_dp),
                       bits(r.lr), bits(r.seconds)});
  }
  json arrays = json::array();
  for (const auto& g : c.params.groups()) arrays.push_back({{"name", g.name}, {"rows", g.rows}, {"cols", g.cols}});

  return {{"model", model_to_json(c.model)},
          {"data",
           {{"window", c.data.window},
            {"stride", c.data.stride},
            {"limit", c.data.limit},
            {"reverse_input", c.data.reverse_input},
            {"rate_bits", bits(c.data.rate)}}},
          {"epoch", c.epoch},
          {"adam_step", c.adam.step},
          {"shuffle_rng", c.shuffle_rng},
          {"noise", {{"rng", c.noise.rng}, {"has_spare", c.noise.has_spare}, {"spare_bits", bits(c.noise.spare)}}},
          {"pitch_map", c.pitch_map},
          {"metric_columns", {"epoch", "lb_per_ts", "lb_per_dp", "recon_per_dp", "negkl_per_dp", "lr", "seconds"}},
          {"metrics", metrics},
          {"arrays", arrays}};
}

}  // namespace

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{},{},{}\n", r.epoch, r.lb_per_ts, r.recon_per_dp, r.negkl_per_dp, r.lr, r.seconds);
  }
  return out;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  if (!c.params.shaped_like(c.model) || !c.adam.first.shaped_like(c.model) || !c.adam.second.shaped_like(c.model)) {
    throw DimensionError("checkpoint arrays do not match its model configuration");
  }
  const std::string header = header_json(c).dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le(out, Checkpoint::kVersion, 4);
  put_le(out, header.size(), 8);
  out.insert(out.end(), header.begin(), header.end());
  for (const Params* p : {&c.params, &c.adam.first, &c.adam.second}) {
    for (const auto& g : p->groups()) {
      for (double x : g.values) put_le(out, bits(x), 8);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError("not a VRAE checkpoint (bad magic bytes)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = static_cast<std::uint32_t>(get_le(bytes, pos, 4));
  if (version != Checkpoint::kVersion) {
    throw FormatError(fmt::format("checkpoint version {} is not supported (expected {})", version, Checkpoint::kVersion));
  }
  const std::uint64_t header_len = get_le(bytes, pos, 8);
  if (header_len > bytes.size() - pos) throw FormatError("checkpoint truncated inside its header");

  Checkpoint c;
  try {
    const json h = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                               bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    c.model = model_from_json(h.at("model"));
    c.model.validate();
    const json& d = h.at("data");
    c.data = {d.at("window").get<std::size_t>(), d.at("stride").get<std::size_t>(), d.at("limit").get<std::size_t>(),
              d.at("reverse_input").get<bool>(), from_bits(d.at("rate_bits"))};
    c.epoch = h.at("epoch").get<std::size_t>();
    c.adam.step = h.at("adam_step").get<std::uint64_t>();
    c.shuffle_rng = h.at("shuffle_rng").get<Rng::State>();
    c.noise.rng = h.at("noise").at("rng").get<Rng::State>();
    c.noise.has_spare = h.at("noise").at("has_spare").get<bool>();
    c.noise.spare = from_bits(h.at("noise").at("spare_bits"));
    c.pitch_map = h.at("pitch_map").get<std::vector<int>>();
    for (const json& r : h.at("metrics")) {
      c.history.push_back({r.at(0).get<std::size_t>(), from_bits(r.at(1)), from_bits(r.at(2)), from_bits(r.at(3)),
                           from_bits(r.at(4)), from_bits(r.at(5)), from_bits(r.at(6))});
    }

    c.params = Params::zeros(c.model);
    const json& arrays = h.at("arrays");
    const auto groups = c.params.groups();
    if (arrays.size() != groups.size()) throw FormatError("checkpoint header lists the wrong number of arrays");
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (arrays[i].at("name").get<std::string>() != groups[i].name ||
          arrays[i].at("rows").get<std::size_t>() != groups[i].rows ||
          arrays[i].at("cols").get<std::size_t>() != groups[i].cols) {
        throw FormatError(fmt::format("checkpoint array {} does not match the model configuration", groups[i].name));
      }
    }
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("checkpoint header is invalid: {}", e.what()));
  }
  if (c.pitch_map.size() != c.model.data_dim) {
    throw FormatError(fmt::format("checkpoint pitch map has {} entries for D={}", c.pitch_map.size(), c.model.data_dim));
  }
  pos += header_len;

  c.adam.first = Params::zeros(c.model);
  c.adam.second = Params::zeros(c.model);
  const std::size_t expected = pos + 3 * c.params.size() * 8;
  if (bytes.size() != expected) {
    throw FormatError(fmt::format("checkpoint has {} bytes, header implies {}", bytes.size(), expected));
  }
  for (Params* p : {&c.params, &c.adam.first, &c.adam.second}) {
    for (auto& g : p->groups()) {
      for (double& x : g.values) x = std::bit_cast<double>(get_le(bytes, pos, 8));
    }
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(c);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path.string()));
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize_checkpoint(bytes);
}

}  // namespace vrae
