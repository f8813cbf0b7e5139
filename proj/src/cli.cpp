// Copyright 2026 The VRAE Authors
// SPDX-License-Identifier: Apache-2.0

#include "vrae/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "vrae/checkpoint.hpp"
#include "vrae/error.hpp"
#include "vrae/gradcheck.hpp"
#include "vrae/latent_ops.hpp"
#include "vrae/midi.hpp"
#include "vrae/piano_roll.hpp"
#include "vrae/trainer.hpp"

namespace vrae::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kGradcheckTolerance = 1e-4;

// Bad or conflicting flags that the parser itself cannot detect.
class UsageError : public Error {
 public:
  using Error::Error;
};

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

// Directories expand to their *.roll files in name order.
std::vector<fs::path> expand_roll_paths(const std::vector<std::string>& entries) {
  std::vector<fs::path> out;
  for (const auto& entry : entries) {
    const fs::path p(entry);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& f : fs::directory_iterator(p))
        if (f.is_regular_file() && f.path().extension() == ".roll") found.push_back(f.path());
      std::sort(found.begin(), found.end());
      if (found.empty()) throw Error(fmt::format("no .roll files in directory {}", p.string()));
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.push_back(p);
    }
  }
  return out;
}

std::vector<LabeledRoll> load_labeled(const std::vector<fs::path>& paths) {
  std::vector<LabeledRoll> rolls;
  rolls.reserve(paths.size());
  for (const auto& p : paths) rolls.push_back({p.stem().string(), load_roll(p)});
  for (const auto& r : rolls) {
    if (r.roll.rate != rolls.front().roll.rate)
      throw ConfigError(fmt::format("roll '{}' has frame rate {} but '{}' has {}", r.label, r.roll.rate,
                                    rolls.front().label, rolls.front().roll.rate));
  }
  return rolls;
}

json model_json(const ModelConfig& m) {
  return {{"data_dim", m.data_dim},     {"hidden_dim", m.hidden_dim}, {"latent_dim", m.latent_dim},
          {"seq_len", m.seq_len},       {"mc_samples", m.mc_samples}, {"kl_scale", m.kl_scale}};
}

json data_json(const DataConfig& d) {
  return {{"window", d.window}, {"stride", d.stride}, {"limit", d.limit}, {"reverse_input", d.reverse_input},
          {"rate", d.rate}};
}

json policy_json(const FeedbackPolicy& p) {
  return {{"policy", std::string(to_string(p.kind))}, {"threshold", p.threshold}, {"seed", p.seed}};
}

void print_config(std::ostream& out, const json& config) { out << config.dump(2) << "\n"; }

std::vector<std::string> paths_to_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw Error(fmt::format("cannot write {}", path.string()));
}

void write_generated(const PianoRoll& roll, const fs::path& path) {
  const auto ext = path.extension();
  if (ext == ".mid" || ext == ".midi") {
    const auto bytes = write_midi(roll);
    write_text(path, std::string(bytes.begin(), bytes.end()));
  } else {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    save_roll(roll, path);
  }
}

Dataset dataset_for_checkpoint(const Checkpoint& ck, const std::vector<LabeledRoll>& rolls) {
  const DataConfig& d = ck.data;
  Dataset ds = build_dataset(rolls, d.window, d.stride, d.limit, d.reverse_input);
  if (ds.pitch_map() != ck.pitch_map)
    throw Error("the rolls' pitch map differs from the one the checkpoint was trained on");
  return ds;
}

// ---------------------------------------------------------------- roll

struct RollOpts {
  std::vector<std::string> midi;
  std::string out = "rolls";
  std::size_t min_active = 0;
  double rate = kDefaultRate;
  CLI::Option* min_active_opt = nullptr;
};

int run_roll(const RollOpts& o, std::ostream& out, std::ostream& err) {
  if (!(o.rate > 0.0)) throw UsageError("--rate must be positive");
  std::vector<PianoRoll> rolls;
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& m : o.midi) {
    const std::string stem = fs::path(m).stem().string();
    if (!seen.insert(stem).second) throw UsageError(fmt::format("two MIDI inputs share the name '{}'", stem));
    names.push_back(stem);
  }
  print_config(out, {{"command", "roll"},
                     {"midi", o.midi},
                     {"out", o.out},
                     {"rate", o.rate},
                     {"min_active", given(o.min_active_opt) ? json(o.min_active) : json("auto")}});

  for (const auto& m : o.midi) {
    MidiParse parsed = read_midi_file(m);
    for (const auto& w : parsed.warnings) err << "warning: " << m << ": " << w << "\n";
    rolls.push_back(to_piano_roll(parsed.notes, o.rate));
  }
  const std::size_t min_active = given(o.min_active_opt) ? o.min_active : default_min_active(rolls);
  PruneResult pruned = prune_pitches(rolls, min_active);

  fs::create_directories(o.out);
  json files = json::array();
  for (std::size_t i = 0; i < pruned.rolls.size(); ++i) {
    const fs::path path = fs::path(o.out) / (names[i] + ".roll");
    save_roll(pruned.rolls[i], path);
    files.push_back({{"midi", o.midi[i]}, {"roll", path.string()}, {"frames", pruned.rolls[i].frames}});
  }
  const json report{{"min_active", min_active}, {"kept_pitches", pruned.kept}, {"files", files}};
  write_text(fs::path(o.out) / "pitch_map.json", report.dump(2) + "\n");
  out << fmt::format("kept {} of {} pitches (min_active {})\n", pruned.kept.size(), kMidiPitches, min_active);
  out << "pitch map: " << json(pruned.kept).dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::vector<std::string> rolls;
  std::string out = ".";
  std::size_t window = 50, stride = 50, limit = 520;
  bool reverse_input = false;
  std::size_t hidden = 500, latent = 2;
  std::size_t epochs = 1, batch_size = 64;
  std::string lr_schedule;
  double beta1 = 0.0, beta2 = 0.0;
  std::string convention = "modern";
  double kl_scale = 0.5;
  std::size_t mc_samples = 1;
  double clip_norm = 0.0;
  std::uint64_t seed = 1;
  std::string checkpoint, resume, preset;
  std::size_t threads = 1, log_every = 1, save_every = 0;
  bool no_wall_time = false;

  CLI::Option *window_opt, *stride_opt, *limit_opt, *reverse_opt, *hidden_opt, *latent_opt, *schedule_opt,
      *beta1_opt, *beta2_opt, *kl_opt, *mc_opt, *clip_opt;
};

// Model-shaping values that a checkpoint pins down.
struct Pinned {
  std::string flag;
  bool explicit_;
  std::string requested;
  std::string stored;
};

int run_train(TrainOpts& o, std::ostream& out, std::ostream& err) {
  const bool paper2d = o.preset == "paper-2d";
  const bool paper20d = o.preset == "paper-20d";
  const bool preset = paper2d || paper20d;

  // Preset values fill in whatever was not given explicitly.
  if (preset) {
    if (!given(o.hidden_opt)) o.hidden = 500;  // the 20-D hidden size is an assumption
    if (!given(o.latent_opt)) o.latent = paper2d ? 2 : 20;
    if (!given(o.window_opt)) o.window = paper2d ? 50 : 40;
    if (!given(o.stride_opt)) o.stride = paper2d ? 50 : 20;
    if (!given(o.limit_opt)) o.limit = 520;
  }

  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.seed_all(o.seed);
  if (given(o.schedule_opt)) {
    cfg.schedule = LrSchedule::parse(o.lr_schedule);
  } else if (paper2d) {
    cfg.schedule.points = {{0, 1e-3}, {std::max<std::size_t>(o.epochs, 2) - 1, 5e-6}};
    cfg.schedule.geometric = true;
  } else if (paper20d) {
    cfg.schedule = LrSchedule::parse("0:2e-5,16000:1e-5");
  }
  if (o.convention == "paper") {
    cfg.adam = AdamConfig::from_complements(given(o.beta1_opt) ? o.beta1 : 1.0 - AdamConfig{}.decay1,
                                            given(o.beta2_opt) ? o.beta2 : 1.0 - AdamConfig{}.decay2);
  } else {
    if (given(o.beta1_opt)) cfg.adam.decay1 = o.beta1;
    if (given(o.beta2_opt)) cfg.adam.decay2 = o.beta2;
  }
  if (given(o.clip_opt)) cfg.clip_norm = o.clip_norm;
  cfg.threads = o.threads;
  cfg.log_every = o.log_every;
  cfg.save_every = o.save_every;
  cfg.record_wall_time = !o.no_wall_time;
  cfg.checkpoint_path = o.checkpoint.empty() ? fs::path(o.out) / "vrae.ckpt" : fs::path(o.checkpoint);
  cfg.metrics_path = fs::path(o.out) / "metrics.csv";

  ModelConfig model;
  model.hidden_dim = o.hidden;
  model.latent_dim = o.latent;
  model.seq_len = o.window;
  model.mc_samples = o.mc_samples;
  model.kl_scale = o.kl_scale;
  DataConfig data{o.window, o.stride, o.limit, o.reverse_input, kDefaultRate};

  std::optional<Checkpoint> resume;
  if (!o.resume.empty()) {
    resume = load_checkpoint(o.resume);
    const Checkpoint& ck = *resume;
    const std::vector<Pinned> pinned{
        {"--hidden", given(o.hidden_opt) || preset, fmt::format("{}", o.hidden), fmt::format("{}", ck.model.hidden_dim)},
        {"--latent", given(o.latent_opt) || preset, fmt::format("{}", o.latent), fmt::format("{}", ck.model.latent_dim)},
        {"--window", given(o.window_opt) || preset, fmt::format("{}", o.window), fmt::format("{}", ck.data.window)},
        {"--stride", given(o.stride_opt) || preset, fmt::format("{}", o.stride), fmt::format("{}", ck.data.stride)},
        {"--limit", given(o.limit_opt) || preset, fmt::format("{}", o.limit), fmt::format("{}", ck.data.limit)},
        {"--reverse-input", given(o.reverse_opt), fmt::format("{}", o.reverse_input),
         fmt::format("{}", ck.data.reverse_input)},
        {"--kl-scale", given(o.kl_opt), fmt::format("{}", o.kl_scale), fmt::format("{}", ck.model.kl_scale)},
        {"--mc-samples", given(o.mc_opt), fmt::format("{}", o.mc_samples), fmt::format("{}", ck.model.mc_samples)},
    };
    for (const auto& p : pinned) {
      if (p.explicit_ && p.requested != p.stored)
        throw UsageError(fmt::format("{} {} conflicts with the resumed checkpoint, which has {}", p.flag, p.requested,
                                     p.stored));
    }
    model = ck.model;
    data = ck.data;
  }

  const auto paths = expand_roll_paths(o.rolls);
  auto rolls = load_labeled(paths);
  if (!resume) data.rate = rolls.front().roll.rate;
  model.data_dim = rolls.front().roll.dims;

  json train_json{{"epochs", cfg.epochs},
                  {"batch_size", cfg.batch_size},
                  {"seed", o.seed},
                  {"model_seed", cfg.model_seed},
                  {"shuffle_seed", cfg.shuffle_seed},
                  {"noise_seed", cfg.noise_seed},
                  {"lr_schedule", cfg.schedule.to_string()},
                  {"lr_geometric", cfg.schedule.geometric},
                  {"adam", {{"decay1", cfg.adam.decay1}, {"decay2", cfg.adam.decay2}, {"epsilon", cfg.adam.epsilon}}},
                  {"adam_beta_convention", o.convention},
                  {"clip_norm", cfg.clip_norm ? json(*cfg.clip_norm) : json(nullptr)},
                  {"batch_mean", cfg.batch_mean},
                  {"log_every", cfg.log_every},
                  {"save_every", cfg.save_every},
                  {"threads", cfg.threads},
                  {"record_wall_time", cfg.record_wall_time},
                  {"checkpoint", cfg.checkpoint_path.string()},
                  {"metrics", cfg.metrics_path.string()},
                  {"resume", o.resume.empty() ? json(nullptr) : json(o.resume)}};
  print_config(out, {{"command", "train"},
                     {"preset", preset ? json(o.preset) : json(nullptr)},
                     {"rolls", paths_to_strings(paths)},
                     {"model", model_json(model)},
                     {"data", data_json(data)},
                     {"train", train_json}});

  const Dataset ds = build_dataset(rolls, data.window, data.stride, data.limit, data.reverse_input);
  rolls.clear();
  out << fmt::format("dataset: {} sequences of {} frames x {} pitches\n", ds.size(), ds.frames(), ds.dims());
  fs::create_directories(fs::path(o.out));

  const auto on_metric = [&out](const MetricRow& r) {
    out << fmt::format("epoch {} lb_per_ts {:.6f} recon_per_dp {:.4f} negkl_per_dp {:.4f} lr {:.3g} ({:.1f}s)\n",
                       r.epoch, r.lb_per_ts, r.recon_per_dp, r.negkl_per_dp, r.lr, r.seconds);
    out.flush();
  };
  const TrainResult result = train(ds, model, data, cfg, resume, on_metric);
  out << fmt::format("trained to epoch {} in {} optimizer steps; checkpoint {}\n", result.checkpoint.epoch,
                     result.optimizer_steps, cfg.checkpoint_path.string());
  (void)err;
  return kExitOk;
}

// ---------------------------------------------------------------- encode

struct EncodeOpts {
  std::string checkpoint = "vrae.ckpt";
  std::vector<std::string> rolls;
  std::string out = "latent.csv";
};

int run_encode(const EncodeOpts& o, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto paths = expand_roll_paths(o.rolls);
  print_config(out, {{"command", "encode"},
                     {"checkpoint", o.checkpoint},
                     {"rolls", paths_to_strings(paths)},
                     {"out", o.out},
                     {"model", model_json(ck.model)},
                     {"data", data_json(ck.data)}});
  const Dataset ds = dataset_for_checkpoint(ck, load_labeled(paths));
  const LatentTable table = encode_dataset(ck.params, ds);
  write_text(o.out, format_latent_csv(table));
  out << fmt::format("wrote {} latent rows to {}\n", table.size(), o.out);
  return kExitOk;
}

// ---------------------------------------------------------------- generate / interpolate

struct PolicyOpts {
  std::string policy = "sample";
  double threshold = 0.5;
  std::uint64_t seed = 0;

  FeedbackPolicy resolve() const {
    FeedbackPolicy p{FeedbackPolicy::parse_kind(policy), threshold, seed};
    p.validate();
    return p;
  }
};

void add_policy_flags(CLI::App* app, PolicyOpts& p) {
  app->add_option("--policy", p.policy, "Feedback policy: sample, threshold or expectation")->capture_default_str();
  app->add_option("--threshold", p.threshold, "Cutoff for the threshold policy")->capture_default_str();
  app->add_option("--seed", p.seed, "Seed for the sample policy")->capture_default_str();
}

struct GenerateOpts {
  std::string checkpoint = "vrae.ckpt";
  std::uint64_t prior_seed = 0;
  std::vector<std::string> rolls;
  std::size_t index = 0;
  std::size_t length = 1000;
  std::string out = "generated.roll";
  PolicyOpts policy;
  CLI::Option *prior_opt, *index_opt;
};

int run_generate(const GenerateOpts& o, std::ostream& out) {
  const bool from_prior = given(o.prior_opt);
  const bool from_data = !o.rolls.empty();
  if (from_prior == from_data) throw UsageError("give exactly one of --prior-seed or --rolls/--index");
  if (given(o.index_opt) && !from_data) throw UsageError("--index needs --rolls");
  const FeedbackPolicy policy = o.policy.resolve();
  const Checkpoint ck = load_checkpoint(o.checkpoint);

  Vec z;
  json source;
  if (from_prior) {
    z = sample_prior(ck.model.latent_dim, o.prior_seed);
    source = {{"prior_seed", o.prior_seed}};
  } else {
    const auto paths = expand_roll_paths(o.rolls);
    const Dataset ds = dataset_for_checkpoint(ck, load_labeled(paths));
    if (o.index >= ds.size())
      throw UsageError(fmt::format("--index {} is out of range for {} sequences", o.index, ds.size()));
    z = encode(ck.params, ds.inputs[o.index]).stats.mu;
    source = {{"rolls", paths_to_strings(paths)}, {"index", o.index}, {"label", ds.labels[o.index]}};
  }
  print_config(out, {{"command", "generate"},
                     {"checkpoint", o.checkpoint},
                     {"source", source},
                     {"z", z},
                     {"length", o.length},
                     {"feedback", policy_json(policy)},
                     {"rate", ck.data.rate},
                     {"out", o.out}});
  const Generated g = generate(ck.params, z, o.length, policy, ck.data.rate, ck.pitch_map);
  write_generated(g.roll, o.out);
  out << fmt::format("wrote {} frames to {}\n", g.roll.frames, o.out);
  return kExitOk;
}

struct InterpolateOpts {
  std::string checkpoint = "vrae.ckpt";
  std::vector<std::string> rolls;
  std::size_t from = 0, to = 1, steps = 5, length = 0;
  std::string out = "interpolation";
  PolicyOpts policy;
};

int run_interpolate(const InterpolateOpts& o, std::ostream& out) {
  const FeedbackPolicy policy = o.policy.resolve();
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  const auto paths = expand_roll_paths(o.rolls);
  const std::size_t length = o.length == 0 ? ck.model.seq_len : o.length;
  print_config(out, {{"command", "interpolate"},
                     {"checkpoint", o.checkpoint},
                     {"rolls", paths_to_strings(paths)},
                     {"from", o.from},
                     {"to", o.to},
                     {"steps", o.steps},
                     {"length", length},
                     {"feedback", policy_json(policy)},
                     {"out", o.out}});
  const Dataset ds = dataset_for_checkpoint(ck, load_labeled(paths));
  for (std::size_t i : {o.from, o.to})
    if (i >= ds.size()) throw UsageError(fmt::format("index {} is out of range for {} sequences", i, ds.size()));
  const Vec a = encode(ck.params, ds.inputs[o.from]).stats.mu;
  const Vec b = encode(ck.params, ds.inputs[o.to]).stats.mu;
  const auto path = interpolate(a, b, o.steps);

  fs::create_directories(o.out);
  std::string csv = "step";
  for (std::size_t j = 0; j < a.size(); ++j) csv += fmt::format(",z_{}", j);
  csv += "\n";
  for (std::size_t k = 0; k < path.size(); ++k) {
    const Generated g = generate(ck.params, path[k], length, policy, ck.data.rate, ck.pitch_map);
    save_roll(g.roll, fs::path(o.out) / fmt::format("step_{:03}.roll", k));
    csv += fmt::format("{}", k);
    for (double v : path[k]) csv += fmt::format(",{}", v);
    csv += "\n";
  }
  write_text(fs::path(o.out) / "latents.csv", csv);
  out << fmt::format("wrote {} rolls to {}\n", path.size(), o.out);
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(std::uint64_t seed, std::ostream& out, std::ostream& err) {
  const ModelConfig cfg = gradcheck_reference_config();
  print_config(out, {{"command", "gradcheck"}, {"seed", seed}, {"step", 1e-5}, {"model", model_json(cfg)}});
  const GradCheckReport report = gradient_check(cfg, seed);
  for (const auto& g : report.groups)
    out << fmt::format("{:8} {:4} entries  max rel error {:.3e}\n", g.name, g.entries, g.max_rel_error);
  out << fmt::format("max relative error: {:.3e}\n", report.max_rel_error);
  if (!(report.max_rel_error < kGradcheckTolerance)) {
    err << fmt::format("error: gradient check failed ({:.3e} >= {:.0e})\n", report.max_rel_error,
                       kGradcheckTolerance);
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Variational recurrent auto-encoder for piano rolls", "vrae"};
  app.require_subcommand(1);

  RollOpts roll;
  auto* roll_cmd = app.add_subcommand("roll", "Convert MIDI files to pruned piano-roll files");
  roll_cmd->add_option("--midi", roll.midi, "Input MIDI files")->required();
  roll_cmd->add_option("--out", roll.out, "Output directory")->capture_default_str();
  roll.min_active_opt =
      roll_cmd->add_option("--min-active", roll.min_active, "Keep pitches active in at least this many frames");
  roll_cmd->add_option("--rate", roll.rate, "Frames per second")->capture_default_str();

  TrainOpts tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model on piano-roll files");
  train_cmd->add_option("--rolls", tr.rolls, "Roll files or directories")->required();
  train_cmd->add_option("--out", tr.out, "Directory for metrics and the default checkpoint")->capture_default_str();
  tr.window_opt = train_cmd->add_option("--window", tr.window, "Frames per sequence")->capture_default_str();
  tr.stride_opt = train_cmd->add_option("--stride", tr.stride, "Frames between window starts")->capture_default_str();
  tr.limit_opt = train_cmd->add_option("--limit", tr.limit, "Windows kept per song")->capture_default_str();
  tr.reverse_opt = train_cmd->add_flag("--reverse-input", tr.reverse_input, "Feed the encoder time-reversed input");
  tr.hidden_opt = train_cmd->add_option("--hidden", tr.hidden, "Hidden units")->capture_default_str();
  tr.latent_opt = train_cmd->add_option("--latent", tr.latent, "Latent dimensions")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Total epochs, counting resumed ones")->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size, "Sequences per batch")->capture_default_str();
  tr.schedule_opt = train_cmd->add_option("--lr-schedule", tr.lr_schedule, "Comma list epoch:rate (default 0:0.001)");
  tr.beta1_opt = train_cmd->add_option("--adam-beta1", tr.beta1, "First-moment beta (see --adam-beta-convention)");
  tr.beta2_opt = train_cmd->add_option("--adam-beta2", tr.beta2, "Second-moment beta");
  train_cmd->add_option("--adam-beta-convention", tr.convention, "modern: betas are decay rates; paper: complements")
      ->check(CLI::IsMember({"modern", "paper"}))
      ->capture_default_str();
  tr.kl_opt = train_cmd->add_option("--kl-scale", tr.kl_scale, "Coefficient of the KL sum")->capture_default_str();
  tr.mc_opt = train_cmd->add_option("--mc-samples", tr.mc_samples, "Latent samples per sequence")->capture_default_str();
  tr.clip_opt = train_cmd->add_option("--clip-norm", tr.clip_norm, "Global gradient norm cap (default off)");
  train_cmd->add_option("--seed", tr.seed, "Seed for initialisation, shuffling and noise")->capture_default_str();
  train_cmd->add_option("--checkpoint", tr.checkpoint, "Checkpoint path (default <out>/vrae.ckpt)");
  train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint");
  train_cmd->add_option("--preset", tr.preset, "Named settings: paper-2d or paper-20d")
      ->check(CLI::IsMember({"paper-2d", "paper-20d"}));
  train_cmd->add_option("--threads", tr.threads, "Worker threads per batch")->capture_default_str();
  train_cmd->add_option("--log-every", tr.log_every, "Epochs between metric rows")->capture_default_str();
  train_cmd->add_option("--save-every", tr.save_every, "Epochs between checkpoints (0: end only)")
      ->capture_default_str();
  train_cmd->add_flag("--no-wall-time", tr.no_wall_time, "Record 0 seconds so reruns are byte-identical");

  EncodeOpts enc;
  auto* encode_cmd = app.add_subcommand("encode", "Write latent means and log sigmas as CSV");
  encode_cmd->add_option("--checkpoint", enc.checkpoint, "Trained checkpoint")->capture_default_str();
  encode_cmd->add_option("--rolls", enc.rolls, "Roll files or directories")->required();
  encode_cmd->add_option("--out", enc.out, "CSV path")->capture_default_str();

  GenerateOpts gen;
  auto* generate_cmd = app.add_subcommand("generate", "Free-run the decoder from one latent code");
  generate_cmd->add_option("--checkpoint", gen.checkpoint, "Trained checkpoint")->capture_default_str();
  gen.prior_opt = generate_cmd->add_option("--prior-seed", gen.prior_seed, "Draw z from the prior with this seed");
  generate_cmd->add_option("--rolls", gen.rolls, "Encode a sequence from these rolls instead");
  gen.index_opt = generate_cmd->add_option("--index", gen.index, "Sequence index within --rolls")
                      ->capture_default_str();
  generate_cmd->add_option("--length", gen.length, "Frames to generate")->capture_default_str();
  generate_cmd->add_option("--out", gen.out, "Output .roll or .mid file")->capture_default_str();
  add_policy_flags(generate_cmd, gen.policy);

  InterpolateOpts interp;
  auto* interp_cmd = app.add_subcommand("interpolate", "Decode along a line between two encoded sequences");
  interp_cmd->add_option("--checkpoint", interp.checkpoint, "Trained checkpoint")->capture_default_str();
  interp_cmd->add_option("--rolls", interp.rolls, "Roll files or directories")->required();
  interp_cmd->add_option("--from", interp.from, "First sequence index")->capture_default_str();
  interp_cmd->add_option("--to", interp.to, "Second sequence index")->capture_default_str();
  interp_cmd->add_option("--steps", interp.steps, "Points on the line, endpoints included")->capture_default_str();
  interp_cmd->add_option("--length", interp.length, "Frames per roll (default: training window)");
  interp_cmd->add_option("--out", interp.out, "Output directory")->capture_default_str();
  add_policy_flags(interp_cmd, interp.policy);

  std::uint64_t gc_seed = 7;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
  gradcheck_cmd->add_option("--seed", gc_seed, "Seed for the random model")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (roll_cmd->parsed()) return run_roll(roll, out, err);
    if (train_cmd->parsed()) return run_train(tr, out, err);
    if (encode_cmd->parsed()) return run_encode(enc, out);
    if (generate_cmd->parsed()) return run_generate(gen, out);
    if (interp_cmd->parsed()) return run_interpolate(interp, out);
    if (gradcheck_cmd->parsed()) return run_gradcheck(gc_seed, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace vrae::cli
