// Copyright 2026 The tokenmark Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tokenmark/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tokenmark/parallel.hpp"
#include "tokenmark/random.hpp"
#include "tokenmark/stats.hpp"
#include "tokenmark/student.hpp"

namespace tokenmark {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double mean_of(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail("expected an object");
  }

  void allow(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw ConfigError(where(key) + ": unknown key");
      }
    }
  }

  bool has(const char* key) const { return obj_.contains(key); }
  const json& at(const char* key) const { return obj_.at(key); }
  std::string where(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(where(key) + ": expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!is_count(v)) throw ConfigError(where(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  static bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_boolean()) throw ConfigError(where(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(where(key) + ": expected an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> sizes(const char* key) const {
    const json& v = obj_.at(key);
    if (!v.is_array()) throw ConfigError(where(key) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& x : v) {
      if (!is_count(x)) throw ConfigError(where(key) + ": expected an array of integers");
      out.push_back(x.get<std::size_t>());
    }
    return out;
  }

  std::optional<Reader> child(const char* key) const {
    if (!has(key)) return std::nullopt;
    return Reader(obj_.at(key), where(key));
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError((path_.empty() ? std::string("config") : path_) + ": " + msg);
  }

 private:
  const json& obj_;
  std::string path_;
};

// Runs a library parser/validator and rewrites its complaint as a ConfigError.
template <typename Fn>
auto checked(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::shared_ptr<const UnitSchedule> read_schedule(const Reader& r) {
  r.allow({"kind", "side_lengths", "unit_sizes", "tokens"});
  const ScheduleKind kind =
      checked(r.where("kind"), [&] { return parse_schedule_kind(r.string("kind", "multiscale")); });
  const int forms = r.has("side_lengths") + r.has("unit_sizes") + r.has("tokens");
  if (forms > 1) r.fail("give only one of side_lengths, unit_sizes, tokens");
  return checked(r.where("kind"), [&] {
    if (kind == ScheduleKind::kPerToken) {
      if (r.has("side_lengths")) r.fail("side_lengths needs kind multiscale");
      if (r.has("unit_sizes")) return std::make_shared<const UnitSchedule>(kind, r.sizes("unit_sizes"));
      return std::make_shared<const UnitSchedule>(make_rar_schedule(r.unsigned_int("tokens", 680)));
    }
    if (r.has("tokens")) r.fail("tokens needs kind pertoken");
    if (r.has("unit_sizes")) return std::make_shared<const UnitSchedule>(kind, r.sizes("unit_sizes"));
    if (r.has("side_lengths")) {
      const auto sides = r.sizes("side_lengths");
      return std::make_shared<const UnitSchedule>(make_multiscale_schedule(sides));
    }
    return std::make_shared<const UnitSchedule>(make_var_schedule());
  });
}

ChannelSpec read_channel(const Reader& r, std::uint64_t default_seed) {
  r.allow({"preset", "kind", "flip_prob", "per_unit_probs", "replacement", "seed", "burst_length",
           "nearby_radius"});
  ChannelSpec spec;
  spec.channel_seed = r.unsigned_int("seed", default_seed);
  if (r.has("preset")) {
    if (r.has("kind") || r.has("flip_prob") || r.has("replacement")) {
      r.fail("preset cannot be combined with kind, flip_prob or replacement");
    }
    const auto preset =
        checked(r.where("preset"), [&] { return parse_attack_preset(r.string("preset", "none")); });
    spec = attack_preset(preset, spec.channel_seed);
  } else {
    spec.kind = checked(r.where("kind"), [&] { return parse_channel_kind(r.string("kind", "lossless")); });
    spec.flip_prob = r.number("flip_prob", 0.0);
    spec.replacement = checked(r.where("replacement"), [&] {
      return parse_replacement(r.string("replacement", "uniform_random"));
    });
  }
  spec.per_unit_probs = r.numbers("per_unit_probs", {});
  spec.burst_length = r.unsigned_int("burst_length", spec.burst_length);
  spec.nearby_radius = r.unsigned_int("nearby_radius", spec.nearby_radius);
  return spec;
}

}  // namespace

std::uint64_t purpose_seed(const ExperimentConfig& config, std::string_view purpose) {
  return derive_seed(config.master_seed, purpose);
}

ExperimentConfig config_from_json(const json& j) {
  const Reader root(j, "");
  root.allow({"codebook_size", "schedule", "watermark", "model", "channel", "student", "trials",
              "sweeps", "fpr", "output_dir", "master_seed", "threads"});
  ExperimentConfig c;
  c.master_seed = root.unsigned_int("master_seed", c.master_seed);
  c.codebook = checked("codebook_size", [&] {
    return Codebook(root.unsigned_int("codebook_size", kDefaultCodebookSize));
  });
  if (auto r = root.child("schedule")) c.schedule = read_schedule(*r);

  if (auto r = root.child("watermark")) {
    r->allow({"gamma", "delta", "tau", "initial_seed", "hash", "prg"});
    c.watermark.gamma = r->number("gamma", c.watermark.gamma);
    c.watermark.delta = r->number("delta", c.watermark.delta);
    c.watermark.tau = r->number("tau", c.watermark.tau);
    c.watermark.initial_seed = r->unsigned_int("initial_seed", c.watermark.initial_seed);
    c.chain.hash = checked(r->where("hash"), [&] {
      return parse_hash_algorithm(r->string("hash", std::string(to_string(c.chain.hash))));
    });
    c.chain.prg = checked(r->where("prg"), [&] {
      return parse_prg_algorithm(r->string("prg", std::string(to_string(c.chain.prg))));
    });
  }
  checked("watermark", [&] { c.watermark.validate(c.codebook); return 0; });

  c.model.model_seed = purpose_seed(c, "model");
  if (auto r = root.child("model")) {
    r->allow({"seed", "temperature", "context_sensitive", "bank_size"});
    c.model.model_seed = r->unsigned_int("seed", c.model.model_seed);
    c.model.temperature = r->number("temperature", c.model.temperature);
    c.model.context_sensitive = r->boolean("context_sensitive", c.model.context_sensitive);
    c.model.bank_size = r->unsigned_int("bank_size", c.model.bank_size);
  }
  if (!(c.model.temperature > 0.0) || !std::isfinite(c.model.temperature)) {
    throw ConfigError("model.temperature: must be positive");
  }
  if (c.model.bank_size == 0) throw ConfigError("model.bank_size: must be positive");

  const std::uint64_t channel_seed = purpose_seed(c, "channel");
  c.channel.channel_seed = channel_seed;
  if (auto r = root.child("channel")) c.channel = read_channel(*r, channel_seed);
  checked("channel", [&] { c.channel.validate_for(*c.schedule); return 0; });

  if (auto r = root.child("student")) {
    r->allow({"order", "smoothing"});
    c.student_order = r->unsigned_int("order", c.student_order);
    c.smoothing = r->number("smoothing", c.smoothing);
  }
  if (c.student_order > kMaxStudentOrder) {
    throw ConfigError("student.order: at most " + std::to_string(kMaxStudentOrder));
  }
  if (!(c.smoothing > 0.0) || !std::isfinite(c.smoothing)) {
    throw ConfigError("student.smoothing: must be positive");
  }

  if (auto r = root.child("trials")) {
    r->allow({"watermarked", "clean", "calibration", "train", "eval"});
    c.trials.watermarked = r->unsigned_int("watermarked", c.trials.watermarked);
    c.trials.clean = r->unsigned_int("clean", c.trials.clean);
    c.trials.calibration = r->unsigned_int("calibration", c.trials.calibration);
    c.trials.train = r->unsigned_int("train", c.trials.train);
    c.trials.eval = r->unsigned_int("eval", c.trials.eval);
  }
  for (const auto& [name, value] :
       {std::pair{"watermarked", c.trials.watermarked}, std::pair{"clean", c.trials.clean},
        std::pair{"calibration", c.trials.calibration}, std::pair{"train", c.trials.train},
        std::pair{"eval", c.trials.eval}}) {
    if (value == 0) throw ConfigError(std::string("trials.") + name + ": must be positive");
  }

  if (auto r = root.child("sweeps")) {
    r->allow({"delta", "flip_prob", "attacks", "radioactivity_delta"});
    c.sweeps.delta = r->numbers("delta", c.sweeps.delta);
    c.sweeps.flip_prob = r->numbers("flip_prob", c.sweeps.flip_prob);
    c.sweeps.radioactivity_delta = r->numbers("radioactivity_delta", {});
    if (r->has("attacks")) {
      const json& a = r->at("attacks");
      if (!a.is_array()) throw ConfigError("sweeps.attacks: expected an array of preset names");
      c.sweeps.attacks.clear();
      for (const auto& name : a) {
        if (!name.is_string()) throw ConfigError("sweeps.attacks: expected an array of preset names");
        c.sweeps.attacks.push_back(
            checked("sweeps.attacks", [&] { return parse_attack_preset(name.get<std::string>()); }));
      }
    }
  }
  for (const double d : c.sweeps.delta) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("sweeps.delta: values must be >= 0");
  }
  for (const double d : c.sweeps.radioactivity_delta) {
    if (!(d >= 0.0) || !std::isfinite(d)) {
      throw ConfigError("sweeps.radioactivity_delta: values must be >= 0");
    }
  }
  for (const double p : c.sweeps.flip_prob) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweeps.flip_prob: values must lie in [0, 1]");
  }

  c.fpr = root.number("fpr", c.fpr);
  if (!(c.fpr > 0.0 && c.fpr < 1.0)) throw ConfigError("fpr: must lie in (0, 1)");
  c.output_dir = root.string("output_dir", c.output_dir.string());
  if (c.output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  const std::uint64_t threads = root.unsigned_int("threads", 0);
  c.threads = threads == 0 ? default_thread_count() : static_cast<unsigned>(std::min<std::uint64_t>(threads, 1024));
  return c;
}

json to_json(const ExperimentConfig& c) {
  json schedule = {{"kind", to_string(c.schedule->kind())}};
  if (c.schedule->kind() == ScheduleKind::kPerToken) {
    schedule["tokens"] = c.schedule->total_tokens();
  } else {
    schedule["unit_sizes"] = std::vector<std::size_t>(c.schedule->unit_sizes().begin(),
                                                      c.schedule->unit_sizes().end());
  }
  std::vector<std::string> attacks;
  for (const auto a : c.sweeps.attacks) attacks.emplace_back(to_string(a));
  return {
      {"codebook_size", c.codebook.size()},
      {"schedule", schedule},
      {"watermark",
       {{"gamma", c.watermark.gamma},
        {"delta", c.watermark.delta},
        {"tau", c.watermark.tau},
        {"initial_seed", c.watermark.initial_seed},
        {"hash", to_string(c.chain.hash)},
        {"prg", to_string(c.chain.prg)}}},
      {"model",
       {{"seed", c.model.model_seed},
        {"temperature", c.model.temperature},
        {"context_sensitive", c.model.context_sensitive},
        {"bank_size", c.model.bank_size}}},
      {"channel",
       {{"kind", to_string(c.channel.kind)},
        {"flip_prob", c.channel.flip_prob},
        {"per_unit_probs", c.channel.per_unit_probs},
        {"replacement", to_string(c.channel.replacement)},
        {"seed", c.channel.channel_seed},
        {"burst_length", c.channel.burst_length},
        {"nearby_radius", c.channel.nearby_radius}}},
      {"student", {{"order", c.student_order}, {"smoothing", c.smoothing}}},
      {"trials",
       {{"watermarked", c.trials.watermarked},
        {"clean", c.trials.clean},
        {"calibration", c.trials.calibration},
        {"train", c.trials.train},
        {"eval", c.trials.eval}}},
      {"sweeps",
       {{"delta", c.sweeps.delta},
        {"flip_prob", c.sweeps.flip_prob},
        {"attacks", attacks},
        {"radioactivity_delta", c.sweeps.radioactivity_delta}}},
      {"fpr", c.fpr},
      {"output_dir", c.output_dir.generic_string()},
      {"master_seed", c.master_seed},
  };
}

json read_config_json(const fs::path& path) {
  const std::string text = read_file_bytes(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const std::size_t line = 1 + std::count(text.begin(), text.begin() + upto, '\n');
    throw ParseError(line, path.string() + ":" + std::to_string(line) + ": invalid JSON");
  }
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_config_json(path)); }

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "': expected key.path=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key component");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      // "key=null" removes the key, restoring its default
      if (value.is_null()) {
        node->erase(part);
      } else {
        (*node)[part] = std::move(value);
      }
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void write_effective_config(const ExperimentConfig& config) {
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw IoError("cannot create '" + config.output_dir.string() + "': " + ec.message());
  write_file_bytes(config.output_dir / "config.effective.json", to_json(config).dump(2) + "\n");
}

std::vector<Generation> generate_watermarked_batch(const ExperimentConfig& config,
                                                   const LogitSource& source, double delta,
                                                   std::size_t n) {
  auto lists = std::make_shared<const GreenLists>(config.codebook, config.watermark, config.chain);
  const Watermarker wm(std::move(lists), delta);
  const std::uint64_t seed = purpose_seed(config, "watermarked");
  std::vector<std::optional<Generation>> slots(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    slots[i] = wm.generate(source, config.schedule, derive_seed(seed, i));
  });
  std::vector<Generation> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

namespace {

std::vector<TokenSequence> clean_batch(const ExperimentConfig& config, const LogitSource& source,
                                       std::size_t n) {
  const std::uint64_t seed = purpose_seed(config, "clean");
  std::vector<std::optional<TokenSequence>> slots(n);
  parallel_for(n, config.threads, [&](std::size_t i) {
    slots[i] = generate_clean(source, config.schedule, config.codebook, derive_seed(seed, i));
  });
  std::vector<TokenSequence> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<TokenSequence> tokens_of(std::vector<Generation>&& gens) {
  std::vector<TokenSequence> out;
  out.reserve(gens.size());
  for (auto& g : gens) out.push_back(std::move(g.tokens));
  return out;
}

std::vector<double> z_values(const Detector& detector, std::span<const TokenSequence> seqs,
                             unsigned threads) {
  std::vector<double> z(seqs.size());
  parallel_for(seqs.size(), threads, [&](std::size_t i) { z[i] = detector.z_value(seqs[i]); });
  return z;
}

std::vector<double> channel_z(const ExperimentConfig& config, const Detector& detector,
                              std::span<const TokenSequence> seqs, const ChannelSpec& channel,
                              std::uint64_t stream_offset, double* mean_overlap) {
  std::vector<double> z(seqs.size());
  std::vector<double> overlap(seqs.size(), 1.0);
  parallel_for(seqs.size(), config.threads, [&](std::size_t i) {
    const TokenSequence out = apply_channel(channel, seqs[i], config.codebook, stream_offset + i);
    z[i] = detector.z_value(out);
    if (mean_overlap) overlap[i] = measure_overlap(seqs[i], out).overall;
  });
  if (mean_overlap) *mean_overlap = mean_of(overlap);
  return z;
}

Detector make_detector(const ExperimentConfig& config) {
  return Detector(std::make_shared<const GreenLists>(config.codebook, config.watermark, config.chain),
                  config.watermark.tau);
}

}  // namespace

std::vector<double> channel_z_values(const ExperimentConfig& config,
                                     std::span<const TokenSequence> sequences,
                                     const ChannelSpec& channel, double* mean_overlap) {
  return channel_z(config, make_detector(config), sequences, channel, 0, mean_overlap);
}

std::vector<fs::path> run_generate(const ExperimentConfig& config, const GenerateOptions& options) {
  if (options.n == 0) throw ConfigError("generate: count must be positive");
  write_effective_config(config);

  std::vector<std::optional<TokenSequence>> slots(options.n);
  std::vector<std::size_t> green(options.n, 0);
  std::vector<std::uint64_t> seeds(options.n);
  std::string mode;
  if (options.student) {
    mode = "student";
    const StudentModel student = StudentModel::load(*options.student);
    if (student.vocab_size() != config.codebook.size()) {
      throw ConfigError("generate: student codebook size " + std::to_string(student.vocab_size()) +
                        " does not match codebook_size " + std::to_string(config.codebook.size()));
    }
    const std::uint64_t seed = purpose_seed(config, "generate-student");
    parallel_for(options.n, config.threads, [&](std::size_t i) {
      seeds[i] = derive_seed(seed, i);
      slots[i] = student.generate(seeds[i]);
    });
  } else {
    const SyntheticModel model(config.codebook, config.model);
    auto lists = std::make_shared<const GreenLists>(config.codebook, config.watermark, config.chain);
    const Watermarker wm(lists, config.watermark.delta);
    mode = options.watermark ? "watermarked" : "clean";
    const std::uint64_t seed = purpose_seed(config, "generate-" + mode);
    parallel_for(options.n, config.threads, [&](std::size_t i) {
      seeds[i] = derive_seed(seed, i);
      if (options.watermark) {
        Generation g = wm.generate(model, config.schedule, seeds[i]);
        green[i] = g.green_total;
        slots[i] = std::move(g.tokens);
      } else {
        slots[i] = generate_clean(model, config.schedule, config.codebook, seeds[i]);
      }
    });
  }

  const char* ext = options.format == TokenFileFormat::kText ? ".tmk" : ".tmkb";
  json files = json::array();
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < options.n; ++i) {
    TokenSequence seq = std::move(*slots[i]);
    if (options.through_channel) seq = apply_channel(config.channel, seq, config.codebook, i);
    char name[32];
    std::snprintf(name, sizeof(name), "seq_%06zu%s", i, ext);
    write_token_file(config.output_dir / name, seq, options.format);
    written.push_back(config.output_dir / name);
    json entry = {{"file", name}, {"seed", seeds[i]}};
    if (mode == "watermarked") entry["green_generated"] = green[i];
    files.push_back(std::move(entry));
  }
  const json manifest = {
      {"count", options.n},
      {"mode", mode},
      {"format", options.format == TokenFileFormat::kText ? "text" : "binary"},
      {"through_channel", options.through_channel},
      {"files", files},
  };
  write_file_bytes(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  return written;
}

std::vector<DetectedFile> run_detect(const ExperimentConfig& config,
                                     std::span<const fs::path> inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::is_directory(in, ec)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in, ec)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".tmk" || ext == ".tmkb")) found.push_back(entry.path());
      }
      if (ec) throw IoError("cannot list '" + in.string() + "': " + ec.message());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  const Detector detector = make_detector(config);
  std::vector<DetectedFile> out;
  out.reserve(files.size());
  for (const auto& path : files) {
    const std::string bytes = read_file_bytes(path);
    std::optional<TokenSequence> seq;
    try {
      seq = parse_tokens(bytes);
      seq->validate(config.codebook);
    } catch (const ParseError& e) {
      throw ParseError(e.line(), path.string() + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(0, path.string() + ": " + e.what());
    }
    out.push_back({path, detector.detect(*seq)});
  }
  return out;
}

void write_detections(const ExperimentConfig& config, std::span<const DetectedFile> files) {
  write_effective_config(config);
  std::string jsonl;
  std::string csv = "file,green_count,total,z,p_value,decision\n";
  for (const auto& f : files) {
    json j = to_json(f.report);
    j["file"] = f.path.generic_string();
    jsonl += j.dump() + "\n";
    csv += f.path.generic_string() + "," + std::to_string(f.report.green_count) + "," +
           std::to_string(f.report.total_tokens) + "," + fmt(f.report.z_value) + "," +
           fmt(f.report.p_value) + "," + (f.report.decision ? "1" : "0") + "\n";
  }
  write_file_bytes(config.output_dir / "detections.jsonl", jsonl);
  write_file_bytes(config.output_dir / "detect_summary.csv", csv);
}

void run_calibrate(const ExperimentConfig& config) {
  write_effective_config(config);
  const SyntheticModel model(config.codebook, config.model);
  const std::size_t n_clean = std::max(config.trials.calibration, config.trials.clean);
  const std::vector<double> clean_all =
      clean_z_values(model, config.schedule, config.codebook, config.watermark, n_clean,
                     purpose_seed(config, "clean"), config.threads, config.chain);
  const std::span<const double> calib(clean_all.data(), config.trials.calibration);
  const std::span<const double> reference(clean_all.data(), config.trials.clean);

  const Summary s = summarize(calib);
  const auto exceed = static_cast<std::size_t>(
      std::count_if(calib.begin(), calib.end(), [&](double z) { return z > config.watermark.tau; }));
  write_file_bytes(config.output_dir / "calibration_summary.csv",
                   summary_csv_header() + ",tau,exceedances,fpr\n" + summary_csv_row(s) + "," +
                       fmt(config.watermark.tau) + "," + std::to_string(exceed) + "," +
                       fmt(static_cast<double>(exceed) / static_cast<double>(calib.size())) + "\n");

  std::string zcsv = "trial,z\n";
  for (std::size_t i = 0; i < calib.size(); ++i) zcsv += std::to_string(i) + "," + fmt(calib[i]) + "\n";
  write_file_bytes(config.output_dir / "clean_z.csv", zcsv);

  const Detector detector = make_detector(config);
  const double threshold = threshold_at_fpr(reference, config.fpr);
  std::string sweep =
      "delta,n_watermarked,n_clean,threshold,tpr_at_fpr,mean_z,green_fraction,auc\n";
  std::vector<double> deltas = config.sweeps.delta;
  if (std::find(deltas.begin(), deltas.end(), config.watermark.delta) == deltas.end()) {
    deltas.push_back(config.watermark.delta);
  }
  std::vector<RocPoint> configured_roc;
  for (const double delta : deltas) {
    auto gens = generate_watermarked_batch(config, model, delta, config.trials.watermarked);
    double green = 0.0;
    for (const auto& g : gens) green += static_cast<double>(g.green_total);
    const auto seqs = tokens_of(std::move(gens));
    const auto z = z_values(detector, seqs, config.threads);
    const auto curve = roc(z, reference);
    if (delta == config.watermark.delta) configured_roc = curve;
    if (std::find(config.sweeps.delta.begin(), config.sweeps.delta.end(), delta) ==
        config.sweeps.delta.end()) {
      continue;
    }
    sweep += fmt(delta) + "," + std::to_string(z.size()) + "," + std::to_string(reference.size()) +
             "," + fmt(threshold) + "," + fmt(tpr_at_fpr(z, reference, config.fpr)) + "," +
             fmt(mean_of(z)) + "," +
             fmt(green / static_cast<double>(seqs.size() * config.schedule->total_tokens())) + "," +
             fmt(auc(curve)) + "\n";
  }
  write_file_bytes(config.output_dir / "delta_sweep.csv", sweep);
  write_file_bytes(config.output_dir / "roc.csv", roc_csv(configured_roc));
}

namespace {

struct AttackBench {
  Detector detector;
  std::vector<TokenSequence> watermarked;
  std::vector<TokenSequence> clean;
};

AttackBench attack_bench(const ExperimentConfig& config) {
  const SyntheticModel model(config.codebook, config.model);
  return {make_detector(config),
          tokens_of(generate_watermarked_batch(config, model, config.watermark.delta,
                                               config.trials.watermarked)),
          clean_batch(config, model, config.trials.clean)};
}

struct AttackPoint {
  double tpr = 0.0;
  double mean_z = 0.0;
  double overlap = 1.0;
  double threshold = 0.0;
};

AttackPoint evaluate_channel(const ExperimentConfig& config, const AttackBench& bench,
                             const ChannelSpec& channel) {
  AttackPoint p;
  const auto wz = channel_z(config, bench.detector, bench.watermarked, channel, 0, &p.overlap);
  const auto cz = channel_z(config, bench.detector, bench.clean, channel, bench.watermarked.size(),
                            nullptr);
  p.tpr = tpr_at_fpr(wz, cz, config.fpr);
  p.mean_z = mean_of(wz);
  p.threshold = threshold_at_fpr(cz, config.fpr);
  return p;
}

std::uint64_t attack_seed(const ExperimentConfig& config, AttackPreset preset) {
  return derive_seed(config.channel.channel_seed, to_string(preset));
}

}  // namespace

void run_attack_sweep(const ExperimentConfig& config) {
  write_effective_config(config);
  const AttackBench bench = attack_bench(config);

  std::string attacks = "attack,flip_prob,target_tpr,tpr_at_fpr,mean_z,mean_overlap,threshold\n";
  for (const auto preset : config.sweeps.attacks) {
    const ChannelSpec channel = attack_preset(preset, attack_seed(config, preset));
    const AttackPoint p = evaluate_channel(config, bench, channel);
    attacks += std::string(to_string(preset)) + "," + fmt(channel.flip_prob) + "," +
               fmt(attack_target_tpr(preset)) + "," + fmt(p.tpr) + "," + fmt(p.mean_z) + "," +
               fmt(p.overlap) + "," + fmt(p.threshold) + "\n";
  }
  write_file_bytes(config.output_dir / "attack_sweep.csv", attacks);

  // One channel seed for the whole sweep, so the flipped positions nest.
  ChannelSpec channel = config.channel;
  if (channel.kind != ChannelKind::kBurstFlip) channel.kind = ChannelKind::kUniformFlip;
  channel.per_unit_probs.clear();
  std::string flips = "flip_prob,tpr_at_fpr,mean_z,mean_overlap,threshold\n";
  for (const double q : config.sweeps.flip_prob) {
    channel.flip_prob = q;
    const AttackPoint p = evaluate_channel(config, bench, channel);
    flips += fmt(q) + "," + fmt(p.tpr) + "," + fmt(p.mean_z) + "," + fmt(p.overlap) + "," +
             fmt(p.threshold) + "\n";
  }
  write_file_bytes(config.output_dir / "flip_sweep.csv", flips);
}

std::vector<AttackCalibration> run_calibrate_attacks(const ExperimentConfig& config,
                                                     int iterations) {
  write_effective_config(config);
  const AttackBench bench = attack_bench(config);
  std::vector<AttackCalibration> out;
  std::string csv = "attack,target_tpr,flip_prob,achieved_tpr\n";
  for (const auto preset : config.sweeps.attacks) {
    if (preset == AttackPreset::kNone) continue;
    ChannelSpec channel = attack_preset(preset, attack_seed(config, preset));
    channel.kind = ChannelKind::kUniformFlip;
    const double target = attack_target_tpr(preset);
    double lo = 0.0;
    double hi = 1.0;
    for (int it = 0; it < iterations; ++it) {
      channel.flip_prob = 0.5 * (lo + hi);
      if (evaluate_channel(config, bench, channel).tpr > target) {
        lo = channel.flip_prob;
      } else {
        hi = channel.flip_prob;
      }
    }
    channel.flip_prob = std::round(0.5 * (lo + hi) * 1e4) / 1e4;
    const double achieved = evaluate_channel(config, bench, channel).tpr;
    out.push_back({preset, target, channel.flip_prob, achieved});
    csv += std::string(to_string(preset)) + "," + fmt(target) + "," + fmt(channel.flip_prob) + "," +
           fmt(achieved) + "\n";
  }
  write_file_bytes(config.output_dir / "attack_calibration.csv", csv);
  return out;
}

RadioactivityConfig radioactivity_config(const ExperimentConfig& config, double delta,
                                         bool watermark_training) {
  RadioactivityConfig rc;
  rc.codebook = config.codebook;
  rc.schedule = config.schedule;
  rc.params = config.watermark;
  rc.params.delta = delta;
  rc.chain = config.chain;
  rc.model = config.model;
  rc.channel = config.channel;
  rc.student_order = config.student_order;
  rc.smoothing = config.smoothing;
  rc.n_train = config.trials.train;
  rc.n_eval = config.trials.eval;
  rc.n_clean_reference = config.trials.clean;
  rc.watermark_training = watermark_training;
  rc.fpr = config.fpr;
  rc.seed = purpose_seed(config, "radioactivity");
  rc.threads = config.threads;
  return rc;
}

namespace {

json result_json(const RadioactivityResult& r, double delta, bool watermark_training) {
  return {{"delta", delta},
          {"watermark_training", watermark_training},
          {"n_train", r.n_train},
          {"n_eval", r.n_eval},
          {"threshold", r.threshold},
          {"m1_tpr", r.m1_tpr},
          {"m2_tpr", r.m2_tpr},
          {"m1_mean_z", r.m1_mean_z},
          {"m2_mean_z", r.m2_mean_z}};
}

std::string result_row(const std::string& run, const RadioactivityResult& r, double delta,
                       bool watermark_training) {
  return run + "," + fmt(delta) + "," + (watermark_training ? "1" : "0") + "," +
         std::to_string(r.n_train) + "," + std::to_string(r.n_eval) + "," + fmt(r.threshold) + "," +
         fmt(r.m1_tpr) + "," + fmt(r.m2_tpr) + "," + fmt(r.m1_mean_z) + "," + fmt(r.m2_mean_z) + "\n";
}

}  // namespace

void run_radioactivity_command(const ExperimentConfig& config) {
  write_effective_config(config);
  const double delta = config.watermark.delta;
  const auto marked = run_radioactivity(radioactivity_config(config, delta, true));
  const auto control = run_radioactivity(radioactivity_config(config, delta, false));
  marked.student->save(config.output_dir / "student.tms");

  std::string csv =
      "run,delta,watermark_training,n_train,n_eval,threshold,m1_tpr,m2_tpr,m1_mean_z,m2_mean_z\n";
  csv += result_row("watermarked", marked, delta, true);
  csv += result_row("control", control, delta, false);
  json sweep = json::array();
  for (const double d : config.sweeps.radioactivity_delta) {
    const auto r = run_radioactivity(radioactivity_config(config, d, true));
    csv += result_row("sweep", r, d, true);
    sweep.push_back(result_json(r, d, true));
  }
  const json j = {{"watermarked", result_json(marked, delta, true)},
                  {"control", result_json(control, delta, false)},
                  {"sweep", sweep}};
  write_file_bytes(config.output_dir / "radioactivity.json", j.dump(2) + "\n");
  write_file_bytes(config.output_dir / "radioactivity.csv", csv);
}

std::string run_report(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");
  static constexpr const char* kFiles[] = {
      "calibration_summary.csv", "delta_sweep.csv",       "attack_sweep.csv",
      "flip_sweep.csv",          "attack_calibration.csv", "radioactivity.csv",
      "detect_summary.csv",
  };
  std::ostringstream os;
  std::size_t found = 0;
  for (const char* name : kFiles) {
    const fs::path path = dir / name;
    if (!fs::exists(path, ec)) continue;
    ++found;
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file_bytes(path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) {
        // long floats are trimmed for display only; the CSV keeps full precision
        char* end = nullptr;
        const double v = std::strtod(cell.c_str(), &end);
        if (!rows.empty() && end && *end == '\0' && cell.find('.') != std::string::npos) {
          std::ostringstream f;
          f << std::setprecision(6) << v;
          cell = f.str();
        }
        cells.push_back(cell);
      }
      rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> width;
    for (const auto& r : rows) {
      if (width.size() < r.size()) width.resize(r.size(), 0);
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    }
    os << "== " << name << " ==\n";
    for (const auto& r : rows) {
      for (std::size_t c = 0; c < r.size(); ++c) {
        os << (c ? "  " : "") << std::setw(static_cast<int>(width[c])) << r[c];
      }
      os << '\n';
    }
    os << '\n';
  }
  if (found == 0) os << "no result files in " << dir.generic_string() << "\n";
  const std::string text = os.str();
  write_file_bytes(dir / "report.txt", text);
  return text;
}

}  // namespace tokenmark
