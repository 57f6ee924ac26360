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

// tokenmark: command-line front end for the experiment commands.
//
// Exit codes: 0 ok, 1 negative detection (single-file detect), 2 usage,
// config or parse error, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tokenmark/experiment.hpp"
#include "tokenmark/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_out = true) {
  cmd->add_option("-c,--config", opts.config_path, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "Override a config key, e.g. watermark.delta=6");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--threads", opts.threads, "Worker threads (default: $TOKENMARK_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  if (with_out) cmd->add_option("-o,--out", opts.out, "Output directory");
}

tokenmark::ExperimentConfig resolve(const CommonOptions& opts) {
  json j = json::object();
  if (!opts.config_path.empty()) j = tokenmark::read_config_json(opts.config_path);
  for (const auto& o : opts.overrides) tokenmark::apply_override(j, o);
  if (opts.seed) j["master_seed"] = *opts.seed;
  if (!opts.out.empty()) j["output_dir"] = opts.out;
  if (opts.threads) j["threads"] = *opts.threads;
  return tokenmark::config_from_json(j);
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tokenmark: green/red-list watermark testbed for token-stream generators"};
  app.require_subcommand(1);

  CommonOptions gen_opts;
  tokenmark::GenerateOptions gen;
  std::string gen_format = "text";
  std::string gen_student;
  auto* generate = app.add_subcommand("generate", "Sample token sequences into files");
  add_common(generate, gen_opts);
  generate->add_option("-n,--count", gen.n, "Number of sequences")->default_val(1);
  auto* wm_flag = generate->add_flag("--watermark", "Watermarked generation (default)");
  auto* clean_flag = generate->add_flag("--clean", "Unwatermarked generation");
  wm_flag->excludes(clean_flag);
  generate->add_option("--format", gen_format, "text or binary")
      ->check(CLI::IsMember({"text", "binary"}));
  generate->add_flag("--through-channel", gen.through_channel,
                     "Write the channel output instead of the generator output");
  generate->add_option("--student", gen_student, "Sample from a saved student model (TMS1)")
      ->check(CLI::ExistingFile);

  CommonOptions det_opts;
  std::vector<std::string> det_inputs;
  bool det_json = false;
  auto* detect = app.add_subcommand("detect", "Detect the watermark in token files");
  add_common(detect, det_opts);
  detect->add_option("inputs", det_inputs, "Token files or directories")->required();
  detect->add_flag("--json", det_json, "Print one JSON report per line");

  CommonOptions cal_opts;
  auto* calibrate = app.add_subcommand("calibrate", "Clean-z calibration, delta sweep and ROC");
  add_common(calibrate, cal_opts);

  CommonOptions atk_opts;
  auto* attack = app.add_subcommand("attack-sweep", "TPR@FPR under attack presets and flip rates");
  add_common(attack, atk_opts);

  CommonOptions catk_opts;
  int iterations = 16;
  auto* cal_attacks =
      app.add_subcommand("calibrate-attacks", "Fit preset flip rates to their target TPR");
  add_common(cal_attacks, catk_opts);
  cal_attacks->add_option("--iterations", iterations, "Bisection steps")->check(CLI::Range(1, 40));

  CommonOptions rad_opts;
  auto* radio = app.add_subcommand("radioactivity", "Train a student on M1 output and detect it");
  add_common(radio, rad_opts);

  std::string report_dir;
  auto* report = app.add_subcommand("report", "Summarise the data files of an output directory");
  report->add_option("dir", report_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*generate) {
      gen.watermark = !*clean_flag;
      gen.format = gen_format == "binary" ? tokenmark::TokenFileFormat::kBinary
                                          : tokenmark::TokenFileFormat::kText;
      if (!gen_student.empty()) {
        if (*wm_flag || *clean_flag) throw tokenmark::ConfigError("--student excludes --watermark/--clean");
        gen.student = gen_student;
      }
      const auto config = resolve(gen_opts);
      const auto files = tokenmark::run_generate(config, gen);
      std::cout << "wrote " << files.size() << " sequence(s) to " << config.output_dir.string()
                << "\n";
      return kExitOk;
    }
    if (*detect) {
      const auto config = resolve(det_opts);
      std::vector<fs::path> inputs(det_inputs.begin(), det_inputs.end());
      const auto results = tokenmark::run_detect(config, inputs);
      if (!det_opts.out.empty()) tokenmark::write_detections(config, results);
      for (const auto& r : results) {
        if (det_json) {
          json j = tokenmark::to_json(r.report);
          j["file"] = r.path.generic_string();
          std::cout << j.dump() << "\n";
        } else {
          std::cout << r.path.string() << ": " << (r.report.decision ? "watermarked" : "clean")
                    << " z=" << fixed(r.report.z_value) << " p=" << r.report.p_value
                    << " green=" << r.report.green_count << "/" << r.report.total_tokens << "\n";
        }
      }
      const bool single = det_inputs.size() == 1 && !fs::is_directory(det_inputs.front());
      if (single && results.size() == 1 && !results.front().report.decision) return kExitNegative;
      return kExitOk;
    }
    if (*calibrate) {
      const auto config = resolve(cal_opts);
      tokenmark::run_calibrate(config);
      std::cout << tokenmark::run_report(config.output_dir);
      return kExitOk;
    }
    if (*attack) {
      const auto config = resolve(atk_opts);
      tokenmark::run_attack_sweep(config);
      std::cout << tokenmark::run_report(config.output_dir);
      return kExitOk;
    }
    if (*cal_attacks) {
      const auto config = resolve(catk_opts);
      for (const auto& c : tokenmark::run_calibrate_attacks(config, iterations)) {
        std::cout << tokenmark::to_string(c.preset) << ": flip_prob=" << c.flip_prob
                  << " tpr=" << fixed(c.achieved_tpr) << " target=" << fixed(c.target_tpr) << "\n";
      }
      return kExitOk;
    }
    if (*radio) {
      const auto config = resolve(rad_opts);
      tokenmark::run_radioactivity_command(config);
      std::cout << tokenmark::run_report(config.output_dir);
      return kExitOk;
    }
    if (*report) {
      std::cout << tokenmark::run_report(report_dir);
      return kExitOk;
    }
  } catch (const tokenmark::IoError& e) {
    std::cerr << "tokenmark: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "tokenmark: " << e.what() << "\n";
    return kExitIo;
  } catch (const tokenmark::ParseError& e) {
    std::cerr << "tokenmark: " << e.what() << "\n";
    return kExitUsage;
  } catch (const tokenmark::ConfigError& e) {
    std::cerr << "tokenmark: config: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "tokenmark: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "tokenmark: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
