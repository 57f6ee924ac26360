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

#ifndef TOKENMARK_EXPERIMENT_HPP_
#define TOKENMARK_EXPERIMENT_HPP_

// Experiment configuration and the command implementations behind the
// `tokenmark` tool. Every command is a pure function of (config, master
// seed): sub-seeds fan out from the master seed by purpose and trial index,
// and data files carry no timestamps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tokenmark/channel.hpp"
#include "tokenmark/detect.hpp"
#include "tokenmark/embed.hpp"
#include "tokenmark/radioactivity.hpp"
#include "tokenmark/seeding.hpp"
#include "tokenmark/token_io.hpp"
#include "tokenmark/types.hpp"

namespace tokenmark {

// Invalid configuration; the tool maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrialCounts {
  std::size_t watermarked = 1000;
  std::size_t clean = 10000;
  std::size_t calibration = 100000;
  std::size_t train = 2000;
  std::size_t eval = 1000;
};

struct SweepSettings {
  std::vector<double> delta = {0.0, 0.5, 1.0, 2.0, 4.0, 6.0};
  std::vector<double> flip_prob = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<AttackPreset> attacks = {all_attack_presets().begin(), all_attack_presets().end()};
  std::vector<double> radioactivity_delta;
};

struct ExperimentConfig {
  Codebook codebook{kDefaultCodebookSize};
  std::shared_ptr<const UnitSchedule> schedule =
      std::make_shared<const UnitSchedule>(make_var_schedule());
  WatermarkParams watermark;
  SeedChain chain;
  SyntheticModelConfig model;
  ChannelSpec channel;
  std::size_t student_order = 1;
  double smoothing = 0.1;
  TrialCounts trials;
  SweepSettings sweeps;
  double fpr = 0.01;
  std::uint64_t master_seed = 1;
  unsigned threads = 1;
  std::filesystem::path output_dir = "tokenmark-out";
};

// Parses and validates a config object. Absent keys take defaults; the model
// and channel seeds default to sub-seeds of master_seed. Unknown keys and
// invalid values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
// The thread count is left out so that echoed configs match across --threads.
nlohmann::json to_json(const ExperimentConfig& config);
// JSON syntax errors throw ParseError naming the line.
nlohmann::json read_config_json(const std::filesystem::path& path);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies "a.b.c=value" overrides to a raw config object before parsing.
// The value is parsed as JSON when possible, otherwise taken as a string;
// "a.b=null" removes the key.
void apply_override(nlohmann::json& j, const std::string& assignment);

// Seed for a named purpose ("generate-watermarked", "m1-train", ...).
std::uint64_t purpose_seed(const ExperimentConfig& config, std::string_view purpose);

// Writes config.effective.json into the output directory (created if needed).
void write_effective_config(const ExperimentConfig& config);

// z-values of config.trials-style batches, shared by the sweeps. Watermarked
// trial i always uses the same generator seed, whatever delta is.
std::vector<Generation> generate_watermarked_batch(const ExperimentConfig& config,
                                                   const LogitSource& source, double delta,
                                                   std::size_t n);
std::vector<double> channel_z_values(const ExperimentConfig& config,
                                     std::span<const TokenSequence> sequences,
                                     const ChannelSpec& channel, double* mean_overlap = nullptr);

struct GenerateOptions {
  std::size_t n = 1;
  bool watermark = true;
  bool through_channel = false;
  TokenFileFormat format = TokenFileFormat::kText;
  std::optional<std::filesystem::path> student;  // sample from a saved student instead
};

// seq_NNNNNN.tmk / .tmkb plus manifest.json in config.output_dir.
std::vector<std::filesystem::path> run_generate(const ExperimentConfig& config,
                                                const GenerateOptions& options);

struct DetectedFile {
  std::filesystem::path path;
  DetectionReport report;
};

// Expands directories into their *.tmk / *.tmkb files (sorted) and detects
// each. Throws ParseError (with the file name prefixed) on malformed input.
std::vector<DetectedFile> run_detect(const ExperimentConfig& config,
                                     std::span<const std::filesystem::path> inputs);
// detections.jsonl and detect_summary.csv in config.output_dir.
void write_detections(const ExperimentConfig& config, std::span<const DetectedFile> files);

// calibration_summary.csv, clean_z.csv, delta_sweep.csv, roc.csv.
void run_calibrate(const ExperimentConfig& config);

// attack_sweep.csv and flip_sweep.csv.
void run_attack_sweep(const ExperimentConfig& config);

struct AttackCalibration {
  AttackPreset preset;
  double target_tpr;
  double flip_prob;
  double achieved_tpr;
};

// Bisects each preset's flip probability against its target TPR@FPR;
// writes attack_calibration.csv.
std::vector<AttackCalibration> run_calibrate_attacks(const ExperimentConfig& config,
                                                     int iterations = 16);

RadioactivityConfig radioactivity_config(const ExperimentConfig& config, double delta,
                                         bool watermark_training);

// radioactivity.json, radioactivity.csv and student.tms.
void run_radioactivity_command(const ExperimentConfig& config);

// Collects the known data files of an output directory into report.txt and
// returns its text.
std::string run_report(const std::filesystem::path& dir);

}  // namespace tokenmark

#endif  // TOKENMARK_EXPERIMENT_HPP_
