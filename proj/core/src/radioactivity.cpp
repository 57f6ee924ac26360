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

#include "tokenmark/radioactivity.hpp"

#include <numeric>
#include <optional>
#include <stdexcept>

#include "tokenmark/detect.hpp"
#include "tokenmark/parallel.hpp"
#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

RadioactivityResult run_radioactivity(const RadioactivityConfig& config) {
  if (!config.schedule) throw std::invalid_argument("radioactivity: schedule is required");
  if (config.n_train == 0 || config.n_eval == 0 || config.n_clean_reference == 0) {
    throw std::invalid_argument("radioactivity: corpus sizes must be positive");
  }
  config.params.validate(config.codebook);
  config.channel.validate_for(*config.schedule);

  const SyntheticModel m1(config.codebook, config.model);
  const auto lists =
      std::make_shared<const GreenLists>(config.codebook, config.params, config.chain);
  const Watermarker watermarker(lists, config.params.delta);
  const Detector detector(lists, config.params.tau);

  auto channel_for = [&](std::string_view purpose) {
    ChannelSpec spec = config.channel;
    spec.channel_seed = derive_seed(config.channel.channel_seed, purpose);
    return spec;
  };
  auto m1_sample = [&](std::uint64_t seed) {
    return config.watermark_training ? watermarker.generate(m1, config.schedule, seed).tokens
                                     : generate_clean(m1, config.schedule, config.codebook, seed);
  };

  // X1: M1's training corpus for the student.
  const std::uint64_t train_seed = derive_seed(config.seed, "m1-train");
  const ChannelSpec train_channel = channel_for("m1-train");
  std::vector<std::optional<TokenSequence>> slots(config.n_train);
  parallel_for(config.n_train, config.threads, [&](std::size_t i) {
    slots[i] = apply_channel(train_channel, m1_sample(derive_seed(train_seed, i)),
                             config.codebook, i);
  });
  std::vector<TokenSequence> corpus;
  corpus.reserve(config.n_train);
  for (auto& s : slots) corpus.push_back(std::move(*s));
  slots.clear();

  const auto student = std::make_shared<const StudentModel>(StudentModel::train(
      corpus, config.codebook, config.student_order, config.smoothing, config.threads));
  const StudentModel& m2 = *student;
  corpus.clear();

  RadioactivityResult result;
  result.n_train = config.n_train;
  result.n_eval = config.n_eval;
  result.student = student;

  const ChannelSpec eval_channel = channel_for("eval");
  const std::uint64_t m1_eval_seed = derive_seed(config.seed, "m1-eval");
  const std::uint64_t m2_seed = derive_seed(config.seed, "m2-generate");
  const std::uint64_t clean_seed = derive_seed(config.seed, "clean-reference");

  result.m1_z.resize(config.n_eval);
  result.m2_z.resize(config.n_eval);
  result.clean_z.resize(config.n_clean_reference);
  parallel_for(config.n_eval, config.threads, [&](std::size_t i) {
    result.m1_z[i] = detector.z_value(
        apply_channel(eval_channel, m1_sample(derive_seed(m1_eval_seed, i)), config.codebook, i));
    // X2: the student samples with no green-list logic anywhere on its path.
    result.m2_z[i] = detector.z_value(apply_channel(
        eval_channel, m2.generate(derive_seed(m2_seed, i)), config.codebook, config.n_eval + i));
  });
  parallel_for(config.n_clean_reference, config.threads, [&](std::size_t i) {
    result.clean_z[i] = detector.z_value(apply_channel(
        eval_channel, generate_clean(m1, config.schedule, config.codebook, derive_seed(clean_seed, i)),
        config.codebook, 2 * config.n_eval + i));
  });

  result.threshold = threshold_at_fpr(result.clean_z, config.fpr);
  result.m1_tpr = tpr_at_fpr(result.m1_z, result.clean_z, config.fpr);
  result.m2_tpr = tpr_at_fpr(result.m2_z, result.clean_z, config.fpr);
  result.m1_mean_z = mean_of(result.m1_z);
  result.m2_mean_z = mean_of(result.m2_z);
  return result;
}

}  // namespace tokenmark
