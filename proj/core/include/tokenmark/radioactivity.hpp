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

#ifndef TOKENMARK_RADIOACTIVITY_HPP_
#define TOKENMARK_RADIOACTIVITY_HPP_

// M1 -> X1 -> M2 -> X2: does a student trained on watermarked generations
// emit the watermark itself?

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "tokenmark/channel.hpp"
#include "tokenmark/embed.hpp"
#include "tokenmark/seeding.hpp"
#include "tokenmark/student.hpp"
#include "tokenmark/types.hpp"

namespace tokenmark {

struct RadioactivityConfig {
  Codebook codebook{kDefaultCodebookSize};
  std::shared_ptr<const UnitSchedule> schedule;
  WatermarkParams params;
  SeedChain chain;
  SyntheticModelConfig model;
  // Applied to M1's training corpus, to held-out M1 outputs and to M2 outputs
  // before detection.
  ChannelSpec channel;
  std::size_t student_order = 1;
  double smoothing = 0.1;
  std::size_t n_train = 2000;
  std::size_t n_eval = 1000;
  // Clean M1 sequences that set the FPR threshold.
  std::size_t n_clean_reference = 10000;
  // false runs the control: M1 samples without any watermark.
  bool watermark_training = true;
  double fpr = 0.01;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct RadioactivityResult {
  double m1_tpr = 0.0;
  double m2_tpr = 0.0;
  double m1_mean_z = 0.0;
  double m2_mean_z = 0.0;
  double threshold = 0.0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
  std::vector<double> m1_z;
  std::vector<double> m2_z;
  std::vector<double> clean_z;
  std::shared_ptr<const StudentModel> student;
};

RadioactivityResult run_radioactivity(const RadioactivityConfig& config);

}  // namespace tokenmark

#endif  // TOKENMARK_RADIOACTIVITY_HPP_
