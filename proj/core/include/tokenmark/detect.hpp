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

#ifndef TOKENMARK_DETECT_HPP_
#define TOKENMARK_DETECT_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tokenmark/seeding.hpp"
#include "tokenmark/types.hpp"

namespace tokenmark {

// z = (green - gamma * T) / sqrt(T * gamma * (1 - gamma)).
// Throws std::invalid_argument outside 0 <= green <= total, total >= 1,
// 0 < gamma < 1.
double z_statistic(std::size_t green_count, std::size_t total, double gamma);

// One-sided p-value of a z-score under the standard normal: P(Z > z).
double normal_upper_tail(double z);

struct DetectionReport {
  std::size_t green_count = 0;
  std::size_t total_tokens = 0;
  double gamma = 0.0;
  double z_value = 0.0;
  double p_value = 1.0;
  bool decision = false;
  std::vector<std::size_t> per_unit_green;
};

// Keys: green_count, total, gamma, z, p_value, decision, per_unit_green.
nlohmann::json to_json(const DetectionReport& report);
DetectionReport detection_report_from_json(const nlohmann::json& j);

// Recomputes every unit's partition from the observed tokens and counts green
// tokens over all units. Never consults the generator.
class Detector {
 public:
  Detector(const Codebook& codebook, const WatermarkParams& params, SeedChain chain = {});
  Detector(std::shared_ptr<const GreenLists> lists, double tau);

  DetectionReport detect(const TokenSequence& tokens) const;
  // Only the z-value; skips the per-unit breakdown.
  double z_value(const TokenSequence& tokens) const;

  const GreenLists& green_lists() const noexcept { return *lists_; }
  double tau() const noexcept { return tau_; }

 private:
  std::size_t count_green(const TokenSequence& tokens, std::vector<std::size_t>* per_unit) const;

  std::shared_ptr<const GreenLists> lists_;
  double tau_;
};

DetectionReport detect(const TokenSequence& tokens, const Codebook& codebook,
                       const WatermarkParams& params, SeedChain chain = {});

// Threshold at the (1 - fpr) empirical quantile of `clean_z`: the
// ceil((1 - fpr) * n)-th smallest value. Throws on empty input or fpr
// outside (0, 1).
double threshold_at_fpr(std::span<const double> clean_z, double fpr);

// Fraction of `watermarked_z` strictly above threshold_at_fpr(clean_z, fpr).
double tpr_at_fpr(std::span<const double> watermarked_z, std::span<const double> clean_z,
                  double fpr);

}  // namespace tokenmark

#endif  // TOKENMARK_DETECT_HPP_
