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

#include "tokenmark/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tokenmark {

double z_statistic(std::size_t green_count, std::size_t total, double gamma) {
  if (total == 0) throw std::invalid_argument("z_statistic: total must be >= 1");
  if (green_count > total) throw std::invalid_argument("z_statistic: green_count exceeds total");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("z_statistic: gamma must lie in (0, 1)");
  const double t = static_cast<double>(total);
  return (static_cast<double>(green_count) - gamma * t) / std::sqrt(t * gamma * (1.0 - gamma));
}

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

nlohmann::json to_json(const DetectionReport& report) {
  return nlohmann::json{{"green_count", report.green_count},
                        {"total", report.total_tokens},
                        {"gamma", report.gamma},
                        {"z", report.z_value},
                        {"p_value", report.p_value},
                        {"decision", report.decision},
                        {"per_unit_green", report.per_unit_green}};
}

DetectionReport detection_report_from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.green_count = j.at("green_count").get<std::size_t>();
  r.total_tokens = j.at("total").get<std::size_t>();
  r.gamma = j.at("gamma").get<double>();
  r.z_value = j.at("z").get<double>();
  r.p_value = j.at("p_value").get<double>();
  r.decision = j.at("decision").get<bool>();
  r.per_unit_green = j.at("per_unit_green").get<std::vector<std::size_t>>();
  return r;
}

Detector::Detector(const Codebook& codebook, const WatermarkParams& params, SeedChain chain)
    : lists_(std::make_shared<const GreenLists>(codebook, params, chain)), tau_(params.tau) {}

Detector::Detector(std::shared_ptr<const GreenLists> lists, double tau)
    : lists_(std::move(lists)), tau_(tau) {
  if (!lists_) throw std::invalid_argument("detector needs green lists");
}

std::size_t Detector::count_green(const TokenSequence& tokens,
                                  std::vector<std::size_t>* per_unit) const {
  tokens.validate(lists_->codebook());
  const UnitSchedule& schedule = tokens.schedule();
  GreenLists::Workspace ws;
  std::size_t green = 0;
  if (per_unit) per_unit->assign(schedule.num_units(), 0);
  for (std::size_t i = 0; i < schedule.num_units(); ++i) {
    const GreenMask& mask =
        lists_->mask_after(i == 0 ? std::span<const TokenId>{} : tokens.unit(i - 1), ws);
    std::size_t unit_green = 0;
    for (const TokenId id : tokens.unit(i)) unit_green += mask.is_green(id);
    // Accumulated across units; the test statistic is over all T tokens.
    green += unit_green;
    if (per_unit) (*per_unit)[i] = unit_green;
  }
  return green;
}

DetectionReport Detector::detect(const TokenSequence& tokens) const {
  DetectionReport r;
  r.green_count = count_green(tokens, &r.per_unit_green);
  r.total_tokens = tokens.size();
  r.gamma = lists_->gamma();
  r.z_value = z_statistic(r.green_count, r.total_tokens, r.gamma);
  r.p_value = normal_upper_tail(r.z_value);
  r.decision = r.z_value > tau_;
  return r;
}

double Detector::z_value(const TokenSequence& tokens) const {
  return z_statistic(count_green(tokens, nullptr), tokens.size(), lists_->gamma());
}

DetectionReport detect(const TokenSequence& tokens, const Codebook& codebook,
                       const WatermarkParams& params, SeedChain chain) {
  return Detector(codebook, params, chain).detect(tokens);
}

double threshold_at_fpr(std::span<const double> clean_z, double fpr) {
  if (clean_z.empty()) throw std::invalid_argument("threshold_at_fpr: empty clean sample");
  if (!(fpr > 0.0 && fpr < 1.0)) throw std::invalid_argument("threshold_at_fpr: fpr must lie in (0, 1)");
  std::vector<double> sorted(clean_z.begin(), clean_z.end());
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - fpr) * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

double tpr_at_fpr(std::span<const double> watermarked_z, std::span<const double> clean_z,
                  double fpr) {
  if (watermarked_z.empty()) throw std::invalid_argument("tpr_at_fpr: empty watermarked sample");
  const double threshold = threshold_at_fpr(clean_z, fpr);
  const auto above = std::count_if(watermarked_z.begin(), watermarked_z.end(),
                                   [&](double z) { return z > threshold; });
  return static_cast<double>(above) / static_cast<double>(watermarked_z.size());
}

}  // namespace tokenmark
