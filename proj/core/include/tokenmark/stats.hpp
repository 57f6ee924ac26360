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

#ifndef TOKENMARK_STATS_HPP_
#define TOKENMARK_STATS_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tokenmark/embed.hpp"
#include "tokenmark/seeding.hpp"
#include "tokenmark/types.hpp"

namespace tokenmark {

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased (n - 1)
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double p999 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// Linear-interpolated quantile of an ascending sample (Hyndman-Fan type 7).
double quantile_sorted(std::span<const double> sorted, double q);

Summary summarize(std::span<const double> sample);

struct FprCalibration {
  Summary summary;
  double tau = 0.0;
  std::size_t exceedances = 0;
  double fpr = 0.0;
  std::vector<double> z_values;
};

// z-values of n clean sequences; trial i is generated from derive_seed(seed, i).
std::vector<double> clean_z_values(const LogitSource& source,
                                   const std::shared_ptr<const UnitSchedule>& schedule,
                                   const Codebook& codebook, const WatermarkParams& params,
                                   std::size_t n, std::uint64_t seed, unsigned threads = 1,
                                   SeedChain chain = {});

// Generates n_trials (>= 1000) clean sequences, detects each, and reports
// the z summary and the fraction with z > params.tau.
FprCalibration calibrate_fpr(const LogitSource& source,
                             const std::shared_ptr<const UnitSchedule>& schedule,
                             const Codebook& codebook, const WatermarkParams& params,
                             std::size_t n_trials, std::uint64_t seed, unsigned threads = 1,
                             SeedChain chain = {});

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Empirical ROC: thresholds swept over the pooled distinct values, high to
// low, classifying z >= threshold as positive. Starts at (0,0), ends at (1,1).
std::vector<RocPoint> roc(std::span<const double> watermarked_z, std::span<const double> clean_z);

// Trapezoidal area under an ROC curve.
double auc(std::span<const RocPoint> curve);

// log P(Y >= k) for Y ~ Binomial(n, gamma). The value itself underflows for
// extreme tails (gamma^680), so the log is the primary result.
struct TailProbability {
  double log_value = 0.0;
  double value() const;
};

TailProbability binomial_tail_exact(std::size_t green_count, std::size_t total, double gamma);

// sigmas * sqrt(p (1 - p) / n): the Monte-Carlo tolerance for an empirical
// rate with true value p over n trials.
double binomial_tolerance(double p, std::size_t n, double sigmas = 3.0);

std::string summary_csv_header();
std::string summary_csv_row(const Summary& s);
std::string roc_csv(std::span<const RocPoint> curve);

}  // namespace tokenmark

#endif  // TOKENMARK_STATS_HPP_
