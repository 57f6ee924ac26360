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

#include "tokenmark/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tokenmark/detect.hpp"
#include "tokenmark/parallel.hpp"
#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (sorted.size() == 1) return sorted.front();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summarize(std::span<const double> sample) {
  if (sample.empty()) throw std::invalid_argument("summarize: empty sample");
  Summary s;
  s.n = sample.size();
  // Welford.
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t k = 0;
  for (const double x : sample) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  s.mean = mean;
  s.variance = s.n > 1 ? m2 / static_cast<double>(s.n - 1) : 0.0;
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.p50 = quantile_sorted(sorted, 0.5);
  s.p90 = quantile_sorted(sorted, 0.9);
  s.p99 = quantile_sorted(sorted, 0.99);
  s.p999 = quantile_sorted(sorted, 0.999);
  return s;
}

std::vector<double> clean_z_values(const LogitSource& source,
                                   const std::shared_ptr<const UnitSchedule>& schedule,
                                   const Codebook& codebook, const WatermarkParams& params,
                                   std::size_t n, std::uint64_t seed, unsigned threads,
                                   SeedChain chain) {
  const Detector detector(codebook, params, chain);
  std::vector<double> z(n);
  parallel_for(n, threads, [&](std::size_t i) {
    z[i] = detector.z_value(generate_clean(source, schedule, codebook, derive_seed(seed, i)));
  });
  return z;
}

FprCalibration calibrate_fpr(const LogitSource& source,
                             const std::shared_ptr<const UnitSchedule>& schedule,
                             const Codebook& codebook, const WatermarkParams& params,
                             std::size_t n_trials, std::uint64_t seed, unsigned threads,
                             SeedChain chain) {
  if (n_trials < 1000) throw std::invalid_argument("calibrate_fpr needs at least 1000 trials");
  FprCalibration result;
  result.z_values = clean_z_values(source, schedule, codebook, params, n_trials, seed, threads,
                                   chain);
  result.summary = summarize(result.z_values);
  result.tau = params.tau;
  result.exceedances = static_cast<std::size_t>(
      std::count_if(result.z_values.begin(), result.z_values.end(),
                    [&](double z) { return z > params.tau; }));
  result.fpr = static_cast<double>(result.exceedances) / static_cast<double>(n_trials);
  return result;
}

std::vector<RocPoint> roc(std::span<const double> watermarked_z, std::span<const double> clean_z) {
  if (watermarked_z.empty() || clean_z.empty()) throw std::invalid_argument("roc: empty sample");
  struct Scored {
    double z;
    bool positive;
  };
  std::vector<Scored> pooled;
  pooled.reserve(watermarked_z.size() + clean_z.size());
  for (const double z : watermarked_z) pooled.push_back({z, true});
  for (const double z : clean_z) pooled.push_back({z, false});
  std::sort(pooled.begin(), pooled.end(), [](const Scored& a, const Scored& b) { return a.z > b.z; });

  const auto n_pos = static_cast<double>(watermarked_z.size());
  const auto n_neg = static_cast<double>(clean_z.size());
  std::vector<RocPoint> curve{{0.0, 0.0}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < pooled.size();) {
    const double threshold = pooled[k].z;
    for (; k < pooled.size() && pooled[k].z == threshold; ++k) {
      if (pooled[k].positive) {
        ++tp;
      } else {
        ++fp;
      }
    }
    curve.push_back({static_cast<double>(fp) / n_neg, static_cast<double>(tp) / n_pos});
  }
  return curve;
}

double auc(std::span<const RocPoint> curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.size(); ++k) {
    area += (curve[k].fpr - curve[k - 1].fpr) * 0.5 * (curve[k].tpr + curve[k - 1].tpr);
  }
  return area;
}

double TailProbability::value() const { return std::exp(log_value); }

TailProbability binomial_tail_exact(std::size_t green_count, std::size_t total, double gamma) {
  if (green_count > total) throw std::invalid_argument("binomial_tail_exact: k exceeds n");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("binomial_tail_exact: gamma must lie in (0, 1)");
  }
  if (green_count == 0) return {0.0};
  const auto n = static_cast<double>(total);
  const double log_g = std::log(gamma);
  const double log_r = std::log1p(-gamma);
  const double log_n_fact = std::lgamma(n + 1.0);
  std::vector<double> terms;
  terms.reserve(total - green_count + 1);
  double max_term = -std::numeric_limits<double>::infinity();
  for (std::size_t i = green_count; i <= total; ++i) {
    const auto k = static_cast<double>(i);
    const double t = log_n_fact - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * log_g +
                     (n - k) * log_r;
    terms.push_back(t);
    max_term = std::max(max_term, t);
  }
  double sum = 0.0;
  for (const double t : terms) sum += std::exp(t - max_term);
  return {std::min(0.0, max_term + std::log(sum))};
}

double binomial_tolerance(double p, std::size_t n, double sigmas) {
  return sigmas * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

std::string summary_csv_header() { return "n,mean,variance,p50,p90,p99,p999,min,max"; }

std::string summary_csv_row(const Summary& s) {
  std::ostringstream os;
  os << s.n << ',' << format_double(s.mean) << ',' << format_double(s.variance) << ','
     << format_double(s.p50) << ',' << format_double(s.p90) << ',' << format_double(s.p99) << ','
     << format_double(s.p999) << ',' << format_double(s.min) << ',' << format_double(s.max);
  return os.str();
}

std::string roc_csv(std::span<const RocPoint> curve) {
  std::ostringstream os;
  os << "fpr,tpr\n";
  for (const auto& p : curve) os << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  return os.str();
}

}  // namespace tokenmark
