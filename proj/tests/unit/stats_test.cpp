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

#include <cmath>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tokenmark/detect.hpp"
#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

using testing::binomial_halfwidth;

TEST(Quantile, Type7) {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.9), 3.7);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 1.0), 4.0);
  EXPECT_THROW(quantile_sorted({}, 0.5), std::invalid_argument);
}

TEST(Summarize, MatchesTwoPassMoments) {
  SplitMix64 rng(1);
  std::vector<double> x(5000);
  for (auto& v : x) v = 3.0 + 2.0 * rng.normal();
  const Summary s = summarize(x);
  double mean = 0.0;
  for (const double v : x) mean += v;
  mean /= x.size();
  double ss = 0.0;
  for (const double v : x) ss += (v - mean) * (v - mean);
  EXPECT_EQ(s.n, x.size());
  EXPECT_NEAR(s.mean, mean, 1e-12);
  EXPECT_NEAR(s.variance, ss / (x.size() - 1), 1e-10);
  EXPECT_LE(s.min, s.p50);
  EXPECT_LE(s.p50, s.p90);
  EXPECT_LE(s.p90, s.p99);
  EXPECT_LE(s.p99, s.p999);
  EXPECT_LE(s.p999, s.max);
  EXPECT_GE(s.variance, 0.0);
  EXPECT_THROW(summarize({}), std::invalid_argument);
}

TEST(BinomialTail, ClosedForms) {
  EXPECT_NEAR(binomial_tail_exact(680, 680, 0.25).log_value, 680.0 * std::log(0.25), 1e-9);
  EXPECT_EQ(binomial_tail_exact(680, 680, 0.25).value(), 0.0);  // 0.25^680 underflows a double
  EXPECT_DOUBLE_EQ(binomial_tail_exact(0, 10, 0.25).value(), 1.0);
  EXPECT_NEAR(binomial_tail_exact(5, 10, 0.5).value(), 0.623046875, 1e-13);
  EXPECT_THROW(binomial_tail_exact(11, 10, 0.5), std::invalid_argument);
  EXPECT_THROW(binomial_tail_exact(1, 10, 1.0), std::invalid_argument);
}

TEST(BinomialTail, MatchesBoost) {
  for (const std::size_t n : {1u, 10u, 100u, 680u}) {
    for (const double p : {0.05, 0.25, 0.5, 0.9}) {
      const boost::math::binomial dist(static_cast<double>(n), p);
      for (std::size_t k = 1; k <= n; k += std::max<std::size_t>(1, n / 37)) {
        const double oracle = boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
        if (oracle < 1e-300) continue;
        EXPECT_NEAR(binomial_tail_exact(k, n, p).value(), oracle, 1e-10 * oracle) << n << " " << p << " " << k;
      }
    }
  }
}

TEST(BinomialTail, ExactAndNormalDecisionsAgreeAwayFromTheBoundary) {
  const double tau = 4.0;
  const double alpha = 0.5 * std::erfc(tau / std::sqrt(2.0));
  std::vector<std::size_t> disagree;
  for (std::size_t k = 0; k <= 680; ++k) {
    const bool normal = z_statistic(k, 680, 0.25) > tau;
    const bool exact = binomial_tail_exact(k, 680, 0.25).value() < alpha;
    if (normal != exact) disagree.push_back(k);
  }
  // z > 4 at gT + 4 sqrt(T g (1-g)) = 215.17
  const double boundary = 170.0 + tau * std::sqrt(127.5);
  for (const std::size_t k : disagree) EXPECT_LE(std::abs(static_cast<double>(k) - boundary), 2.0) << k;
}

TEST(Roc, NoSignalIsDiagonal) {
  SplitMix64 rng(2);
  std::vector<double> a(10000);
  std::vector<double> b(10000);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  const auto curve = roc(a, b);
  EXPECT_NEAR(auc(curve), 0.5, 0.02);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].fpr, curve[i - 1].fpr);
    EXPECT_GE(curve[i].tpr, curve[i - 1].tpr);
  }
  EXPECT_EQ(curve.front().fpr, 0.0);
  EXPECT_EQ(curve.front().tpr, 0.0);
  EXPECT_EQ(curve.back().fpr, 1.0);
  EXPECT_EQ(curve.back().tpr, 1.0);
}

TEST(Roc, DisjointSamples) {
  EXPECT_DOUBLE_EQ(auc(roc(std::vector<double>{5, 6, 7}, std::vector<double>{1, 2})), 1.0);
  EXPECT_DOUBLE_EQ(auc(roc(std::vector<double>{1, 2}, std::vector<double>{5, 6, 7})), 0.0);
  EXPECT_DOUBLE_EQ(auc(roc(std::vector<double>{1, 1}, std::vector<double>{1, 1})), 0.5);
  EXPECT_THROW(roc({}, std::vector<double>{1}), std::invalid_argument);
}

TEST(Tolerance, ThreeSigma) {
  EXPECT_DOUBLE_EQ(binomial_tolerance(0.01, 10000), 3.0 * std::sqrt(0.01 * 0.99 / 10000));
  EXPECT_DOUBLE_EQ(binomial_tolerance(0.5, 100, 2.0), 0.1);
}

TEST(Csv, Layout) {
  EXPECT_EQ(summary_csv_header(), "n,mean,variance,p50,p90,p99,p999,min,max");
  Summary s;
  s.n = 3;
  s.mean = 0.5;
  EXPECT_EQ(summary_csv_row(s), "3,0.5,0,0,0,0,0,0,0");
  const std::vector<RocPoint> curve = {{0.0, 0.0}, {0.25, 1.0}};
  EXPECT_EQ(roc_csv(curve), "fpr,tpr\n0,0\n0.25,1\n");
}

TEST(CleanZ, IndependentOfThreadCount) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
  const auto a = clean_z_values(model, schedule, cb, WatermarkParams{}, 300, 5, 1);
  const auto b = clean_z_values(model, schedule, cb, WatermarkParams{}, 300, 5, 3);
  EXPECT_EQ(a, b);
}

TEST(CalibrateFpr, NeedsAThousandTrials) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
  EXPECT_THROW(calibrate_fpr(model, schedule, cb, WatermarkParams{}, 999, 1), std::invalid_argument);
}

// 10^5 clean VAR sequences; the acceptance suite runs the tau = 4 check.
TEST(CalibrateFprMonteCarlo, NormalQuantileThreshold) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {.model_seed = 77});
  const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
  WatermarkParams params;
  params.tau = 2.326;
  const auto cal = calibrate_fpr(model, schedule, cb, params, 100000, 4242);
  const double expected = boost::math::cdf(boost::math::complement(boost::math::normal(), 2.326));
  EXPECT_NEAR(cal.fpr, expected, 0.002);
  EXPECT_NEAR(cal.fpr, 0.01, 0.002);
  EXPECT_NEAR(cal.summary.mean, 0.0, 0.02);
  EXPECT_NEAR(cal.summary.variance, 1.0, 0.05);
  std::size_t above = 0;
  for (const double z : cal.z_values) above += z > params.tau;
  EXPECT_EQ(above, cal.exceedances);
  // clean green fraction 0.25 +/- 0.005
  EXPECT_NEAR(0.25 + cal.summary.mean * std::sqrt(0.25 * 0.75 / 680.0), 0.25, 0.005);
}

}  // namespace
}  // namespace tokenmark
