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

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tokenmark/channel.hpp"
#include "tokenmark/embed.hpp"
#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

// (k - gT) / sqrt(T g (1 - g)) evaluated in long double from the integers.
double z_oracle(long double k, long double t, long double g) {
  return static_cast<double>((k - g * t) / std::sqrt(t * g * (1.0L - g)));
}

std::shared_ptr<const UnitSchedule> var() {
  return std::make_shared<const UnitSchedule>(make_var_schedule());
}
std::shared_ptr<const UnitSchedule> rar() {
  return std::make_shared<const UnitSchedule>(make_rar_schedule(680));
}

TEST(ZStatistic, HandDerivedValues) {
  EXPECT_DOUBLE_EQ(z_statistic(170, 680, 0.25), 0.0);
  EXPECT_NEAR(z_statistic(680, 680, 0.25), 510.0 / std::sqrt(127.5), 1e-12);
  EXPECT_NEAR(z_statistic(680, 680, 0.25), 45.166, 1e-3);
  EXPECT_NEAR(z_statistic(204, 680, 0.25), 34.0 / std::sqrt(127.5), 1e-12);
  EXPECT_NEAR(z_statistic(204, 680, 0.25), 3.0111, 1e-3);
  for (std::size_t k = 0; k <= 680; k += 17) {
    EXPECT_NEAR(z_statistic(k, 680, 0.25), z_oracle(k, 680, 0.25L), 1e-12);
  }
}

TEST(ZStatistic, DomainErrors) {
  EXPECT_THROW(z_statistic(681, 680, 0.25), std::invalid_argument);
  EXPECT_THROW(z_statistic(0, 0, 0.25), std::invalid_argument);
  EXPECT_THROW(z_statistic(1, 10, 0.0), std::invalid_argument);
  EXPECT_THROW(z_statistic(1, 10, 1.0), std::invalid_argument);
}

TEST(PValue, ComplementaryNormalCdf) {
  const boost::math::normal n;
  for (const double z : {-3.0, -0.5, 0.0, 1.0, 2.326, 4.0, 8.0}) {
    EXPECT_NEAR(normal_upper_tail(z), boost::math::cdf(boost::math::complement(n, z)),
                1e-15 + 1e-12 * boost::math::cdf(boost::math::complement(n, z)));
  }
}

TEST(Detect, WatermarkedVarDeltaSix) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  WatermarkParams params;
  params.delta = 6.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto g = generate_watermarked(model, var(), cb, params, seed);
    const DetectionReport r = detect(g.tokens, cb, params);
    EXPECT_TRUE(r.decision);
    EXPECT_EQ(r.green_count, g.green_total);
    ASSERT_EQ(r.per_unit_green.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
      std::size_t unit_green = 0;
      for (std::size_t j = 0; j < g.tokens.schedule().unit_size(i); ++j) {
        unit_green += g.green[g.tokens.schedule().unit_offset(i) + j];
      }
      EXPECT_EQ(r.per_unit_green[i], unit_green);
    }
  }
}

TEST(Detect, LosslessRoundTripGreenCount) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {.model_seed = 3});
  for (const double delta : {0.0, 0.5, 2.0}) {
    WatermarkParams params;
    params.delta = delta;
    const Watermarker wm(cb, params);
    const Detector det(cb, params);
    for (const auto& schedule : {var(), rar()}) {
      for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const auto g = wm.generate(model, schedule, seed);
        ASSERT_EQ(det.detect(g.tokens).green_count, g.green_total);
      }
    }
  }
}

TEST(Detect, AllGreenSequence) {
  const Codebook cb(4096);
  const WatermarkParams params;
  const GreenLists lists(cb, params);
  for (const auto& schedule : {var(), rar()}) {
    const auto seq = testing::all_green_sequence(lists, schedule);
    const auto r = detect(seq, cb, params);
    EXPECT_EQ(r.green_count, 680u);
    EXPECT_NEAR(r.z_value, 45.166, 1e-3);
    EXPECT_TRUE(r.decision);
    EXPECT_EQ(r.p_value, 0.0);
  }
}

TEST(Detect, DecisionIsZAboveTau) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  for (const double tau : {-1.0, 0.0, 1.5, 4.0, 30.0}) {
    WatermarkParams params;
    params.delta = 0.7;
    params.tau = tau;
    const Watermarker wm(cb, params);
    const Detector det(cb, params);
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto r = det.detect(wm.generate(model, rar(), seed).tokens);
      EXPECT_EQ(r.decision, r.z_value > tau);
      EXPECT_NEAR(r.z_value, z_oracle(r.green_count, 680, 0.25L), 1e-12);
    }
  }
}

TEST(Detect, IgnoresTheLogitSource) {
  // Detection is a function of (tokens, params) only: a different model
  // producing the same tokens cannot change the report.
  const Codebook cb(4096);
  const WatermarkParams params;
  const auto seq = generate_watermarked(SyntheticModel(cb, {.model_seed = 1}), var(), cb, params, 2);
  const auto a = detect(seq.tokens, cb, params);
  const auto b = Detector(cb, params).detect(TokenSequence(seq.tokens));
  EXPECT_EQ(a.green_count, b.green_count);
  EXPECT_EQ(a.per_unit_green, b.per_unit_green);
}

TEST(Detect, RejectsOutOfVocabularyIds) {
  const auto schedule = std::make_shared<const UnitSchedule>(make_rar_schedule(3));
  const TokenSequence seq(schedule, {1, 2, 4096});
  EXPECT_THROW(detect(seq, Codebook(4096), WatermarkParams{}), std::invalid_argument);
}

TEST(Detect, OneCorruptedTokenMovesItsUnitByAtMostOne) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  const WatermarkParams params;
  const Detector det(cb, params);
  SplitMix64 rng(12);
  std::size_t cascades = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto g = generate_watermarked(model, var(), cb, params, seed);
    const auto before = det.detect(g.tokens);
    TokenSequence corrupted = g.tokens;
    const std::size_t k = rng.bounded(680);
    auto ids = corrupted.mutable_tokens();
    ids[k] = static_cast<TokenId>((ids[k] + 1 + rng.bounded(4095)) % 4096);
    const auto after = det.detect(corrupted);
    std::size_t unit = 0;
    while (corrupted.schedule().unit_offset(unit) + corrupted.schedule().unit_size(unit) <= k) ++unit;
    const auto diff = static_cast<long>(after.per_unit_green[unit]) -
                      static_cast<long>(before.per_unit_green[unit]);
    EXPECT_LE(std::abs(diff), 1);
    for (std::size_t i = 0; i < unit; ++i) EXPECT_EQ(after.per_unit_green[i], before.per_unit_green[i]);
    if (unit + 1 < 10 && after.per_unit_green[unit + 1] != before.per_unit_green[unit + 1]) ++cascades;
  }
  // the next unit is reseeded, so its count usually moves
  EXPECT_GT(cascades, 50u);
}

TEST(DetectionReport, JsonKeysAndRoundTrip) {
  const Codebook cb(4096);
  const WatermarkParams params;
  const auto seq = testing::all_green_sequence(GreenLists(cb, params), var());
  const auto r = detect(seq, cb, params);
  const auto j = to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"decision", "gamma", "green_count", "p_value",
                                            "per_unit_green", "total", "z"}));
  const auto back = detection_report_from_json(j);
  EXPECT_EQ(back.green_count, r.green_count);
  EXPECT_EQ(back.total_tokens, r.total_tokens);
  EXPECT_EQ(back.z_value, r.z_value);
  EXPECT_EQ(back.per_unit_green, r.per_unit_green);
  EXPECT_EQ(back.decision, r.decision);
}

TEST(TprAtFpr, IdenticalDistributionsGiveChance) {
  SplitMix64 rng(21);
  std::vector<double> a(10000);
  std::vector<double> b(10000);
  for (auto& x : a) x = rng.normal();
  for (auto& x : b) x = rng.normal();
  const double tpr = tpr_at_fpr(a, b, 0.01);
  EXPECT_GE(tpr, 0.005);
  EXPECT_LE(tpr, 0.02);
}

TEST(TprAtFpr, SeparatedDistributions) {
  const std::vector<double> clean = {-1.0, 0.0, 1.0, 2.0};
  const std::vector<double> wm = {10.0, 11.0};
  EXPECT_EQ(tpr_at_fpr(wm, clean, 0.01), 1.0);
  EXPECT_EQ(tpr_at_fpr(clean, wm, 0.01), 0.0);
}

TEST(TprAtFpr, ThresholdIsUpperNormalQuantile) {
  SplitMix64 rng(22);
  std::vector<double> z(100000);
  for (auto& x : z) x = rng.normal();
  const double q = boost::math::quantile(boost::math::complement(boost::math::normal(), 0.01));
  EXPECT_NEAR(threshold_at_fpr(z, 0.01), q, 0.1);
  EXPECT_NEAR(q, 2.326, 1e-3);
}

TEST(TprAtFpr, ThresholdRankRule) {
  // 100 values 0..99: the 99th smallest (98) leaves exactly one above.
  std::vector<double> z(100);
  for (int i = 0; i < 100; ++i) z[i] = i;
  EXPECT_EQ(threshold_at_fpr(z, 0.01), 98.0);
  EXPECT_EQ(tpr_at_fpr(std::vector<double>{98.0, 98.5}, z, 0.01), 0.5);
}

TEST(TprAtFpr, Errors) {
  const std::vector<double> some = {1.0};
  EXPECT_THROW(tpr_at_fpr({}, some, 0.01), std::invalid_argument);
  EXPECT_THROW(tpr_at_fpr(some, {}, 0.01), std::invalid_argument);
  EXPECT_THROW(tpr_at_fpr(some, some, 0.0), std::invalid_argument);
  EXPECT_THROW(tpr_at_fpr(some, some, 1.0), std::invalid_argument);
}

}  // namespace
}  // namespace tokenmark
