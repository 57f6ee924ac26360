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


#include "tokenmark/embed.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tokenmark/detect.hpp"
#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

using testing::binomial_halfwidth;

GreenMask mask_of(std::size_t v, std::initializer_list<TokenId> green) {
  GreenMask m(v);
  for (const TokenId id : green) m.set_green(id);
  return m;
}

std::vector<double> random_logits(std::size_t v, SplitMix64& rng, double scale = 1.0) {
  std::vector<double> l(v);
  for (double& x : l) x = rng.normal() * scale;
  return l;
}

// The biased softmax written out term by term in long double.
std::vector<double> biased_softmax_oracle(const std::vector<double>& logits, const GreenMask& mask, double delta) {
  long double denom = 0.0L;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    denom += std::exp(static_cast<long double>(logits[k]) + (mask.is_green(k) ? delta : 0.0));
  }
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = static_cast<double>(
        std::exp(static_cast<long double>(logits[k]) + (mask.is_green(k) ? delta : 0.0)) / denom);
  }
  return p;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

TEST(BiasLogits, ZeroDeltaIsIdentity) {
  SplitMix64 rng(1);
  const auto l = random_logits(64, rng);
  EXPECT_EQ(bias_logits(l, partition(Codebook(64), 3, 0.25), 0.0), l);
}

TEST(BiasLogits, AddsDeltaToGreenOnly) {
  const std::vector<double> l = {1.0, 2.0, 3.0};
  const auto out = bias_logits(l, mask_of(3, {1}), 0.5);
  EXPECT_EQ(out, (std::vector<double>{1.0, 2.5, 3.0}));
  EXPECT_THROW(bias_logits(l, GreenMask(4), 1.0), std::invalid_argument);
}

TEST(BiasLogits, LnThreeGivesThreeToOne) {
  const std::vector<double> l = {0.0, 0.0};
  const auto p = softmax(bias_logits(l, mask_of(2, {0}), std::log(3.0)));
  EXPECT_NEAR(p[0], 0.75, 1e-15);
  EXPECT_NEAR(p[1], 0.25, 1e-15);
}

TEST(BiasLogits, AllGreenLeavesSoftmaxUnchanged) {
  SplitMix64 rng(2);
  const auto l = random_logits(100, rng);
  GreenMask all(100);
  for (TokenId id = 0; id < 100; ++id) all.set_green(id);
  EXPECT_LT(max_abs_diff(softmax(bias_logits(l, all, 3.7)), softmax(l)), 1e-15);
}

TEST(Softmax, ClosedForms) {
  const auto u = softmax(std::vector<double>{0, 0, 0, 0});
  for (const double p : u) EXPECT_DOUBLE_EQ(p, 0.25);
  const auto big = softmax(std::vector<double>{1000.0, 0.0});
  EXPECT_DOUBLE_EQ(big[0], 1.0);
  EXPECT_GE(big[1], 0.0);
  EXPECT_LT(big[1], 1e-300);
  const auto q = softmax(std::vector<double>{0.0, std::log(3.0)});
  EXPECT_NEAR(q[0], 0.25, 1e-15);
  EXPECT_NEAR(q[1], 0.75, 1e-15);
}

TEST(Softmax, SumsToOne) {
  SplitMix64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto p = softmax(random_logits(4096, rng, 1.0 + t));
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (const double x : p) ASSERT_GE(x, 0.0);
  }
}

TEST(BiasedSoftmax, ImplementedProbabilitiesMatchDirectEvaluation) {
  const Codebook cb(4096);
  SplitMix64 rng(4);
  for (const double delta : {0.0, 0.5, 2.0, 6.0}) {
    for (int t = 0; t < 10; ++t) {
      const auto l = random_logits(cb.size(), rng, 1.0 + 0.3 * t);
      const GreenMask m = partition(cb, rng.next(), 0.25);
      const auto oracle = biased_softmax_oracle(l, m, delta);
      EXPECT_LT(max_abs_diff(biased_probabilities(l, m, delta), oracle), 1e-12);
      EXPECT_LT(max_abs_diff(reweight_probabilities(softmax(l), m, delta), oracle), 1e-12);
      EXPECT_LT(max_abs_diff(softmax(bias_logits(l, m, delta)), oracle), 1e-12);
    }
  }
}

TEST(BiasedSoftmax, SyntheticModelPositionsMatch) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  TokenDistribution scratch;
  std::vector<double> logits(cb.size());
  SplitMix64 rng(5);
  std::vector<TokenId> history;
  for (std::size_t pos = 0; pos < 40; ++pos) {
    const GenerationContext ctx{pos / 8, pos % 8, pos, history};
    model.logits(ctx, logits);
    const DistributionView view = model.distribution(ctx, scratch);
    for (const double delta : {0.0, 0.5, 2.0, 6.0}) {
      const GreenMask m = partition(cb, rng.next(), 0.25);
      EXPECT_LT(max_abs_diff(reweight_probabilities(view.probs, m, delta), biased_softmax_oracle(logits, m, delta)),
                1e-12);
    }
    history.push_back(static_cast<TokenId>(rng.bounded(cb.size())));
  }
}

TEST(Sample, OneHot) {
  std::vector<double> p(4096, 0.0);
  p[1234] = 1.0;
  SplitMix64 rng(6);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample(p, rng), 1234u);
}

TEST(Sample, UniformFrequencies) {
  constexpr std::size_t kV = 4096;
  constexpr std::size_t kDraws = 1000000;
  const std::vector<double> p(kV, 1.0 / kV);
  std::vector<double> cdf(kV);
  cumulative_into(p, cdf);
  const auto guide = build_guide(cdf, 1024);
  SplitMix64 rng(7);
  std::vector<std::size_t> count(kV, 0);
  for (std::size_t i = 0; i < kDraws; ++i) ++count[sample_from_cdf(cdf, rng.uniform(), guide)];
  const double bound = 5.0 * std::sqrt(kDraws * (1.0 / kV) * (1.0 - 1.0 / kV));
  for (std::size_t k = 0; k < kV; ++k) {
    ASSERT_LE(std::abs(static_cast<double>(count[k]) - static_cast<double>(kDraws) / kV), bound)
        << "id " << k;
  }
}

TEST(Sample, DeterministicAndOneDrawPerToken) {
  SplitMix64 rng(8);
  const auto p = softmax(random_logits(512, rng));
  SplitMix64 a(99);
  SplitMix64 b(99);
  SplitMix64 c(99);
  std::vector<double> cdf(p.size());
  cumulative_into(p, cdf);
  for (int i = 0; i < 500; ++i) {
    const TokenId x = sample(p, a);
    EXPECT_EQ(x, sample(p, b));
    EXPECT_EQ(x, sample_from_cdf(cdf, c.uniform()));
  }
  EXPECT_EQ(a.state(), c.state());
}

TEST(Sample, GuideTableReturnsExactUpperBound) {
  SplitMix64 rng(9);
  for (int t = 0; t < 20; ++t) {
    auto p = softmax(random_logits(1000 + 37 * t, rng, 3.0));
    // zero-mass runs, including at the end
    for (std::size_t k = 0; k < p.size(); k += 7) p[k] = 0.0;
    p.back() = 0.0;
    std::vector<double> cdf(p.size());
    cumulative_into(p, cdf);
    const auto guide = build_guide(cdf, std::bit_ceil(p.size()) / 4);
    for (int i = 0; i < 2000; ++i) {
      const double u = i < 3 ? std::vector<double>{0.0, 0.5, std::nextafter(1.0, 0.0)}[i]
                             : rng.uniform();
      const TokenId with = sample_from_cdf(cdf, u, guide);
      ASSERT_EQ(with, sample_from_cdf(cdf, u));
      ASSERT_GT(p[with], 0.0);
    }
  }
}

TEST(SyntheticModel, DeterministicAndFinite) {
  const Codebook cb(4096);
  const SyntheticModel a(cb, {.model_seed = 11});
  const SyntheticModel b(cb, {.model_seed = 11});
  const SyntheticModel c(cb, {.model_seed = 12});
  std::vector<double> la(cb.size());
  std::vector<double> lb(cb.size());
  std::vector<double> lc(cb.size());
  const std::vector<TokenId> history = {3, 4};
  const GenerationContext ctx{1, 1, 2, history};
  a.logits(ctx, la);
  b.logits(ctx, lb);
  c.logits(ctx, lc);
  EXPECT_EQ(la, lb);
  EXPECT_NE(la, lc);
  for (const double x : la) ASSERT_TRUE(std::isfinite(x));
  std::vector<double> wrong(10);
  EXPECT_THROW(a.logits(ctx, wrong), std::invalid_argument);
}

TEST(SyntheticModel, ContextSensitivity) {
  const Codebook cb(256);
  const SyntheticModel sensitive(cb, {.model_seed = 1, .context_sensitive = true});
  const SyntheticModel blind(cb, {.model_seed = 1, .context_sensitive = false});
  std::size_t differs = 0;
  for (TokenId prev = 0; prev < 64; ++prev) {
    const std::vector<TokenId> h1 = {prev};
    const std::vector<TokenId> h2 = {prev + 100};
    const GenerationContext c1{3, 0, 10, h1};
    const GenerationContext c2{3, 0, 10, h2};
    EXPECT_EQ(blind.bank_index(c1), blind.bank_index(c2));
    differs += sensitive.bank_index(c1) != sensitive.bank_index(c2);
  }
  EXPECT_GT(differs, 50u);
}

TEST(SyntheticModel, TemperatureScalesLogits) {
  const Codebook cb(512);
  const SyntheticModel t1(cb, {.model_seed = 5, .temperature = 1.0});
  const SyntheticModel t2(cb, {.model_seed = 5, .temperature = 2.0});
  std::vector<double> a(cb.size());
  std::vector<double> b(cb.size());
  const GenerationContext ctx{0, 0, 0, {}};
  t1.logits(ctx, a);
  t2.logits(ctx, b);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_DOUBLE_EQ(a[k], 2.0 * b[k]);
  EXPECT_THROW(SyntheticModel(cb, {.temperature = 0.0}), std::invalid_argument);
  EXPECT_THROW(SyntheticModel(cb, {.bank_size = 0}), std::invalid_argument);
}

TEST(Generate, CleanEqualsWatermarkedAtZeroDelta) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  WatermarkParams params;
  params.delta = 0.0;
  for (const auto& schedule : {std::make_shared<const UnitSchedule>(make_var_schedule()),
                               std::make_shared<const UnitSchedule>(make_rar_schedule(680))}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      EXPECT_EQ(generate_clean(model, schedule, cb, seed),
                generate_watermarked(model, schedule, cb, params, seed).tokens);
    }
  }
}

TEST(Generate, Deterministic) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
  const WatermarkParams params;
  const auto a = generate_watermarked(model, schedule, cb, params, 77);
  const auto b = generate_watermarked(model, schedule, cb, params, 77);
  EXPECT_EQ(a.tokens, b.tokens);
  EXPECT_EQ(a.green, b.green);
  EXPECT_NE(a.tokens, generate_watermarked(model, schedule, cb, params, 78).tokens);
}

TEST(Generate, LargeDeltaMakesEveryTokenGreen) {
  const Codebook cb(4096);
  const testing::FlatSource flat(cb.size());
  WatermarkParams params;
  params.delta = 50.0;
  for (const auto& schedule : {std::make_shared<const UnitSchedule>(make_var_schedule()),
                               std::make_shared<const UnitSchedule>(make_rar_schedule(680))}) {
    const auto g = generate_watermarked(flat, schedule, cb, params, 1);
    EXPECT_EQ(g.green_total, 680u);
  }
}

TEST(Generate, RecordedColorsMatchRecomputedMasks) {
  const Codebook cb(4096);
  const SyntheticModel model(cb, {});
  const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
  const WatermarkParams params;
  const GreenLists lists(cb, params);
  GreenLists::Workspace ws;
  const auto g = generate_watermarked(model, schedule, cb, params, 5);
  ASSERT_EQ(g.green.size(), 680u);
  std::size_t total = 0;
  for (std::size_t i = 0; i < schedule->num_units(); ++i) {
    const GreenMask& m = lists.mask_after(i ? g.tokens.unit(i - 1) : std::span<const TokenId>{}, ws);
    for (std::size_t j = 0; j < schedule->unit_size(i); ++j) {
      const std::size_t k = schedule->unit_offset(i) + j;
      EXPECT_EQ(g.green[k] != 0, m.is_green(g.tokens.tokens()[k]));
      total += g.green[k];
    }
  }
  EXPECT_EQ(total, g.green_total);
}

TEST(Generate, RejectsMismatchedSource) {
  const SyntheticModel model(Codebook(100), {});
  const auto schedule = std::make_shared<const UnitSchedule>(make_rar_schedule(4));
  EXPECT_THROW(generate_clean(model, schedule, Codebook(4096), 1), std::invalid_argument);
  EXPECT_THROW(Watermarker(Codebook(4096), WatermarkParams{.delta = -1.0}), std::invalid_argument);
}

// Green totals of 1000 VAR sequences per delta, shared by the Monte-Carlo tests.
const std::map<double, std::vector<std::size_t>>& var_green_totals() {
  static const auto totals = [] {
    const Codebook cb(4096);
    const SyntheticModel model(cb, {});
    const auto schedule = std::make_shared<const UnitSchedule>(make_var_schedule());
    const auto lists = std::make_shared<const GreenLists>(cb, WatermarkParams{});
    std::map<double, std::vector<std::size_t>> out;
    for (const double delta : {0.0, 1.0, 2.0, 4.0, 6.0}) {
      const Watermarker wm(lists, delta);
      auto& v = out[delta];
      for (std::uint64_t s = 0; s < 1000; ++s) {
        v.push_back(wm.generate(model, schedule, derive_seed(31337, s)).green_total);
      }
    }
    return out;
  }();
  return totals;
}

double mean_fraction(const std::vector<std::size_t>& totals) {
  double sum = 0.0;
  for (const auto t : totals) sum += static_cast<double>(t) / 680.0;
  return sum / static_cast<double>(totals.size());
}

TEST(GenerateMonteCarlo, ZeroDeltaGreenFractionIsGamma) {
  const double mean = mean_fraction(var_green_totals().at(0.0));
  EXPECT_GE(mean, 0.24);
  EXPECT_LE(mean, 0.26);
}

TEST(GenerateMonteCarlo, VarDeltaSixGenerationTimeZ) {
  std::size_t above = 0;
  for (const auto t : var_green_totals().at(6.0)) above += z_statistic(t, 680, 0.25) > 4.0;
  EXPECT_GE(above, 990u);
}

TEST(GenerateMonteCarlo, GreenRateNonDecreasingInDelta) {
  double previous = -1.0;
  double previous_halfwidth = 0.0;
  for (const auto& [delta, totals] : var_green_totals()) {
    const double mean = mean_fraction(totals);
    // 3 sigma of a 680*1000-token proportion on each side
    const double hw = binomial_halfwidth(mean, totals.size() * 680);
    EXPECT_GE(mean + hw + previous_halfwidth, previous) << "delta " << delta;
    previous = mean;
    previous_halfwidth = hw;
  }
  EXPECT_GT(mean_fraction(var_green_totals().at(6.0)), mean_fraction(var_green_totals().at(0.0)));
}

}  // namespace
}  // namespace tokenmark
