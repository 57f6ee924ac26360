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

#ifndef TOKENMARK_EMBED_HPP_
#define TOKENMARK_EMBED_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tokenmark/random.hpp"
#include "tokenmark/seeding.hpp"
#include "tokenmark/types.hpp"

namespace tokenmark {

// Where the next token is being sampled.
struct GenerationContext {
  std::size_t unit = 0;      // autoregressive step i (0-based)
  std::size_t position = 0;  // j within the unit
  std::size_t index = 0;     // flat position in generation order
  std::span<const TokenId> history;  // every token sampled before this one
};

struct TokenDistribution {
  std::vector<double> probs;
  std::vector<double> cdf;
};

// Borrowed next-token distribution. `cdf` is the running sum of `probs` in id
// order as formed by cumulative_into; `guide`, when present, is a search
// accelerator for sample_from_cdf.
struct DistributionView {
  std::span<const double> probs;
  std::span<const double> cdf;
  std::span<const std::uint32_t> guide;
};

// Next-token logits for the generator being watermarked.
// Implementations must be safe to call concurrently.
class LogitSource {
 public:
  virtual ~LogitSource() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual void logits(const GenerationContext& ctx, std::span<double> out) const = 0;

  // softmax(logits(ctx)); the default computes it into `scratch`. Sources
  // with precomputed tables override this and return views into them.
  virtual DistributionView distribution(const GenerationContext& ctx,
                                        TokenDistribution& scratch) const;
};

struct SyntheticModelConfig {
  std::uint64_t model_seed = 1;
  double temperature = 1.0;
  // Logits also depend on the previously sampled token (Markov-style).
  bool context_sensitive = true;
  // Number of distinct standard-normal logit vectors.
  std::size_t bank_size = 512;
};

// Stand-in generator. Each context (unit, position, previous token) is hashed
// onto one row of a seeded bank of i.i.d. N(0, 1) / temperature logit vectors.
class SyntheticModel final : public LogitSource {
 public:
  SyntheticModel(const Codebook& codebook, SyntheticModelConfig config);

  std::size_t vocab_size() const override { return vocab_size_; }
  void logits(const GenerationContext& ctx, std::span<double> out) const override;
  DistributionView distribution(const GenerationContext& ctx,
                                TokenDistribution& scratch) const override;

  std::size_t bank_index(const GenerationContext& ctx) const noexcept;
  const SyntheticModelConfig& config() const noexcept { return config_; }

 private:
  void bank_logits(std::size_t row, std::span<double> out) const;

  std::size_t vocab_size_;
  SyntheticModelConfig config_;
  std::size_t guide_size_;
  std::vector<double> probs_;
  std::vector<double> cdf_;
  std::vector<std::uint32_t> guide_;
};

// logits[k] + delta for green k, unchanged for red k.
std::vector<double> bias_logits(std::span<const double> logits, const GreenMask& mask,
                                double delta);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);
void softmax_into(std::span<const double> logits, std::span<double> out);

// The green-biased next-token distribution written out term by term:
// exp(l_k + delta) / (sum_R exp(l_i) + sum_G exp(l_i + delta)) for green k and
// exp(l_k) / (same denominator) for red k.
std::vector<double> biased_probabilities(std::span<const double> logits, const GreenMask& mask,
                                         double delta);

// The same distribution obtained from already-normalized probabilities by
// scaling green mass by e^delta and renormalizing. This is the route the
// generator samples from.
std::vector<double> reweight_probabilities(std::span<const double> probs, const GreenMask& mask,
                                           double delta);

// Running sum in 64-id blocks: cdf[k] = (sum of earlier blocks) + (partial
// sum inside k's block). Every sampler in the library uses this layout.
void cumulative_into(std::span<const double> probs, std::span<double> cdf);

// Guide table for sample_from_cdf: guide[m] = upper_bound(cdf, total * m / size).
std::vector<std::uint32_t> build_guide(std::span<const double> cdf, std::size_t size);

// Inverse-CDF draw: the first k with u * cdf.back() < cdf[k]. `u` in [0, 1).
TokenId sample_from_cdf(std::span<const double> cdf, double u,
                        std::span<const std::uint32_t> guide = {});

// One uniform draw from `rng`, then inverse-CDF over `probs`.
TokenId sample(std::span<const double> probs, SplitMix64& rng);

// Watermarked output plus the colour of every token under the mask that was
// active when it was sampled.
struct Generation {
  TokenSequence tokens;
  std::vector<std::uint8_t> green;
  std::size_t green_total = 0;
};

class Watermarker {
 public:
  Watermarker(const Codebook& codebook, const WatermarkParams& params, SeedChain chain = {});
  Watermarker(std::shared_ptr<const GreenLists> lists, double delta);

  Generation generate(const LogitSource& source,
                      const std::shared_ptr<const UnitSchedule>& schedule,
                      std::uint64_t gen_seed) const;

  const GreenLists& green_lists() const noexcept { return *lists_; }
  const std::shared_ptr<const GreenLists>& shared_green_lists() const noexcept { return lists_; }
  double delta() const noexcept { return delta_; }

 private:
  std::shared_ptr<const GreenLists> lists_;
  double delta_;
};

Generation generate_watermarked(const LogitSource& source,
                                const std::shared_ptr<const UnitSchedule>& schedule,
                                const Codebook& codebook, const WatermarkParams& params,
                                std::uint64_t gen_seed, SeedChain chain = {});

// Unwatermarked sampling: no partition is computed. Consumes the generator
// stream exactly like generate_watermarked, so at delta = 0 both return the
// same tokens.
TokenSequence generate_clean(const LogitSource& source,
                             const std::shared_ptr<const UnitSchedule>& schedule,
                             const Codebook& codebook, std::uint64_t gen_seed);

}  // namespace tokenmark

#endif  // TOKENMARK_EMBED_HPP_
