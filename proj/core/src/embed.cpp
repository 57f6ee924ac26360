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

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tokenmark {
namespace {

constexpr std::uint64_t kNoPrevious = std::uint64_t{1} << 32;

void check_finite(std::span<const double> logits) {
  for (const double l : logits) {
    if (!std::isfinite(l)) throw std::invalid_argument("logit source produced a non-finite value");
  }
}

constexpr std::size_t kBlock = 64;

// Inverse-CDF draw over the green-reweighted distribution. The running sum
// is formed block by block exactly as cumulative_into does, so with
// boost == 1 every cdf value seen here equals the source's cdf bit for bit
// and the drawn id matches sample_from_cdf on the clean distribution.
TokenId sample_reweighted(std::span<const double> probs, const GreenMask& mask, double boost,
                          double u, std::vector<double>& block_prefix) {
  const std::size_t n = probs.size();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  const auto words = mask.words();
  const double weight[2] = {1.0, boost};
  block_prefix.resize(blocks);

  auto block_sum = [&](std::size_t b) {
    const std::size_t begin = b * kBlock;
    const std::size_t end = std::min(n, begin + kBlock);
    const std::uint64_t bits = words[b];
    double r = 0.0;
    for (std::size_t k = begin; k < end; ++k) r += probs[k] * weight[(bits >> (k - begin)) & 1U];
    return r;
  };

  // Four independent block sums per pass keep the adders busy.
  std::size_t b = 0;
  for (; b + 4 <= blocks && (b + 4) * kBlock <= n; b += 4) {
    const double* p = probs.data() + b * kBlock;
    const std::uint64_t w0 = words[b], w1 = words[b + 1], w2 = words[b + 2], w3 = words[b + 3];
    double r0 = 0.0, r1 = 0.0, r2 = 0.0, r3 = 0.0;
    for (std::size_t t = 0; t < kBlock; ++t) {
      r0 += p[t] * weight[(w0 >> t) & 1U];
      r1 += p[kBlock + t] * weight[(w1 >> t) & 1U];
      r2 += p[2 * kBlock + t] * weight[(w2 >> t) & 1U];
      r3 += p[3 * kBlock + t] * weight[(w3 >> t) & 1U];
    }
    block_prefix[b] = r0;
    block_prefix[b + 1] = r1;
    block_prefix[b + 2] = r2;
    block_prefix[b + 3] = r3;
  }
  for (; b < blocks; ++b) block_prefix[b] = block_sum(b);

  double base = 0.0;
  for (double& s : block_prefix) {
    base = base + s;
    s = base;
  }

  const double target = u * block_prefix.back();
  auto hit = std::upper_bound(block_prefix.begin(), block_prefix.end(), target);
  if (hit == block_prefix.end()) --hit;
  const auto block = static_cast<std::size_t>(hit - block_prefix.begin());
  const double start = block == 0 ? 0.0 : block_prefix[block - 1];
  const std::size_t begin = block * kBlock;
  const std::size_t end = std::min(n, begin + kBlock);
  const std::uint64_t bits = words[block];
  double r = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    r += probs[k] * weight[(bits >> (k - begin)) & 1U];
    if (target < start + r) return static_cast<TokenId>(k);
  }
  return static_cast<TokenId>(end - 1);
}

}  // namespace

DistributionView LogitSource::distribution(const GenerationContext& ctx,
                                           TokenDistribution& scratch) const {
  const std::size_t n = vocab_size();
  scratch.probs.resize(n);
  scratch.cdf.resize(n);
  logits(ctx, scratch.cdf);
  check_finite(scratch.cdf);
  softmax_into(scratch.cdf, scratch.probs);
  cumulative_into(scratch.probs, scratch.cdf);
  return {scratch.probs, scratch.cdf, {}};
}

SyntheticModel::SyntheticModel(const Codebook& codebook, SyntheticModelConfig config)
    : vocab_size_(codebook.size()), config_(config) {
  if (!(config_.temperature > 0.0) || !std::isfinite(config_.temperature)) {
    throw std::invalid_argument("synthetic model temperature must be positive");
  }
  if (config_.bank_size == 0) throw std::invalid_argument("synthetic model bank_size must be >= 1");
  guide_size_ = std::max<std::size_t>(1, std::bit_ceil(vocab_size_) / 4);
  probs_.resize(config_.bank_size * vocab_size_);
  cdf_.resize(config_.bank_size * vocab_size_);
  guide_.resize(config_.bank_size * guide_size_);
  std::vector<double> row_logits(vocab_size_);
  for (std::size_t row = 0; row < config_.bank_size; ++row) {
    bank_logits(row, row_logits);
    const std::span<double> probs(probs_.data() + row * vocab_size_, vocab_size_);
    const std::span<double> cdf(cdf_.data() + row * vocab_size_, vocab_size_);
    softmax_into(row_logits, probs);
    cumulative_into(probs, cdf);
    const auto guide = build_guide(cdf, guide_size_);
    std::copy(guide.begin(), guide.end(), guide_.begin() + row * guide_size_);
  }
}

void SyntheticModel::bank_logits(std::size_t row, std::span<double> out) const {
  SplitMix64 rng(derive_seed(derive_seed(config_.model_seed, "bank"), row));
  const double scale = 1.0 / config_.temperature;
  for (double& l : out) l = rng.normal() * scale;
}

std::size_t SyntheticModel::bank_index(const GenerationContext& ctx) const noexcept {
  std::uint64_t h = derive_seed(config_.model_seed, ctx.unit);
  h = derive_seed(h, ctx.position);
  if (config_.context_sensitive) {
    h = derive_seed(h, ctx.history.empty() ? kNoPrevious : std::uint64_t{ctx.history.back()});
  }
  return static_cast<std::size_t>(h % config_.bank_size);
}

void SyntheticModel::logits(const GenerationContext& ctx, std::span<double> out) const {
  if (out.size() != vocab_size_) throw std::invalid_argument("logit buffer has the wrong length");
  bank_logits(bank_index(ctx), out);
}

DistributionView SyntheticModel::distribution(const GenerationContext& ctx,
                                              TokenDistribution&) const {
  const std::size_t row = bank_index(ctx);
  return {std::span<const double>(probs_.data() + row * vocab_size_, vocab_size_),
          std::span<const double>(cdf_.data() + row * vocab_size_, vocab_size_),
          std::span<const std::uint32_t>(guide_.data() + row * guide_size_, guide_size_)};
}

std::vector<double> bias_logits(std::span<const double> logits, const GreenMask& mask,
                                double delta) {
  if (logits.size() != mask.vocab_size()) {
    throw std::invalid_argument("logit vector length does not match the codebook");
  }
  std::vector<double> out(logits.begin(), logits.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (mask.is_green(static_cast<TokenId>(k))) out[k] += delta;
  }
  return out;
}

void softmax_into(std::span<const double> logits, std::span<double> out) {
  if (logits.empty()) return;
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - max);
    sum += out[k];
  }
  const double inv = 1.0 / sum;
  for (std::size_t k = 0; k < logits.size(); ++k) out[k] *= inv;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  softmax_into(logits, out);
  return out;
}

std::vector<double> biased_probabilities(std::span<const double> logits, const GreenMask& mask,
                                         double delta) {
  if (logits.size() != mask.vocab_size()) {
    throw std::invalid_argument("logit vector length does not match the codebook");
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logits.size(); ++k) {
    shift = std::max(shift, logits[k] + (mask.is_green(static_cast<TokenId>(k)) ? delta : 0.0));
  }
  double red_sum = 0.0;
  double green_sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (mask.is_green(static_cast<TokenId>(k))) {
      green_sum += std::exp(logits[k] + delta - shift);
    } else {
      red_sum += std::exp(logits[k] - shift);
    }
  }
  const double denom = red_sum + green_sum;
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const bool green = mask.is_green(static_cast<TokenId>(k));
    out[k] = std::exp(logits[k] + (green ? delta : 0.0) - shift) / denom;
  }
  return out;
}

std::vector<double> reweight_probabilities(std::span<const double> probs, const GreenMask& mask,
                                           double delta) {
  if (probs.size() != mask.vocab_size()) {
    throw std::invalid_argument("probability vector length does not match the codebook");
  }
  const double boost = std::exp(delta);
  double green_mass = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (mask.is_green(static_cast<TokenId>(k))) green_mass += probs[k];
  }
  const double norm = 1.0 + (boost - 1.0) * green_mass;
  std::vector<double> out(probs.size());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    out[k] = probs[k] * (mask.is_green(static_cast<TokenId>(k)) ? boost : 1.0) / norm;
  }
  return out;
}

void cumulative_into(std::span<const double> probs, std::span<double> cdf) {
  double base = 0.0;
  for (std::size_t begin = 0; begin < probs.size(); begin += kBlock) {
    const std::size_t end = std::min(probs.size(), begin + kBlock);
    double r = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      r += probs[k];
      cdf[k] = base + r;
    }
    base = base + r;
  }
}

std::vector<std::uint32_t> build_guide(std::span<const double> cdf, std::size_t size) {
  std::vector<std::uint32_t> guide(size);
  const double total = cdf.back();
  const double inv = 1.0 / static_cast<double>(size);
  for (std::size_t m = 0; m < size; ++m) {
    const double threshold = total * (static_cast<double>(m) * inv);
    guide[m] = static_cast<std::uint32_t>(
        std::upper_bound(cdf.begin(), cdf.end(), threshold) - cdf.begin());
  }
  return guide;
}

TokenId sample_from_cdf(std::span<const double> cdf, double u,
                        std::span<const std::uint32_t> guide) {
  const double target = u * cdf.back();
  std::size_t k;
  if (!guide.empty()) {
    // guide.size() is a power of two, so u * size is exact and the guide
    // entry never overshoots the upper_bound below.
    const auto m = static_cast<std::size_t>(u * static_cast<double>(guide.size()));
    k = guide[std::min(m, guide.size() - 1)];
    while (k < cdf.size() && !(target < cdf[k])) ++k;
  } else {
    k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
  }
  if (k >= cdf.size()) {
    // Only reachable through rounding at the very top; fall back to the last
    // id with positive mass.
    k = cdf.size() - 1;
    while (k > 0 && cdf[k] == cdf[k - 1]) --k;
  }
  return static_cast<TokenId>(k);
}

TokenId sample(std::span<const double> probs, SplitMix64& rng) {
  std::vector<double> cdf(probs.size());
  cumulative_into(probs, cdf);
  return sample_from_cdf(cdf, rng.uniform());
}

Watermarker::Watermarker(const Codebook& codebook, const WatermarkParams& params, SeedChain chain)
    : lists_(std::make_shared<const GreenLists>(codebook, params, chain)), delta_(params.delta) {}

Watermarker::Watermarker(std::shared_ptr<const GreenLists> lists, double delta)
    : lists_(std::move(lists)), delta_(delta) {
  if (!lists_) throw std::invalid_argument("watermarker needs green lists");
  if (!(delta_ >= 0.0) || !std::isfinite(delta_)) {
    throw std::invalid_argument("delta must be finite and non-negative");
  }
}

Generation Watermarker::generate(const LogitSource& source,
                                 const std::shared_ptr<const UnitSchedule>& schedule,
                                 std::uint64_t gen_seed) const {
  if (!schedule) throw std::invalid_argument("generation needs a schedule");
  if (source.vocab_size() != lists_->codebook().size()) {
    throw std::invalid_argument("logit source vocabulary does not match the codebook");
  }
  const std::size_t total = schedule->total_tokens();
  std::vector<TokenId> tokens(total);
  std::vector<std::uint8_t> green(total, 0);
  std::size_t green_total = 0;

  SplitMix64 rng(gen_seed);
  const double boost = std::exp(delta_);
  GreenLists::Workspace ws;
  TokenDistribution scratch;
  std::vector<double> cdf;

  for (std::size_t i = 0; i < schedule->num_units(); ++i) {
    const std::size_t begin = schedule->unit_offset(i);
    const std::span<const TokenId> previous =
        i == 0 ? std::span<const TokenId>{}
               : std::span<const TokenId>(tokens).subspan(schedule->unit_offset(i - 1),
                                                          schedule->unit_size(i - 1));
    const GreenMask& mask = lists_->mask_after(previous, ws);
    for (std::size_t j = 0; j < schedule->unit_size(i); ++j) {
      const std::size_t index = begin + j;
      const GenerationContext ctx{i, j, index, std::span<const TokenId>(tokens.data(), index)};
      const DistributionView dist = source.distribution(ctx, scratch);
      const TokenId id = sample_reweighted(dist.probs, mask, boost, rng.uniform(), cdf);
      tokens[index] = id;
      if (mask.is_green(id)) {
        green[index] = 1;
        ++green_total;
      }
    }
  }
  return {TokenSequence(schedule, std::move(tokens)), std::move(green), green_total};
}

Generation generate_watermarked(const LogitSource& source,
                                const std::shared_ptr<const UnitSchedule>& schedule,
                                const Codebook& codebook, const WatermarkParams& params,
                                std::uint64_t gen_seed, SeedChain chain) {
  return Watermarker(codebook, params, chain).generate(source, schedule, gen_seed);
}

TokenSequence generate_clean(const LogitSource& source,
                             const std::shared_ptr<const UnitSchedule>& schedule,
                             const Codebook& codebook, std::uint64_t gen_seed) {
  if (!schedule) throw std::invalid_argument("generation needs a schedule");
  if (source.vocab_size() != codebook.size()) {
    throw std::invalid_argument("logit source vocabulary does not match the codebook");
  }
  const std::size_t total = schedule->total_tokens();
  std::vector<TokenId> tokens(total);
  SplitMix64 rng(gen_seed);
  TokenDistribution scratch;
  for (std::size_t i = 0; i < schedule->num_units(); ++i) {
    const std::size_t begin = schedule->unit_offset(i);
    for (std::size_t j = 0; j < schedule->unit_size(i); ++j) {
      const std::size_t index = begin + j;
      const GenerationContext ctx{i, j, index, std::span<const TokenId>(tokens.data(), index)};
      const DistributionView dist = source.distribution(ctx, scratch);
      tokens[index] = sample_from_cdf(dist.cdf, rng.uniform(), dist.guide);
    }
  }
  return TokenSequence(schedule, std::move(tokens));
}

}  // namespace tokenmark
