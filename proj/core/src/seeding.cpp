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

#include "tokenmark/seeding.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

// Single-token masks are memoized only while the table stays small
// (|V|^2 bits; 2 MiB at |V| = 4096).
constexpr std::size_t kMaxMemoizedVocab = 16384;

}  // namespace

std::string_view to_string(HashAlgorithm algorithm) {
  switch (algorithm) {
    case HashAlgorithm::kFnv1a64:
      return "fnv1a64";
  }
  return "unknown";
}

std::string_view to_string(PrgAlgorithm algorithm) {
  switch (algorithm) {
    case PrgAlgorithm::kSplitMix64:
      return "splitmix64";
  }
  return "unknown";
}

HashAlgorithm parse_hash_algorithm(std::string_view text) {
  if (text == "fnv1a64") return HashAlgorithm::kFnv1a64;
  throw std::invalid_argument("unknown hash algorithm '" + std::string(text) + "'");
}

PrgAlgorithm parse_prg_algorithm(std::string_view text) {
  if (text == "splitmix64") return PrgAlgorithm::kSplitMix64;
  throw std::invalid_argument("unknown prg algorithm '" + std::string(text) + "'");
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (const unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t SeedChain::hash_unit(std::span<const TokenId> unit) const noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (const TokenId id : unit) {
    for (int b = 0; b < 4; ++b) {
      h ^= (id >> (8 * b)) & 0xFFU;
      h *= kFnvPrime;
    }
  }
  return h;
}

std::uint64_t SeedChain::hash_sentinel(std::uint64_t initial_seed) const noexcept {
  std::array<unsigned char, 8> bytes{};
  for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(initial_seed >> (8 * b));
  return fnv1a64(bytes);
}

GreenMask::GreenMask(std::size_t vocab_size)
    : vocab_size_(vocab_size), words_((vocab_size + 63) / 64, 0) {}

void GreenMask::clear() noexcept { std::fill(words_.begin(), words_.end(), 0); }

std::size_t GreenMask::green_count() const noexcept {
  std::size_t count = 0;
  for (const std::uint64_t w : words_) count += static_cast<std::size_t>(std::popcount(w));
  return count;
}

std::vector<TokenId> GreenMask::green_ids() const {
  std::vector<TokenId> ids;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      ids.push_back(static_cast<TokenId>(w * 64 + std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return ids;
}

void partition_into(std::size_t vocab_size, std::uint64_t seed, std::size_t green_size,
                    std::vector<TokenId>& perm, GreenMask& out) {
  perm.resize(vocab_size);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  if (out.vocab_size() != vocab_size) {
    out = GreenMask(vocab_size);
  } else {
    out.clear();
  }
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < green_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.bounded(vocab_size - i));
    std::swap(perm[i], perm[j]);
    out.set_green(perm[i]);
  }
}

GreenMask partition(const Codebook& codebook, std::uint64_t seed, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  std::vector<TokenId> perm;
  GreenMask mask(codebook.size());
  partition_into(codebook.size(), seed, green_list_size(codebook.size(), gamma), perm, mask);
  return mask;
}

GreenLists::GreenLists(const Codebook& codebook, const WatermarkParams& params,
                       SeedChain chain)
    : codebook_(codebook),
      gamma_(params.gamma),
      green_size_(0),
      initial_seed_(params.initial_seed),
      chain_(chain),
      memoize_single_(codebook.size() <= kMaxMemoizedVocab) {
  params.validate(codebook);
  green_size_ = green_list_size(codebook.size(), gamma_);
  std::vector<TokenId> perm;
  partition_into(codebook_.size(), chain_.hash_sentinel(initial_seed_), green_size_, perm,
                 sentinel_mask_);
  if (memoize_single_) {
    single_masks_.resize(codebook_.size());
    single_once_ = std::make_unique<std::once_flag[]>(codebook_.size());
  }
}

std::uint64_t GreenLists::seed_after(std::span<const TokenId> previous_unit) const noexcept {
  return previous_unit.empty() ? chain_.hash_sentinel(initial_seed_)
                               : chain_.hash_unit(previous_unit);
}

const GreenMask& GreenLists::mask_after(std::span<const TokenId> previous_unit,
                                        Workspace& ws) const {
  if (previous_unit.empty()) return sentinel_mask_;
  if (previous_unit.size() == 1 && memoize_single_) {
    const TokenId id = previous_unit.front();
    if (!codebook_.contains(id)) throw std::invalid_argument("token id outside the codebook");
    std::call_once(single_once_[id], [&] {
      std::vector<TokenId> perm;
      partition_into(codebook_.size(), chain_.hash_unit(previous_unit), green_size_, perm,
                     single_masks_[id]);
    });
    return single_masks_[id];
  }
  partition_into(codebook_.size(), chain_.hash_unit(previous_unit), green_size_, ws.perm,
                 ws.mask);
  return ws.mask;
}

}  // namespace tokenmark
