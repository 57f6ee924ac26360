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

#ifndef TOKENMARK_SEEDING_HPP_
#define TOKENMARK_SEEDING_HPP_

// hash(previous unit) -> PRG seed -> green/red partition of the vocabulary.
// The embedder and the detector both go through GreenLists, so for the same
// previous unit they always see the same mask.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <vector>

#include "tokenmark/types.hpp"

namespace tokenmark {

enum class HashAlgorithm { kFnv1a64 };
enum class PrgAlgorithm { kSplitMix64 };

std::string_view to_string(HashAlgorithm algorithm);
std::string_view to_string(PrgAlgorithm algorithm);
HashAlgorithm parse_hash_algorithm(std::string_view text);
PrgAlgorithm parse_prg_algorithm(std::string_view text);

inline constexpr std::uint64_t kFnvOffsetBasis = 0xCBF29CE484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes,
                      std::uint64_t basis = kFnvOffsetBasis) noexcept;

struct SeedChain {
  HashAlgorithm hash = HashAlgorithm::kFnv1a64;
  PrgAlgorithm prg = PrgAlgorithm::kSplitMix64;

  // FNV-1a over the little-endian u32 encoding of the ids, in order.
  std::uint64_t hash_unit(std::span<const TokenId> unit) const noexcept;
  // FNV-1a over the 8 little-endian bytes of the initial seed (u0).
  std::uint64_t hash_sentinel(std::uint64_t initial_seed) const noexcept;

  friend bool operator==(const SeedChain&, const SeedChain&) = default;
};

// Bit-set over token ids; set bits are the green list.
class GreenMask {
 public:
  GreenMask() = default;
  explicit GreenMask(std::size_t vocab_size);

  bool is_green(TokenId id) const noexcept {
    return (words_[id >> 6] >> (id & 63)) & 1U;
  }
  void set_green(TokenId id) noexcept { words_[id >> 6] |= std::uint64_t{1} << (id & 63); }
  void clear() noexcept;

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t green_count() const noexcept;
  std::span<const std::uint64_t> words() const noexcept { return words_; }
  std::vector<TokenId> green_ids() const;

  friend bool operator==(const GreenMask&, const GreenMask&) = default;

 private:
  std::size_t vocab_size_ = 0;
  std::vector<std::uint64_t> words_;
};

// Seeded forward Fisher-Yates over [0, |V|), truncated after
// green_list_size(|V|, gamma) steps; the first slots are the green list.
GreenMask partition(const Codebook& codebook, std::uint64_t seed, double gamma);

// Allocation-free variant; `perm` is resized to the vocabulary as scratch.
void partition_into(std::size_t vocab_size, std::uint64_t seed, std::size_t green_size,
                    std::vector<TokenId>& perm, GreenMask& out);

// Green-list lookup for one watermark key (codebook, gamma, u0, chain).
// Masks after the sentinel and after every single-token unit are memoized on
// first use; longer units are partitioned into the caller's workspace.
class GreenLists {
 public:
  struct Workspace {
    std::vector<TokenId> perm;
    GreenMask mask;
  };

  GreenLists(const Codebook& codebook, const WatermarkParams& params, SeedChain chain = {});
  GreenLists(const GreenLists&) = delete;
  GreenLists& operator=(const GreenLists&) = delete;

  // Seed for the unit following `previous_unit`; an empty span means u0.
  std::uint64_t seed_after(std::span<const TokenId> previous_unit) const noexcept;

  // Mask for the unit following `previous_unit`. The reference is valid until
  // `ws` is reused or this object is destroyed.
  const GreenMask& mask_after(std::span<const TokenId> previous_unit, Workspace& ws) const;

  const Codebook& codebook() const noexcept { return codebook_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t green_size() const noexcept { return green_size_; }
  std::uint64_t initial_seed() const noexcept { return initial_seed_; }
  const SeedChain& chain() const noexcept { return chain_; }

 private:
  Codebook codebook_;
  double gamma_;
  std::size_t green_size_;
  std::uint64_t initial_seed_;
  SeedChain chain_;
  GreenMask sentinel_mask_;
  bool memoize_single_;
  mutable std::vector<GreenMask> single_masks_;
  std::unique_ptr<std::once_flag[]> single_once_;
};

}  // namespace tokenmark

#endif  // TOKENMARK_SEEDING_HPP_
