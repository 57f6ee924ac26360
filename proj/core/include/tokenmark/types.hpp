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

#ifndef TOKENMARK_TYPES_HPP_
#define TOKENMARK_TYPES_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace tokenmark {

using TokenId = std::uint32_t;

// The token vocabulary. Ids are dense: 0..size-1.
class Codebook {
 public:
  explicit Codebook(std::size_t size);

  std::size_t size() const noexcept { return size_; }
  bool contains(TokenId id) const noexcept { return id < size_; }

  friend bool operator==(const Codebook&, const Codebook&) = default;

 private:
  std::size_t size_;
};

inline constexpr std::size_t kDefaultCodebookSize = 4096;

enum class ScheduleKind : std::uint32_t {
  kMultiScale = 0,  // one unit per resolution, t_i = h_i * w_i
  kPerToken = 1,    // one token per autoregressive step
};

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view text);

// Autoregressive unit structure: K units of t_1..t_K tokens.
class UnitSchedule {
 public:
  UnitSchedule(ScheduleKind kind, std::vector<std::size_t> unit_sizes);

  ScheduleKind kind() const noexcept { return kind_; }
  std::span<const std::size_t> unit_sizes() const noexcept { return sizes_; }
  std::size_t num_units() const noexcept { return sizes_.size(); }
  std::size_t total_tokens() const noexcept { return offsets_.back(); }
  std::size_t unit_size(std::size_t unit) const { return sizes_.at(unit); }
  // Flat index of the first token of `unit`; unit_offset(K) == total_tokens().
  std::size_t unit_offset(std::size_t unit) const { return offsets_.at(unit); }

  friend bool operator==(const UnitSchedule& a, const UnitSchedule& b) {
    return a.kind_ == b.kind_ && a.sizes_ == b.sizes_;
  }

 private:
  ScheduleKind kind_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

// Side lengths of the canonical ten-step multi-scale ladder; squares sum to 680.
inline constexpr std::size_t kVarSideLengths[] = {1, 2, 3, 4, 5, 6, 8, 10, 13, 16};

UnitSchedule make_var_schedule();
UnitSchedule make_multiscale_schedule(std::span<const std::size_t> side_lengths);
UnitSchedule make_rar_schedule(std::size_t n_tokens);

struct WatermarkParams {
  double gamma = 0.25;
  double delta = 2.0;
  double tau = 4.0;
  std::uint64_t initial_seed = 42;

  // Throws std::invalid_argument unless 0 < gamma < 1, delta >= 0 and both
  // lists are non-empty for `codebook`.
  void validate(const Codebook& codebook) const;
};

// round-half-to-even(gamma * vocab_size).
std::size_t green_list_size(std::size_t vocab_size, double gamma);

// Tokens of one generated or encoded image, stored flat in generation order
// and viewed unit by unit through the shared schedule.
class TokenSequence {
 public:
  TokenSequence(std::shared_ptr<const UnitSchedule> schedule,
                std::vector<TokenId> tokens);

  static TokenSequence from_units(std::shared_ptr<const UnitSchedule> schedule,
                                  const std::vector<std::vector<TokenId>>& units);

  const UnitSchedule& schedule() const noexcept { return *schedule_; }
  const std::shared_ptr<const UnitSchedule>& shared_schedule() const noexcept {
    return schedule_;
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  std::span<const TokenId> tokens() const noexcept { return tokens_; }
  std::span<TokenId> mutable_tokens() noexcept { return tokens_; }
  std::span<const TokenId> unit(std::size_t i) const;

  // Throws std::invalid_argument if any id is outside `codebook`.
  void validate(const Codebook& codebook) const;

  friend bool operator==(const TokenSequence& a, const TokenSequence& b) {
    return a.tokens_ == b.tokens_ && *a.schedule_ == *b.schedule_;
  }

 private:
  std::shared_ptr<const UnitSchedule> schedule_;
  std::vector<TokenId> tokens_;
};

}  // namespace tokenmark

#endif  // TOKENMARK_TYPES_HPP_
