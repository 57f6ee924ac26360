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

#ifndef TOKENMARK_STUDENT_HPP_
#define TOKENMARK_STUDENT_HPP_

// Smoothed n-gram "student" trained on generated token sequences. It is the
// second-generation model in radioactivity experiments and knows nothing of
// green lists or logit bias.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tokenmark/types.hpp"

namespace tokenmark {

inline constexpr std::size_t kMaxStudentOrder = 3;
inline constexpr std::string_view kStudentMagic = "TMS1";

// Position class folded into every context: the unit index for multi-scale
// schedules, first-token vs. the rest for per-token schedules.
std::uint32_t context_class(const UnitSchedule& schedule, std::size_t unit);

class StudentModel {
 public:
  // Counts every (context, next token) pair at orders 0..order; contexts run
  // across unit boundaries in generation order and are padded with a
  // begin-of-sequence marker. Throws std::invalid_argument on an empty
  // corpus, mixed schedules, order > kMaxStudentOrder or smoothing <= 0.
  static StudentModel train(std::span<const TokenSequence> corpus, const Codebook& codebook,
                            std::size_t order, double smoothing, unsigned threads = 1);

  // Interpolated additive smoothing: with N context occurrences and pseudo
  // mass m = smoothing * |V|,
  //   P_L(x) = (c_L(x) + m * P_{L-1}(x)) / (N + m),   P_{-1}(x) = 1 / |V|.
  // At order 0 this is plain add-`smoothing` estimation.
  double probability(std::size_t unit, std::span<const TokenId> history, TokenId token) const;

  TokenSequence generate(std::uint64_t seed) const;

  std::size_t order() const noexcept { return order_; }
  double smoothing() const noexcept { return smoothing_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  const UnitSchedule& schedule() const noexcept { return *schedule_; }
  std::size_t num_contexts() const noexcept { return rows_.size(); }

  // Binary form: "TMS1", u32 order, f64 smoothing, u32 |V|, u32 kind, u32 K,
  // u32 t_1..t_K, u64 record count, then records sorted by (level, class,
  // previous tokens): u32 level, u32 class, level x u32 previous tokens,
  // u32 n, n x (u32 token, u64 count). All little-endian.
  std::string serialize() const;
  static StudentModel deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static StudentModel load(const std::filesystem::path& path);

  friend bool operator==(const StudentModel& a, const StudentModel& b);

 private:
  struct ContextKey {
    std::uint32_t level = 0;
    std::uint32_t unit_class = 0;
    std::array<TokenId, kMaxStudentOrder> previous{};  // most recent last

    friend auto operator<=>(const ContextKey&, const ContextKey&) = default;
  };
  struct ContextKeyHash {
    std::size_t operator()(const ContextKey& key) const noexcept;
  };
  struct Row {
    std::uint64_t total = 0;
    std::vector<TokenId> tokens;            // ascending
    std::vector<std::uint64_t> cumulative;  // running counts, aligned with tokens

    friend bool operator==(const Row&, const Row&) = default;
  };

  StudentModel() = default;
  static ContextKey make_key(std::size_t level, std::uint32_t unit_class,
                             std::span<const TokenId> history);
  const Row* find(const ContextKey& key) const;

  std::size_t order_ = 0;
  double smoothing_ = 1.0;
  std::size_t vocab_size_ = 0;
  std::shared_ptr<const UnitSchedule> schedule_;
  std::unordered_map<ContextKey, Row, ContextKeyHash> rows_;
};

// n student samples; sample i uses derive_seed(seed, i).
std::vector<TokenSequence> generate_student(const StudentModel& model, std::size_t n,
                                            std::uint64_t seed, unsigned threads = 1);

}  // namespace tokenmark

#endif  // TOKENMARK_STUDENT_HPP_
