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

#include "tokenmark/types.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tokenmark/parallel.hpp"

namespace tokenmark {

Codebook::Codebook(std::size_t size) : size_(size) {
  if (size < 2) throw std::invalid_argument("codebook size must be at least 2");
  if (size > (std::size_t{1} << 31)) {
    throw std::invalid_argument("codebook size exceeds 2^31");
  }
}

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kMultiScale:
      return "multiscale";
    case ScheduleKind::kPerToken:
      return "pertoken";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "multiscale") return ScheduleKind::kMultiScale;
  if (text == "pertoken") return ScheduleKind::kPerToken;
  throw std::invalid_argument("unknown schedule kind '" + std::string(text) + "'");
}

UnitSchedule::UnitSchedule(ScheduleKind kind, std::vector<std::size_t> unit_sizes)
    : kind_(kind), sizes_(std::move(unit_sizes)) {
  if (sizes_.empty()) throw std::invalid_argument("schedule needs at least one unit");
  offsets_.reserve(sizes_.size() + 1);
  offsets_.push_back(0);
  for (const std::size_t t : sizes_) {
    if (t == 0) throw std::invalid_argument("schedule unit sizes must be positive");
    if (kind_ == ScheduleKind::kPerToken && t != 1) {
      throw std::invalid_argument("per-token schedules have unit size 1");
    }
    offsets_.push_back(offsets_.back() + t);
  }
}

UnitSchedule make_multiscale_schedule(std::span<const std::size_t> side_lengths) {
  std::vector<std::size_t> sizes;
  sizes.reserve(side_lengths.size());
  for (const std::size_t side : side_lengths) sizes.push_back(side * side);
  return UnitSchedule(ScheduleKind::kMultiScale, std::move(sizes));
}

UnitSchedule make_var_schedule() { return make_multiscale_schedule(kVarSideLengths); }

UnitSchedule make_rar_schedule(std::size_t n_tokens) {
  if (n_tokens == 0) throw std::invalid_argument("per-token schedule needs n_tokens >= 1");
  return UnitSchedule(ScheduleKind::kPerToken, std::vector<std::size_t>(n_tokens, 1));
}

std::size_t green_list_size(std::size_t vocab_size, double gamma) {
  // nearbyint honours the default round-to-nearest-even mode.
  return static_cast<std::size_t>(std::nearbyint(gamma * static_cast<double>(vocab_size)));
}

void WatermarkParams::validate(const Codebook& codebook) const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("delta must be finite and non-negative");
  }
  if (!std::isfinite(tau)) throw std::invalid_argument("tau must be finite");
  const std::size_t green = green_list_size(codebook.size(), gamma);
  if (green < 1 || green > codebook.size() - 1) {
    throw std::invalid_argument("gamma * |V| must leave both lists non-empty");
  }
}

TokenSequence::TokenSequence(std::shared_ptr<const UnitSchedule> schedule,
                             std::vector<TokenId> tokens)
    : schedule_(std::move(schedule)), tokens_(std::move(tokens)) {
  if (!schedule_) throw std::invalid_argument("token sequence needs a schedule");
  if (tokens_.size() != schedule_->total_tokens()) {
    throw std::invalid_argument("token count " + std::to_string(tokens_.size()) +
                                " does not match schedule total " +
                                std::to_string(schedule_->total_tokens()));
  }
}

TokenSequence TokenSequence::from_units(std::shared_ptr<const UnitSchedule> schedule,
                                        const std::vector<std::vector<TokenId>>& units) {
  if (!schedule) throw std::invalid_argument("token sequence needs a schedule");
  if (units.size() != schedule->num_units()) {
    throw std::invalid_argument("unit count does not match schedule");
  }
  std::vector<TokenId> flat;
  flat.reserve(schedule->total_tokens());
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].size() != schedule->unit_size(i)) {
      throw std::invalid_argument("unit " + std::to_string(i) + " has " +
                                  std::to_string(units[i].size()) + " tokens, expected " +
                                  std::to_string(schedule->unit_size(i)));
    }
    flat.insert(flat.end(), units[i].begin(), units[i].end());
  }
  return TokenSequence(std::move(schedule), std::move(flat));
}

std::span<const TokenId> TokenSequence::unit(std::size_t i) const {
  return std::span<const TokenId>(tokens_).subspan(schedule_->unit_offset(i),
                                                   schedule_->unit_size(i));
}

void TokenSequence::validate(const Codebook& codebook) const {
  for (std::size_t k = 0; k < tokens_.size(); ++k) {
    if (!codebook.contains(tokens_[k])) {
      throw std::invalid_argument("token id " + std::to_string(tokens_[k]) + " at position " +
                                  std::to_string(k) + " is outside the codebook");
    }
  }
}

unsigned default_thread_count() {
  if (const char* env = std::getenv("TOKENMARK_THREADS")) {
    char* end = nullptr;
    const unsigned long value = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && value > 0) return static_cast<unsigned>(value);
  }
  return 1;
}

}  // namespace tokenmark
