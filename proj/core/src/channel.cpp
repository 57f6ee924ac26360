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

#include "tokenmark/channel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

constexpr std::array<AttackPreset, 8> kPresets = {
    AttackPreset::kNone,  AttackPreset::kNoise, AttackPreset::kKernel, AttackPreset::kColor,
    AttackPreset::kGrey,  AttackPreset::kJpeg,  AttackPreset::kSdVae,  AttackPreset::kCtrlRegen};

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

TokenId replacement_id(const ChannelSpec& spec, TokenId original, std::uint64_t draw,
                       std::size_t vocab) {
  if (spec.replacement == Replacement::kUniformRandom) {
    return static_cast<TokenId>(draw % vocab);
  }
  const std::size_t radius = std::min(spec.nearby_radius, vocab - 1);
  const std::size_t d = 1 + static_cast<std::size_t>((draw >> 1) % radius);
  const std::size_t shifted = (draw & 1U) ? original + d : original + vocab - d;
  return static_cast<TokenId>(shifted % vocab);
}

}  // namespace

std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::kLossless:
      return "lossless";
    case ChannelKind::kUniformFlip:
      return "uniform_flip";
    case ChannelKind::kPerUnitFlip:
      return "per_unit_flip";
    case ChannelKind::kBurstFlip:
      return "burst_flip";
  }
  return "unknown";
}

std::string_view to_string(Replacement replacement) {
  switch (replacement) {
    case Replacement::kUniformRandom:
      return "uniform_random";
    case Replacement::kNearbyId:
      return "nearby_id";
  }
  return "unknown";
}

ChannelKind parse_channel_kind(std::string_view text) {
  for (const auto kind : {ChannelKind::kLossless, ChannelKind::kUniformFlip,
                          ChannelKind::kPerUnitFlip, ChannelKind::kBurstFlip}) {
    if (text == to_string(kind)) return kind;
  }
  throw std::invalid_argument("unknown channel kind '" + std::string(text) + "'");
}

Replacement parse_replacement(std::string_view text) {
  if (text == "uniform_random") return Replacement::kUniformRandom;
  if (text == "nearby_id") return Replacement::kNearbyId;
  throw std::invalid_argument("unknown replacement '" + std::string(text) + "'");
}

void ChannelSpec::validate() const {
  if (!is_probability(flip_prob)) throw std::invalid_argument("flip_prob must lie in [0, 1]");
  for (const double p : per_unit_probs) {
    if (!is_probability(p)) throw std::invalid_argument("per_unit_probs must lie in [0, 1]");
  }
  if (kind == ChannelKind::kBurstFlip && burst_length == 0) {
    throw std::invalid_argument("burst_length must be >= 1");
  }
  if (replacement == Replacement::kNearbyId && nearby_radius == 0) {
    throw std::invalid_argument("nearby_radius must be >= 1");
  }
}

void ChannelSpec::validate_for(const UnitSchedule& schedule) const {
  validate();
  if (kind == ChannelKind::kPerUnitFlip && per_unit_probs.size() != schedule.num_units()) {
    throw std::invalid_argument("per_unit_probs has " + std::to_string(per_unit_probs.size()) +
                                " entries, schedule has " +
                                std::to_string(schedule.num_units()) + " units");
  }
}

TokenSequence apply_channel(const ChannelSpec& spec, const TokenSequence& tokens,
                            const Codebook& codebook, std::uint64_t stream) {
  spec.validate_for(tokens.schedule());
  TokenSequence out = tokens;
  if (spec.kind == ChannelKind::kLossless) return out;

  const UnitSchedule& schedule = tokens.schedule();
  const std::size_t vocab = codebook.size();
  SplitMix64 rng(derive_seed(spec.channel_seed, stream));
  const auto ids = out.mutable_tokens();
  std::size_t burst_left = 0;
  const double burst_start =
      spec.kind == ChannelKind::kBurstFlip ? spec.flip_prob / static_cast<double>(spec.burst_length)
                                           : 0.0;

  for (std::size_t i = 0; i < schedule.num_units(); ++i) {
    const std::size_t begin = schedule.unit_offset(i);
    for (std::size_t k = begin; k < begin + schedule.unit_size(i); ++k) {
      const double u = rng.uniform();
      const std::uint64_t draw = rng.next();
      bool flip = false;
      switch (spec.kind) {
        case ChannelKind::kUniformFlip:
          flip = u < spec.flip_prob;
          break;
        case ChannelKind::kPerUnitFlip:
          flip = u < spec.per_unit_probs[i];
          break;
        case ChannelKind::kBurstFlip:
          if (burst_left > 0) {
            flip = true;
            --burst_left;
          } else if (u < burst_start) {
            flip = true;
            burst_left = spec.burst_length - 1;
          }
          break;
        case ChannelKind::kLossless:
          break;
      }
      if (flip) ids[k] = replacement_id(spec, ids[k], draw, vocab);
    }
  }
  return out;
}

Overlap measure_overlap(const TokenSequence& a, const TokenSequence& b) {
  if (!(a.schedule() == b.schedule())) {
    throw std::invalid_argument("measure_overlap: sequences use different schedules");
  }
  const UnitSchedule& schedule = a.schedule();
  Overlap result;
  result.per_unit.resize(schedule.num_units());
  std::size_t equal_total = 0;
  for (std::size_t i = 0; i < schedule.num_units(); ++i) {
    const auto ua = a.unit(i);
    const auto ub = b.unit(i);
    std::size_t equal = 0;
    for (std::size_t j = 0; j < ua.size(); ++j) equal += ua[j] == ub[j];
    equal_total += equal;
    result.per_unit[i] = static_cast<double>(equal) / static_cast<double>(ua.size());
  }
  result.overall = static_cast<double>(equal_total) / static_cast<double>(a.size());
  return result;
}

std::span<const AttackPreset> all_attack_presets() { return kPresets; }

std::string_view to_string(AttackPreset preset) {
  switch (preset) {
    case AttackPreset::kNone:
      return "none";
    case AttackPreset::kNoise:
      return "noise";
    case AttackPreset::kKernel:
      return "kernel";
    case AttackPreset::kColor:
      return "color";
    case AttackPreset::kGrey:
      return "grey";
    case AttackPreset::kJpeg:
      return "jpeg";
    case AttackPreset::kSdVae:
      return "sdvae";
    case AttackPreset::kCtrlRegen:
      return "ctrlregen";
  }
  return "unknown";
}

AttackPreset parse_attack_preset(std::string_view text) {
  for (const auto preset : kPresets) {
    if (text == to_string(preset)) return preset;
  }
  throw std::invalid_argument("unknown attack preset '" + std::string(text) + "'");
}

double attack_target_tpr(AttackPreset preset) {
  // Reference row: the largest per-token model's robustness results.
  switch (preset) {
    case AttackPreset::kNone:
      return 0.9380;
    case AttackPreset::kNoise:
      return 0.1444;
    case AttackPreset::kKernel:
      return 0.1286;
    case AttackPreset::kColor:
      return 0.1152;
    case AttackPreset::kGrey:
      return 0.2560;
    case AttackPreset::kJpeg:
      return 0.7805;
    case AttackPreset::kSdVae:
      return 0.7981;
    case AttackPreset::kCtrlRegen:
      return 0.0440;
  }
  return 0.0;
}

ChannelSpec attack_preset(AttackPreset preset, std::uint64_t channel_seed) {
  ChannelSpec spec;
  spec.channel_seed = channel_seed;
  if (preset == AttackPreset::kNone) return spec;
  spec.kind = ChannelKind::kUniformFlip;
  spec.replacement = Replacement::kUniformRandom;
  // Output of `tokenmark calibrate-attacks --config configs/attacks.json`.
  switch (preset) {
    case AttackPreset::kNoise:
      spec.flip_prob = 0.7907;
      break;
    case AttackPreset::kKernel:
      spec.flip_prob = 0.7911;
      break;
    case AttackPreset::kColor:
      spec.flip_prob = 0.8069;
      break;
    case AttackPreset::kGrey:
      spec.flip_prob = 0.7492;
      break;
    case AttackPreset::kJpeg:
      spec.flip_prob = 0.6573;
      break;
    case AttackPreset::kSdVae:
      spec.flip_prob = 0.6536;
      break;
    case AttackPreset::kCtrlRegen:
      spec.flip_prob = 0.8451;
      break;
    case AttackPreset::kNone:
      break;
  }
  return spec;
}

std::vector<double> valley_flip_profile(std::size_t num_units, double edge_overlap,
                                        double center_overlap) {
  if (!is_probability(edge_overlap) || !is_probability(center_overlap)) {
    throw std::invalid_argument("overlaps must lie in [0, 1]");
  }
  std::vector<double> flips(num_units, 1.0 - edge_overlap);
  if (num_units < 2) return flips;
  for (std::size_t i = 0; i < num_units; ++i) {
    const double x = 2.0 * static_cast<double>(i) / static_cast<double>(num_units - 1) - 1.0;
    const double overlap = center_overlap + (edge_overlap - center_overlap) * x * x;
    flips[i] = 1.0 - overlap;
  }
  return flips;
}

}  // namespace tokenmark
