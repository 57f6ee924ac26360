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

#ifndef TOKENMARK_CHANNEL_HPP_
#define TOKENMARK_CHANNEL_HPP_

// Token channels between the generator and the detector: the lossy
// decode/re-encode round trip and attack-induced corruption, both modelled
// as random token replacement.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "tokenmark/types.hpp"

namespace tokenmark {

enum class ChannelKind { kLossless, kUniformFlip, kPerUnitFlip, kBurstFlip };
enum class Replacement { kUniformRandom, kNearbyId };

std::string_view to_string(ChannelKind kind);
std::string_view to_string(Replacement replacement);
ChannelKind parse_channel_kind(std::string_view text);
Replacement parse_replacement(std::string_view text);

struct ChannelSpec {
  ChannelKind kind = ChannelKind::kLossless;
  // Per-token replacement probability (UniformFlip); for BurstFlip the
  // expected corrupted fraction.
  double flip_prob = 0.0;
  // PerUnitFlip: one probability per unit.
  std::vector<double> per_unit_probs;
  Replacement replacement = Replacement::kUniformRandom;
  std::uint64_t channel_seed = 0;
  std::size_t burst_length = 8;
  // NearbyId: replacement = id +/- d (mod |V|), 1 <= d <= nearby_radius.
  std::size_t nearby_radius = 8;

  void validate() const;
  void validate_for(const UnitSchedule& schedule) const;
};

// Replaces tokens independently (or in bursts) according to `spec`.
// Deterministic in (spec.channel_seed, stream); every position consumes the
// same two PRG draws whatever the flip probability, so sweeps over
// flip_prob with a fixed seed corrupt nested sets of positions.
TokenSequence apply_channel(const ChannelSpec& spec, const TokenSequence& tokens,
                            const Codebook& codebook, std::uint64_t stream = 0);

struct Overlap {
  double overall = 1.0;
  std::vector<double> per_unit;
};

// Fraction of positions holding equal ids; throws std::invalid_argument
// when the schedules differ.
Overlap measure_overlap(const TokenSequence& a, const TokenSequence& b);

enum class AttackPreset { kNone, kNoise, kKernel, kColor, kGrey, kJpeg, kSdVae, kCtrlRegen };

std::span<const AttackPreset> all_attack_presets();
std::string_view to_string(AttackPreset preset);
AttackPreset parse_attack_preset(std::string_view text);

// Token-level surrogate for an image attack: a UniformFlip channel whose
// flip probability was fitted by `tokenmark calibrate-attacks` so that the
// reference configuration (per-token schedule, T = 680, gamma = 0.25,
// delta = 2) reaches the preset's target TPR@FPR=1%.
ChannelSpec attack_preset(AttackPreset preset, std::uint64_t channel_seed = 0);

// Target TPR@FPR=1% used when fitting each preset.
double attack_target_tpr(AttackPreset preset);

// Per-unit flip probabilities for a multi-scale schedule whose overlap is
// highest at the first and last scales and lowest in the middle.
std::vector<double> valley_flip_profile(std::size_t num_units, double edge_overlap = 0.9,
                                        double center_overlap = 0.5);

}  // namespace tokenmark

#endif  // TOKENMARK_CHANNEL_HPP_
