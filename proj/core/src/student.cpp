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

#include "tokenmark/student.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "tokenmark/parallel.hpp"
#include "tokenmark/random.hpp"
#include "tokenmark/token_io.hpp"

namespace tokenmark {
namespace {

constexpr TokenId kBeginOfSequence = 0xFFFFFFFFU;

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t u64(int width) {
    if (pos_ + width > bytes_.size()) throw ParseError(0, "student model data truncated");
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += width;
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u64(4)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 4;
};

}  // namespace

std::uint32_t context_class(const UnitSchedule& schedule, std::size_t unit) {
  if (schedule.kind() == ScheduleKind::kMultiScale) return static_cast<std::uint32_t>(unit);
  return unit == 0 ? 0U : 1U;
}

std::size_t StudentModel::ContextKeyHash::operator()(const ContextKey& key) const noexcept {
  std::uint64_t h = derive_seed(key.level, key.unit_class);
  for (const TokenId id : key.previous) h = derive_seed(h, id);
  return static_cast<std::size_t>(h);
}

StudentModel::ContextKey StudentModel::make_key(std::size_t level, std::uint32_t unit_class,
                                                std::span<const TokenId> history) {
  ContextKey key;
  key.level = static_cast<std::uint32_t>(level);
  key.unit_class = unit_class;
  for (std::size_t k = 0; k < level; ++k) {
    // previous[level - 1] is the most recent token.
    const std::size_t back = level - k;
    key.previous[k] = back <= history.size() ? history[history.size() - back] : kBeginOfSequence;
  }
  return key;
}

const StudentModel::Row* StudentModel::find(const ContextKey& key) const {
  const auto it = rows_.find(key);
  return it == rows_.end() ? nullptr : &it->second;
}

StudentModel StudentModel::train(std::span<const TokenSequence> corpus, const Codebook& codebook,
                                 std::size_t order, double smoothing, unsigned threads) {
  if (corpus.empty()) throw std::invalid_argument("train_student: empty corpus");
  if (order > kMaxStudentOrder) throw std::invalid_argument("train_student: order must be <= 3");
  if (!(smoothing > 0.0) || !std::isfinite(smoothing)) {
    throw std::invalid_argument("train_student: smoothing must be positive");
  }
  const auto& schedule = corpus.front().shared_schedule();
  for (const auto& seq : corpus) {
    if (!(seq.schedule() == *schedule)) {
      throw std::invalid_argument("train_student: corpus mixes schedules");
    }
    seq.validate(codebook);
  }

  // Every (context, token) event lands at a fixed slot, so the count table
  // does not depend on the thread count.
  struct Event {
    ContextKey key;
    TokenId token;
  };
  const std::size_t per_sequence = schedule->total_tokens() * (order + 1);
  std::vector<Event> events(corpus.size() * per_sequence);
  parallel_for(corpus.size(), threads, [&](std::size_t s) {
    const TokenSequence& seq = corpus[s];
    const auto tokens = seq.tokens();
    std::size_t slot = s * per_sequence;
    for (std::size_t i = 0; i < schedule->num_units(); ++i) {
      const std::uint32_t cls = context_class(*schedule, i);
      const std::size_t begin = schedule->unit_offset(i);
      for (std::size_t n = begin; n < begin + schedule->unit_size(i); ++n) {
        for (std::size_t level = 0; level <= order; ++level) {
          events[slot++] = {make_key(level, cls, tokens.first(n)), tokens[n]};
        }
      }
    }
  });
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.token < b.token;
  });

  StudentModel model;
  model.order_ = order;
  model.smoothing_ = smoothing;
  model.vocab_size_ = codebook.size();
  model.schedule_ = schedule;
  for (std::size_t k = 0; k < events.size();) {
    Row& row = model.rows_[events[k].key];
    const ContextKey key = events[k].key;
    while (k < events.size() && events[k].key == key) {
      const TokenId token = events[k].token;
      std::uint64_t count = 0;
      for (; k < events.size() && events[k].key == key && events[k].token == token; ++k) ++count;
      row.total += count;
      row.tokens.push_back(token);
      row.cumulative.push_back(row.total);
    }
  }
  return model;
}

double StudentModel::probability(std::size_t unit, std::span<const TokenId> history,
                                 TokenId token) const {
  const std::uint32_t cls = context_class(*schedule_, unit);
  const double mass = smoothing_ * static_cast<double>(vocab_size_);
  double p = 1.0 / static_cast<double>(vocab_size_);
  for (std::size_t level = 0; level <= order_; ++level) {
    const Row* row = find(make_key(level, cls, history));
    double count = 0.0;
    double total = 0.0;
    if (row) {
      total = static_cast<double>(row->total);
      const auto it = std::lower_bound(row->tokens.begin(), row->tokens.end(), token);
      if (it != row->tokens.end() && *it == token) {
        const auto idx = static_cast<std::size_t>(it - row->tokens.begin());
        count = static_cast<double>(row->cumulative[idx] - (idx ? row->cumulative[idx - 1] : 0));
      }
    }
    p = (count + mass * p) / (total + mass);
  }
  return p;
}

TokenSequence StudentModel::generate(std::uint64_t seed) const {
  const std::size_t total = schedule_->total_tokens();
  std::vector<TokenId> tokens(total);
  SplitMix64 rng(seed);
  const double mass = smoothing_ * static_cast<double>(vocab_size_);
  for (std::size_t i = 0; i < schedule_->num_units(); ++i) {
    const std::uint32_t cls = context_class(*schedule_, i);
    const std::size_t begin = schedule_->unit_offset(i);
    for (std::size_t n = begin; n < begin + schedule_->unit_size(i); ++n) {
      const std::span<const TokenId> history(tokens.data(), n);
      bool sampled = false;
      // Walk from the longest context down; at each level the empirical
      // counts win with probability N / (N + mass), otherwise back off.
      for (std::size_t level = order_ + 1; level-- > 0 && !sampled;) {
        const Row* row = find(make_key(level, cls, history));
        const double count = row ? static_cast<double>(row->total) : 0.0;
        if (rng.uniform() * (count + mass) < count) {
          const std::uint64_t r = rng.bounded(row->total);
          const auto it = std::upper_bound(row->cumulative.begin(), row->cumulative.end(), r);
          tokens[n] = row->tokens[static_cast<std::size_t>(it - row->cumulative.begin())];
          sampled = true;
        }
      }
      if (!sampled) tokens[n] = static_cast<TokenId>(rng.bounded(vocab_size_));
    }
  }
  return TokenSequence(schedule_, std::move(tokens));
}

std::string StudentModel::serialize() const {
  std::vector<const std::pair<const ContextKey, Row>*> sorted;
  sorted.reserve(rows_.size());
  for (const auto& entry : rows_) sorted.push_back(&entry);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });

  std::string out(kStudentMagic);
  put_u32(out, static_cast<std::uint32_t>(order_));
  put_u64(out, std::bit_cast<std::uint64_t>(smoothing_));
  put_u32(out, static_cast<std::uint32_t>(vocab_size_));
  put_u32(out, static_cast<std::uint32_t>(schedule_->kind()));
  put_u32(out, static_cast<std::uint32_t>(schedule_->num_units()));
  for (const std::size_t t : schedule_->unit_sizes()) put_u32(out, static_cast<std::uint32_t>(t));
  put_u64(out, sorted.size());
  for (const auto* entry : sorted) {
    const ContextKey& key = entry->first;
    const Row& row = entry->second;
    put_u32(out, key.level);
    put_u32(out, key.unit_class);
    for (std::size_t k = 0; k < key.level; ++k) put_u32(out, key.previous[k]);
    put_u32(out, static_cast<std::uint32_t>(row.tokens.size()));
    std::uint64_t prev = 0;
    for (std::size_t k = 0; k < row.tokens.size(); ++k) {
      put_u32(out, row.tokens[k]);
      put_u64(out, row.cumulative[k] - prev);
      prev = row.cumulative[k];
    }
  }
  return out;
}

StudentModel StudentModel::deserialize(std::string_view bytes) {
  if (bytes.substr(0, 4) != kStudentMagic) throw ParseError(0, "missing TMS1 magic");
  Reader in(bytes);
  StudentModel model;
  model.order_ = in.u32();
  if (model.order_ > kMaxStudentOrder) throw ParseError(0, "student order out of range");
  model.smoothing_ = std::bit_cast<double>(in.u64(8));
  if (!(model.smoothing_ > 0.0)) throw ParseError(0, "student smoothing must be positive");
  model.vocab_size_ = in.u32();
  if (model.vocab_size_ < 2) throw ParseError(0, "student vocabulary too small");
  const std::uint32_t kind = in.u32();
  if (kind > 1) throw ParseError(0, "unknown schedule kind");
  const std::uint32_t k = in.u32();
  if (k > bytes.size()) throw ParseError(0, "student model data truncated");
  std::vector<std::size_t> sizes(k);
  for (auto& t : sizes) t = in.u32();
  try {
    model.schedule_ =
        std::make_shared<const UnitSchedule>(static_cast<ScheduleKind>(kind), std::move(sizes));
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
  const std::uint64_t records = in.u64(8);
  for (std::uint64_t r = 0; r < records; ++r) {
    ContextKey key;
    key.level = in.u32();
    if (key.level > model.order_) throw ParseError(0, "context level exceeds model order");
    key.unit_class = in.u32();
    for (std::size_t p = 0; p < key.level; ++p) key.previous[p] = in.u32();
    const std::uint32_t n = in.u32();
    Row row;
    row.tokens.reserve(n);
    row.cumulative.reserve(n);
    for (std::uint32_t s = 0; s < n; ++s) {
      const TokenId token = in.u32();
      if (token >= model.vocab_size_) throw ParseError(0, "student token outside vocabulary");
      if (!row.tokens.empty() && token <= row.tokens.back()) {
        throw ParseError(0, "student successors not sorted");
      }
      row.total += in.u64(8);
      row.tokens.push_back(token);
      row.cumulative.push_back(row.total);
    }
    if (!model.rows_.emplace(key, std::move(row)).second) {
      throw ParseError(0, "duplicate student context record");
    }
  }
  if (!in.done()) throw ParseError(0, "trailing bytes after student model");
  return model;
}

void StudentModel::save(const std::filesystem::path& path) const {
  write_file_bytes(path, serialize());
}

StudentModel StudentModel::load(const std::filesystem::path& path) {
  return deserialize(read_file_bytes(path));
}

bool operator==(const StudentModel& a, const StudentModel& b) {
  return a.order_ == b.order_ && a.smoothing_ == b.smoothing_ &&
         a.vocab_size_ == b.vocab_size_ && *a.schedule_ == *b.schedule_ && a.rows_ == b.rows_;
}

std::vector<TokenSequence> generate_student(const StudentModel& model, std::size_t n,
                                            std::uint64_t seed, unsigned threads) {
  std::vector<std::unique_ptr<TokenSequence>> slots(n);
  parallel_for(n, threads, [&](std::size_t i) {
    slots[i] = std::make_unique<TokenSequence>(model.generate(derive_seed(seed, i)));
  });
  std::vector<TokenSequence> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace tokenmark
