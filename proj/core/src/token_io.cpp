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

#include "tokenmark/token_io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <sstream>
#include <vector>

namespace tokenmark {
namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (start <= line.size()) {
    if (sep == ' ') {
      while (start < line.size() && (line[start] == ' ' || line[start] == '\t')) ++start;
      if (start >= line.size()) break;
    }
    std::size_t end = start;
    while (end < line.size() && line[end] != sep && !(sep == ' ' && line[end] == '\t')) ++end;
    fields.push_back(line.substr(start, end - start));
    if (end >= line.size()) break;
    start = end + 1;
  }
  return fields;
}

std::uint64_t parse_uint(std::string_view field, std::size_t line, const char* what) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(line, "line " + std::to_string(line) + ": invalid " + what + " '" +
                               std::string(field) + "'");
  }
  return value;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t& pos) {
  if (pos + 4 > bytes.size()) throw ParseError(0, "binary token data truncated");
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + b])) << (8 * b);
  }
  pos += 4;
  return v;
}

}  // namespace

std::string to_text(const TokenSequence& seq) {
  const UnitSchedule& schedule = seq.schedule();
  std::string out;
  out.reserve(seq.size() * 6 + 64);
  out += kTextMagic;
  out += ' ';
  out += to_string(schedule.kind());
  out += ' ';
  out += std::to_string(schedule.num_units());
  out += ' ';
  for (std::size_t i = 0; i < schedule.num_units(); ++i) {
    if (i) out += ',';
    out += std::to_string(schedule.unit_size(i));
  }
  out += '\n';
  for (std::size_t i = 0; i < schedule.num_units(); ++i) {
    const auto unit = seq.unit(i);
    for (std::size_t j = 0; j < unit.size(); ++j) {
      if (j) out += ' ';
      out += std::to_string(unit[j]);
    }
    out += '\n';
  }
  return out;
}

TokenSequence parse_text(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw ParseError(1, "line 1: empty token file");
  const auto header = split_fields(lines[0], ' ');
  if (header.size() != 4 || header[0] != kTextMagic) {
    throw ParseError(1, "line 1: malformed header, expected '" + std::string(kTextMagic) +
                            " <kind> <K> <t_1,...,t_K>'");
  }
  ScheduleKind kind;
  try {
    kind = parse_schedule_kind(header[1]);
  } catch (const std::invalid_argument& e) {
    throw ParseError(1, std::string("line 1: ") + e.what());
  }
  const std::uint64_t k = parse_uint(header[2], 1, "unit count");
  const auto size_fields = split_fields(header[3], ',');
  if (size_fields.size() != k) {
    throw ParseError(1, "line 1: unit count " + std::to_string(k) + " but " +
                            std::to_string(size_fields.size()) + " unit sizes listed");
  }
  std::vector<std::size_t> sizes;
  sizes.reserve(k);
  for (const auto field : size_fields) sizes.push_back(parse_uint(field, 1, "unit size"));

  std::shared_ptr<const UnitSchedule> schedule;
  try {
    schedule = std::make_shared<const UnitSchedule>(kind, std::move(sizes));
  } catch (const std::invalid_argument& e) {
    throw ParseError(1, std::string("line 1: ") + e.what());
  }

  std::size_t last = lines.size();
  while (last > 1 && lines[last - 1].find_first_not_of(" \t") == std::string_view::npos) --last;
  if (last - 1 < schedule->num_units()) {
    throw ParseError(last + 1, "line " + std::to_string(last + 1) + ": missing unit line, expected " +
                                   std::to_string(schedule->num_units()) + " unit lines, found " +
                                   std::to_string(last - 1));
  }
  if (last - 1 > schedule->num_units()) {
    const std::size_t extra = schedule->num_units() + 2;
    throw ParseError(extra, "line " + std::to_string(extra) + ": unexpected line after last unit");
  }

  std::vector<TokenId> tokens;
  tokens.reserve(schedule->total_tokens());
  for (std::size_t i = 0; i < schedule->num_units(); ++i) {
    const std::size_t line_no = i + 2;
    const auto fields = split_fields(lines[i + 1], ' ');
    if (fields.size() != schedule->unit_size(i)) {
      throw ParseError(line_no, "line " + std::to_string(line_no) + ": unit " +
                                    std::to_string(i) + " has " + std::to_string(fields.size()) +
                                    " ids, expected " + std::to_string(schedule->unit_size(i)));
    }
    for (const auto field : fields) {
      const std::uint64_t id = parse_uint(field, line_no, "token id");
      if (id > std::numeric_limits<TokenId>::max()) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": token id out of range");
      }
      tokens.push_back(static_cast<TokenId>(id));
    }
  }
  return TokenSequence(std::move(schedule), std::move(tokens));
}

std::string to_binary(const TokenSequence& seq) {
  const UnitSchedule& schedule = seq.schedule();
  std::string out(kBinaryMagic);
  out.reserve(4 + 4 * (2 + schedule.num_units() + seq.size()));
  put_u32(out, static_cast<std::uint32_t>(schedule.kind()));
  put_u32(out, static_cast<std::uint32_t>(schedule.num_units()));
  for (const std::size_t t : schedule.unit_sizes()) put_u32(out, static_cast<std::uint32_t>(t));
  for (const TokenId id : seq.tokens()) put_u32(out, id);
  return out;
}

TokenSequence parse_binary(std::string_view bytes) {
  if (bytes.substr(0, 4) != kBinaryMagic) throw ParseError(0, "missing TMK1 magic");
  std::size_t pos = 4;
  const std::uint32_t kind_raw = get_u32(bytes, pos);
  if (kind_raw > 1) throw ParseError(0, "unknown schedule kind " + std::to_string(kind_raw));
  const std::uint32_t k = get_u32(bytes, pos);
  if (static_cast<std::uint64_t>(k) * 4 > bytes.size()) {
    throw ParseError(0, "binary token data truncated");
  }
  std::vector<std::size_t> sizes(k);
  for (auto& t : sizes) t = get_u32(bytes, pos);
  std::shared_ptr<const UnitSchedule> schedule;
  try {
    schedule = std::make_shared<const UnitSchedule>(static_cast<ScheduleKind>(kind_raw),
                                                    std::move(sizes));
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, e.what());
  }
  if (bytes.size() - pos != 4 * schedule->total_tokens()) {
    throw ParseError(0, "binary payload holds " + std::to_string((bytes.size() - pos) / 4) +
                            " ids, expected " + std::to_string(schedule->total_tokens()));
  }
  std::vector<TokenId> tokens(schedule->total_tokens());
  for (auto& id : tokens) id = get_u32(bytes, pos);
  return TokenSequence(std::move(schedule), std::move(tokens));
}

TokenSequence parse_tokens(std::string_view data) {
  if (data.substr(0, 4) == kBinaryMagic) return parse_binary(data);
  return parse_text(data);
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return data;
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

void write_token_file(const std::filesystem::path& path, const TokenSequence& seq,
                      TokenFileFormat format) {
  write_file_bytes(path, format == TokenFileFormat::kText ? to_text(seq) : to_binary(seq));
}

TokenSequence read_token_file(const std::filesystem::path& path) {
  return parse_tokens(read_file_bytes(path));
}

}  // namespace tokenmark
