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

#ifndef TOKENMARK_TOKEN_IO_HPP_
#define TOKENMARK_TOKEN_IO_HPP_

// Token sequence files.
//
// Text form:
//   tokenmark-v1 <kind> <K> <t_1,...,t_K>
//   <t_1 space-separated decimal ids>
//   ...
//   <t_K space-separated decimal ids>
//
// Binary form: magic "TMK1", then little-endian u32 kind, K, t_1..t_K, then
// every token id as a little-endian u32 in unit order.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tokenmark/types.hpp"

namespace tokenmark {

inline constexpr std::string_view kTextMagic = "tokenmark-v1";
inline constexpr std::string_view kBinaryMagic = "TMK1";

enum class TokenFileFormat { kText, kBinary };

// Malformed token data. line() is 1-based for text input, 0 for binary.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string to_text(const TokenSequence& seq);
TokenSequence parse_text(std::string_view text);

std::string to_binary(const TokenSequence& seq);
TokenSequence parse_binary(std::string_view bytes);

// Sniffs the magic and dispatches to parse_text or parse_binary.
TokenSequence parse_tokens(std::string_view data);

void write_token_file(const std::filesystem::path& path, const TokenSequence& seq,
                      TokenFileFormat format = TokenFileFormat::kText);
TokenSequence read_token_file(const std::filesystem::path& path);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace tokenmark

#endif  // TOKENMARK_TOKEN_IO_HPP_
