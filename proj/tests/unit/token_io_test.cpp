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

#include <filesystem>

#include <gtest/gtest.h>

#include "tokenmark/random.hpp"

namespace tokenmark {
namespace {

TokenSequence random_sequence(std::shared_ptr<const UnitSchedule> schedule, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<TokenId> ids(schedule->total_tokens());
  for (auto& id : ids) id = static_cast<TokenId>(rng.bounded(4096));
  return TokenSequence(std::move(schedule), std::move(ids));
}

TokenSequence tiny() {
  auto schedule = std::make_shared<const UnitSchedule>(ScheduleKind::kMultiScale,
                                                       std::vector<std::size_t>{1, 4});
  return TokenSequence::from_units(schedule, {{7}, {1, 2, 3, 4095}});
}

std::size_t parse_error_line(std::string_view text) {
  try {
    parse_text(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

TEST(TokenIo, TextLayout) {
  EXPECT_EQ(to_text(tiny()), "tokenmark-v1 multiscale 2 1,4\n7\n1 2 3 4095\n");
}

TEST(TokenIo, BinaryLayout) {
  const std::string bin = to_binary(tiny());
  const unsigned char expected[] = {'T', 'M', 'K', '1', 0, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 4, 0,
                                    0,   0,   7,   0,   0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0,
                                    0xFF, 0x0F, 0, 0};
  ASSERT_EQ(bin.size(), sizeof(expected));
  for (std::size_t i = 0; i < bin.size(); ++i) {
    EXPECT_EQ(static_cast<unsigned char>(bin[i]), expected[i]) << "byte " << i;
  }
}

TEST(TokenIo, RoundTripsBitExactly) {
  const auto var = std::make_shared<const UnitSchedule>(make_var_schedule());
  const auto rar = std::make_shared<const UnitSchedule>(make_rar_schedule(680));
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    for (const auto& schedule : {var, rar}) {
      const TokenSequence seq = random_sequence(schedule, seed);
      EXPECT_EQ(parse_text(to_text(seq)), seq);
      EXPECT_EQ(parse_binary(to_binary(seq)), seq);
      EXPECT_EQ(parse_tokens(to_binary(seq)), seq);
      EXPECT_EQ(parse_tokens(to_text(seq)), seq);
    }
  }
}

TEST(TokenIo, ToleratesCrlfAndTrailingBlankLines) {
  EXPECT_EQ(parse_text("tokenmark-v1 multiscale 2 1,4\r\n7\r\n1 2 3 4095\r\n\n\n"), tiny());
}

TEST(TokenIo, MalformedTextNamesTheLine) {
  EXPECT_EQ(parse_error_line(""), 1u);
  EXPECT_EQ(parse_error_line("tokenmark-v2 multiscale 2 1,4\n7\n1 2 3 4\n"), 1u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 diagonal 2 1,4\n7\n1 2 3 4\n"), 1u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 3 1,4\n7\n1 2 3 4\n"), 1u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 2 1,4\n7\n1 2 3\n"), 3u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 2 1,4\n7\n1 2 x 4\n"), 3u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 2 1,4\n7\n"), 3u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 2 1,4\n7\n1 2 3 4\n9\n"), 4u);
  EXPECT_EQ(parse_error_line("tokenmark-v1 multiscale 1 1\n4294967296\n"), 2u);
  try {
    parse_text("tokenmark-v1 multiscale 2 1,4\n7\n1 2 3\n");
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(TokenIo, MalformedBinary) {
  std::string bin = to_binary(tiny());
  EXPECT_THROW(parse_binary(bin.substr(0, bin.size() - 1)), ParseError);
  EXPECT_THROW(parse_binary(bin + "abcd"), ParseError);
  EXPECT_THROW(parse_binary("TMK2" + bin.substr(4)), ParseError);
  bin[4] = 9;  // schedule kind
  EXPECT_THROW(parse_binary(bin), ParseError);
}

TEST(TokenIo, Files) {
  const auto dir = std::filesystem::temp_directory_path() / "tokenmark_token_io_test";
  std::filesystem::create_directories(dir);
  write_token_file(dir / "a.tmk", tiny());
  write_token_file(dir / "a.tmkb", tiny(), TokenFileFormat::kBinary);
  EXPECT_EQ(read_token_file(dir / "a.tmk"), tiny());
  EXPECT_EQ(read_token_file(dir / "a.tmkb"), tiny());
  EXPECT_THROW(read_token_file(dir / "missing.tmk"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace tokenmark
