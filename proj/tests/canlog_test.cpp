// Copyright 2026 The canpath Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "canpath/canlog.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

namespace canpath {
namespace {

TEST(ParseLine, SteeringFrame) {
  const CanFrame f = parse_line("(1684149582.123456) can0 0C6#7DC80000AAAAAAAA");
  EXPECT_EQ(f.timestamp.micros, 1684149582123456);
  EXPECT_EQ(f.iface, "can0");
  EXPECT_EQ(f.id, 0x0C6);
  EXPECT_EQ(f.data, (std::vector<std::uint8_t>{0x7D, 0xC8, 0x00, 0x00, 0xAA, 0xAA, 0xAA, 0xAA}));
}

TEST(ParseLine, SpeedRequest) {
  const CanFrame f = parse_line("(0.000000) can0 7DF#02010DAAAAAAAAAA");
  EXPECT_EQ(f.id, 0x7DF);
  EXPECT_EQ(f.data, (std::vector<std::uint8_t>{0x02, 0x01, 0x0D, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA}));
}

TEST(ParseLine, LowercaseHex) {
  const CanFrame f = parse_line("(2.5) vcan1 7e8#03410d21");
  EXPECT_EQ(f.id, 0x7E8);
  EXPECT_EQ(f.iface, "vcan1");
  EXPECT_EQ(f.timestamp.micros, 2500000);
  EXPECT_EQ(f.data.size(), 4u);
  EXPECT_EQ(f.data[3], 0x21);
}

TEST(ParseLine, ErrorsNameTheField) {
  const auto field_of = [](const char* line) {
    try {
      parse_line(line);
    } catch (const ParseError& e) {
      return e.field();
    }
    return std::string("none");
  };
  EXPECT_EQ(field_of("(1.0) can0 800#00"), "id");
  EXPECT_EQ(field_of("(1.0) can0 12345678#00"), "id");  // extended IDs are rejected
  EXPECT_EQ(field_of("(abc) can0 0C6#00"), "timestamp");
  EXPECT_EQ(field_of("1.0 can0 0C6#00"), "timestamp");
  EXPECT_EQ(field_of("(1.0) can0 0C6#7DC"), "data");
  EXPECT_EQ(field_of("(1.0) can0 0C6#00112233445566778899"), "data");
  EXPECT_EQ(field_of("(1.0) can0 0C6#ZZ"), "data");
  EXPECT_EQ(field_of("(1.0) can0 0C6"), "id");
}

TEST(FormatLine, Canonical) {
  CanFrame f{Timestamp::from_seconds(1.5), "can0", 0x0C6, {0x7F, 0xFF}};
  EXPECT_EQ(format_line(f), "(1.500000) can0 0C6#7FFF");
  f.data.clear();
  EXPECT_EQ(format_line(f), "(1.500000) can0 0C6#");
}

TEST(FormatLine, RoundTripsExamples) {
  for (const char* line : {"(1684149582.123456) can0 0C6#7DC80000AAAAAAAA", "(0.000000) can0 7DF#02010DAAAAAAAAAA"}) {
    EXPECT_EQ(format_line(parse_line(line)), line);
  }
  EXPECT_EQ(format_line(parse_line("(3.1) can0 7e8#03410d21")), "(3.100000) can0 7E8#03410D21");
}

TEST(FormatLine, CanonicalizationIsIdempotent) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> id(0, 0x7FF), len(0, 8), byte(0, 255);
  std::uniform_int_distribution<std::int64_t> ts(0, 4'000'000'000'000'000);
  for (int k = 0; k < 500; ++k) {
    CanFrame f{Timestamp{ts(rng)}, "can0", static_cast<std::uint16_t>(id(rng)), {}};
    for (int i = len(rng); i > 0; --i) f.data.push_back(static_cast<std::uint8_t>(byte(rng)));
    const std::string once = format_line(f);
    const CanFrame back = parse_line(once);
    EXPECT_EQ(back, f);
    EXPECT_EQ(format_line(back), once);
  }
}

TEST(FilterFrames, ResponseAndSwaMaskString) {
  std::vector<CanFrame> frames;
  for (std::uint16_t id : {0x0C6, 0x123, 0x7E8}) frames.push_back({{}, "can0", id, {}});
  const auto out = filter_frames(frames, parse_filter("7E8:7FF,0C6:7FF"));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, 0x0C6);
  EXPECT_EQ(out[1].id, 0x7E8);
}

TEST(FilterFrames, EmptyAndZeroMask) {
  std::vector<CanFrame> frames;
  for (std::uint16_t id : {0x001, 0x2F5, 0x7FF}) frames.push_back({{}, "can0", id, {}});
  EXPECT_TRUE(filter_frames(frames, IdFilter{}).empty());
  EXPECT_EQ(filter_frames(frames, IdFilter{{{0x000, 0x000}}}).size(), 3u);
}

TEST(FilterFrames, KeepsExactlyMaskMatches) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> id(0, 0x7FF);
  std::vector<CanFrame> frames;
  for (int k = 0; k < 400; ++k) frames.push_back({Timestamp{k}, "can0", static_cast<std::uint16_t>(id(rng)), {}});
  for (int trial = 0; trial < 20; ++trial) {
    IdFilter filter;
    for (int e = 0; e < 3; ++e) {
      filter.entries.push_back({static_cast<std::uint16_t>(id(rng)), static_cast<std::uint16_t>(id(rng))});
    }
    const auto out = filter_frames(frames, filter);
    std::size_t cursor = 0;
    for (const auto& f : out) {
      bool literal = false;
      for (const auto& e : filter.entries) literal = literal || ((f.id & e.mask) == (e.id & e.mask));
      EXPECT_TRUE(literal);
      while (cursor < frames.size() && !(frames[cursor] == f)) ++cursor;
      ASSERT_LT(cursor, frames.size()) << "output is not a subsequence";
      ++cursor;
    }
  }
}

TEST(ParseFilter, InterfacePrefixAndErrors) {
  const IdFilter f = parse_filter("can0,7E8:7FF,0C6:7FF");
  ASSERT_EQ(f.entries.size(), 2u);
  EXPECT_EQ(f.entries[0], (IdFilterEntry{0x7E8, 0x7FF}));
  EXPECT_THROW(parse_filter("7E8:7FF,0C6"), ParseError);
  EXPECT_THROW(parse_filter("800:7FF"), ParseError);
}

TEST(ReadLog, StrictReportsLineNumber) {
  std::istringstream in("(1.0) can0 0C6#7FFF\n\n(1.1) can0 0C6#7F\n(bad) can0 0C6#00\n");
  try {
    read_log(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(ReadLog, PermissiveSkipsAndRecords) {
  std::istringstream in("(1.0) can0 0C6#7FFF\ngarbage\n(1.1) can0 800#00\n(1.2) can0 0C6#7FFE\n");
  const auto r = read_log(in, LogReadMode::kPermissive);
  ASSERT_EQ(r.frames.size(), 2u);
  ASSERT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.skipped[0].line, 2u);
  EXPECT_EQ(r.skipped[1].line, 3u);
  EXPECT_EQ(r.skipped[1].field, "id");
}

TEST(WriteLog, ReadBack) {
  std::vector<CanFrame> frames{{Timestamp{1}, "can0", 0x0C6, {0x7F, 0xFF}}, {Timestamp{2}, "can1", 0x7E8, {3, 0x41, 0x0D, 9}}};
  std::stringstream io;
  write_log(io, frames);
  EXPECT_EQ(read_log(io).frames, frames);
}

}  // namespace
}  // namespace canpath
