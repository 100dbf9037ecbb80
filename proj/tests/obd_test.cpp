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

#include "canpath/obd.hpp"

#include <gtest/gtest.h>

namespace canpath::obd {
namespace {

TEST(SpeedRequest, FunctionalRequestPayload) {
  const CanFrame req = encode_speed_request();
  EXPECT_EQ(req.id, 0x7DF);
  EXPECT_EQ(req.data, (std::vector<std::uint8_t>{0x02, 0x01, 0x0D, 0xAA, 0xAA, 0xAA, 0xAA, 0xAA}));
  const std::string line = format_line(req);
  EXPECT_EQ(line.substr(line.find(' ', line.find(')') + 2) + 1), "7DF#02010DAAAAAAAAAA");
}

TEST(SpeedRequest, IsNotAResponse) { EXPECT_FALSE(decode_speed_response(encode_speed_request()).has_value()); }

TEST(SpeedResponse, ThirtyThree) {
  const CanFrame f{{}, "can0", 0x7E8, {0x03, 0x41, 0x0D, 0x21, 0xAA, 0xAA, 0xAA, 0xAA}};
  const auto r = decode_speed_response(f);
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->speed_kmh, 33);
  EXPECT_DOUBLE_EQ(r->speed_mps(), 33.0 / 3.6);
}

TEST(SpeedResponse, Zero) {
  const auto r = decode_speed_response({{}, "can0", 0x7E8, {0x03, 0x41, 0x0D, 0x00, 0xAA, 0xAA, 0xAA, 0xAA}});
  ASSERT_TRUE(r.has_value());
  EXPECT_EQ(r->speed_kmh, 0);
}

TEST(SpeedResponse, ShapeChecks) {
  EXPECT_FALSE(decode_speed_response({{}, "can0", 0x0C6, {0x7D, 0xC8}}));
  EXPECT_FALSE(decode_speed_response({{}, "can0", 0x7E8, {0x03, 0x41, 0x0D}}));        // too short
  EXPECT_FALSE(decode_speed_response({{}, "can0", 0x7E8, {0x03, 0x41, 0x0C, 0x10}}));  // RPM
  EXPECT_FALSE(decode_speed_response({{}, "can0", 0x7E8, {0x03, 0x01, 0x0D, 0x10}}));  // no mode echo
  EXPECT_FALSE(decode_speed_response({{}, "can0", 0x7F0, {0x03, 0x41, 0x0D, 0x10}}));
  EXPECT_TRUE(decode_speed_response({{}, "can0", 0x7EF, {0x03, 0x41, 0x0D, 0x10}}));
}

TEST(SpeedResponse, EveryByteValueRoundTrips) {
  for (int b = 0; b <= 255; ++b) {
    for (std::uint16_t id = kFirstResponseId; id <= kLastResponseId; ++id) {
      const auto r = decode_speed_response(encode_speed_response({}, static_cast<std::uint8_t>(b), id));
      ASSERT_TRUE(r.has_value());
      EXPECT_EQ(r->speed_kmh, b);
    }
  }
}

}  // namespace
}  // namespace canpath::obd
