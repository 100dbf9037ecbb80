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

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "canpath/canlog.hpp"

namespace canpath::obd {

inline constexpr std::uint16_t kFunctionalRequestId = 0x7DF;
inline constexpr std::uint16_t kFirstResponseId = 0x7E8;
inline constexpr std::uint16_t kLastResponseId = 0x7EF;
inline constexpr std::uint8_t kModeCurrentData = 0x01;
inline constexpr std::uint8_t kResponseModeOffset = 0x40;
inline constexpr std::uint8_t kPidVehicleSpeed = 0x0D;
inline constexpr std::uint8_t kPadding = 0xAA;

struct SpeedReading {
  Timestamp timestamp;
  std::uint8_t speed_kmh = 0;

  double speed_mps() const { return speed_kmh / 3.6; }
  bool operator==(const SpeedReading&) const = default;
};

/// `7DF#02010DAAAAAAAAAA`: two payload bytes (mode 01, PID 0D), padded with 0xAA.
inline CanFrame encode_speed_request(Timestamp ts = {}, std::string iface = "can0") {
  CanFrame frame;
  frame.timestamp = ts;
  frame.iface = std::move(iface);
  frame.id = kFunctionalRequestId;
  frame.data = {0x02, kModeCurrentData, kPidVehicleSpeed, kPadding,
                kPadding, kPadding, kPadding, kPadding};
  return frame;
}

inline bool is_response_id(std::uint16_t id) {
  return id >= kFirstResponseId && id <= kLastResponseId;
}

/// Builds a single-frame speed response as an ECU would send it.
inline CanFrame encode_speed_response(Timestamp ts, std::uint8_t speed_kmh,
                                      std::uint16_t responder = kFirstResponseId,
                                      std::string iface = "can0") {
  CanFrame frame;
  frame.timestamp = ts;
  frame.iface = std::move(iface);
  frame.id = responder;
  frame.data = {0x03, static_cast<std::uint8_t>(kModeCurrentData + kResponseModeOffset),
                kPidVehicleSpeed, speed_kmh, kPadding, kPadding, kPadding, kPadding};
  return frame;
}

/// Empty when the frame is not a mode-01 PID-0D reply from 0x7E8..0x7EF.
inline std::optional<SpeedReading> decode_speed_response(const CanFrame& frame) {
  if (!is_response_id(frame.id) || frame.data.size() < 4) return std::nullopt;
  if (frame.data[1] != kModeCurrentData + kResponseModeOffset) return std::nullopt;
  if (frame.data[2] != kPidVehicleSpeed) return std::nullopt;
  return SpeedReading{frame.timestamp, frame.data[3]};
}

}  // namespace canpath::obd
