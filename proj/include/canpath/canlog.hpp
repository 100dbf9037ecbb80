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

// candump log lines: `(<epoch>.<micros>) <iface> <HEXID>#<HEXDATA>`.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canpath/error.hpp"

namespace canpath {

inline constexpr std::uint16_t kMaxStandardId = 0x7FF;
inline constexpr std::size_t kMaxCanPayload = 8;

/// Capture time with microsecond resolution, stored exactly.
struct Timestamp {
  std::int64_t micros = 0;

  static Timestamp from_seconds(double s) {
    return Timestamp{static_cast<std::int64_t>(std::llround(s * 1e6))};
  }
  double seconds() const { return static_cast<double>(micros) * 1e-6; }

  auto operator<=>(const Timestamp&) const = default;
};

struct CanFrame {
  Timestamp timestamp;
  std::string iface = "can0";
  std::uint16_t id = 0;
  std::vector<std::uint8_t> data;

  bool operator==(const CanFrame&) const = default;
};

/// Throws ParseError if the frame breaks the 11-bit / 8-byte limits.
inline void validate_frame(const CanFrame& frame) {
  if (frame.id > kMaxStandardId) {
    throw ParseError("id", "identifier out of 11-bit range");
  }
  if (frame.data.size() > kMaxCanPayload) {
    throw ParseError("data", "payload longer than 8 bytes");
  }
  if (frame.timestamp.micros < 0) {
    throw ParseError("timestamp", "negative timestamp");
  }
  if (frame.iface.empty() ||
      frame.iface.find_first_of(" \t\r\n") != std::string::npos) {
    throw ParseError("iface", "interface name must be a non-empty token");
  }
}

namespace detail {

inline int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

inline std::uint32_t parse_hex_u32(std::string_view digits, const char* field) {
  if (digits.empty() || digits.size() > 8) {
    throw ParseError(field, std::string("bad hex value for ") + field);
  }
  std::uint32_t v = 0;
  for (char c : digits) {
    const int h = hex_value(c);
    if (h < 0) throw ParseError(field, std::string("non-hex digit in ") + field);
    v = (v << 4) | static_cast<std::uint32_t>(h);
  }
  return v;
}

}  // namespace detail

inline CanFrame parse_line(std::string_view line) {
  using detail::is_space;
  std::string_view s = detail::trim(line);

  // (seconds.micros)
  if (s.empty() || s.front() != '(') {
    throw ParseError("timestamp", "line must start with '(' timestamp");
  }
  const auto close = s.find(')');
  if (close == std::string_view::npos) {
    throw ParseError("timestamp", "unterminated timestamp");
  }
  const std::string_view ts = s.substr(1, close - 1);
  const auto dot = ts.find('.');
  const std::string_view whole = ts.substr(0, dot);
  const std::string_view frac =
      dot == std::string_view::npos ? std::string_view{} : ts.substr(dot + 1);
  if (whole.empty() || whole.size() > 12 ||
      !std::all_of(whole.begin(), whole.end(), [](char c) { return c >= '0' && c <= '9'; }) ||
      frac.size() > 6 ||
      (dot != std::string_view::npos && frac.empty()) ||
      !std::all_of(frac.begin(), frac.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError("timestamp", "malformed timestamp '" + std::string(ts) + "'");
  }
  std::int64_t micros = 0;
  for (char c : whole) micros = micros * 10 + (c - '0');
  std::int64_t fraction = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    fraction = fraction * 10 + (i < frac.size() ? frac[i] - '0' : 0);
  }
  micros = micros * 1000000 + fraction;

  s.remove_prefix(close + 1);
  if (s.empty() || !is_space(s.front())) {
    throw ParseError("iface", "missing interface after timestamp");
  }
  s = detail::trim(s);
  const auto iface_end = std::find_if(s.begin(), s.end(), is_space);
  const std::string_view iface(s.data(), static_cast<std::size_t>(iface_end - s.begin()));
  if (iface.empty() || iface_end == s.end()) {
    throw ParseError("iface", "missing interface or frame body");
  }
  s.remove_prefix(iface.size());
  s = detail::trim(s);
  if (std::any_of(s.begin(), s.end(), is_space)) {
    throw ParseError("data", "trailing garbage after frame body");
  }

  const auto hash = s.find('#');
  if (hash == std::string_view::npos) {
    throw ParseError("id", "frame body lacks '#'");
  }
  const std::string_view id_text = s.substr(0, hash);
  const std::string_view data_text = s.substr(hash + 1);
  if (id_text.size() > 3) {
    throw ParseError("id", "extended (29-bit) identifiers are not supported");
  }
  const std::uint32_t id = detail::parse_hex_u32(id_text, "id");
  if (id > kMaxStandardId) {
    throw ParseError("id", "identifier out of 11-bit range");
  }
  if (data_text.size() % 2 != 0) {
    throw ParseError("data", "odd number of hex data digits");
  }
  if (data_text.size() > 2 * kMaxCanPayload) {
    throw ParseError("data", "more than 16 hex data digits");
  }

  CanFrame frame;
  frame.timestamp = Timestamp{micros};
  frame.iface = std::string(iface);
  frame.id = static_cast<std::uint16_t>(id);
  frame.data.reserve(data_text.size() / 2);
  for (std::size_t i = 0; i < data_text.size(); i += 2) {
    const int hi = detail::hex_value(data_text[i]);
    const int lo = detail::hex_value(data_text[i + 1]);
    if (hi < 0 || lo < 0) throw ParseError("data", "non-hex digit in data");
    frame.data.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
  }
  return frame;
}

/// Canonical form: 6 fractional digits, 3-digit uppercase ID, uppercase data.
inline std::string format_line(const CanFrame& frame) {
  validate_frame(frame);
  char head[48];
  std::snprintf(head, sizeof head, "(%lld.%06lld) ",
                static_cast<long long>(frame.timestamp.micros / 1000000),
                static_cast<long long>(frame.timestamp.micros % 1000000));
  std::string out(head);
  out += frame.iface;
  char id[8];
  std::snprintf(id, sizeof id, " %03X#", static_cast<unsigned>(frame.id));
  out += id;
  static constexpr char kHex[] = "0123456789ABCDEF";
  for (std::uint8_t b : frame.data) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

struct IdFilterEntry {
  std::uint16_t id = 0;
  std::uint16_t mask = kMaxStandardId;
  bool operator==(const IdFilterEntry&) const = default;
};

/// candump-style acceptance filter: a frame passes iff any entry satisfies
/// (frame.id & mask) == (id & mask). An empty filter passes nothing.
struct IdFilter {
  std::vector<IdFilterEntry> entries;

  bool matches(std::uint16_t frame_id) const {
    return std::any_of(entries.begin(), entries.end(), [&](const IdFilterEntry& e) {
      return (frame_id & e.mask) == (e.id & e.mask);
    });
  }
};

/// Parses "7E8:7FF,0C6:7FF". A leading interface token such as "can0," is
/// tolerated and ignored.
inline IdFilter parse_filter(std::string_view text) {
  IdFilter filter;
  bool first = true;
  while (!text.empty()) {
    const auto comma = text.find(',');
    std::string_view item = detail::trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      if (first && !item.empty()) {
        first = false;
        continue;  // interface name
      }
      throw ParseError("filter", "filter entry lacks ':' mask");
    }
    first = false;
    const auto id = detail::parse_hex_u32(item.substr(0, colon), "filter");
    const auto mask = detail::parse_hex_u32(item.substr(colon + 1), "filter");
    if (id > kMaxStandardId || mask > kMaxStandardId) {
      throw ParseError("filter", "filter id/mask exceeds 11 bits");
    }
    filter.entries.push_back({static_cast<std::uint16_t>(id), static_cast<std::uint16_t>(mask)});
  }
  return filter;
}

inline std::vector<CanFrame> filter_frames(std::span<const CanFrame> frames,
                                           const IdFilter& filter) {
  std::vector<CanFrame> out;
  std::copy_if(frames.begin(), frames.end(), std::back_inserter(out),
               [&](const CanFrame& f) { return filter.matches(f.id); });
  return out;
}

enum class LogReadMode { kStrict, kPermissive };

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string field;
  std::string message;
};

struct LogReadResult {
  std::vector<CanFrame> frames;
  std::vector<LineError> skipped;
};

/// Blank lines are ignored. Strict mode rethrows the first failure with the
/// line number prefixed; permissive mode records it and carries on.
inline LogReadResult read_log(std::istream& in, LogReadMode mode = LogReadMode::kStrict) {
  LogReadResult result;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (detail::trim(line).empty()) continue;
    try {
      result.frames.push_back(parse_line(line));
    } catch (const ParseError& e) {
      if (mode == LogReadMode::kStrict) {
        throw ParseError(e.field(), "line " + std::to_string(number) + ": " + e.what());
      }
      result.skipped.push_back({number, e.field(), e.what()});
    }
  }
  return result;
}

inline void write_log(std::ostream& out, std::span<const CanFrame> frames) {
  for (const auto& f : frames) out << format_line(f) << '\n';
}

}  // namespace canpath
