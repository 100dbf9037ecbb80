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

// Steering-wheel-angle (SWA) identification and signal decoding.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "canpath/canlog.hpp"
#include "canpath/error.hpp"

namespace canpath::reveng {

/// Bit flips between two payloads. Bytes present in only one payload count
/// as fully flipped (8 bits each).
inline unsigned hamming_distance(std::span<const std::uint8_t> a,
                                 std::span<const std::uint8_t> b) {
  const std::size_t common = std::min(a.size(), b.size());
  unsigned d = 0;
  for (std::size_t i = 0; i < common; ++i) {
    d += static_cast<unsigned>(std::popcount(static_cast<unsigned>(a[i] ^ b[i])));
  }
  return d + 8u * static_cast<unsigned>(std::max(a.size(), b.size()) - common);
}

struct IdChangeStats {
  std::uint16_t id = 0;
  std::size_t frame_count = 0;
  double avg_hamming = 0.0;
  std::array<double, kMaxCanPayload> per_byte_change_rate{};
};

/// One entry per distinct ID, ascending by ID.
inline std::vector<IdChangeStats> compute_change_stats(std::span<const CanFrame> frames) {
  struct Acc {
    std::size_t count = 0;
    std::size_t pairs = 0;
    std::uint64_t flips = 0;
    std::array<std::size_t, kMaxCanPayload> byte_changes{};
    const std::vector<std::uint8_t>* last = nullptr;
  };
  std::map<std::uint16_t, Acc> acc;
  for (const auto& f : frames) {
    Acc& a = acc[f.id];
    ++a.count;
    if (a.last != nullptr) {
      ++a.pairs;
      a.flips += hamming_distance(*a.last, f.data);
      const std::size_t n = std::max(a.last->size(), f.data.size());
      for (std::size_t i = 0; i < n && i < kMaxCanPayload; ++i) {
        const bool in_prev = i < a.last->size();
        const bool in_cur = i < f.data.size();
        if (in_prev != in_cur || (in_prev && (*a.last)[i] != f.data[i])) ++a.byte_changes[i];
      }
    }
    a.last = &f.data;
  }

  std::vector<IdChangeStats> out;
  out.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    IdChangeStats s;
    s.id = id;
    s.frame_count = a.count;
    if (a.pairs > 0) {
      s.avg_hamming = static_cast<double>(a.flips) / static_cast<double>(a.pairs);
      for (std::size_t i = 0; i < kMaxCanPayload; ++i) {
        s.per_byte_change_rate[i] =
            static_cast<double>(a.byte_changes[i]) / static_cast<double>(a.pairs);
      }
    }
    out.push_back(s);
  }
  return out;
}

inline constexpr std::uint16_t kDefaultIdCeiling = 0x300;

/// SWA broadcasts are high priority (low ID) and change in small steps, so
/// candidates below the ceiling that change at all are ordered by ascending
/// average hamming distance, then ascending ID.
inline std::vector<IdChangeStats> rank_swa_candidates(std::vector<IdChangeStats> stats,
                                                      std::uint16_t id_ceiling = kDefaultIdCeiling) {
  std::erase_if(stats, [&](const IdChangeStats& s) {
    return s.id >= id_ceiling || !(s.avg_hamming > 0.0);
  });
  std::stable_sort(stats.begin(), stats.end(), [](const IdChangeStats& a, const IdChangeStats& b) {
    if (a.avg_hamming != b.avg_hamming) return a.avg_hamming < b.avg_hamming;
    return a.id < b.id;
  });
  return stats;
}

/// CSV: id,count,avg_hamming,byte0..byte7 change rates.
inline void write_candidate_report(std::ostream& out, std::span<const IdChangeStats> stats) {
  out << "id,count,avg_hamming";
  for (std::size_t i = 0; i < kMaxCanPayload; ++i) out << ",byte" << i;
  out << '\n';
  char buf[32];
  for (const auto& s : stats) {
    std::snprintf(buf, sizeof buf, "0x%03X", static_cast<unsigned>(s.id));
    out << buf << ',' << s.frame_count;
    std::snprintf(buf, sizeof buf, ",%.4f", s.avg_hamming);
    out << buf;
    for (double r : s.per_byte_change_rate) {
      std::snprintf(buf, sizeof buf, ",%.4f", r);
      out << buf;
    }
    out << '\n';
  }
}

enum class AngleMode { kOffset, kTwosComplement };

/// Decoding recipe for one vehicle's SWA word:
///   offset mode:  angle = ((data[byte_hi] * 256 + data[byte_lo]) - offset) * scale
///   two's mode:   angle = int16(word) * scale
/// Positive angles are left turns.
struct AngleDecoder {
  std::uint16_t id = 0;
  std::size_t byte_hi = 0;
  std::size_t byte_lo = 1;
  std::uint16_t offset = 0x7FFF;
  double scale = 0.01;
  AngleMode mode = AngleMode::kOffset;

  bool operator==(const AngleDecoder&) const = default;
};

inline void validate_decoder(const AngleDecoder& d) {
  if (d.id > kMaxStandardId) throw DecodeError("decoder id exceeds 11 bits");
  if (d.byte_hi >= kMaxCanPayload || d.byte_lo >= kMaxCanPayload || d.byte_hi == d.byte_lo) {
    throw DecodeError("decoder byte indices must be distinct and in 0..7");
  }
  if (!(d.scale > 0.0) || !std::isfinite(d.scale)) throw DecodeError("decoder scale must be positive");
}

struct SteeringSample {
  Timestamp timestamp;
  double angle_deg = 0.0;
};

inline std::uint16_t extract_word(const AngleDecoder& decoder, const CanFrame& frame) {
  if (frame.data.size() <= std::max(decoder.byte_hi, decoder.byte_lo)) {
    throw DecodeError("payload too short for angle bytes");
  }
  return static_cast<std::uint16_t>(frame.data[decoder.byte_hi] << 8 | frame.data[decoder.byte_lo]);
}

inline double decode_word(const AngleDecoder& decoder, std::uint16_t word) {
  if (decoder.mode == AngleMode::kTwosComplement) {
    return static_cast<double>(static_cast<std::int16_t>(word)) * decoder.scale;
  }
  return static_cast<double>(static_cast<int>(word) - static_cast<int>(decoder.offset)) * decoder.scale;
}

inline SteeringSample decode_angle(const AngleDecoder& decoder, const CanFrame& frame) {
  if (frame.id != decoder.id) throw DecodeError("frame id does not match decoder id");
  return {frame.timestamp, decode_word(decoder, extract_word(decoder, frame))};
}

inline std::uint16_t encode_angle(const AngleDecoder& decoder, double angle_deg) {
  if (!std::isfinite(angle_deg)) throw EncodeError("angle must be finite");
  const double counts = std::round(angle_deg / decoder.scale);
  if (decoder.mode == AngleMode::kTwosComplement) {
    if (counts < -32768.0 || counts > 32767.0) throw EncodeError("angle outside signed 16-bit range");
    return static_cast<std::uint16_t>(static_cast<std::int16_t>(counts));
  }
  const double word = counts + decoder.offset;
  if (word < 0.0 || word > 65535.0) throw EncodeError("angle outside 16-bit range for this offset");
  return static_cast<std::uint16_t>(word);
}

/// Writes the encoded angle into a zero-filled 8-byte SWA frame.
inline CanFrame encode_angle_frame(const AngleDecoder& decoder, Timestamp ts, double angle_deg,
                                   std::string iface = "can0") {
  const std::uint16_t word = encode_angle(decoder, angle_deg);
  CanFrame frame;
  frame.timestamp = ts;
  frame.iface = std::move(iface);
  frame.id = decoder.id;
  frame.data.assign(kMaxCanPayload, 0);
  frame.data[decoder.byte_hi] = static_cast<std::uint8_t>(word >> 8);
  frame.data[decoder.byte_lo] = static_cast<std::uint8_t>(word & 0xFF);
  return frame;
}

// ---------------------------------------------------------------------------
// Decoder sheet
//
//   canpath-swa-sheet 1
//   # model,id,byte_hi,byte_lo,offset,scale,mode,wheelbase_m
//   Renault Captur,0C6,0,1,7FFF,0.01,offset,2.606
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSheetMagic = "canpath-swa-sheet 1";

struct SheetEntry {
  std::string model;
  AngleDecoder decoder;
  double wheelbase_m = 0.0;  // 0 when unknown
};

namespace detail {

inline std::string normalize_model(std::string_view name) {
  std::string out;
  bool space = false;
  for (char c : name) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(canpath::detail::trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

inline std::vector<SheetEntry> read_sheet(std::istream& in) {
  std::string line;
  std::size_t number = 0;
  bool seen_magic = false;
  std::vector<SheetEntry> entries;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view t = canpath::detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!seen_magic) {
      if (t != kSheetMagic) throw ParseError("sheet", "decoder sheet must start with '" + std::string(kSheetMagic) + "'");
      seen_magic = true;
      continue;
    }
    const auto cells = detail::split_csv(t);
    const auto fail = [&](const std::string& what) {
      return ParseError("sheet", "sheet line " + std::to_string(number) + ": " + what);
    };
    if (cells.size() != 8) throw fail("expected 8 columns");
    SheetEntry e;
    e.model = cells[0];
    try {
      const auto id = canpath::detail::parse_hex_u32(cells[1], "id");
      const auto offset = canpath::detail::parse_hex_u32(cells[4], "offset");
      if (id > kMaxStandardId || offset > 0xFFFF) throw fail("id or offset out of range");
      e.decoder.id = static_cast<std::uint16_t>(id);
      e.decoder.byte_hi = std::stoul(cells[2]);
      e.decoder.byte_lo = std::stoul(cells[3]);
      e.decoder.offset = static_cast<std::uint16_t>(offset);
      e.decoder.scale = std::stod(cells[5]);
      e.wheelbase_m = std::stod(cells[7]);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw fail("bad numeric field");
    }
    if (cells[6] == "offset") {
      e.decoder.mode = AngleMode::kOffset;
    } else if (cells[6] == "twos") {
      e.decoder.mode = AngleMode::kTwosComplement;
    } else {
      throw fail("mode must be 'offset' or 'twos'");
    }
    try {
      validate_decoder(e.decoder);
    } catch (const DecodeError& err) {
      throw fail(err.what());
    }
    if (e.model.empty() || e.wheelbase_m < 0.0) throw fail("bad model or wheelbase");
    entries.push_back(std::move(e));
  }
  if (!seen_magic) throw ParseError("sheet", "empty decoder sheet");
  return entries;
}

inline void write_sheet(std::ostream& out, std::span<const SheetEntry> entries) {
  out << kSheetMagic << "\n# model,id,byte_hi,byte_lo,offset,scale,mode,wheelbase_m\n";
  char buf[160];
  for (const auto& e : entries) {
    std::snprintf(buf, sizeof buf, ",%03X,%zu,%zu,%04X,%.17g,%s,%.17g\n",
                  static_cast<unsigned>(e.decoder.id), e.decoder.byte_hi, e.decoder.byte_lo,
                  static_cast<unsigned>(e.decoder.offset), e.decoder.scale,
                  e.decoder.mode == AngleMode::kOffset ? "offset" : "twos", e.wheelbase_m);
    out << e.model << buf;
  }
}

/// Vehicles whose SWA signal has already been reversed. All use c = 0.01 and
/// the 0x7FFF offset; wheelbases are manufacturer figures.
inline constexpr std::string_view kShippedSheet = R"(canpath-swa-sheet 1
# model,id,byte_hi,byte_lo,offset,scale,mode,wheelbase_m
Renault Captur,0C6,0,1,7FFF,0.01,offset,2.606
Dacia Duster,0C6,0,1,7FFF,0.01,offset,2.676
Opel Crossland,2F5,0,1,7FFF,0.01,offset,2.604
Peugeot 5008,2EB,0,1,7FFF,0.01,offset,2.840
)";

inline const std::vector<SheetEntry>& shipped_sheet() {
  static const std::vector<SheetEntry> sheet = [] {
    std::istringstream in{std::string(kShippedSheet)};
    return read_sheet(in);
  }();
  return sheet;
}

inline std::optional<SheetEntry> lookup_model(std::span<const SheetEntry> sheet, std::string_view model) {
  static const std::map<std::string, std::string, std::less<>> kAliases = {
      {"renault capture", "renault captur"},
      {"opel crossland x", "opel crossland"},
      {"peugeout 5008", "peugeot 5008"},
  };
  std::string key = detail::normalize_model(model);
  if (auto it = kAliases.find(key); it != kAliases.end()) key = it->second;
  for (const auto& e : sheet) {
    if (detail::normalize_model(e.model) == key) return e;
  }
  return std::nullopt;
}

inline std::optional<SheetEntry> lookup_known_swa(std::string_view model) {
  return lookup_model(shipped_sheet(), model);
}

}  // namespace canpath::reveng
