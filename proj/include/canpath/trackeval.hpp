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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "canpath/canlog.hpp"
#include "canpath/error.hpp"
#include "canpath/geokin.hpp"

namespace canpath {

/// Ordered coordinates; `times` is either empty or parallel to `points`.
struct Track {
  std::string name;
  std::vector<LatLon> points;
  std::vector<Timestamp> times;

  std::size_t size() const { return points.size(); }
  double length_m() const { return polyline_length(points); }
};

namespace detail {

inline std::string format_iso8601(Timestamp ts) {
  const std::time_t secs = static_cast<std::time_t>(ts.micros / 1000000);
  const long micros = static_cast<long>(ts.micros % 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[48];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::string out(buf);
  if (micros != 0) {
    std::snprintf(buf, sizeof buf, ".%06ld", micros);
    out += buf;
  }
  return out + "Z";
}

inline std::optional<Timestamp> parse_iso8601(const std::string& text) {
  std::tm tm{};
  int consumed = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &consumed) != 6) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  std::int64_t micros = static_cast<std::int64_t>(timegm(&tm)) * 1000000;
  std::size_t i = static_cast<std::size_t>(consumed);
  if (i < text.size() && text[i] == '.') {
    ++i;
    std::int64_t frac = 0;
    int digits = 0;
    while (i < text.size() && text[i] >= '0' && text[i] <= '9') {
      if (digits < 6) {
        frac = frac * 10 + (text[i] - '0');
        ++digits;
      }
      ++i;
    }
    while (digits++ < 6) frac *= 10;
    micros += frac;
  }
  return Timestamp{micros};
}

}  // namespace detail

/// GPX 1.1, one track, one segment. Coordinates are printed with 8 decimals
/// so the output is byte-stable.
inline void write_gpx(std::ostream& out, const Track& track) {
  const bool with_times = !track.times.empty() && track.times.size() == track.points.size();
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<gpx version=\"1.1\" creator=\"canpath\" xmlns=\"http://www.topografix.com/GPX/1/1\">\n"
      << "  <trk>\n";
  if (!track.name.empty()) {
    std::string escaped;
    for (char c : track.name) {
      switch (c) {
        case '&': escaped += "&amp;"; break;
        case '<': escaped += "&lt;"; break;
        case '>': escaped += "&gt;"; break;
        default: escaped += c;
      }
    }
    out << "    <name>" << escaped << "</name>\n";
  }
  out << "    <trkseg>\n";
  char buf[96];
  for (std::size_t i = 0; i < track.points.size(); ++i) {
    std::snprintf(buf, sizeof buf, "      <trkpt lat=\"%.8f\" lon=\"%.8f\"", track.points[i].lat, track.points[i].lon);
    out << buf;
    if (with_times) {
      out << "><time>" << detail::format_iso8601(track.times[i]) << "</time></trkpt>\n";
    } else {
      out << "/>\n";
    }
  }
  out << "    </trkseg>\n  </trk>\n</gpx>\n";
}

/// Concatenates every trkseg of every trk. Timestamps are kept only when
/// every point carries one.
inline Track read_gpx(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    pt::read_xml(in, doc);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("gpx", "malformed GPX at line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto gpx = doc.get_child_optional("gpx");
  if (!gpx) throw ParseError("gpx", "missing <gpx> root element");

  Track track;
  bool all_timed = true;
  std::size_t trk_i = 0;
  for (const auto& [trk_tag, trk] : *gpx) {
    if (trk_tag != "trk") continue;
    if (track.name.empty()) track.name = trk.get<std::string>("name", "");
    std::size_t seg_i = 0;
    for (const auto& [seg_tag, seg] : trk) {
      if (seg_tag != "trkseg") continue;
      std::size_t pt_i = 0;
      for (const auto& [pt_tag, point] : seg) {
        if (pt_tag != "trkpt") continue;
        const std::string where = "trk[" + std::to_string(trk_i) + "]/trkseg[" + std::to_string(seg_i) +
                                  "]/trkpt[" + std::to_string(pt_i) + "]";
        const auto lat = point.get_optional<double>("<xmlattr>.lat");
        const auto lon = point.get_optional<double>("<xmlattr>.lon");
        if (!lat) throw ParseError("lat", "missing or invalid lat at " + where);
        if (!lon) throw ParseError("lon", "missing or invalid lon at " + where);
        if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
          throw ParseError("lat", "coordinate out of range at " + where);
        }
        track.points.push_back({*lat, *lon});
        const auto time = point.get_optional<std::string>("time");
        std::optional<Timestamp> ts = time ? detail::parse_iso8601(*time) : std::nullopt;
        if (ts) {
          track.times.push_back(*ts);
        } else {
          all_timed = false;
        }
        ++pt_i;
      }
      ++seg_i;
    }
    ++trk_i;
  }
  if (!all_timed) track.times.clear();
  return track;
}

/// Points every `spacing_m` along the polyline, plus the final vertex.
inline Track resample_by_distance(const Track& track, double spacing_m) {
  Track out;
  out.name = track.name;
  if (track.points.size() < 2 || !(spacing_m > 0.0)) {
    out.points = track.points;
    return out;
  }
  out.points.push_back(track.points.front());
  double next = spacing_m;
  double walked = 0.0;
  for (std::size_t i = 1; i < track.points.size(); ++i) {
    const LatLon a = track.points[i - 1];
    const LatLon b = track.points[i];
    const double seg = great_circle_distance(a, b);
    while (seg > 0.0 && walked + seg >= next) {
      const double t = (next - walked) / seg;
      out.points.push_back({a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)});
      next += spacing_m;
    }
    walked += seg;
  }
  if (great_circle_distance(out.points.back(), track.points.back()) > 1e-6) {
    out.points.push_back(track.points.back());
  }
  return out;
}

struct AlignmentResult {
  std::size_t matched_pairs = 0;
  std::size_t aligned_length = 0;
  double accuracy = 0.0;
  long score = 0;
  std::vector<bool> matched_a;
  std::vector<bool> matched_b;
};

struct AlignmentScoring {
  double match_epsilon_m = 10.0;
  int match = 1;
  int mismatch = -1;
  int gap = -1;
};

/// Global alignment of two point sequences. A pair scores `match` when the
/// points are within `match_epsilon_m`, `mismatch` otherwise; gaps cost
/// `gap`. Among equal-score alignments the one with most matched pairs is
/// kept, which makes `accuracy` symmetric in (a, b). Traceback prefers
/// diagonal, then a gap in b, then a gap in a.
inline AlignmentResult nw_align(std::span<const LatLon> a, std::span<const LatLon> b,
                                const AlignmentScoring& scoring = {}) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const std::size_t w = m + 1;
  std::vector<long> score((n + 1) * w, 0);
  std::vector<std::uint32_t> matches((n + 1) * w, 0);
  std::vector<std::uint8_t> step((n + 1) * w, 0);  // 0 diag, 1 up (gap in b), 2 left (gap in a)
  std::vector<std::uint8_t> pair_ok(n * m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      pair_ok[i * m + j] = great_circle_distance(a[i], b[j]) <= scoring.match_epsilon_m;
    }
  }
  for (std::size_t i = 1; i <= n; ++i) {
    score[i * w] = static_cast<long>(i) * scoring.gap;
    step[i * w] = 1;
  }
  for (std::size_t j = 1; j <= m; ++j) {
    score[j] = static_cast<long>(j) * scoring.gap;
    step[j] = 2;
  }
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const bool ok = pair_ok[(i - 1) * m + (j - 1)];
      long best_s = score[(i - 1) * w + (j - 1)] + (ok ? scoring.match : scoring.mismatch);
      std::uint32_t best_m = matches[(i - 1) * w + (j - 1)] + (ok ? 1u : 0u);
      std::uint8_t best_step = 0;
      const auto consider = [&](long s, std::uint32_t mm, std::uint8_t st) {
        if (s > best_s || (s == best_s && mm > best_m)) {
          best_s = s;
          best_m = mm;
          best_step = st;
        }
      };
      consider(score[(i - 1) * w + j] + scoring.gap, matches[(i - 1) * w + j], 1);
      consider(score[i * w + (j - 1)] + scoring.gap, matches[i * w + (j - 1)], 2);
      score[i * w + j] = best_s;
      matches[i * w + j] = best_m;
      step[i * w + j] = best_step;
    }
  }

  AlignmentResult r;
  r.score = score[n * w + m];
  r.matched_a.assign(n, false);
  r.matched_b.assign(m, false);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    ++r.aligned_length;
    const std::uint8_t st = step[i * w + j];
    if (st == 0) {
      if (pair_ok[(i - 1) * m + (j - 1)]) {
        ++r.matched_pairs;
        r.matched_a[i - 1] = true;
        r.matched_b[j - 1] = true;
      }
      --i;
      --j;
    } else if (st == 1) {
      --i;
    } else {
      --j;
    }
  }
  const std::size_t denom = std::max(n, m);
  r.accuracy = denom == 0 ? 0.0 : static_cast<double>(r.matched_pairs) / static_cast<double>(denom);
  return r;
}

inline AlignmentResult nw_align(const Track& a, const Track& b, double match_epsilon_m = 10.0) {
  AlignmentScoring s;
  s.match_epsilon_m = match_epsilon_m;
  return nw_align(a.points, b.points, s);
}

struct CompareOptions {
  double match_epsilon_m = 10.0;
  double spacing_m = 5.0;  // both tracks are resampled to this spacing first; <= 0 disables
};

/// Resamples both tracks to a common spacing, then aligns them.
inline AlignmentResult compare_tracks(const Track& a, const Track& b, const CompareOptions& options = {}) {
  const Track ra = options.spacing_m > 0.0 ? resample_by_distance(a, options.spacing_m) : a;
  const Track rb = options.spacing_m > 0.0 ? resample_by_distance(b, options.spacing_m) : b;
  return nw_align(ra, rb, options.match_epsilon_m);
}

}  // namespace canpath
