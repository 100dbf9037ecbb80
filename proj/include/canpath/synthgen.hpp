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

// Closed-loop trace generator: drives a virtual car along a route of a road
// graph and emits the CAN frames an eavesdropper would have logged (SWA
// frames plus OBD speed responses), together with the true track.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "canpath/canlog.hpp"
#include "canpath/error.hpp"
#include "canpath/geokin.hpp"
#include "canpath/mapmatch.hpp"
#include "canpath/obd.hpp"
#include "canpath/reveng.hpp"
#include "canpath/trackeval.hpp"

namespace canpath::synth {

/// Constant speed up to `until_m` metres of route; the last entry extends to
/// the end of the route whatever its bound.
struct SpeedSegment {
  double until_m = 0.0;
  double speed_kmh = 0.0;
};

struct SimScenario {
  std::shared_ptr<const RoadGraph> graph;
  std::vector<EdgeId> route;
  std::vector<SpeedSegment> speed_profile;
  double swa_rate_hz = 100.0;
  double obd_rate_hz = 10.0;
  double truth_rate_hz = 1.0;
  reveng::AngleDecoder decoder{0x0C6, 0, 1, 0x7FFF, 0.01, reveng::AngleMode::kOffset};
  VehicleSpec spec;
  double start_bearing_error_deg = 0.0;
  // Junction corners sharper than kFilletMinDeflectionDeg are rounded with
  // this radius, as a real car cannot turn on the spot.
  double corner_radius_m = 12.0;
  Timestamp start_time{1'700'000'000'000'000};
  std::string iface = "can0";
};

struct SimOutput {
  std::vector<CanFrame> log;
  Track truth;
  VehiclePose start;
  std::vector<LatLon> path;  // driven polyline (after corner rounding)
  double length_m = 0.0;
  double duration_s = 0.0;
};

inline constexpr double kFilletMinDeflectionDeg = 15.0;
inline constexpr double kFilletStepDeg = 5.0;

/// Concatenated geometry of a contiguous route, each edge oriented to
/// continue from the previous one.
inline std::vector<LatLon> route_polyline(const RoadGraph& graph, std::span<const EdgeId> route) {
  if (route.empty()) throw ScenarioError("route is empty");
  for (EdgeId id : route) {
    if (!graph.has_edge(id)) throw ScenarioError("route references unknown edge " + std::to_string(id));
  }
  const RoadEdge& first = graph.edge(route[0]);
  bool forward = true;
  if (route.size() > 1) {
    const RoadEdge& second = graph.edge(route[1]);
    const auto touches = [&](NodeId n) { return second.from == n || (second.bidirectional && second.to == n); };
    if (touches(first.to)) {
      forward = true;
    } else if (first.bidirectional && touches(first.from)) {
      forward = false;
    } else {
      throw ScenarioError("route is not contiguous between edges " + std::to_string(first.id) + " and " +
                          std::to_string(second.id));
    }
  }
  std::vector<LatLon> pts;
  auto append = [&](const RoadEdge& e, bool fwd) {
    std::vector<LatLon> g = e.geometry;
    if (!fwd) std::reverse(g.begin(), g.end());
    for (const auto& p : g) {
      if (pts.empty() || !(pts.back() == p)) pts.push_back(p);
    }
    return fwd ? e.to : e.from;
  };
  NodeId at = append(first, forward);
  for (std::size_t i = 1; i < route.size(); ++i) {
    const RoadEdge& e = graph.edge(route[i]);
    if (e.from == at) {
      at = append(e, true);
    } else if (e.bidirectional && e.to == at) {
      at = append(e, false);
    } else {
      throw ScenarioError("route is not contiguous at edge " + std::to_string(e.id));
    }
  }
  return pts;
}

namespace detail {

struct Enu {
  double x = 0.0;  // east, m
  double y = 0.0;  // north, m
};

inline Enu to_enu(LatLon origin, LatLon p) {
  const double k = deg2rad(1.0) * kEarthRadiusM;
  return {(p.lon - origin.lon) * k * std::cos(deg2rad(origin.lat)), (p.lat - origin.lat) * k};
}

inline LatLon from_enu(LatLon origin, Enu e) {
  const double k = deg2rad(1.0) * kEarthRadiusM;
  return {origin.lat + e.y / k, origin.lon + e.x / (k * std::cos(deg2rad(origin.lat)))};
}

}  // namespace detail

/// Replaces every vertex that deflects by more than kFilletMinDeflectionDeg
/// with a circular arc of `radius_m` (shrunk when the adjacent segments are
/// too short), sampled every kFilletStepDeg.
inline std::vector<LatLon> round_corners(std::span<const LatLon> pts, double radius_m) {
  if (pts.size() < 3 || !(radius_m > 0.0)) return {pts.begin(), pts.end()};
  std::vector<LatLon> out{pts.front()};
  // Each side of a segment may give up at most half its length to a fillet.
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    const LatLon v = pts[i];
    const double h_in = initial_bearing(pts[i - 1], v);
    const double h_out = initial_bearing(v, pts[i + 1]);
    const double theta = bearing_difference(h_in, h_out);
    if (std::abs(theta) <= kFilletMinDeflectionDeg) {
      out.push_back(v);
      continue;
    }
    const double len_in = great_circle_distance(pts[i - 1], v);
    const double len_out = great_circle_distance(v, pts[i + 1]);
    const double half_tan = std::tan(deg2rad(std::abs(theta)) / 2.0);
    const double tangent = std::min(radius_m * half_tan, 0.5 * std::min(len_in, len_out));
    const double r = tangent / half_tan;
    const double s = theta > 0.0 ? 1.0 : -1.0;  // +1: right turn
    const auto dir = [](double h) { return detail::Enu{std::sin(deg2rad(h)), std::cos(deg2rad(h))}; };
    const auto right = [](double h) { return detail::Enu{std::cos(deg2rad(h)), -std::sin(deg2rad(h))}; };
    const detail::Enu d_in = dir(h_in);
    const detail::Enu p1{-d_in.x * tangent, -d_in.y * tangent};
    const detail::Enu r_in = right(h_in);
    const detail::Enu c{p1.x + s * r * r_in.x, p1.y + s * r * r_in.y};
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(theta) / kFilletStepDeg)));
    for (int k = 0; k <= steps; ++k) {
      const double h = h_in + theta * k / steps;
      const detail::Enu rh = right(h);
      out.push_back(detail::from_enu(v, {c.x - s * r * rh.x, c.y - s * r * rh.y}));
    }
  }
  out.push_back(pts.back());
  // Drop zero-length steps the construction may create at tangent points.
  std::vector<LatLon> clean;
  for (const auto& p : out) {
    if (clean.empty() || great_circle_distance(clean.back(), p) > 1e-3) clean.push_back(p);
  }
  return clean;
}

/// Arc-length parametrisation of a polyline with a continuous, unwrapped
/// heading: around each interior vertex the bearing blends linearly from the
/// incoming to the outgoing segment over a zone of half-width
/// min(len_in, len_out) / 2.
class PathProfile {
 public:
  explicit PathProfile(std::vector<LatLon> pts) : pts_(std::move(pts)) {
    if (pts_.size() < 2) throw ScenarioError("route polyline needs at least two distinct points");
    cum_.assign(pts_.size(), 0.0);
    for (std::size_t i = 1; i < pts_.size(); ++i) cum_[i] = cum_[i - 1] + great_circle_distance(pts_[i - 1], pts_[i]);
    const std::size_t segs = pts_.size() - 1;
    seg_heading_.resize(segs);
    double unwrapped = initial_bearing(pts_[0], pts_[1]);
    seg_heading_[0] = unwrapped;
    for (std::size_t j = 1; j < segs; ++j) {
      unwrapped += bearing_difference(initial_bearing(pts_[j - 1], pts_[j]), initial_bearing(pts_[j], pts_[j + 1]));
      seg_heading_[j] = unwrapped;
    }
    half_zone_.assign(pts_.size(), 0.0);
    for (std::size_t v = 1; v + 1 < pts_.size(); ++v) {
      half_zone_[v] = 0.5 * std::min(cum_[v] - cum_[v - 1], cum_[v + 1] - cum_[v]);
    }
  }

  double length() const { return cum_.back(); }
  const std::vector<LatLon>& points() const { return pts_; }
  double initial_heading() const { return wrap_0_360(seg_heading_.front()); }

  /// Unwrapped heading in degrees at arc length `s`.
  double heading(double s) const {
    s = std::clamp(s, 0.0, length());
    const std::size_t j = segment_at(s);
    // Zones at the segment's start vertex (j) and end vertex (j + 1).
    if (j > 0 && s < cum_[j] + half_zone_[j]) {
      const double m = half_zone_[j];
      const double f = (s - (cum_[j] - m)) / (2.0 * m);
      return seg_heading_[j - 1] + f * (seg_heading_[j] - seg_heading_[j - 1]);
    }
    if (j + 2 < pts_.size() && s > cum_[j + 1] - half_zone_[j + 1]) {
      const double m = half_zone_[j + 1];
      const double f = (s - (cum_[j + 1] - m)) / (2.0 * m);
      return seg_heading_[j] + f * (seg_heading_[j + 1] - seg_heading_[j]);
    }
    return seg_heading_[j];
  }

  LatLon position(double s) const {
    s = std::clamp(s, 0.0, length());
    const std::size_t j = segment_at(s);
    const double len = cum_[j + 1] - cum_[j];
    const double t = len > 0.0 ? (s - cum_[j]) / len : 0.0;
    return {pts_[j].lat + t * (pts_[j + 1].lat - pts_[j].lat), pts_[j].lon + t * (pts_[j + 1].lon - pts_[j].lon)};
  }

 private:
  std::size_t segment_at(double s) const {
    auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
    std::size_t idx = static_cast<std::size_t>(std::distance(cum_.begin(), it));
    return std::clamp<std::size_t>(idx, 1, pts_.size() - 1) - 1;
  }

  std::vector<LatLon> pts_;
  std::vector<double> cum_;
  std::vector<double> seg_heading_;
  std::vector<double> half_zone_;
};

/// Distance covered as a function of time under a piecewise-constant speed.
class Motion {
 public:
  Motion(std::span<const SpeedSegment> profile, double length_m) : length_(length_m) {
    if (profile.empty()) throw ScenarioError("speed profile is empty");
    double s = 0.0, t = 0.0;
    for (std::size_t i = 0; i < profile.size() && s < length_m; ++i) {
      const double kmh = profile[i].speed_kmh;
      if (!(kmh > 0.0) || kmh > 255.0) throw ScenarioError("speeds must lie in (0, 255] km/h");
      const double end = i + 1 == profile.size() ? length_m : std::min(profile[i].until_m, length_m);
      if (end <= s) continue;
      pieces_.push_back({s, end, kmh, t});
      t += (end - s) / (kmh / 3.6);
      s = end;
    }
    duration_ = t;
  }

  double duration() const { return duration_; }

  double distance_at(double t) const {
    if (t <= 0.0) return 0.0;
    for (const auto& p : pieces_) {
      const double t_end = p.t0 + (p.s1 - p.s0) / (p.kmh / 3.6);
      if (t < t_end) return p.s0 + (t - p.t0) * p.kmh / 3.6;
    }
    return length_;
  }

  double speed_kmh_at_distance(double s) const {
    for (const auto& p : pieces_) {
      if (s < p.s1) return p.kmh;
    }
    return pieces_.back().kmh;
  }

 private:
  struct Piece {
    double s0, s1, kmh, t0;
  };
  std::vector<Piece> pieces_;
  double length_ = 0.0;
  double duration_ = 0.0;
};

/// Steering angle (degrees, + = left) that makes the bicycle model turn by
/// the path's heading change between arc lengths s0 and s1.
inline double steering_for(const PathProfile& path, double s0, double s1, double wheelbase_m) {
  const double ds = s1 - s0;
  if (!(ds > 0.0)) return 0.0;
  const double dh = deg2rad(path.heading(s1) - path.heading(s0));
  return -rad2deg(std::atan(wheelbase_m * dh / ds));
}

inline SimOutput simulate(const SimScenario& sc) {
  if (!sc.graph) throw ScenarioError("scenario has no road graph");
  if (!(sc.swa_rate_hz > 0.0) || !(sc.obd_rate_hz > 0.0) || !(sc.truth_rate_hz > 0.0)) {
    throw ScenarioError("sampling rates must be positive");
  }
  if (!(sc.spec.wheelbase_m > 0.0)) throw ScenarioError("wheelbase must be positive");
  reveng::validate_decoder(sc.decoder);

  const PathProfile path(round_corners(route_polyline(*sc.graph, sc.route), sc.corner_radius_m));
  const Motion motion(sc.speed_profile, path.length());
  const double duration = motion.duration();

  SimOutput out;
  out.path = path.points();
  out.length_m = path.length();
  out.duration_s = duration;
  out.start.position = path.points().front();
  out.start.bearing = wrap_0_360(path.initial_heading() + sc.start_bearing_error_deg);

  const std::int64_t swa_period = std::llround(1e6 / sc.swa_rate_hz);
  const std::int64_t obd_period = std::llround(1e6 / sc.obd_rate_hz);
  const std::int64_t obd_phase = swa_period / 2;
  const std::int64_t end_us = static_cast<std::int64_t>(std::floor(duration * 1e6));

  std::vector<CanFrame> swa, obd;
  for (std::int64_t t = 0; t < end_us; t += swa_period) {
    const double s0 = motion.distance_at(t * 1e-6);
    const double s1 = motion.distance_at((t + swa_period) * 1e-6);
    const double delta = steering_for(path, s0, s1, sc.spec.wheelbase_m);
    swa.push_back(reveng::encode_angle_frame(sc.decoder, Timestamp{sc.start_time.micros + t}, delta, sc.iface));
  }
  for (std::int64_t t = obd_phase; t < end_us; t += obd_period) {
    const double kmh = motion.speed_kmh_at_distance(motion.distance_at(t * 1e-6));
    const auto byte = static_cast<std::uint8_t>(std::clamp(std::lround(kmh), 0L, 255L));
    obd.push_back(obd::encode_speed_response(Timestamp{sc.start_time.micros + t}, byte, obd::kFirstResponseId,
                                             sc.iface));
  }
  out.log.reserve(swa.size() + obd.size());
  std::merge(swa.begin(), swa.end(), obd.begin(), obd.end(), std::back_inserter(out.log),
             [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 1; i < out.log.size(); ++i) {
    if (out.log[i].timestamp <= out.log[i - 1].timestamp) {
      out.log[i].timestamp.micros = out.log[i - 1].timestamp.micros + 1;
    }
  }

  const std::int64_t truth_period = std::llround(1e6 / sc.truth_rate_hz);
  for (std::int64_t t = 0; t < end_us; t += truth_period) {
    out.truth.points.push_back(path.position(motion.distance_at(t * 1e-6)));
    out.truth.times.push_back(Timestamp{sc.start_time.micros + t});
  }
  const std::int64_t after_last =
      out.truth.times.empty() ? 0 : out.truth.times.back().micros - sc.start_time.micros + 1;
  out.truth.points.push_back(path.points().back());
  out.truth.times.push_back(Timestamp{sc.start_time.micros + std::max(end_us, after_last)});
  out.truth.name = "truth";
  return out;
}

}  // namespace canpath::synth
