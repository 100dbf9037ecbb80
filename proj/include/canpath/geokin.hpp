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

// Spherical-earth geodesy and the kinematic bicycle heading update.
//
// Conventions used throughout the library:
//   * bearings are compass degrees, 0 = North, clockwise, wrapped to [0, 360);
//   * steering angles are degrees, positive = left turn;
//   * a left turn therefore *decreases* the bearing.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

namespace canpath {

inline constexpr double kEarthRadiusM = 6371008.8;

inline constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct VehiclePose {
  LatLon position;
  double bearing = 0.0;
};

struct VehicleSpec {
  double wheelbase_m = 2.6;
  double steer_max_deg = 35.0;
  std::string model;
};

inline double wrap_0_360(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w = 0.0;  // fmod(-tiny) + 360 can round up to 360
  return w;
}

/// Yaw rate of the rear-axle bicycle model, rad/s.
inline double angular_speed(double speed_mps, double steer_deg, double wheelbase_m) {
  return speed_mps * std::tan(deg2rad(steer_deg)) / wheelbase_m;
}

/// Heading increment over one window, wrapped to (-180, 180] through atan2.
inline double heading_delta(double omega_rad_s, double t_window_s) {
  const double turn = omega_rad_s * t_window_s;
  return rad2deg(std::atan2(std::sin(turn), std::cos(turn)));
}

/// Positive (left) deltas reduce the compass bearing.
inline VehiclePose apply_heading(VehiclePose pose, double delta_deg) {
  pose.bearing = wrap_0_360(pose.bearing - delta_deg);
  return pose;
}

/// Great-circle direct problem.
inline LatLon geodesic_forward(LatLon from, double bearing_deg, double distance_m) {
  if (distance_m == 0.0) return from;
  const double phi1 = deg2rad(from.lat);
  const double lam1 = deg2rad(from.lon);
  const double theta = deg2rad(bearing_deg);
  const double delta = distance_m / kEarthRadiusM;
  const double sin_phi2 =
      std::sin(phi1) * std::cos(delta) + std::cos(phi1) * std::sin(delta) * std::cos(theta);
  const double phi2 = std::asin(std::clamp(sin_phi2, -1.0, 1.0));
  const double lam2 =
      lam1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                        std::cos(delta) - std::sin(phi1) * sin_phi2);
  double lon = rad2deg(lam2);
  lon = std::fmod(lon + 540.0, 360.0) - 180.0;
  return {rad2deg(phi2), lon};
}

inline LatLon geodesic_forward(const VehiclePose& pose, double distance_m) {
  return geodesic_forward(pose.position, pose.bearing, distance_m);
}

struct GeodesicInverse {
  double distance_m = 0.0;
  double bearing = 0.0;
};

/// Haversine distance; atan2 initial bearing, 0 for coincident points.
inline double great_circle_distance(LatLon a, LatLon b) {
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dphi = phi2 - phi1;
  const double dlam = deg2rad(b.lon - a.lon);
  const double h = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlam / 2) * std::sin(dlam / 2);
  return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(h), std::sqrt(std::max(0.0, 1.0 - h)));
}

inline double initial_bearing(LatLon a, LatLon b) {
  if (a == b) return 0.0;
  const double phi1 = deg2rad(a.lat);
  const double phi2 = deg2rad(b.lat);
  const double dlam = deg2rad(b.lon - a.lon);
  const double y = std::sin(dlam) * std::cos(phi2);
  const double x = std::cos(phi1) * std::sin(phi2) - std::sin(phi1) * std::cos(phi2) * std::cos(dlam);
  return wrap_0_360(rad2deg(std::atan2(y, x)));
}

inline GeodesicInverse geodesic_inverse(LatLon a, LatLon b) {
  return {great_circle_distance(a, b), initial_bearing(a, b)};
}

inline double polyline_length(std::span<const LatLon> pts) {
  double total = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) total += great_circle_distance(pts[i - 1], pts[i]);
  return total;
}

/// Signed smallest rotation from `from` to `to`, in (-180, 180].
inline double bearing_difference(double from, double to) {
  double d = std::fmod(to - from, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

}  // namespace canpath
