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

// Path inference from steering-angle frames and OBD speed responses.
//
// The log is cut into fixed windows anchored at the first frame. Per window
// the averaged speed and steering angle drive a bicycle-model heading update
// and a geodesic step; every `max_interpolation_points` windows the
// dead-reckoned points are snapped to the road network and the pose jumps to
// the last snapped point. The length lost or gained by snapping is carried
// into the next window's travel.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
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

namespace canpath {

struct InferenceParams {
  double t_window_s = 0.1;
  double speed_max_kmh = 50.0;
  double steer_max_deg = 35.0;
  std::size_t max_interpolation_points = 30;

  bool operator==(const InferenceParams&) const = default;
};

inline void validate_params(const InferenceParams& p) {
  if (!(p.t_window_s > 0.0) || !(p.speed_max_kmh > 0.0) || !(p.steer_max_deg > 0.0) ||
      p.max_interpolation_points == 0) {
    throw UsageError("inference parameters must all be positive");
  }
  if (p.steer_max_deg > 90.0) throw UsageError("steer_max must not exceed 90 degrees");
  if (std::llround(p.t_window_s * 1e6) < 1) throw UsageError("t_window below one microsecond");
}

struct WindowAggregate {
  double avg_angle_deg = 0.0;
  double avg_speed_mps = 0.0;
  std::size_t angle_samples = 0;
  std::size_t speed_samples = 0;
};

/// Means of decoded angles and OBD speeds inside one window. A category with
/// no samples keeps the previous window's value. Frames that are neither a
/// decodable SWA frame nor a speed response are ignored.
inline WindowAggregate window_aggregate(std::span<const CanFrame> frames, const reveng::AngleDecoder& decoder,
                                        const WindowAggregate& previous) {
  double angle_sum = 0.0, speed_sum = 0.0;
  std::size_t angles = 0, speeds = 0;
  for (const auto& f : frames) {
    if (f.id == decoder.id && f.data.size() > std::max(decoder.byte_hi, decoder.byte_lo)) {
      angle_sum += reveng::decode_angle(decoder, f).angle_deg;
      ++angles;
    } else if (const auto reading = obd::decode_speed_response(f)) {
      speed_sum += reading->speed_mps();
      ++speeds;
    }
  }
  WindowAggregate out;
  out.angle_samples = angles;
  out.speed_samples = speeds;
  out.avg_angle_deg = angles > 0 ? angle_sum / static_cast<double>(angles) : previous.avg_angle_deg;
  out.avg_speed_mps = speeds > 0 ? speed_sum / static_cast<double>(speeds) : previous.avg_speed_mps;
  return out;
}

inline double clamp_steer(double angle_deg, double steer_max_deg) {
  return std::clamp(angle_deg, -steer_max_deg, steer_max_deg);
}

/// Above `speed_max_kmh` the car is assumed to drive straight: its bearing is
/// replaced by the bearing of the previous window's displacement.
inline VehiclePose straighten_if_fast(VehiclePose pose, LatLon prev_window_start, double speed_mps,
                                      double speed_max_kmh) {
  if (speed_mps * 3.6 <= speed_max_kmh) return pose;
  if (prev_window_start == pose.position) return pose;
  pose.bearing = initial_bearing(prev_window_start, pose.position);
  return pose;
}

struct FallbackSpan {
  std::size_t batch = 0;
  std::size_t first_window = 0;
  std::size_t last_window = 0;
  std::string reason;
};

struct InferenceDiagnostics {
  std::size_t windows = 0;
  std::size_t swa_frames = 0;
  std::size_t speed_frames = 0;
  std::size_t batches_matched = 0;
  std::size_t raw_points = 0;      // dead-reckoned points emitted without matching
  std::size_t matched_points = 0;  // points returned by the matcher
  double travelled_m = 0.0;        // sum of speed * t_window
  double carry_applied_m = 0.0;    // carry folded into a window's travel
  double carry_total_m = 0.0;      // every carry computed, including the unused last one
  std::vector<FallbackSpan> fallbacks;
};

inline void write_diagnostics(std::ostream& out, const InferenceDiagnostics& d, const std::string& matcher) {
  char buf[128];
  out << "matcher: " << matcher << '\n'
      << "windows: " << d.windows << '\n'
      << "swa_frames: " << d.swa_frames << '\n'
      << "speed_frames: " << d.speed_frames << '\n'
      << "batches_matched: " << d.batches_matched << '\n'
      << "batches_fallback: " << d.fallbacks.size() << '\n'
      << "matched_points: " << d.matched_points << '\n'
      << "raw_points: " << d.raw_points << '\n';
  std::snprintf(buf, sizeof buf, "travelled_m: %.3f\ncarry_applied_m: %.3f\ncarry_total_m: %.3f\n", d.travelled_m,
                d.carry_applied_m, d.carry_total_m);
  out << buf;
  for (const auto& f : d.fallbacks) {
    out << "fallback: batch=" << f.batch << " windows=" << f.first_window << '-' << f.last_window
        << " reason=\"" << f.reason << "\"\n";
  }
}

struct InferenceResult {
  Track track;
  InferenceDiagnostics diagnostics;
};

/// Sequential state of one inference run. Feed windows in order with
/// `step`, then call `finish` once.
class PathInference {
 public:
  PathInference(const VehicleSpec& spec, const VehiclePose& start, const InferenceParams& params,
                const Matcher& matcher, Timestamp t0 = {})
      : spec_(spec), params_(params), matcher_(matcher), pose_(start), prev_window_start_(start.position), t0_(t0) {
    validate_params(params_);
    if (!(spec_.wheelbase_m > 0.0)) throw UsageError("wheelbase must be positive");
    pose_.bearing = wrap_0_360(pose_.bearing);
    track_.points.push_back(start.position);
    track_.times.push_back(t0_);
  }

  void step(const WindowAggregate& agg) {
    const double tw = params_.t_window_s;
    const double travel = agg.avg_speed_mps * tw;
    double distance = travel;
    diag_.travelled_m += travel;
    if (carry_m_ > 0.0) {
      distance += carry_m_;
      diag_.carry_applied_m += carry_m_;
      carry_m_ = 0.0;
    }

    const double angle = clamp_steer(agg.avg_angle_deg, params_.steer_max_deg);
    const double omega = angular_speed(agg.avg_speed_mps, angle, spec_.wheelbase_m);
    pose_ = apply_heading(pose_, heading_delta(omega, tw));
    pose_ = straighten_if_fast(pose_, prev_window_start_, agg.avg_speed_mps, params_.speed_max_kmh);
    pose_.bearing = wrap_0_360(pose_.bearing);

    prev_window_start_ = pose_.position;
    pose_.position = geodesic_forward(pose_, distance);
    pending_.push_back(pose_.position);
    ++diag_.windows;
    if (pending_.size() >= params_.max_interpolation_points) flush();
  }

  InferenceResult finish() {
    if (!pending_.empty()) flush();
    InferenceResult r;
    if (track_.times.size() != track_.points.size()) track_.times.clear();
    r.track = std::move(track_);
    r.diagnostics = std::move(diag_);
    return r;
  }

  const VehiclePose& pose() const { return pose_; }
  double carry_m() const { return carry_m_; }
  std::size_t pending_count() const { return pending_.size(); }

 private:
  void flush() {
    const std::size_t last_window = diag_.windows - 1;
    const std::size_t first_window = last_window + 1 - pending_.size();
    try {
      MatchResult r = matcher_.match(pending_);
      const double matched_len = polyline_length(r.matched_points);
      const double pending_len = polyline_length(pending_);
      carry_m_ = std::abs(matched_len - pending_len);
      diag_.carry_total_m += carry_m_;
      ++diag_.batches_matched;
      diag_.matched_points += r.matched_points.size();
      append(r.matched_points, first_window);
      pose_.position = r.matched_points.back();
      prev_window_start_ =
          r.matched_points.size() >= 2 ? r.matched_points[r.matched_points.size() - 2] : pose_.position;
    } catch (const UnmatchedGapError& e) {
      fallback(first_window, last_window, e.what());
    } catch (const TransportError& e) {
      fallback(first_window, last_window, e.what());
    } catch (const ServiceError& e) {
      fallback(first_window, last_window, e.what());
    } catch (const ParseError& e) {
      fallback(first_window, last_window, e.what());
    }
    pending_.clear();
    ++batch_;
  }

  void fallback(std::size_t first_window, std::size_t last_window, const std::string& reason) {
    diag_.fallbacks.push_back({batch_, first_window, last_window, reason});
    diag_.raw_points += pending_.size();
    append(pending_, first_window);
  }

  void append(std::span<const LatLon> pts, std::size_t first_window) {
    track_.points.insert(track_.points.end(), pts.begin(), pts.end());
    if (pts.size() == pending_.size()) {
      const auto tw_us = std::llround(params_.t_window_s * 1e6);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        track_.times.push_back(Timestamp{t0_.micros + static_cast<std::int64_t>(first_window + i + 1) * tw_us});
      }
    }
  }

  VehicleSpec spec_;
  InferenceParams params_;
  const Matcher& matcher_;
  VehiclePose pose_;
  LatLon prev_window_start_;
  Timestamp t0_;
  double carry_m_ = 0.0;
  std::vector<LatLon> pending_;
  std::size_t batch_ = 0;
  Track track_;
  InferenceDiagnostics diag_;
};

/// Runs the whole pipeline over a log. The first track point is the start
/// position; the rest come from the matcher (or the raw dead-reckoned points
/// for batches it could not match).
inline InferenceResult infer_path(std::span<const CanFrame> log, const reveng::AngleDecoder& decoder,
                                  const VehicleSpec& spec, const VehiclePose& start, const InferenceParams& params,
                                  const Matcher& matcher) {
  validate_params(params);
  if (log.empty()) throw InferenceError("empty log");
  std::vector<CanFrame> frames(log.begin(), log.end());
  std::stable_sort(frames.begin(), frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });

  std::size_t swa = 0, speeds = 0;
  for (const auto& f : frames) {
    if (f.id == decoder.id && f.data.size() > std::max(decoder.byte_hi, decoder.byte_lo)) ++swa;
    else if (obd::decode_speed_response(f)) ++speeds;
  }
  if (swa == 0) throw InferenceError("log has no decodable steering-angle frame for the decoder id");

  const Timestamp t0 = frames.front().timestamp;
  const std::int64_t tw_us = std::llround(params.t_window_s * 1e6);
  PathInference run(spec, start, params, matcher, t0);

  WindowAggregate prev;
  std::size_t begin = 0;
  const std::int64_t last_window = (frames.back().timestamp.micros - t0.micros) / tw_us;
  for (std::int64_t k = 0; k <= last_window; ++k) {
    const std::int64_t window_end = t0.micros + (k + 1) * tw_us;
    std::size_t end = begin;
    while (end < frames.size() && frames[end].timestamp.micros < window_end) ++end;
    prev = window_aggregate(std::span<const CanFrame>(frames).subspan(begin, end - begin), decoder, prev);
    run.step(prev);
    begin = end;
  }
  InferenceResult result = run.finish();
  result.diagnostics.swa_frames = swa;
  result.diagnostics.speed_frames = speeds;
  return result;
}

}  // namespace canpath
