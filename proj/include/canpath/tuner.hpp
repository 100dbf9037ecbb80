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
#include <atomic>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "canpath/canlog.hpp"
#include "canpath/inference.hpp"
#include "canpath/mapmatch.hpp"
#include "canpath/reveng.hpp"
#include "canpath/trackeval.hpp"

namespace canpath::tuning {

struct TuningTrack {
  std::string id;
  std::vector<CanFrame> log;
  Track truth;
  VehiclePose start;
  reveng::AngleDecoder decoder;
  VehicleSpec spec;
};

struct ParamGrids {
  std::vector<double> t_window_s{0.05, 0.1, 0.5, 1.0};
  std::vector<double> speed_max_kmh{40, 50, 60, 70, 80};
  std::vector<double> steer_max_deg{30, 35, 40, 45, 50};
  std::vector<std::size_t> max_interpolation_points{10, 20, 30, 40, 50};

  std::size_t size() const {
    return t_window_s.size() * speed_max_kmh.size() * steer_max_deg.size() * max_interpolation_points.size();
  }

  /// Combination number `index` in row-major order (t_window slowest).
  InferenceParams at(std::size_t index) const {
    InferenceParams p;
    p.max_interpolation_points = max_interpolation_points[index % max_interpolation_points.size()];
    index /= max_interpolation_points.size();
    p.steer_max_deg = steer_max_deg[index % steer_max_deg.size()];
    index /= steer_max_deg.size();
    p.speed_max_kmh = speed_max_kmh[index % speed_max_kmh.size()];
    index /= speed_max_kmh.size();
    p.t_window_s = t_window_s[index];
    return p;
  }
};

struct EvaluationOptions {
  CompareOptions compare;
  bool match_truth = true;  // snap the ground truth with the same matcher first
};

struct GridRow {
  std::size_t index = 0;
  InferenceParams params;
  double mean_accuracy = 0.0;
  std::vector<double> per_track;
};

struct MarginalPoint {
  double value = 0.0;
  double mean_accuracy = 0.0;
};

/// Accuracy as one parameter varies with the other three held at the best row.
struct Marginals {
  std::vector<MarginalPoint> t_window_s;
  std::vector<MarginalPoint> speed_max_kmh;
  std::vector<MarginalPoint> steer_max_deg;
  std::vector<MarginalPoint> max_interpolation_points;
};

struct GridSearchResult {
  std::vector<GridRow> rows;  // best first
  Marginals marginals;
};

/// Truth as the evaluator sees it: map-matched when requested and possible.
inline Track prepare_truth(const Track& truth, const Matcher& matcher, const EvaluationOptions& opt) {
  if (!opt.match_truth || truth.points.empty()) return truth;
  try {
    Track t;
    t.name = truth.name;
    t.points = matcher.match(truth.points).matched_points;
    return t;
  } catch (const Error&) {
    return truth;
  }
}

/// Accuracy of one inference run against prepared truth; 0 when inference fails.
inline double evaluate(const TuningTrack& track, const Track& prepared_truth, const InferenceParams& params,
                       const Matcher& matcher, const EvaluationOptions& opt) {
  try {
    const auto result = infer_path(track.log, track.decoder, track.spec, track.start, params, matcher);
    return compare_tracks(result.track, prepared_truth, opt.compare).accuracy;
  } catch (const Error&) {
    return 0.0;
  }
}

inline GridSearchResult grid_search(std::span<const TuningTrack> tracks, const ParamGrids& grids,
                                    const Matcher& matcher, std::size_t workers = 1,
                                    const EvaluationOptions& opt = {}) {
  if (tracks.empty()) throw UsageError("grid search needs at least one track");
  if (grids.size() == 0) throw UsageError("every parameter grid needs at least one value");

  std::vector<Track> truths;
  truths.reserve(tracks.size());
  for (const auto& t : tracks) truths.push_back(prepare_truth(t.truth, matcher, opt));

  const std::size_t combos = grids.size();
  const std::size_t jobs = combos * tracks.size();
  std::vector<double> acc(jobs, 0.0);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      const std::size_t combo = j / tracks.size();
      const std::size_t track = j % tracks.size();
      acc[j] = evaluate(tracks[track], truths[track], grids.at(combo), matcher, opt);
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, jobs));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  std::vector<GridRow> by_index(combos);
  for (std::size_t c = 0; c < combos; ++c) {
    GridRow& row = by_index[c];
    row.index = c;
    row.params = grids.at(c);
    row.per_track.assign(acc.begin() + static_cast<std::ptrdiff_t>(c * tracks.size()),
                         acc.begin() + static_cast<std::ptrdiff_t>((c + 1) * tracks.size()));
    // Summed in track order so the mean does not depend on scheduling.
    row.mean_accuracy = std::accumulate(row.per_track.begin(), row.per_track.end(), 0.0) /
                        static_cast<double>(tracks.size());
  }

  GridSearchResult result;
  result.rows = by_index;
  std::stable_sort(result.rows.begin(), result.rows.end(), [](const GridRow& a, const GridRow& b) {
    if (a.mean_accuracy != b.mean_accuracy) return a.mean_accuracy > b.mean_accuracy;
    return a.index < b.index;
  });

  // Decompose the best index into per-axis positions, then sweep each axis.
  const std::size_t n_i = grids.max_interpolation_points.size();
  const std::size_t n_a = grids.steer_max_deg.size();
  const std::size_t n_s = grids.speed_max_kmh.size();
  const std::size_t best = result.rows.front().index;
  const std::size_t bi = best % n_i;
  const std::size_t ba = (best / n_i) % n_a;
  const std::size_t bs = (best / (n_i * n_a)) % n_s;
  const std::size_t bt = best / (n_i * n_a * n_s);
  const auto index_of = [&](std::size_t t, std::size_t s, std::size_t a, std::size_t i) {
    return ((t * n_s + s) * n_a + a) * n_i + i;
  };
  for (std::size_t t = 0; t < grids.t_window_s.size(); ++t) {
    result.marginals.t_window_s.push_back({grids.t_window_s[t], by_index[index_of(t, bs, ba, bi)].mean_accuracy});
  }
  for (std::size_t s = 0; s < n_s; ++s) {
    result.marginals.speed_max_kmh.push_back(
        {grids.speed_max_kmh[s], by_index[index_of(bt, s, ba, bi)].mean_accuracy});
  }
  for (std::size_t a = 0; a < n_a; ++a) {
    result.marginals.steer_max_deg.push_back(
        {grids.steer_max_deg[a], by_index[index_of(bt, bs, a, bi)].mean_accuracy});
  }
  for (std::size_t i = 0; i < n_i; ++i) {
    result.marginals.max_interpolation_points.push_back(
        {static_cast<double>(grids.max_interpolation_points[i]), by_index[index_of(bt, bs, ba, i)].mean_accuracy});
  }
  return result;
}

inline void write_grid_csv(std::ostream& out, std::span<const GridRow> rows) {
  out << "t_window,speed_max,steer_max,max_interpolation_points,mean_accuracy\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%g,%g,%zu,%.6f\n", r.params.t_window_s, r.params.speed_max_kmh,
                  r.params.steer_max_deg, r.params.max_interpolation_points, r.mean_accuracy);
    out << buf;
  }
}

inline void write_marginals_csv(std::ostream& out, const Marginals& m) {
  out << "parameter,value,mean_accuracy\n";
  char buf[96];
  const auto dump = [&](const char* name, const std::vector<MarginalPoint>& pts) {
    for (const auto& p : pts) {
      std::snprintf(buf, sizeof buf, "%s,%g,%.6f\n", name, p.value, p.mean_accuracy);
      out << buf;
    }
  };
  dump("t_window", m.t_window_s);
  dump("speed_max", m.speed_max_kmh);
  dump("steer_max", m.steer_max_deg);
  dump("max_interpolation_points", m.max_interpolation_points);
}

}  // namespace canpath::tuning
