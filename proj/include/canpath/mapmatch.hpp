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

// Road graph and the in-process HMM map matcher.
//
// Observation model (Newson & Krumm style):
//   emission   log w = -0.5 * (d_perp / sigma)^2
//   transition log w = -|d_great_circle(z_t, z_t+1) - d_route(x_t, x_t+1)| / beta
// and Viterbi picks the best candidate sequence. Ties go to the smaller edge id.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "canpath/error.hpp"
#include "canpath/geokin.hpp"

namespace canpath {

using NodeId = std::int64_t;
using EdgeId = std::int64_t;

inline constexpr double kInfDistance = std::numeric_limits<double>::infinity();

struct RoadNode {
  NodeId id = 0;
  LatLon position;
};

/// `geometry` runs from the `from` node to the `to` node, endpoints included.
struct RoadEdge {
  EdgeId id = 0;
  NodeId from = 0;
  NodeId to = 0;
  bool bidirectional = true;
  std::vector<LatLon> geometry;

  // Derived on graph construction.
  std::vector<double> cumulative_m;  // cumulative_m[i] = length up to geometry[i]
  double length_m = 0.0;
  std::size_t from_index = 0;
  std::size_t to_index = 0;
};

/// A point somewhere along an edge, measured from its `from` node.
struct EdgePosition {
  EdgeId edge = 0;
  double offset_m = 0.0;
};

/// Immutable after construction; safe to share between threads.
class RoadGraph {
 public:
  struct EdgeSpec {
    EdgeId id = 0;
    NodeId from = 0;
    NodeId to = 0;
    bool bidirectional = true;
    std::vector<LatLon> intermediate;
  };

  RoadGraph(std::vector<RoadNode> nodes, std::vector<EdgeSpec> edges) : cache_(std::make_unique<Cache>()) {
    std::sort(nodes.begin(), nodes.end(), [](const RoadNode& a, const RoadNode& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!node_index_.emplace(nodes[i].id, i).second) {
        throw GraphError("duplicate node id " + std::to_string(nodes[i].id));
      }
    }
    nodes_ = std::move(nodes);

    std::sort(edges.begin(), edges.end(), [](const EdgeSpec& a, const EdgeSpec& b) { return a.id < b.id; });
    edges_.reserve(edges.size());
    for (auto& spec : edges) {
      const auto f = node_index_.find(spec.from);
      const auto t = node_index_.find(spec.to);
      if (f == node_index_.end() || t == node_index_.end()) {
        throw GraphError("edge " + std::to_string(spec.id) + " references a missing node");
      }
      RoadEdge e;
      e.id = spec.id;
      e.from = spec.from;
      e.to = spec.to;
      e.bidirectional = spec.bidirectional;
      e.from_index = f->second;
      e.to_index = t->second;
      e.geometry.reserve(spec.intermediate.size() + 2);
      e.geometry.push_back(nodes_[f->second].position);
      e.geometry.insert(e.geometry.end(), spec.intermediate.begin(), spec.intermediate.end());
      e.geometry.push_back(nodes_[t->second].position);
      e.cumulative_m.resize(e.geometry.size(), 0.0);
      for (std::size_t i = 1; i < e.geometry.size(); ++i) {
        e.cumulative_m[i] = e.cumulative_m[i - 1] + great_circle_distance(e.geometry[i - 1], e.geometry[i]);
      }
      e.length_m = e.cumulative_m.back();
      if (!(e.length_m > 0.0)) throw GraphError("edge " + std::to_string(spec.id) + " has zero length");
      if (!edge_index_.emplace(e.id, edges_.size()).second) {
        throw GraphError("duplicate edge id " + std::to_string(e.id));
      }
      edges_.push_back(std::move(e));
    }

    adjacency_.resize(nodes_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const auto& e = edges_[i];
      adjacency_[e.from_index].push_back({e.to_index, e.length_m});
      if (e.bidirectional) adjacency_[e.to_index].push_back({e.from_index, e.length_m});
    }
    build_spatial_index();
    cache_->rows.resize(nodes_.size());
    cache_->once = std::make_unique<std::once_flag[]>(nodes_.size());
  }

  RoadGraph(RoadGraph&&) noexcept = default;
  RoadGraph& operator=(RoadGraph&&) noexcept = default;

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }

  const RoadEdge& edge(EdgeId id) const {
    const auto it = edge_index_.find(id);
    if (it == edge_index_.end()) throw GraphError("unknown edge id " + std::to_string(id));
    return edges_[it->second];
  }
  bool has_edge(EdgeId id) const { return edge_index_.count(id) != 0; }

  const RoadNode& node(NodeId id) const {
    const auto it = node_index_.find(id);
    if (it == node_index_.end()) throw GraphError("unknown node id " + std::to_string(id));
    return nodes_[it->second];
  }

  /// Shortest along-road distance between two nodes (dense indices).
  double node_distance(std::size_t from_index, std::size_t to_index) const {
    return distances_from(from_index)[to_index];
  }

  /// Point at `offset_m` along an edge, interpolated linearly in lat/lon
  /// inside the segment that contains it.
  LatLon point_at(const RoadEdge& e, double offset_m) const {
    offset_m = std::clamp(offset_m, 0.0, e.length_m);
    auto it = std::upper_bound(e.cumulative_m.begin(), e.cumulative_m.end(), offset_m);
    std::size_t seg = static_cast<std::size_t>(std::distance(e.cumulative_m.begin(), it));
    seg = std::clamp<std::size_t>(seg, 1, e.geometry.size() - 1) - 1;
    const double len = e.cumulative_m[seg + 1] - e.cumulative_m[seg];
    const double t = len > 0.0 ? (offset_m - e.cumulative_m[seg]) / len : 0.0;
    const LatLon a = e.geometry[seg];
    const LatLon b = e.geometry[seg + 1];
    return {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
  }

  /// Segment handles whose cells overlap the query box.
  template <typename Fn>
  void for_each_segment_near(LatLon p, double radius_m, Fn&& fn) const {
    const double dlat = rad2deg(radius_m / kEarthRadiusM);
    const double dlon = dlat / std::max(std::cos(deg2rad(p.lat)), 1e-6);
    const auto [x0, y0] = cell_of({p.lat - dlat, p.lon - dlon});
    const auto [x1, y1] = cell_of({p.lat + dlat, p.lon + dlon});
    std::unordered_set<std::uint64_t> seen;
    for (std::int64_t x = x0; x <= x1; ++x) {
      for (std::int64_t y = y0; y <= y1; ++y) {
        const auto it = grid_.find(cell_key(x, y));
        if (it == grid_.end()) continue;
        for (const auto& [edge_idx, seg] : it->second) {
          const std::uint64_t key = (static_cast<std::uint64_t>(edge_idx) << 32) | seg;
          if (seen.insert(key).second) fn(edges_[edge_idx], static_cast<std::size_t>(seg));
        }
      }
    }
  }

 private:
  static constexpr double kCellDeg = 0.001;

  struct Arc {
    std::size_t to;
    double weight;
  };
  struct Cache {
    std::vector<std::vector<double>> rows;
    std::unique_ptr<std::once_flag[]> once;
  };

  static std::pair<std::int64_t, std::int64_t> cell_of(LatLon p) {
    return {static_cast<std::int64_t>(std::floor(p.lat / kCellDeg)),
            static_cast<std::int64_t>(std::floor(p.lon / kCellDeg))};
  }
  static std::uint64_t cell_key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xFFFFFFFFull);
  }

  void build_spatial_index() {
    for (std::size_t ei = 0; ei < edges_.size(); ++ei) {
      const auto& g = edges_[ei].geometry;
      for (std::size_t s = 0; s + 1 < g.size(); ++s) {
        const auto [ax, ay] = cell_of({std::min(g[s].lat, g[s + 1].lat), std::min(g[s].lon, g[s + 1].lon)});
        const auto [bx, by] = cell_of({std::max(g[s].lat, g[s + 1].lat), std::max(g[s].lon, g[s + 1].lon)});
        for (std::int64_t x = ax; x <= bx; ++x) {
          for (std::int64_t y = ay; y <= by; ++y) {
            grid_[cell_key(x, y)].push_back({static_cast<std::uint32_t>(ei), static_cast<std::uint32_t>(s)});
          }
        }
      }
    }
  }

  const std::vector<double>& distances_from(std::size_t source) const {
    std::call_once(cache_->once[source], [&] {
      std::vector<double> dist(nodes_.size(), kInfDistance);
      using Item = std::pair<double, std::size_t>;
      std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
      dist[source] = 0.0;
      queue.push({0.0, source});
      while (!queue.empty()) {
        const auto [d, u] = queue.top();
        queue.pop();
        if (d > dist[u]) continue;
        for (const Arc& a : adjacency_[u]) {
          if (d + a.weight < dist[a.to]) {
            dist[a.to] = d + a.weight;
            queue.push({dist[a.to], a.to});
          }
        }
      }
      cache_->rows[source] = std::move(dist);
    });
    return cache_->rows[source];
  }

  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<EdgeId, std::size_t> edge_index_;
  std::vector<std::vector<Arc>> adjacency_;
  std::unordered_map<std::uint64_t, std::vector<std::pair<std::uint32_t, std::uint32_t>>> grid_;
  std::unique_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------
// Text format
//
//   # comment
//   node <id> <lat> <lon>
//   edge <id> <from> <to> <bidir 0|1> [<lat> <lon> ...]
// ---------------------------------------------------------------------------

inline RoadGraph read_road_graph(std::istream& in) {
  std::vector<RoadNode> nodes;
  std::vector<RoadGraph::EdgeSpec> edges;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    const auto fail = [&](const std::string& what) {
      return ParseError("graph", "graph line " + std::to_string(number) + ": " + what);
    };
    if (kind == "node") {
      RoadNode n;
      if (!(ls >> n.id >> n.position.lat >> n.position.lon)) throw fail("expected 'node <id> <lat> <lon>'");
      nodes.push_back(n);
    } else if (kind == "edge") {
      RoadGraph::EdgeSpec e;
      int bidir = 0;
      if (!(ls >> e.id >> e.from >> e.to >> bidir) || (bidir != 0 && bidir != 1)) {
        throw fail("expected 'edge <id> <from> <to> <0|1> [lat lon ...]'");
      }
      e.bidirectional = bidir == 1;
      double lat = 0.0;
      while (ls >> lat) {
        double lon = 0.0;
        if (!(ls >> lon)) throw fail("odd number of edge coordinates");
        e.intermediate.push_back({lat, lon});
      }
      if (!ls.eof()) throw fail("non-numeric edge coordinate");
      edges.push_back(std::move(e));
    } else {
      throw fail("unknown record '" + kind + "'");
    }
    std::string rest;
    if (kind == "node" && (ls >> rest)) throw fail("trailing tokens");
  }
  return RoadGraph(std::move(nodes), std::move(edges));
}

inline void write_road_graph(std::ostream& out, const RoadGraph& graph) {
  char buf[96];
  for (const auto& n : graph.nodes()) {
    std::snprintf(buf, sizeof buf, "node %lld %.9f %.9f\n", static_cast<long long>(n.id), n.position.lat,
                  n.position.lon);
    out << buf;
  }
  for (const auto& e : graph.edges()) {
    std::snprintf(buf, sizeof buf, "edge %lld %lld %lld %d", static_cast<long long>(e.id),
                  static_cast<long long>(e.from), static_cast<long long>(e.to), e.bidirectional ? 1 : 0);
    out << buf;
    for (std::size_t i = 1; i + 1 < e.geometry.size(); ++i) {
      std::snprintf(buf, sizeof buf, " %.9f %.9f", e.geometry[i].lat, e.geometry[i].lon);
      out << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Candidates and route distance
// ---------------------------------------------------------------------------

struct SegmentProjection {
  double t = 0.0;  // fraction along the segment, [0, 1]
  LatLon point;
  double distance_m = 0.0;
};

/// Perpendicular foot of `p` on segment a-b, computed in a local
/// equirectangular frame centred on `p` and mapped back by linear
/// interpolation, so the foot lies exactly on the segment.
inline SegmentProjection project_onto_segment(LatLon p, LatLon a, LatLon b) {
  const double k = std::cos(deg2rad(p.lat));
  const double ax = (a.lon - p.lon) * k, ay = a.lat - p.lat;
  const double bx = (b.lon - p.lon) * k, by = b.lat - p.lat;
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? -(ax * dx + ay * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  SegmentProjection out;
  out.t = t;
  out.point = {a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)};
  out.distance_m = great_circle_distance(p, out.point);
  return out;
}

struct Candidate {
  EdgeId edge = 0;
  LatLon point;
  double offset_m = 0.0;
  double distance_m = 0.0;
};

/// Closest projection per edge within `radius_m`, nearest first (ties by
/// edge id), at most `max_candidates`.
inline std::vector<Candidate> find_candidates(const RoadGraph& graph, LatLon p, double radius_m,
                                              std::size_t max_candidates) {
  std::map<EdgeId, Candidate> best;
  graph.for_each_segment_near(p, radius_m, [&](const RoadEdge& e, std::size_t seg) {
    const auto proj = project_onto_segment(p, e.geometry[seg], e.geometry[seg + 1]);
    if (proj.distance_m > radius_m) return;
    const double seg_len = e.cumulative_m[seg + 1] - e.cumulative_m[seg];
    Candidate c{e.id, proj.point, e.cumulative_m[seg] + proj.t * seg_len, proj.distance_m};
    auto [it, inserted] = best.emplace(e.id, c);
    if (!inserted && c.distance_m < it->second.distance_m) it->second = c;
  });
  std::vector<Candidate> out;
  out.reserve(best.size());
  for (auto& [id, c] : best) out.push_back(c);
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance_m != b.distance_m) return a.distance_m < b.distance_m;
    return a.edge < b.edge;
  });
  if (out.size() > max_candidates) out.resize(max_candidates);
  return out;
}

/// Shortest along-road distance between two on-edge positions, honouring
/// edge direction. Infinite when unreachable.
inline double route_distance(const RoadGraph& graph, EdgePosition from, EdgePosition to) {
  const RoadEdge& a = graph.edge(from.edge);
  const RoadEdge& b = graph.edge(to.edge);
  const double oa = std::clamp(from.offset_m, 0.0, a.length_m);
  const double ob = std::clamp(to.offset_m, 0.0, b.length_m);

  double best = kInfDistance;
  if (a.id == b.id) {
    if (ob >= oa) {
      best = ob - oa;
    } else if (a.bidirectional) {
      best = oa - ob;
    }
  }

  struct Port {
    std::size_t node;
    double cost;
  };
  Port exits[2] = {{a.to_index, a.length_m - oa}, {a.from_index, oa}};
  Port entries[2] = {{b.from_index, ob}, {b.to_index, b.length_m - ob}};
  const int n_exits = a.bidirectional ? 2 : 1;
  const int n_entries = b.bidirectional ? 2 : 1;
  for (int i = 0; i < n_exits; ++i) {
    for (int j = 0; j < n_entries; ++j) {
      const double via = graph.node_distance(exits[i].node, entries[j].node);
      best = std::min(best, exits[i].cost + via + entries[j].cost);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

struct MatcherConfig {
  double emission_sigma_m = 4.07;
  double transition_beta_m = 3.0;
  double candidate_radius_m = 50.0;
  std::size_t max_candidates = 10;
};

inline void validate_config(const MatcherConfig& c) {
  if (!(c.emission_sigma_m > 0.0) || !(c.transition_beta_m > 0.0) || !(c.candidate_radius_m > 0.0) ||
      c.max_candidates == 0) {
    throw UsageError("matcher parameters must all be positive");
  }
}

inline double emission_log_weight(double distance_m, const MatcherConfig& c) {
  const double z = distance_m / c.emission_sigma_m;
  return -0.5 * z * z;
}

inline double transition_log_weight(double great_circle_m, double route_m, const MatcherConfig& c) {
  if (!std::isfinite(route_m)) return -kInfDistance;
  return -std::abs(great_circle_m - route_m) / c.transition_beta_m;
}

struct MatchResult {
  std::vector<LatLon> matched_points;
  std::vector<EdgeId> edge_ids;  // -1 when the backend does not report edges
  double score = std::numeric_limits<double>::quiet_NaN();
  std::size_t chain_breaks = 0;  // places where no candidate pair was connected
};

/// Matching backend; implementations must tolerate concurrent `match` calls.
class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual MatchResult match(std::span<const LatLon> points) const = 0;
  virtual std::string name() const = 0;
};

inline MatchResult viterbi_match(const RoadGraph& graph, std::span<const LatLon> points,
                                 const MatcherConfig& config) {
  validate_config(config);
  if (points.empty()) throw UnmatchedGapError(0, "cannot match an empty trace");

  std::vector<std::vector<Candidate>> layers(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    layers[i] = find_candidates(graph, points[i], config.candidate_radius_m, config.max_candidates);
    if (layers[i].empty()) {
      throw UnmatchedGapError(i, "no road within " + std::to_string(config.candidate_radius_m) +
                                     " m of point " + std::to_string(i));
    }
    // Deterministic tie-breaking relies on edge-id order inside a layer.
    std::sort(layers[i].begin(), layers[i].end(),
              [](const Candidate& a, const Candidate& b) { return a.edge < b.edge; });
  }

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> score(points.size());
  std::vector<std::vector<int>> back(points.size());
  MatchResult result;

  score[0].resize(layers[0].size());
  back[0].assign(layers[0].size(), -1);
  for (std::size_t j = 0; j < layers[0].size(); ++j) score[0][j] = emission_log_weight(layers[0][j].distance_m, config);

  for (std::size_t t = 1; t < points.size(); ++t) {
    const auto& prev = layers[t - 1];
    const auto& cur = layers[t];
    const double observed = great_circle_distance(points[t - 1], points[t]);
    score[t].assign(cur.size(), kNegInf);
    back[t].assign(cur.size(), -1);
    bool any = false;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      double best = kNegInf;
      int arg = -1;
      for (std::size_t i = 0; i < prev.size(); ++i) {
        if (score[t - 1][i] == kNegInf) continue;
        const double route = route_distance(graph, {prev[i].edge, prev[i].offset_m}, {cur[j].edge, cur[j].offset_m});
        const double w = transition_log_weight(observed, route, config);
        if (w == kNegInf) continue;
        const double s = score[t - 1][i] + w;
        if (s > best) {  // strict: earlier (smaller edge id) wins ties
          best = s;
          arg = static_cast<int>(i);
        }
      }
      if (arg >= 0) {
        score[t][j] = best + emission_log_weight(cur[j].distance_m, config);
        back[t][j] = arg;
        any = true;
      }
    }
    if (!any) {
      // Disconnected candidates: close the chain so far and start afresh.
      ++result.chain_breaks;
      for (std::size_t j = 0; j < cur.size(); ++j) {
        score[t][j] = emission_log_weight(cur[j].distance_m, config);
        back[t][j] = -1;
      }
    }
  }

  // Backtrack, one chain at a time from the end.
  std::vector<int> choice(points.size(), -1);
  double total = 0.0;
  std::size_t t = points.size();
  while (t > 0) {
    const std::size_t last = t - 1;
    int arg = -1;
    double best = kNegInf;
    for (std::size_t j = 0; j < score[last].size(); ++j) {
      if (score[last][j] > best) {
        best = score[last][j];
        arg = static_cast<int>(j);
      }
    }
    total += best;
    std::size_t k = last;
    choice[k] = arg;
    while (back[k][static_cast<std::size_t>(choice[k])] >= 0) {
      choice[k - 1] = back[k][static_cast<std::size_t>(choice[k])];
      --k;
    }
    t = k;  // chain started at k; continue with the preceding chain
  }

  result.score = total;
  result.matched_points.reserve(points.size());
  result.edge_ids.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Candidate& c = layers[i][static_cast<std::size_t>(choice[i])];
    result.matched_points.push_back(c.point);
    result.edge_ids.push_back(c.edge);
  }
  return result;
}

class InternalMatcher final : public Matcher {
 public:
  InternalMatcher(std::shared_ptr<const RoadGraph> graph, MatcherConfig config = {})
      : graph_(std::move(graph)), config_(config) {
    if (!graph_) throw UsageError("internal matcher requires a road graph");
    validate_config(config_);
  }

  MatchResult match(std::span<const LatLon> points) const override {
    return viterbi_match(*graph_, points, config_);
  }
  std::string name() const override { return "internal"; }

  const RoadGraph& graph() const { return *graph_; }
  const MatcherConfig& config() const { return config_; }

 private:
  std::shared_ptr<const RoadGraph> graph_;
  MatcherConfig config_;
};

/// Echoes its input; turns inference into pure dead reckoning.
class PassthroughMatcher final : public Matcher {
 public:
  MatchResult match(std::span<const LatLon> points) const override {
    if (points.empty()) throw UnmatchedGapError(0, "cannot match an empty trace");
    MatchResult r;
    r.matched_points.assign(points.begin(), points.end());
    r.edge_ids.assign(points.size(), -1);
    r.score = 0.0;
    return r;
  }
  std::string name() const override { return "none"; }
};

}  // namespace canpath
