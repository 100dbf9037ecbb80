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

// Road graphs and drive scenarios shared by the unit tests and the
// acceptance runner. Geometry is laid out in metres east/north of a fixed
// origin and converted with a local flat-earth approximation.

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "canpath/canpath.hpp"

namespace canpath::testing {

inline constexpr LatLon kOrigin{48.8566, 2.3522};

inline LatLon at_m(double east, double north, LatLon origin = kOrigin) {
  const double k = deg2rad(1.0) * kEarthRadiusM;
  return {origin.lat + north / k, origin.lon + east / (k * std::cos(deg2rad(origin.lat)))};
}

struct GraphBuilder {
  std::vector<RoadNode> nodes;
  std::vector<RoadGraph::EdgeSpec> edges;

  GraphBuilder& node(NodeId id, double east, double north) {
    nodes.push_back({id, at_m(east, north)});
    return *this;
  }
  GraphBuilder& edge(EdgeId id, NodeId from, NodeId to, bool bidir = true,
                     std::vector<std::pair<double, double>> via = {}) {
    RoadGraph::EdgeSpec e{id, from, to, bidir, {}};
    for (auto [x, y] : via) e.intermediate.push_back(at_m(x, y));
    edges.push_back(std::move(e));
    return *this;
  }
  std::shared_ptr<const RoadGraph> build() const { return std::make_shared<const RoadGraph>(nodes, edges); }
};

/// 1: a single 1 km east-west road.
inline std::shared_ptr<const RoadGraph> straight_graph() {
  return GraphBuilder{}.node(1, 0, 0).node(2, 1000, 0).edge(10, 1, 2).build();
}

/// Stem north, splitting into a left and a right branch.
inline std::shared_ptr<const RoadGraph> y_junction_graph() {
  return GraphBuilder{}
      .node(1, 0, 0)
      .node(2, 0, 200)
      .node(3, -120, 360)
      .node(4, 120, 360)
      .edge(1, 1, 2)
      .edge(2, 2, 3)
      .edge(3, 2, 4)
      .build();
}

/// 3x3 lattice, 100 m spacing, one one-way street.
inline std::shared_ptr<const RoadGraph> grid3_graph() {
  GraphBuilder b;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) b.node(r * 3 + c + 1, c * 100.0, r * 100.0);
  }
  EdgeId id = 1;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 2; ++c) b.edge(id++, r * 3 + c + 1, r * 3 + c + 2, !(r == 1 && c == 0));
  }
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) b.edge(id++, r * 3 + c + 1, (r + 1) * 3 + c + 1);
  }
  return b.build();
}

/// Three one-way edges around a triangle plus a bidirectional shortcut.
inline std::shared_ptr<const RoadGraph> triangle_graph() {
  return GraphBuilder{}
      .node(1, 0, 0)
      .node(2, 150, 0)
      .node(3, 75, 130)
      .edge(1, 1, 2, false)
      .edge(2, 2, 3, false)
      .edge(3, 3, 1, false)
      .edge(4, 1, 3, true, {{30, 70}})
      .build();
}

/// A quarter-circle arc of radius 80 m approximated with 10 segments.
inline std::shared_ptr<const RoadGraph> arc_graph() {
  std::vector<std::pair<double, double>> via;
  for (int k = 1; k < 10; ++k) {
    const double a = deg2rad(9.0 * k);
    via.push_back({80.0 * std::sin(a), 80.0 - 80.0 * std::cos(a)});
  }
  return GraphBuilder{}.node(1, 0, 0).node(2, 80, 80).node(3, 80, 200).edge(1, 1, 2, true, via).edge(2, 2, 3).build();
}

/// Two roads close enough that points between them have candidates on both.
inline std::shared_ptr<const RoadGraph> parallel_graph() {
  return GraphBuilder{}
      .node(1, 0, 0)
      .node(2, 300, 0)
      .node(3, 0, 30)
      .node(4, 300, 30)
      .edge(1, 1, 2)
      .edge(2, 3, 4)
      .edge(3, 2, 4)
      .build();
}

// Town: a 5x5 block grid with 160 m spacing (node id = 100 + row*10 + col,
// edge ids 1000+), a roundabout ring off the east side and a winding road
// off the north side.
inline NodeId town_node(int row, int col) { return 100 + row * 10 + col; }
inline EdgeId town_h(int row, int col) { return 1000 + row * 10 + col; }  // (row,col)->(row,col+1)
inline EdgeId town_v(int row, int col) { return 2000 + row * 10 + col; }  // (row,col)->(row+1,col)

inline constexpr EdgeId kRingSpur = 3000;
inline constexpr EdgeId kRingArc = 3001;  // one-way loop from the ring entry node back to itself
inline constexpr EdgeId kRingExit = 3002;
inline constexpr EdgeId kWinding = 4000;

inline std::shared_ptr<const RoadGraph> town_graph() {
  constexpr double kBlock = 160.0;
  GraphBuilder b;
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) b.node(town_node(r, c), c * kBlock, r * kBlock);
  }
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 4; ++c) b.edge(town_h(r, c), town_node(r, c), town_node(r, c + 1));
  }
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 5; ++c) b.edge(town_v(r, c), town_node(r, c), town_node(r + 1, c));
  }
  // Roundabout: spur east from (2,4) to node 500, a counter-clockwise ring
  // of radius 30 m entered and left tangentially at 500, then an exit east.
  const double ex = 4 * kBlock + 120.0, ey = 2 * kBlock;
  b.node(500, ex, ey).node(501, ex + 220.0, ey);
  b.edge(kRingSpur, town_node(2, 4), 500);
  std::vector<std::pair<double, double>> ring;
  for (int k = 1; k < 36; ++k) {
    const double a = deg2rad(-90.0 + 10.0 * k);
    ring.push_back({ex + 30.0 * std::cos(a), ey + 30.0 + 30.0 * std::sin(a)});
  }
  b.edge(kRingArc, 500, 500, false, ring);
  b.edge(kRingExit, 500, 501);
  // Winding road: sinusoid north of (4,2).
  b.node(600, 2 * kBlock, 4 * kBlock + 600.0);
  std::vector<std::pair<double, double>> wiggle;
  for (int k = 1; k < 60; ++k) {
    const double y = k * 10.0;
    wiggle.push_back({2 * kBlock + 40.0 * std::sin(y / 95.0), 4 * kBlock + y});
  }
  b.edge(kWinding, town_node(4, 2), 600, true, wiggle);
  return b.build();
}

/// About 10 km of highway: long straights and two wide curves.
inline std::shared_ptr<const RoadGraph> highway_graph() {
  std::vector<std::pair<double, double>> via;
  double x = 0, y = 0, h = 90.0;  // bearing, degrees
  const auto advance = [&](double len, double turn_deg, int steps) {
    for (int i = 0; i < steps; ++i) {
      h += turn_deg / steps;
      x += len / steps * std::sin(deg2rad(h));
      y += len / steps * std::cos(deg2rad(h));
      via.push_back({x, y});
    }
  };
  advance(3000, 0, 6);
  advance(1500, -40, 30);
  advance(2500, 0, 5);
  advance(1500, 40, 30);
  advance(1500, 0, 3);
  const auto end = via.back();
  via.pop_back();
  return GraphBuilder{}.node(1, 0, 0).node(2, end.first, end.second).edge(1, 1, 2, true, via).build();
}

struct DriveCase {
  std::string id;
  std::shared_ptr<const RoadGraph> graph;
  std::vector<EdgeId> route;
  std::vector<synth::SpeedSegment> speed;
};

inline synth::SimScenario scenario_for(const DriveCase& c, double bearing_error_deg = 0.0) {
  synth::SimScenario sc;
  sc.graph = c.graph;
  sc.route = c.route;
  sc.speed_profile = c.speed;
  sc.decoder = reveng::shipped_sheet().front().decoder;
  sc.spec.wheelbase_m = reveng::shipped_sheet().front().wheelbase_m;
  sc.spec.model = reveng::shipped_sheet().front().model;
  sc.start_bearing_error_deg = bearing_error_deg;
  return sc;
}

/// Closed-loop suite: synthesised drives with varied turns and speeds.
inline std::vector<DriveCase> closed_loop_cases() {
  const auto town = town_graph();
  const auto hw = highway_graph();
  std::vector<DriveCase> v;
  v.push_back({"town-straight", town, {town_h(0, 0), town_h(0, 1), town_h(0, 2), town_h(0, 3)}, {{0, 40}}});
  v.push_back({"town-left", town, {town_h(0, 0), town_h(0, 1), town_v(0, 2), town_v(1, 2)}, {{0, 30}}});
  v.push_back({"town-right", town, {town_v(0, 0), town_v(1, 0), town_h(2, 0), town_h(2, 1)}, {{0, 30}}});
  v.push_back({"town-zigzag",
               town,
               {town_h(0, 0), town_v(0, 1), town_h(1, 1), town_v(1, 2), town_h(2, 2), town_v(2, 3)},
               {{0, 25}}});
  v.push_back({"town-block",
               town,
               {town_h(1, 1), town_h(1, 2), town_v(1, 3), town_h(2, 2), town_v(1, 2)},
               {{0, 30}}});
  v.push_back({"town-accel", town, {town_v(0, 4), town_v(1, 4), town_v(2, 4), town_v(3, 4)}, {{150, 20}, {400, 45}, {0, 30}}});
  v.push_back({"town-mixed",
               town,
               {town_h(3, 0), town_h(3, 1), town_v(2, 2), town_v(1, 2), town_h(1, 2), town_h(1, 3)},
               {{300, 35}, {0, 25}}});
  v.push_back({"roundabout", town, {town_h(2, 3), kRingSpur, kRingArc, kRingExit}, {{0, 25}}});
  v.push_back({"winding", town, {town_v(3, 2), kWinding}, {{0, 30}}});
  v.push_back({"highway", hw, {1}, {{0, 90}}});
  v.push_back({"highway-slow", hw, {1}, {{2000, 60}, {0, 80}}});
  return v;
}

}  // namespace canpath::testing
