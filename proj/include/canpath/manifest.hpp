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

// JSON documents shared by the CLI: scenario files (input of `synth`),
// track manifests (written by `synth`) and tuning manifests (input of `tune`).
// Relative paths inside a document resolve against the document's directory.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <tuple>
#include <string>
#include <vector>

#include "canpath/canlog.hpp"
#include "canpath/error.hpp"
#include "canpath/mapmatch.hpp"
#include "canpath/reveng.hpp"
#include "canpath/synthgen.hpp"
#include "canpath/trackeval.hpp"
#include "canpath/tuner.hpp"
#include "json.hpp"

namespace canpath::manifest {

namespace fs = std::filesystem;
using nlohmann::json;

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ParseError("json", path.string() + " is not valid JSON");
  return doc;
}

inline fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

inline std::shared_ptr<const RoadGraph> load_graph(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open graph " + path.string());
  return std::make_shared<const RoadGraph>(read_road_graph(in));
}

inline std::vector<CanFrame> load_log(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open log " + path.string());
  return read_log(in).frames;
}

inline Track load_gpx(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  return read_gpx(in);
}

inline json decoder_to_json(const reveng::AngleDecoder& d) {
  char id[8], off[8];
  std::snprintf(id, sizeof id, "%03X", static_cast<unsigned>(d.id));
  std::snprintf(off, sizeof off, "%04X", static_cast<unsigned>(d.offset));
  return {{"id", id},
          {"byte_hi", d.byte_hi},
          {"byte_lo", d.byte_lo},
          {"offset", off},
          {"scale", d.scale},
          {"mode", d.mode == reveng::AngleMode::kOffset ? "offset" : "twos"}};
}

inline reveng::AngleDecoder decoder_from_json(const json& j) {
  reveng::AngleDecoder d;
  try {
    d.id = static_cast<std::uint16_t>(canpath::detail::parse_hex_u32(j.at("id").get<std::string>(), "id"));
    d.byte_hi = j.value("byte_hi", std::size_t{0});
    d.byte_lo = j.value("byte_lo", std::size_t{1});
    d.offset = static_cast<std::uint16_t>(
        canpath::detail::parse_hex_u32(j.value("offset", std::string("7FFF")), "offset"));
    d.scale = j.value("scale", 0.01);
    const std::string mode = j.value("mode", std::string("offset"));
    if (mode != "offset" && mode != "twos") throw ParseError("decoder", "decoder mode must be offset or twos");
    d.mode = mode == "offset" ? reveng::AngleMode::kOffset : reveng::AngleMode::kTwosComplement;
  } catch (const json::exception& e) {
    throw ParseError("decoder", std::string("bad decoder object: ") + e.what());
  }
  reveng::validate_decoder(d);
  return d;
}

/// Decoder and vehicle from either a "model" name (shipped sheet) or an
/// explicit "decoder" object; "wheelbase" overrides the sheet value.
inline std::pair<reveng::AngleDecoder, VehicleSpec> vehicle_from_json(const json& j) {
  reveng::AngleDecoder decoder;
  VehicleSpec spec;
  spec.model = j.value("model", std::string());
  bool have_wheelbase = false;
  if (j.contains("decoder")) {
    decoder = decoder_from_json(j["decoder"]);
  } else if (!spec.model.empty()) {
    const auto entry = reveng::lookup_known_swa(spec.model);
    if (!entry) throw UsageError("unknown vehicle model '" + spec.model + "'");
    decoder = entry->decoder;
    spec.wheelbase_m = entry->wheelbase_m;
    have_wheelbase = entry->wheelbase_m > 0.0;
  } else {
    throw UsageError("vehicle needs a 'model' or a 'decoder'");
  }
  if (j.contains("wheelbase")) {
    spec.wheelbase_m = j["wheelbase"].get<double>();
    have_wheelbase = true;
  }
  if (!have_wheelbase || !(spec.wheelbase_m > 0.0)) throw UsageError("vehicle wheelbase unknown; set 'wheelbase'");
  return {decoder, spec};
}

struct ScenarioFile {
  synth::SimScenario scenario;
  fs::path graph_path;
  fs::path output_prefix;
  json vehicle;  // echoed into the track manifest
};

/// {
///   "graph": "town.graph", "route": [1, 2, 3],
///   "speed_kmh": 36 | "speed_profile": [[until_m, kmh], ...],
///   "model": "Renault Captur" | "decoder": {...}, "wheelbase": 2.6,
///   "swa_rate_hz": 100, "obd_rate_hz": 10, "truth_rate_hz": 1,
///   "start_bearing_error_deg": 0, "corner_radius_m": 12,
///   "start_time": 1700000000.0, "output": "out/run1"
/// }
inline ScenarioFile load_scenario(const fs::path& path) {
  const json j = read_json(path);
  const fs::path dir = path.parent_path();
  ScenarioFile f;
  try {
    f.graph_path = resolve(dir, j.at("graph").get<std::string>());
    f.scenario.graph = load_graph(f.graph_path);
    f.scenario.route = j.at("route").get<std::vector<EdgeId>>();
    if (j.contains("speed_profile")) {
      for (const auto& seg : j["speed_profile"]) {
        f.scenario.speed_profile.push_back({seg.at(0).get<double>(), seg.at(1).get<double>()});
      }
    } else {
      f.scenario.speed_profile.push_back({0.0, j.at("speed_kmh").get<double>()});
    }
    auto [decoder, spec] = vehicle_from_json(j);
    f.scenario.decoder = decoder;
    f.scenario.spec = spec;
    f.vehicle = json::object();
    if (j.contains("model")) f.vehicle["model"] = j["model"];
    f.vehicle["decoder"] = decoder_to_json(decoder);
    f.vehicle["wheelbase"] = spec.wheelbase_m;
    f.scenario.swa_rate_hz = j.value("swa_rate_hz", f.scenario.swa_rate_hz);
    f.scenario.obd_rate_hz = j.value("obd_rate_hz", f.scenario.obd_rate_hz);
    f.scenario.truth_rate_hz = j.value("truth_rate_hz", f.scenario.truth_rate_hz);
    f.scenario.start_bearing_error_deg = j.value("start_bearing_error_deg", 0.0);
    f.scenario.corner_radius_m = j.value("corner_radius_m", f.scenario.corner_radius_m);
    if (j.contains("start_time")) f.scenario.start_time = Timestamp::from_seconds(j["start_time"].get<double>());
    const std::string out = j.value("output", path.stem().string());
    f.output_prefix = resolve(dir, out);
  } catch (const json::exception& e) {
    throw ParseError("scenario", path.string() + ": " + e.what());
  }
  return f;
}

struct TrackManifest {
  fs::path log;
  fs::path truth;
  VehiclePose start;
  json vehicle;
  std::optional<fs::path> graph;
};

inline json track_manifest_json(const TrackManifest& m, const fs::path& relative_to) {
  const auto rel = [&](const fs::path& p) { return fs::relative(p, relative_to).generic_string(); };
  json j = m.vehicle;
  j["log"] = rel(m.log);
  j["truth"] = rel(m.truth);
  j["start"] = {m.start.position.lat, m.start.position.lon, m.start.bearing};
  if (m.graph) j["graph"] = rel(*m.graph);
  return j;
}

inline tuning::TuningTrack track_from_json(const json& j, const fs::path& dir) {
  tuning::TuningTrack t;
  try {
    const fs::path log = resolve(dir, j.at("log").get<std::string>());
    t.id = j.value("id", log.stem().string());
    t.log = load_log(log);
    t.truth = load_gpx(resolve(dir, j.at("truth").get<std::string>()));
    const auto start = j.at("start").get<std::vector<double>>();
    if (start.size() != 3) throw ParseError("start", "start must be [lat, lon, bearing]");
    t.start.position = {start[0], start[1]};
    t.start.bearing = wrap_0_360(start[2]);
  } catch (const json::exception& e) {
    throw ParseError("manifest", std::string("bad track entry: ") + e.what());
  }
  std::tie(t.decoder, t.spec) = vehicle_from_json(j);
  return t;
}

struct TuneManifest {
  std::vector<tuning::TuningTrack> tracks;
  tuning::ParamGrids grids;
  std::optional<fs::path> graph;
  double epsilon_m = 10.0;
  double spacing_m = 5.0;
};

/// {
///   "graph": "town.graph",
///   "tracks": [ {track manifest fields} | "path/to/x.manifest.json", ... ],
///   "grids": {"t_window": [...], "speed_max": [...], "steer_max": [...],
///             "max_interpolation_points": [...]},
///   "epsilon_m": 10, "spacing_m": 5
/// }
inline TuneManifest load_tune_manifest(const fs::path& path) {
  const json j = read_json(path);
  const fs::path dir = path.parent_path();
  TuneManifest m;
  try {
    if (j.contains("graph")) m.graph = resolve(dir, j["graph"].get<std::string>());
    for (const auto& entry : j.at("tracks")) {
      if (entry.is_string()) {
        const fs::path sub = resolve(dir, entry.get<std::string>());
        const json sj = read_json(sub);
        m.tracks.push_back(track_from_json(sj, sub.parent_path()));
        if (!m.graph && sj.contains("graph")) m.graph = resolve(sub.parent_path(), sj["graph"].get<std::string>());
      } else {
        m.tracks.push_back(track_from_json(entry, dir));
      }
    }
    if (j.contains("grids")) {
      const auto& g = j["grids"];
      if (g.contains("t_window")) m.grids.t_window_s = g["t_window"].get<std::vector<double>>();
      if (g.contains("speed_max")) m.grids.speed_max_kmh = g["speed_max"].get<std::vector<double>>();
      if (g.contains("steer_max")) m.grids.steer_max_deg = g["steer_max"].get<std::vector<double>>();
      if (g.contains("max_interpolation_points")) {
        m.grids.max_interpolation_points = g["max_interpolation_points"].get<std::vector<std::size_t>>();
      }
    }
    m.epsilon_m = j.value("epsilon_m", m.epsilon_m);
    m.spacing_m = j.value("spacing_m", m.spacing_m);
  } catch (const json::exception& e) {
    throw ParseError("manifest", path.string() + ": " + e.what());
  }
  if (m.tracks.empty()) throw UsageError("tune manifest lists no tracks");
  return m;
}

}  // namespace canpath::manifest
