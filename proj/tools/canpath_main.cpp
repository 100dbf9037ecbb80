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

// canpath: path reconstruction from steering-angle and OBD speed CAN logs.
//
//   canpath rewheel   <log>                         SWA candidate IDs
//   canpath decode    <log> --model|--decoder-file  angle/speed time series
//   canpath logfilter <log> --swa-id <hex>          keep SWA + OBD responses
//   canpath infer     <log> --start lat,lon,bearing ...
//   canpath compare   <inferred.gpx> <truth.gpx>
//   canpath synth     <scenario.json>
//   canpath tune      <manifest.json>
//
// Failures print one JSON line on stderr: {"error":"<kind>","message":"..."}.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "canpath/canpath.hpp"
#include "canpath/manifest.hpp"
#include "canpath/mapmatch_external.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace canpath;

namespace {

struct Vehicle {
  reveng::AngleDecoder decoder;
  VehicleSpec spec;
};

std::vector<CanFrame> read_frames(const std::string& path, bool permissive) {
  const auto mode = permissive ? LogReadMode::kPermissive : LogReadMode::kStrict;
  LogReadResult r;
  if (path == "-") {
    r = read_log(std::cin, mode);
  } else {
    std::ifstream in(path);
    if (!in) throw Error("io", "cannot open " + path);
    r = read_log(in, mode);
  }
  for (const auto& e : r.skipped) {
    std::cerr << "skipped line " << e.line << " (" << e.field << "): " << e.message << '\n';
  }
  return r.frames;
}

std::uint16_t parse_hex_id(const std::string& text) {
  std::string_view s = text;
  if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
  const auto v = canpath::detail::parse_hex_u32(s, "id");
  if (v > kMaxStandardId) throw UsageError("identifier " + text + " exceeds 11 bits");
  return static_cast<std::uint16_t>(v);
}

VehiclePose parse_start(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--start expects lat,lon,bearing; got '" + text + "'");
    }
  }
  if (v.size() != 3 || v[0] < -90 || v[0] > 90 || v[1] < -180 || v[1] > 180) {
    throw UsageError("--start expects lat,lon,bearing; got '" + text + "'");
  }
  return {{v[0], v[1]}, wrap_0_360(v[2])};
}

InferenceParams parse_params(const std::string& text) {
  InferenceParams p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--params entries look like key=value; got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--params value for " + key + " is not a number");
    }
    if (key == "t_window") p.t_window_s = value;
    else if (key == "speed_max") p.speed_max_kmh = value;
    else if (key == "steer_max") p.steer_max_deg = value;
    else if (key == "max_interpolation_points" && value >= 1) p.max_interpolation_points = static_cast<std::size_t>(value);
    else throw UsageError("unknown or invalid --params key '" + key + "'");
  }
  validate_params(p);
  return p;
}

struct MatcherSpec {
  std::string kind = "none";  // none | internal | external
  std::string target;
};

MatcherSpec parse_matcher_spec(const std::string& text) {
  MatcherSpec m;
  if (text.empty()) {
    if (const char* env = std::getenv(kMatcherUrlEnv); env != nullptr && *env != '\0') {
      return {"external", env};
    }
    return m;
  }
  if (text == "none") return m;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (colon == std::string::npos || (kind != "internal" && kind != "external") || colon + 1 == text.size()) {
    throw UsageError("--matcher expects internal:<graph>, external:<url> or none");
  }
  return {kind, text.substr(colon + 1)};
}

std::unique_ptr<Matcher> make_matcher(const MatcherSpec& spec, const MatcherConfig& config) {
  if (spec.kind == "internal") return std::make_unique<InternalMatcher>(manifest::load_graph(spec.target), config);
  if (spec.kind == "external") return std::make_unique<ExternalMatcher>(spec.target, config);
  return std::make_unique<PassthroughMatcher>();
}

Vehicle resolve_vehicle(const std::string& model, const std::string& decoder_file, std::optional<double> wheelbase) {
  std::optional<reveng::SheetEntry> entry;
  if (!decoder_file.empty()) {
    std::ifstream in(decoder_file);
    if (!in) throw Error("io", "cannot open " + decoder_file);
    const auto sheet = reveng::read_sheet(in);
    if (!model.empty()) {
      entry = reveng::lookup_model(sheet, model);
      if (!entry) throw UsageError("model '" + model + "' not found in " + decoder_file);
    } else if (sheet.size() == 1) {
      entry = sheet.front();
    } else {
      throw UsageError("decoder file lists several models; pick one with --model");
    }
  } else if (!model.empty()) {
    entry = reveng::lookup_known_swa(model);
    if (!entry) throw UsageError("unknown model '" + model + "'; supply --decoder-file and --wheelbase");
  } else {
    throw UsageError("a vehicle is required: --model or --decoder-file");
  }
  Vehicle v;
  v.decoder = entry->decoder;
  v.spec.model = entry->model;
  v.spec.wheelbase_m = wheelbase.value_or(entry->wheelbase_m);
  if (!(v.spec.wheelbase_m > 0.0)) throw UsageError("wheelbase unknown for '" + entry->model + "'; pass --wheelbase");
  return v;
}

std::string format_ts(Timestamp ts) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(ts.micros / 1000000),
                static_cast<long long>(ts.micros % 1000000));
  return buf;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::ofstream open_out(const fs::path& p) {
  ensure_parent(p);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + p.string());
  return out;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reconstruct driven paths from steering-angle and OBD speed CAN logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "canpath 0.1.0");

  // rewheel
  auto* rewheel = app.add_subcommand("rewheel", "Rank candidate steering-angle IDs by hamming-distance statistics");
  std::string rw_log;
  std::string rw_ceiling = "300";
  bool rw_all = false, rw_permissive = false;
  rewheel->add_option("log", rw_log, "candump log ('-' for stdin)")->required();
  rewheel->add_option("--ceiling", rw_ceiling, "keep IDs below this hex value")->capture_default_str();
  rewheel->add_flag("--all", rw_all, "report every ID, unranked");
  rewheel->add_flag("--permissive", rw_permissive, "skip malformed lines instead of failing");

  // decode
  auto* decode = app.add_subcommand("decode", "Decode steering angle and OBD speed into a CSV time series");
  std::string dc_log, dc_model, dc_sheet;
  bool dc_permissive = false;
  decode->add_option("log", dc_log, "candump log ('-' for stdin)")->required();
  decode->add_option("--model", dc_model, "vehicle model from the decoder sheet");
  decode->add_option("--decoder-file", dc_sheet, "decoder sheet file");
  decode->add_flag("--permissive", dc_permissive, "skip malformed lines instead of failing");

  // logfilter
  auto* logfilter = app.add_subcommand("logfilter", "Keep only SWA frames and OBD responses (7E8:7FF,<id>:7FF)");
  std::string lf_log, lf_id, lf_out = "-";
  logfilter->add_option("log", lf_log, "candump log ('-' for stdin)")->required();
  logfilter->add_option("--swa-id", lf_id, "steering-angle CAN ID (hex)")->required();
  logfilter->add_option("-o,--output", lf_out, "output log ('-' for stdout)");

  // infer
  auto* infer = app.add_subcommand("infer", "Infer the driven path as GPX");
  std::string in_log, in_start, in_model, in_sheet, in_params, in_matcher, in_out = "-", in_diag;
  std::optional<double> in_wheelbase;
  MatcherConfig in_cfg;
  infer->add_option("log", in_log, "candump log ('-' for stdin)")->required();
  infer->add_option("--start", in_start, "start pose lat,lon,bearing");
  infer->add_option("--model", in_model, "vehicle model from the decoder sheet");
  infer->add_option("--decoder-file", in_sheet, "decoder sheet file");
  infer->add_option("--wheelbase", in_wheelbase, "wheelbase in metres");
  infer->add_option("--params", in_params, "t_window=..,speed_max=..,steer_max=..,max_interpolation_points=..");
  infer->add_option("--matcher", in_matcher, "internal:<graph> | external:<url> | none");
  infer->add_option("--sigma", in_cfg.emission_sigma_m, "emission sigma (m)")->capture_default_str();
  infer->add_option("--beta", in_cfg.transition_beta_m, "transition beta (m)")->capture_default_str();
  infer->add_option("--radius", in_cfg.candidate_radius_m, "candidate search radius (m)")->capture_default_str();
  infer->add_option("-o,--output", in_out, "output GPX ('-' for stdout)");
  infer->add_option("--diagnostics", in_diag, "diagnostics report path (default: <output>.diag.txt or stderr)");

  // compare
  auto* compare = app.add_subcommand("compare", "Align two GPX tracks and print an accuracy row");
  std::string cp_a, cp_b, cp_id, cp_matcher;
  CompareOptions cp_opt;
  bool cp_no_header = false;
  compare->add_option("inferred", cp_a, "inferred GPX")->required();
  compare->add_option("truth", cp_b, "reference GPX")->required();
  compare->add_option("--epsilon", cp_opt.match_epsilon_m, "match distance (m)")->capture_default_str();
  compare->add_option("--spacing", cp_opt.spacing_m, "resampling spacing (m), 0 disables")->capture_default_str();
  compare->add_option("--matcher", cp_matcher, "map-match both tracks first: internal:<graph> | external:<url>");
  compare->add_option("--id", cp_id, "track id for the output row");
  compare->add_flag("--no-header", cp_no_header, "omit the CSV header");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Simulate a drive: write candump log, truth GPX and manifest");
  std::string sy_file;
  synth_cmd->add_option("scenario", sy_file, "scenario JSON")->required();

  // tune
  auto* tune = app.add_subcommand("tune", "Grid-search inference parameters");
  std::string tu_file, tu_out = "-", tu_marginals, tu_matcher;
  std::size_t tu_workers = std::max(1u, std::thread::hardware_concurrency());
  tune->add_option("manifest", tu_file, "tuning manifest JSON")->required();
  tune->add_option("--workers", tu_workers, "parallel evaluations")->capture_default_str();
  tune->add_option("-o,--output", tu_out, "grid CSV ('-' for stdout)");
  tune->add_option("--marginals", tu_marginals, "per-parameter marginal curves CSV");
  tune->add_option("--matcher", tu_matcher, "override: internal:<graph> | external:<url> | none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*rewheel) {
      const auto ceiling = parse_hex_id(rw_ceiling);
      const auto frames = read_frames(rw_log, rw_permissive);
      auto stats = reveng::compute_change_stats(frames);
      if (!rw_all) stats = reveng::rank_swa_candidates(std::move(stats), ceiling);
      reveng::write_candidate_report(std::cout, stats);
    } else if (*decode) {
      const Vehicle v = resolve_vehicle(dc_model, dc_sheet, std::nullopt);
      const auto frames = read_frames(dc_log, dc_permissive);
      std::cout << "timestamp,kind,value\n";
      char buf[64];
      for (const auto& f : frames) {
        if (f.id == v.decoder.id) {
          try {
            const auto s = reveng::decode_angle(v.decoder, f);
            std::snprintf(buf, sizeof buf, ",angle_deg,%.2f\n", s.angle_deg);
            std::cout << format_ts(f.timestamp) << buf;
          } catch (const DecodeError& e) {
            std::cerr << "undecodable frame at " << format_ts(f.timestamp) << ": " << e.what() << '\n';
          }
        } else if (const auto r = obd::decode_speed_response(f)) {
          std::cout << format_ts(f.timestamp) << ",speed_kmh," << static_cast<int>(r->speed_kmh) << '\n';
        }
      }
    } else if (*logfilter) {
      const auto id = parse_hex_id(lf_id);
      IdFilter filter{{{obd::kFirstResponseId, kMaxStandardId}, {id, kMaxStandardId}}};
      const auto frames = filter_frames(read_frames(lf_log, false), filter);
      if (lf_out == "-") {
        write_log(std::cout, frames);
      } else {
        auto out = open_out(lf_out);
        write_log(out, frames);
      }
    } else if (*infer) {
      if (in_start.empty()) throw UsageError("infer requires --start lat,lon,bearing");
      const VehiclePose start = parse_start(in_start);
      const InferenceParams params = parse_params(in_params);
      const MatcherSpec mspec = parse_matcher_spec(in_matcher);
      validate_config(in_cfg);
      if (in_wheelbase && !(*in_wheelbase > 0.0)) throw UsageError("--wheelbase must be positive");
      if (in_model.empty() && in_sheet.empty()) {
        throw UsageError("infer requires --model (known vehicle) or --decoder-file with --wheelbase");
      }
      const Vehicle v = resolve_vehicle(in_model, in_sheet, in_wheelbase);
      const auto matcher = make_matcher(mspec, in_cfg);
      const auto frames = read_frames(in_log, false);
      auto result = infer_path(frames, v.decoder, v.spec, start, params, *matcher);
      result.track.name = in_log == "-" ? "inferred" : fs::path(in_log).stem().string();
      if (in_out == "-") {
        write_gpx(std::cout, result.track);
      } else {
        auto out = open_out(in_out);
        write_gpx(out, result.track);
      }
      if (in_diag.empty() && in_out != "-") in_diag = in_out + ".diag.txt";
      if (in_diag.empty()) {
        write_diagnostics(std::cerr, result.diagnostics, matcher->name());
      } else {
        auto out = open_out(in_diag);
        write_diagnostics(out, result.diagnostics, matcher->name());
      }
    } else if (*compare) {
      if (!(cp_opt.match_epsilon_m > 0.0)) throw UsageError("--epsilon must be positive");
      const MatcherSpec mspec = parse_matcher_spec(cp_matcher.empty() ? "none" : cp_matcher);
      Track a = manifest::load_gpx(cp_a);
      Track b = manifest::load_gpx(cp_b);
      if (mspec.kind != "none") {
        const auto matcher = make_matcher(mspec, MatcherConfig{});
        tuning::EvaluationOptions opt;
        a = tuning::prepare_truth(a, *matcher, opt);
        b = tuning::prepare_truth(b, *matcher, opt);
      }
      const auto r = compare_tracks(a, b, cp_opt);
      if (!cp_no_header) std::cout << "id,length_km,accuracy\n";
      char buf[96];
      std::snprintf(buf, sizeof buf, ",%.3f,%.6f\n", b.length_m() / 1000.0, r.accuracy);
      std::cout << (cp_id.empty() ? fs::path(cp_a).stem().string() : cp_id) << buf;
    } else if (*synth_cmd) {
      const auto sf = manifest::load_scenario(sy_file);
      const auto out = synth::simulate(sf.scenario);
      const fs::path prefix = sf.output_prefix;
      const fs::path log_path = prefix.string() + ".log";
      const fs::path truth_path = prefix.string() + ".truth.gpx";
      const fs::path manifest_path = prefix.string() + ".manifest.json";
      {
        auto f = open_out(log_path);
        write_log(f, out.log);
      }
      {
        auto f = open_out(truth_path);
        write_gpx(f, out.truth);
      }
      manifest::TrackManifest m{log_path, truth_path, out.start, sf.vehicle, sf.graph_path};
      auto f = open_out(manifest_path);
      f << manifest::track_manifest_json(m, fs::absolute(manifest_path).parent_path()).dump(2) << '\n';
      std::cout << "log: " << log_path.string() << "\ntruth: " << truth_path.string()
                << "\nmanifest: " << manifest_path.string() << '\n';
      char buf[160];
      std::snprintf(buf, sizeof buf, "start: %.8f,%.8f,%.4f\nlength_m: %.1f\nframes: %zu\n", out.start.position.lat,
                    out.start.position.lon, out.start.bearing, out.length_m, out.log.size());
      std::cout << buf;
    } else if (*tune) {
      if (tu_workers == 0) throw UsageError("--workers must be at least 1");
      MatcherSpec mspec = parse_matcher_spec(tu_matcher.empty() ? "none" : tu_matcher);
      const auto m = manifest::load_tune_manifest(tu_file);
      if (tu_matcher.empty() && m.graph) mspec = {"internal", m.graph->string()};
      const auto matcher = make_matcher(mspec, MatcherConfig{});
      tuning::EvaluationOptions opt;
      opt.compare.match_epsilon_m = m.epsilon_m;
      opt.compare.spacing_m = m.spacing_m;
      const auto result = tuning::grid_search(m.tracks, m.grids, *matcher, tu_workers, opt);
      if (tu_out == "-") {
        tuning::write_grid_csv(std::cout, result.rows);
      } else {
        auto out = open_out(tu_out);
        tuning::write_grid_csv(out, result.rows);
      }
      if (!tu_marginals.empty()) {
        auto out = open_out(tu_marginals);
        tuning::write_marginals_csv(out, result.marginals);
      }
    }
  } catch (const UsageError& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
