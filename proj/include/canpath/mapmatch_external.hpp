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

// Client for a Valhalla-compatible `trace_attributes` endpoint.

#pragma once

#include <chrono>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canpath/error.hpp"
#include "canpath/geokin.hpp"
#include "canpath/mapmatch.hpp"
#include "httplib.h"
#include "json.hpp"

namespace canpath {

inline constexpr const char* kMatcherUrlEnv = "CANPATH_MATCHER_URL";

inline nlohmann::json build_external_request(std::span<const LatLon> points, const MatcherConfig& config) {
  if (points.empty()) throw UsageError("refusing to send an empty trace to the matching service");
  nlohmann::json shape = nlohmann::json::array();
  for (const auto& p : points) shape.push_back({{"lat", p.lat}, {"lon", p.lon}});
  return {
      {"shape", std::move(shape)},
      {"costing", "auto"},
      {"shape_match", "map_snap"},
      {"trace_options",
       {{"search_radius", config.candidate_radius_m}, {"gps_accuracy", config.emission_sigma_m}}},
      {"filters",
       {{"attributes", {"matched.point", "matched.type", "matched.edge_index"}}, {"action", "include"}}},
  };
}

/// Google encoded polyline with 1e-6 precision, as used by Valhalla.
inline std::vector<LatLon> decode_polyline6(std::string_view encoded) {
  std::vector<LatLon> out;
  std::int64_t lat = 0, lon = 0;
  std::size_t i = 0;
  const auto next = [&]() -> std::int64_t {
    std::int64_t result = 0;
    int shift = 0;
    while (true) {
      if (i >= encoded.size()) throw ParseError("shape", "truncated encoded polyline");
      const int b = static_cast<unsigned char>(encoded[i++]) - 63;
      if (b < 0 || b > 63 || shift > 60) throw ParseError("shape", "invalid encoded polyline");
      result |= static_cast<std::int64_t>(b & 0x1F) << shift;
      shift += 5;
      if (b < 0x20) break;
    }
    return (result & 1) ? ~(result >> 1) : (result >> 1);
  };
  while (i < encoded.size()) {
    lat += next();
    lon += next();
    out.push_back({static_cast<double>(lat) * 1e-6, static_cast<double>(lon) * 1e-6});
  }
  return out;
}

inline MatchResult parse_external_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("response", "matching response is not an object");
  const bool status_error = doc.contains("status") && doc["status"].is_string() && doc["status"] == "error";
  if (doc.contains("error_code") || doc.contains("error") || status_error) {
    int code = doc.value("error_code", doc.value("status_code", 0));
    std::string message = "matching service error";
    if (doc.contains("error") && doc["error"].is_string()) message = doc["error"].get<std::string>();
    else if (doc.contains("message") && doc["message"].is_string()) message = doc["message"].get<std::string>();
    throw ServiceError(code, message);
  }

  MatchResult r;
  try {
    if (doc.contains("matched_points")) {
      for (const auto& mp : doc.at("matched_points")) {
        if (mp.value("type", std::string("matched")) == "unmatched") continue;
        r.matched_points.push_back({mp.at("lat").get<double>(), mp.at("lon").get<double>()});
        r.edge_ids.push_back(mp.contains("edge_index") ? mp["edge_index"].get<std::int64_t>() : -1);
      }
    } else if (doc.contains("shape") && doc["shape"].is_string()) {
      r.matched_points = decode_polyline6(doc["shape"].get<std::string>());
    } else if (doc.contains("trip")) {
      for (const auto& leg : doc.at("trip").at("legs")) {
        const auto pts = decode_polyline6(leg.at("shape").get<std::string>());
        r.matched_points.insert(r.matched_points.end(), pts.begin(), pts.end());
      }
    } else {
      throw ParseError("response", "response carries neither matched_points nor shape");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("response", std::string("malformed matching response: ") + e.what());
  }
  if (r.edge_ids.size() != r.matched_points.size()) r.edge_ids.assign(r.matched_points.size(), -1);
  if (r.matched_points.empty()) throw UnmatchedGapError(0, "matching service returned no matched points");
  return r;
}

inline MatchResult parse_external_response(std::string_view body) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw ParseError("response", "matching response is not valid JSON");
  return parse_external_json(doc);
}

/// POSTs to `<url>/trace_attributes` (or to the URL as given when it already
/// carries a path). One short-lived connection per call, so concurrent use
/// from several threads is fine.
class ExternalMatcher final : public Matcher {
 public:
  explicit ExternalMatcher(std::string url, MatcherConfig config = {},
                           std::chrono::milliseconds timeout = std::chrono::seconds(30))
      : config_(config), timeout_(timeout) {
    validate_config(config_);
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw UsageError("matcher URL must include a scheme: " + url);
    const auto path = url.find('/', scheme + 3);
    base_ = url.substr(0, path);
    path_ = path == std::string::npos ? "" : url.substr(path);
    if (path_.empty() || path_ == "/") path_ = "/trace_attributes";
  }

  MatchResult match(std::span<const LatLon> points) const override {
    const std::string body = build_external_request(points, config_).dump();
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      throw TransportError("matching service " + base_ + " unreachable: " + httplib::to_string(res.error()));
    }
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) {
      if (res->status >= 400) throw ServiceError(res->status, "matching service HTTP " + std::to_string(res->status));
      throw ParseError("response", "matching response is not valid JSON");
    }
    if (res->status >= 400 && doc.is_object() && !doc.contains("error") && !doc.contains("error_code")) {
      throw ServiceError(res->status, "matching service HTTP " + std::to_string(res->status));
    }
    return parse_external_json(doc);
  }

  std::string name() const override { return "external"; }
  const std::string& base_url() const { return base_; }
  const std::string& path() const { return path_; }

 private:
  MatcherConfig config_;
  std::chrono::milliseconds timeout_;
  std::string base_;
  std::string path_;
};

}  // namespace canpath
