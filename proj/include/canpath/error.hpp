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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace canpath {

/// Root of every exception thrown by the library. `kind()` is a short,
/// stable token suitable for machine-readable error lines.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed textual input. `field()` names the offending part
/// (e.g. "timestamp", "id", "data", "lat").
class ParseError : public Error {
 public:
  ParseError(std::string field, const std::string& what)
      : Error("parse", what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DecodeError : public Error {
 public:
  explicit DecodeError(const std::string& what) : Error("decode", what) {}
};

class EncodeError : public Error {
 public:
  explicit EncodeError(const std::string& what) : Error("encode", what) {}
};

/// No road candidate could be found for the observation at `index()`.
class UnmatchedGapError : public Error {
 public:
  UnmatchedGapError(std::size_t index, const std::string& what)
      : Error("unmatched_gap", what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error("transport", what) {}
};

/// The matching service answered, but with an error document.
class ServiceError : public Error {
 public:
  ServiceError(int code, const std::string& what)
      : Error("service", what), code_(code) {}

  int code() const noexcept { return code_; }

 private:
  int code_;
};

class GraphError : public Error {
 public:
  explicit GraphError(const std::string& what) : Error("graph", what) {}
};

class InferenceError : public Error {
 public:
  explicit InferenceError(const std::string& what) : Error("inference", what) {}
};

class ScenarioError : public Error {
 public:
  explicit ScenarioError(const std::string& what) : Error("scenario", what) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage", what) {}
};

}  // namespace canpath
