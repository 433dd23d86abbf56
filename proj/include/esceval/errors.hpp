// Copyright 2026 The esceval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESCEVAL_ERRORS_HPP
#define ESCEVAL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace esceval {

// Malformed or out-of-contract input data (bad corpus file, unknown
// strategy string, inconsistent record file).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A documented precondition was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what)
      : std::logic_error(what) {}
};

// Bad run configuration (missing planner predictions, pool too small, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Input on which the requested quantity is mathematically undefined
// (all-zero supports, constant vector for a correlation, ...).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Chat endpoint failures, split by kind so callers can react differently.
class EndpointError : public std::runtime_error {
 public:
  enum class Kind { kAuth, kExhausted, kMalformedResponse };
  EndpointError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace esceval

#endif  // ESCEVAL_ERRORS_HPP
