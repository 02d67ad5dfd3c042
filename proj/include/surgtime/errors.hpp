// Copyright 2026 The surgtime Authors
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

namespace surgtime {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An error tied to a line of an input file (1-based, header is line 1).
class LineError : public Error {
 public:
  LineError(const std::string& what, std::size_t line_no)
      : Error("line " + std::to_string(line_no) + ": " + what), line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class MalformedRow : public LineError {
 public:
  using LineError::LineError;
};

/// A value outside its admissible domain. line_no() is 0 when the value did
/// not come from a file.
class DomainViolation : public Error {
 public:
  explicit DomainViolation(const std::string& what, std::size_t line_no = 0)
      : Error(line_no == 0 ? what : "line " + std::to_string(line_no) + ": " + what),
        line_no_(line_no) {}

  std::size_t line_no() const noexcept { return line_no_; }

 private:
  std::size_t line_no_;
};

class DuplicateId : public LineError {
 public:
  using LineError::LineError;
};

class EmptyTrainingSet : public Error {
 public:
  EmptyTrainingSet() : Error("training set is empty") {}
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class WidthMismatch : public Error {
 public:
  WidthMismatch(std::size_t expected, std::size_t got)
      : Error("feature width mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class StratumTooSmall : public Error {
 public:
  StratumTooSmall(const std::string& procedure, std::size_t size, std::size_t k)
      : Error("procedure '" + procedure + "' has " + std::to_string(size) +
              " cases, fewer than k=" + std::to_string(k)),
        procedure_(procedure) {}

  const std::string& procedure() const noexcept { return procedure_; }

 private:
  std::string procedure_;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class DegenerateEnsemble : public Error {
 public:
  using Error::Error;
};

}  // namespace surgtime
