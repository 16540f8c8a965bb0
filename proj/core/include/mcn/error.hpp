// Copyright 2026 The mcn Authors.
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

#include <stdexcept>
#include <string>

namespace mcn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Invalid HeadConfig / BackboneConfig / DatasetConfig combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// backward() called on a graph that was already consumed.
class StaleTapeError : public Error {
 public:
  using Error::Error;
};

class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

// A function under evaluation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Weight file errors, one type per failure family.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

class TruncatedFileError : public Error {
 public:
  using Error::Error;
};

// Annotation file errors.
class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Training aborted on a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int step, std::string term)
      : Error(what), step_(step), term_(std::move(term)) {}
  int step() const { return step_; }
  const std::string& term() const { return term_; }

 private:
  int step_;
  std::string term_;
};

}  // namespace mcn
