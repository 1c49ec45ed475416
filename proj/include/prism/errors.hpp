/*
 * Copyright 2026 The PRISM Shape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace prism {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PRISM_DEFINE_ERROR(Name)   \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

PRISM_DEFINE_ERROR(DomainError);            // log(x<=0), division by zero
PRISM_DEFINE_ERROR(NonFiniteError);         // NaN/Inf network outputs
PRISM_DEFINE_ERROR(UnidentifiableError);    // I_mu below the identifiability floor
PRISM_DEFINE_ERROR(AllUnidentifiableError); // no point of a shape is identifiable
PRISM_DEFINE_ERROR(InsufficientDataError);
PRISM_DEFINE_ERROR(EmptyShapeError);
PRISM_DEFINE_ERROR(DegenerateError);        // zero-variance truth in r / R^2
PRISM_DEFINE_ERROR(ConfigError);
PRISM_DEFINE_ERROR(IoError);
PRISM_DEFINE_ERROR(FormatError);
PRISM_DEFINE_ERROR(SchemaError);

#undef PRISM_DEFINE_ERROR

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Checkpoint or dataset written by an incompatible format version.
class VersionError : public Error {
 public:
  VersionError(int found, int expected)
      : Error("format version mismatch: file has version " + std::to_string(found) +
              ", this build reads version " + std::to_string(expected)),
        found_(found),
        expected_(expected) {}
  int found() const noexcept { return found_; }
  int expected() const noexcept { return expected_; }

 private:
  int found_;
  int expected_;
};

}  // namespace prism
