// Copyright 2026 The cvi Authors
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

namespace cvi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failures: parameters outside their domain, solver breakdowns,
/// non-finite estimates. The CLI maps all of these to exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A natural parameter left Omega or a mean parameter left the interior of M.
class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonConvergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

class SingularSystemError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A Monte Carlo evaluator produced a non-finite value at `draw`.
class EstimationError : public NumericError {
 public:
  EstimationError(const std::string& what, double draw)
      : NumericError(what + " (draw z=" + std::to_string(draw) + ")"), draw_(draw) {}
  double draw() const noexcept { return draw_; }

 private:
  double draw_;
};

/// Wraps a numeric failure with the iteration at which it surfaced.
class IterationError : public NumericError {
 public:
  IterationError(int iteration, const std::string& what)
      : NumericError("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cvi
