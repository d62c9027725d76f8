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

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace cvi {

/// Named sub-streams. Every random draw in a run is derived from the config
/// seed plus one of these tags, so no two consumers share state.
enum class Stream : std::uint64_t {
  kDataShuffle = 1,
  kMonteCarlo = 2,
  kMinibatch = 3,
  kEvaluation = 4,
  kInit = 5,
};

/// Explicitly passed random stream. Copyable; a copy replays the same draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Deterministically derives an independent stream from `seed` and a path
  /// of integers (stream tag, iteration, ...).
  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  static Rng derive(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

  double normal();
  double uniform();
  /// Draw from Gamma with the given shape and rate.
  double gamma(double shape, double rate);

  /// `count` distinct indices from [0, n), returned in increasing order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace cvi
