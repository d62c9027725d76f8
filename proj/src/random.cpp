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

#include "cvi/random.hpp"

#include <algorithm>
#include <numeric>

#include "cvi/errors.hpp"

namespace cvi {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

Rng Rng::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  // splitmix64 finalizer; chaining it over the path gives a well-mixed seed
  // without the cost of seed_seq on every iteration.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = mix(seed);
  for (auto p : path) h = mix(h ^ mix(p));
  return Rng(h);
}

Rng Rng::derive(std::uint64_t seed, Stream stream, std::uint64_t index) {
  return derive(seed, {static_cast<std::uint64_t>(stream), index});
}

double Rng::normal() { return normal_(engine_); }

double Rng::uniform() { return uniform_(engine_); }

double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw DomainError("gamma draw needs shape, rate > 0");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(engine_);
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t count) {
  if (count > n) throw ShapeError("cannot sample more indices than available");
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> out;
  out.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(out), count, engine_);
  return out;
}

}  // namespace cvi
