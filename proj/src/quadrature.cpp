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

#include "cvi/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "cvi/errors.hpp"
#include "cvi/special.hpp"

namespace cvi::quad {

namespace {

constexpr int kHermiteNodes = 64;
constexpr double kWideSd = 10.0;

Rule build_hermite(int n) {
  // Newton iteration on H_n with the classic asymptotic starting guesses.
  Rule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * r.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * r.nodes[1];
    } else {
      z = 2.0 * z - r.nodes[i - 2];
    }
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = 2.0 / (pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  return r;
}

void trapezoid_normal(const std::function<void(double, double*)>& f, int count, double m,
                      double sd, std::vector<double>& acc) {
  const double half_width = 12.0;
  const double step = std::min(0.02, 0.25 / sd);
  const int n = static_cast<int>(std::ceil(2.0 * half_width / step));
  const double h = 2.0 * half_width / n;
  std::vector<double> buf(count);
  double wsum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double e = -half_width + k * h;
    const double w = std::exp(-0.5 * e * e);
    f(m + sd * e, buf.data());
    for (int c = 0; c < count; ++c) acc[c] += w * buf[c];
    wsum += w;
  }
  for (auto& a : acc) a /= wsum;
}

}  // namespace

const Rule& gauss_hermite(int n) {
  static std::mutex mu;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_hermite(n)).first;
  return it->second;
}

std::vector<double> normal_expectations(const std::function<void(double, double*)>& f, int count,
                                        double m, double v) {
  if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(m)) {
    throw DomainError("normal expectation needs finite mean and positive variance");
  }
  std::vector<double> acc(count, 0.0);
  const double sd = std::sqrt(v);
  if (sd > kWideSd) {
    trapezoid_normal(f, count, m, sd, acc);
    return acc;
  }
  const Rule& rule = gauss_hermite(kHermiteNodes);
  std::vector<double> buf(count);
  const double scale = special::kSqrt2 * sd;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    f(m + scale * rule.nodes[k], buf.data());
    for (int c = 0; c < count; ++c) acc[c] += rule.weights[k] * buf[c];
  }
  const double norm = 1.0 / std::sqrt(special::kPi);
  for (auto& a : acc) a *= norm;
  return acc;
}

double normal_expectation(const std::function<double(double)>& f, double m, double v) {
  return normal_expectations([&f](double z, double* out) { out[0] = f(z); }, 1, m, v)[0];
}

std::vector<double> gamma_expectations(const std::function<void(double, double*)>& f, int count,
                                       double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw DomainError("gamma expectation needs positive shape and rate");
  }
  // Density of u = log z is proportional to exp(shape * u - rate * e^u).
  const double mode = std::log(shape / rate);
  const double sd_u = 1.0 / std::sqrt(shape);
  const double lo = mode - (12.0 * sd_u + 40.0 / shape);
  const double hi = mode + std::min(12.0 * sd_u, std::log1p(60.0 / shape) + 1.0);
  const double step = std::min(sd_u / 40.0, (hi - lo) / 4000.0);
  const int n = std::min(400000, static_cast<int>(std::ceil((hi - lo) / step)));
  const double h = (hi - lo) / n;
  const double log_peak = shape * mode - shape;
  std::vector<double> acc(count, 0.0), buf(count);
  double wsum = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double u = lo + k * h;
    const double z = std::exp(u);
    const double w = std::exp(shape * u - rate * z - log_peak);
    if (w == 0.0) continue;
    f(z, buf.data());
    for (int c = 0; c < count; ++c) acc[c] += w * buf[c];
    wsum += w;
  }
  for (auto& a : acc) a /= wsum;
  return acc;
}

double gamma_expectation(const std::function<double(double)>& f, double shape, double rate) {
  return gamma_expectations([&f](double z, double* out) { out[0] = f(z); }, 1, shape, rate)[0];
}

}  // namespace cvi::quad
