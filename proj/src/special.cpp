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

#include "cvi/special.hpp"

#include <cmath>
#include <limits>

#include "cvi/errors.hpp"

namespace cvi::special {

namespace {

constexpr double kShift = 10.0;

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(name) + " requires a finite positive argument");
  }
}

// 1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8, the tail series of Phi(x) * (-x) / phi(x).
double tail_series(double x) {
  const double t = 1.0 / (x * x);
  return 1.0 - t * (1.0 - t * (3.0 - t * (15.0 - t * 105.0)));
}

}  // namespace

double log_gamma(double x) { return std::lgamma(x); }

// psi(x) = log(x) - 0.5/x - digamma_tail(x) for x >= kShift.
static double digamma_tail(double x) {
  const double t = 1.0 / (x * x);
  return t * (1.0 / 12 -
              t * (1.0 / 120 -
                   t * (1.0 / 252 -
                        t * (1.0 / 240 -
                             t * (1.0 / 132 -
                                  t * (691.0 / 32760 - t * (1.0 / 12 - t * (3617.0 / 8160))))))));
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShift) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  return acc + std::log(x) - 0.5 / x - digamma_tail(x);
}

double log_minus_digamma(double x) {
  require_positive(x, "log_minus_digamma");
  if (x < kShift) return std::log(x) - digamma(x);
  return 0.5 / x + digamma_tail(x);
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kShift) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double t = 1.0 / (x * x);
  const double series =
      t * (1.0 / 6 -
           t * (1.0 / 30 -
                t * (1.0 / 42 -
                     t * (1.0 / 30 -
                          t * (5.0 / 66 -
                               t * (691.0 / 2730 - t * (7.0 / 6 - t * (3617.0 / 510))))))));
  return acc + 1.0 / x + 0.5 * t + series / x;
}

double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) { return -log1pexp(-x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_log_pdf(double x) { return -0.5 * (x * x + kLog2Pi); }

double log_normal_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / kSqrt2));
  if (x > -30.0) return std::log(0.5 * std::erfc(-x / kSqrt2));
  return normal_log_pdf(x) - std::log(-x) + std::log(tail_series(x));
}

double inverse_mills_ratio(double x) {
  if (x < -30.0) return -x / tail_series(x);
  return std::exp(normal_log_pdf(x) - log_normal_cdf(x));
}

}  // namespace cvi::special
