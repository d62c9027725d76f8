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

// Scalar special functions shared by the exponential-family kernels and the
// likelihoods.

#pragma once

namespace cvi::special {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kSqrt2 = 1.4142135623730950488016887242097;
inline constexpr double kPi = 3.1415926535897932384626433832795;

double log_gamma(double x);

/// psi(x) for x > 0. Shifts the argument to x >= 10 with the recurrence
/// psi(x) = psi(x + 1) - 1/x, then applies the asymptotic series.
double digamma(double x);

/// log(x) - psi(x) for x > 0, evaluated without the cancellation of the
/// direct difference at large x.
double log_minus_digamma(double x);

/// psi'(x) for x > 0, same scheme as digamma.
double trigamma(double x);

/// log(1 + exp(x)) without overflow.
double log1pexp(double x);

double sigmoid(double x);

/// log sigmoid(x) = -log1pexp(-x).
double log_sigmoid(double x);

double normal_cdf(double x);

/// log Phi(x); switches to the asymptotic tail expansion below x = -30.
double log_normal_cdf(double x);

double normal_log_pdf(double x);

/// phi(x) / Phi(x), stable in both tails.
double inverse_mills_ratio(double x);

}  // namespace cvi::special
