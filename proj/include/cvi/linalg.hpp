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

#include <Eigen/Dense>

namespace cvi::linalg {

enum class Jitter { kNone, kOnce };

/// Cholesky factor of a symmetric matrix. With Jitter::kOnce a failed attempt
/// is retried once with 1e-10 * mean(diag) added to the diagonal; a second
/// failure (or any failure under kNone) raises DomainError with `what`.
Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& a, Jitter jitter, const char* what);

/// True when `a` admits a Cholesky factorization without jitter.
bool is_positive_definite(const Eigen::MatrixXd& a);

/// log|A| from its Cholesky factor.
double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Inverse of A from its Cholesky factor.
Eigen::MatrixXd inverse(const Eigen::LLT<Eigen::MatrixXd>& llt);

/// Packed lower-triangle index for i >= j.
inline int packed_index(int i, int j) { return i * (i + 1) / 2 + j; }
inline int packed_size(int d) { return d * (d + 1) / 2; }

}  // namespace cvi::linalg
