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

#include "cvi/linalg.hpp"

#include <cmath>
#include <string>

#include "cvi/errors.hpp"

namespace cvi::linalg {

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& a, Jitter jitter, const char* what) {
  if (a.rows() != a.cols()) throw ShapeError(std::string(what) + ": matrix is not square");
  if (!a.allFinite()) throw DomainError(std::string(what) + ": non-finite matrix entries");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  if (jitter == Jitter::kOnce && a.rows() > 0) {
    const double eps = 1e-10 * std::abs(a.diagonal().mean());
    Eigen::MatrixXd b = a;
    b.diagonal().array() += eps;
    llt.compute(b);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw DomainError(std::string(what) + ": matrix is not positive definite");
}

bool is_positive_definite(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || !a.allFinite()) return false;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  return llt.info() == Eigen::Success;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::MatrixXd inverse(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const auto n = llt.matrixLLT().rows();
  return llt.solve(Eigen::MatrixXd::Identity(n, n));
}

}  // namespace cvi::linalg
