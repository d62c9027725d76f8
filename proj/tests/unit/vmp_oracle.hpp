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

namespace oracle {

// Reference VMP on the T = 2 chain: closed-form coordinate updates, written
// out per node.
struct Vmp {
  double s2, tau, y1, y2;
  Eigen::Vector3d m{0, 0, 0}, prec{1, 1, 1};

  void update(int k) {
    if (k == 0) prec[0] = 1 + 1 / s2, m[0] = (m[1] / s2) / prec[0];
    if (k == 1) prec[1] = 2 / s2 + 1 / tau, m[1] = (m[0] / s2 + m[2] / s2 + y1 / tau) / prec[1];
    if (k == 2) prec[2] = 1 / s2 + 1 / tau, m[2] = (m[1] / s2 + y2 / tau) / prec[2];
  }
  Eigen::Vector2d nat(int k) const { return {prec[k] * m[k], -0.5 * prec[k]}; }
};

}  // namespace oracle
