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

// Ten (integrand, q) cases shared by the gradient tests.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cvi/expfam.hpp"
#include "cvi/gradients.hpp"

namespace battery {

struct Case {
  std::string name;
  cvi::ScalarFunction f;
  cvi::NatParams q;
};

inline double log_sig(double z) { return z > 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
inline double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline std::vector<Case> cases() {
  using cvi::ScalarFunction;
  std::vector<Case> out;
  out.push_back({"logit y=1", ScalarFunction{log_sig, [](double z) { return 1 - sig(z); },
                                              [](double z) { return -sig(z) * (1 - sig(z)); }, {}},
                 cvi::gaussian_scalar(0, 1)});
  out.push_back({"logit y=0", ScalarFunction{[](double z) { return log_sig(-z); }, [](double z) { return -sig(z); },
                                              [](double z) { return -sig(z) * (1 - sig(z)); }, {}},
                 cvi::gaussian_scalar(1.5, 0.5)});
  out.push_back({"sin", ScalarFunction{[](double z) { return std::sin(z); }, [](double z) { return std::cos(z); },
                                        [](double z) { return -std::sin(z); }, {}},
                 cvi::gaussian_scalar(0.3, 0.8)});
  out.push_back({"cubic", ScalarFunction{[](double z) { return z * z * z / 10; }, [](double z) { return 0.3 * z * z; },
                                          [](double z) { return 0.6 * z; }, {}},
                 cvi::gaussian_scalar(0.5, 1.0)});
  out.push_back({"exp", ScalarFunction{[](double z) { return std::exp(z / 2); }, [](double z) { return std::exp(z / 2) / 2; },
                                        [](double z) { return std::exp(z / 2) / 4; }, {}},
                 cvi::gaussian_scalar(0.0, 1.0)});
  // No second derivative: exercises the finite-difference fallback.
  out.push_back({"bump", ScalarFunction{[](double z) { return z * std::exp(-z * z / 4); },
                                         [](double z) { return (1 - z * z / 2) * std::exp(-z * z / 4); }, {}, {}},
                 cvi::gaussian_scalar(-0.7, 1.7)});
  out.push_back({"gamma-shape y=1.5",
                 ScalarFunction{[](double z) { return (z - 1) * std::log(1.5) - 1.5 - std::lgamma(z); }, {}, {}, {}},
                 cvi::gamma_dist(3, 2)});
  out.push_back({"log1p", ScalarFunction{[](double z) { return std::log1p(z); }, {}, {}, {}}, cvi::gamma_dist(2, 1)});
  out.push_back({"pow1.5", ScalarFunction{[](double z) { return std::pow(z, 1.5); }, {}, {}, {}}, cvi::gamma_dist(4, 2)});
  out.push_back({"sqrt", ScalarFunction{[](double z) { return std::sqrt(z); }, {}, {}, {}}, cvi::gamma_dist(5, 3)});
  return out;
}

}  // namespace battery
