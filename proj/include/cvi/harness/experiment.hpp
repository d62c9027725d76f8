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
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cvi/cvi.hpp"
#include "cvi/harness/data.hpp"

namespace cvi {

struct ExperimentConfig {
  /// cvi, cvi-exact, cvi-ds, meanfield, sgd or adam.
  std::string method = "cvi";
  /// blr, gpc, kalman or gamma.
  std::string model = "blr";
  std::string data_path;
  std::string test_split = "0";
  bool standardize = false;
  double delta = 1.0;
  double sigma2 = 1.0;
  double a = 1.0;
  double b = 1.0;
  double log_sigma_f = 0.0;
  double log_l = 0.0;
  std::optional<double> step_w;
  /// Constant beta for the CVI methods, rho for sgd, w0 for adam.
  std::optional<double> step_beta;
  int mc_samples = 10;
  std::optional<int> minibatch;
  int max_iters = 100;
  std::uint64_t seed = 0;
  std::string out_path;

  void validate() const;
};

/// Line-oriented key=value text; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in, const std::string& source = "<config>");
/// Relative data_path and out_path entries resolve against the file's directory.
ExperimentConfig load_config(const std::string& path);
std::string format_config(const ExperimentConfig& cfg);

using Summary = std::vector<std::pair<std::string, std::string>>;

struct ExperimentResult {
  RunTrace trace;
  Summary summary;

  const std::string& get(const std::string& key) const;
  double number(const std::string& key) const;
};

struct RunOptions {
  /// When false every elapsed_ms is written as 0, making traces byte-stable.
  bool timing = true;
};

/// Iterations at which log losses are evaluated: 1, 2, 3, 5, 8, 10, then
/// every tenth, and the last.
bool is_marker(int iter, int max_iters);

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});
/// Same, with the data already loaded (and split) by the caller.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts = {});

void write_trace(std::ostream& out, const RunTrace& trace);
void write_summary(std::ostream& out, const Summary& summary);
/// Writes the trace to cfg.out_path and the summary next to it
/// (out_path + ".summary"). No-op when out_path is empty.
void save_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Fixed-width table of the main summary fields, one row per run.
void write_comparison(std::ostream& out, const std::vector<std::string>& labels,
                      const std::vector<ExperimentResult>& results);

}  // namespace cvi
