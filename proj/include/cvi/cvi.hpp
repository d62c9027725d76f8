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

// The CVI recursion: per-factor mean-parameter gradients are blended into
// site parameters, and each iterate is exact inference in the conjugate model
// with those sites attached.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cvi/conjugate_models.hpp"
#include "cvi/gradients.hpp"
#include "cvi/models.hpp"

namespace cvi {

struct StepSchedule {
  enum class Kind { kConstant, kRatio };
  Kind kind = Kind::kConstant;
  double value = 0.5;

  static StepSchedule constant(double beta) { return {Kind::kConstant, beta}; }
  /// beta = w / (1 + w).
  static StepSchedule ratio(double w) { return {Kind::kRatio, w}; }

  double beta() const;
};

struct CviConfig {
  StepSchedule schedule;
  int mc_samples = 10;
  int max_iters = 100;
  /// Doubly-stochastic runs only.
  std::optional<int> minibatch;
  std::uint64_t seed = 0;
  int guard_max_halvings = 30;
  GradientMode gradient = GradientMode::kMonteCarlo;
  /// Stop once the relative change of the negative ELBO over `stop_window`
  /// iterations falls below this. Zero disables the rule.
  double stop_rel_tol = 0.0;
  int stop_window = 5;

  void validate() const;
};

struct SiteState {
  Sites sites;
  int iteration = 0;

  static SiteState zeros(int n) { return {Sites::Zero(2, n), 0}; }
};

/// (1 - beta) prev + beta g.
Eigen::VectorXd site_update(const Eigen::VectorXd& prev, const Eigen::VectorXd& g, double beta);

/// Exact posterior with the current sites attached.
Posterior conjugate_step(const SiteState& state, const ConjugateModelSpec& model);

struct GuardResult {
  Sites sites;
  double beta = 0.0;
  int halvings = 0;
  /// Every halving failed; `sites` is the previous iterate.
  bool degenerate = false;
  /// Posterior at the accepted sites.
  Posterior posterior;
};

/// Accepts `proposed` if it yields a valid posterior; otherwise moves it back
/// towards `prev` by halving beta. Never throws for domain failures.
GuardResult guard_step(const Sites& proposed, const Sites& prev, const ConjugateModelSpec& model,
                       double beta, int max_halvings);

struct TraceRow {
  int iter = 0;
  double elapsed_ms = 0.0;
  double neg_elbo = 0.0;
  /// NaN when not evaluated at this iteration.
  double train_logloss = std::numeric_limits<double>::quiet_NaN();
  double test_logloss = std::numeric_limits<double>::quiet_NaN();
  int guard_halvings = 0;
  double effective_beta = 0.0;
  bool degenerate = false;
};

struct RunTrace {
  std::vector<TraceRow> rows;
};

struct EvalHooks {
  /// Skips the per-iteration ELBO (the row then holds NaN).
  bool compute_elbo = true;
  /// Called after each iteration; may fill the log-loss columns.
  std::function<void(int iter, const Posterior& q, const SiteState& state, TraceRow& row)> on_iteration;
};

struct CviResult {
  Posterior posterior;
  SiteState state;
  RunTrace trace;
};

/// Relative change of the negative ELBO over cfg.stop_window rows is at most
/// cfg.stop_rel_tol (never true when the rule is disabled).
bool stop_criterion_met(const RunTrace& trace, const CviConfig& cfg);

/// KL(q || prior) - sum_n E_q log p(y_n | z), expectations by quadrature.
double negative_elbo(const Model& model, const Posterior& q);

/// Gradient of E_q[log p(y | z)] in the mean coordinates of the factor's
/// marginal.
GradEstimate factor_gradient(const NonConjugateFactor& factor, const NatParams& marginal, GradientMode mode,
                             int mc_samples, Rng& rng);

CviResult run_cvi(const Model& model, const CviConfig& cfg, const EvalHooks& hooks = {});

/// Updates a uniformly drawn minibatch of factors per iteration, scaled by
/// N / B; every site decays by (1 - beta).
CviResult run_cvi_doubly_stochastic(const Model& model, const CviConfig& cfg, const EvalHooks& hooks = {});

}  // namespace cvi
