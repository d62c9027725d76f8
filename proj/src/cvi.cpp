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

#include "cvi/cvi.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "cvi/errors.hpp"

namespace cvi {

namespace {

using Clock = std::chrono::steady_clock;

void check_model(const Model& model) {
  validate(model.spec);
  const int n = site_count(model.spec);
  for (const auto& f : model.factors) {
    if (f.target < 0 || f.target >= n) throw ShapeError("factor target out of range");
    const bool gamma_site = site_family(model.spec).tag == Family::kGamma;
    if (gamma_site != (f.kind == Likelihood::kGammaShape))
      throw ShapeError("likelihood " + to_string(f.kind) + " does not match the site family");
  }
}

// Shared loop. `select` picks the factor indices for iteration t.
template <typename Select>
CviResult run_loop(const Model& model, const CviConfig& cfg, const EvalHooks& hooks, Select select) {
  cfg.validate();
  check_model(model);
  const double beta = cfg.schedule.beta();
  const int n_sites = site_count(model.spec);
  const double n_factors = static_cast<double>(model.factors.size());

  CviResult out;
  out.state = SiteState::zeros(n_sites);
  out.posterior = conjugate_step(out.state, model.spec);
  const auto start = Clock::now();
  const Rng unused(0);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const std::vector<std::size_t> batch = select(t);
    const double scale = batch.empty() ? 0.0 : n_factors / static_cast<double>(batch.size());
    // Exact gradients never draw; skip the (comparatively costly) seeding.
    Rng rng = cfg.gradient == GradientMode::kMonteCarlo
                  ? Rng::derive(cfg.seed, Stream::kMonteCarlo, static_cast<std::uint64_t>(t))
                  : unused;

    Sites target = Sites::Zero(2, n_sites);
    try {
      for (std::size_t i : batch) {
        const NonConjugateFactor& f = model.factors[i];
        const NatParams q_n = out.posterior.site_marginal(f.target);
        target.col(f.target) += scale * factor_gradient(f, q_n, cfg.gradient, cfg.mc_samples, rng).g;
      }
    } catch (const NumericError& e) {
      throw IterationError(t, e.what());
    }

    const Sites proposed = (1.0 - beta) * out.state.sites + beta * target;
    GuardResult guarded = guard_step(proposed, out.state.sites, model.spec, beta, cfg.guard_max_halvings);
    out.state.sites = guarded.sites;
    out.state.iteration = t;
    out.posterior = std::move(guarded.posterior);

    TraceRow row;
    row.iter = t;
    row.guard_halvings = guarded.halvings;
    row.effective_beta = guarded.beta;
    row.degenerate = guarded.degenerate;
    row.neg_elbo = hooks.compute_elbo ? negative_elbo(model, out.posterior) : std::numeric_limits<double>::quiet_NaN();
    if (hooks.on_iteration) hooks.on_iteration(t, out.posterior, out.state, row);
    row.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.trace.rows.push_back(row);
    if (stop_criterion_met(out.trace, cfg)) break;
  }
  return out;
}

}  // namespace

bool stop_criterion_met(const RunTrace& trace, const CviConfig& cfg) {
  if (cfg.stop_rel_tol <= 0.0) return false;
  const auto& rows = trace.rows;
  const int w = cfg.stop_window;
  if (static_cast<int>(rows.size()) <= w) return false;
  const double now = rows.back().neg_elbo;
  const double then = rows[rows.size() - 1 - w].neg_elbo;
  if (!std::isfinite(now) || !std::isfinite(then)) return false;
  return std::abs(now - then) <= cfg.stop_rel_tol * std::max(std::abs(now), 1e-300);
}

double StepSchedule::beta() const {
  const double b = kind == Kind::kConstant ? value : value / (1.0 + value);
  if (!(b > 0.0 && b <= 1.0)) throw ConfigError("step size must lie in (0, 1]; got " + std::to_string(b));
  return b;
}

void CviConfig::validate() const {
  schedule.beta();
  if (mc_samples < 1 || max_iters < 1 || guard_max_halvings < 1 || stop_window < 1)
    throw ConfigError("counts in the CVI config must be >= 1");
  if (minibatch && *minibatch < 1) throw ConfigError("minibatch must be >= 1");
  if (stop_rel_tol < 0.0) throw ConfigError("stop tolerance must be >= 0");
}

Eigen::VectorXd site_update(const Eigen::VectorXd& prev, const Eigen::VectorXd& g, double beta) {
  if (prev.size() != g.size()) throw ShapeError("site_update: dimension mismatch");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("site_update: beta must lie in (0, 1]");
  if (beta == 1.0) return g;
  return (1.0 - beta) * prev + beta * g;
}

Posterior conjugate_step(const SiteState& state, const ConjugateModelSpec& model) {
  return conjugate_posterior(model, state.sites);
}

GuardResult guard_step(const Sites& proposed, const Sites& prev, const ConjugateModelSpec& model, double beta,
                       int max_halvings) {
  GuardResult out;
  const Sites direction = proposed - prev;
  double b = beta;
  for (int k = 0; k <= max_halvings; ++k) {
    const Sites trial = k == 0 ? proposed : Sites(prev + (b / beta) * direction);
    if (trial.allFinite()) {
      try {
        out.posterior = conjugate_posterior(model, trial);
        out.sites = trial;
        out.beta = b;
        out.halvings = k;
        return out;
      } catch (const NumericError&) {
      }
    }
    b *= 0.5;
  }
  out.sites = prev;
  out.beta = 0.0;
  out.halvings = max_halvings;
  out.degenerate = true;
  out.posterior = conjugate_posterior(model, prev);
  return out;
}

double negative_elbo(const Model& model, const Posterior& q) {
  double expected = 0.0;
  for (const auto& f : model.factors) {
    expected += quad_expectation(as_scalar_function(f), q.site_marginal(f.target));
  }
  return q.kl_to_prior - expected;
}

GradEstimate factor_gradient(const NonConjugateFactor& factor, const NatParams& marginal, GradientMode mode,
                             int mc_samples, Rng& rng) {
  try {
    return mean_gradient(as_scalar_function(factor), marginal, mode, mc_samples, rng);
  } catch (const NumericError& e) {
    throw NumericError(to_string(factor.kind) + " factor: " + e.what());
  }
}

CviResult run_cvi(const Model& model, const CviConfig& cfg, const EvalHooks& hooks) {
  std::vector<std::size_t> all(model.factors.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return run_loop(model, cfg, hooks, [&](int) { return all; });
}

CviResult run_cvi_doubly_stochastic(const Model& model, const CviConfig& cfg, const EvalHooks& hooks) {
  if (!cfg.minibatch) throw ConfigError("doubly-stochastic run needs a minibatch size");
  const std::size_t n = model.factors.size();
  const std::size_t b = static_cast<std::size_t>(*cfg.minibatch);
  if (b > n) throw ConfigError("minibatch larger than the number of factors");
  return run_loop(model, cfg, hooks, [&](int t) {
    Rng rng = Rng::derive(cfg.seed, Stream::kMinibatch, static_cast<std::uint64_t>(t));
    return rng.sample_without_replacement(n, b);
  });
}

}  // namespace cvi
