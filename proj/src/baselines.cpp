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

#include "cvi/baselines.hpp"

#include <chrono>
#include <cmath>
#include <variant>

#include "cvi/errors.hpp"
#include "cvi/linalg.hpp"
#include "cvi/quadrature.hpp"
#include "cvi/special.hpp"

namespace cvi {

namespace {

using linalg::packed_index;
using linalg::packed_size;

double gamma_kl(double alpha, double beta, double a, double b) {
  return (alpha - a) * special::digamma(alpha) - std::lgamma(alpha) + std::lgamma(a) + a * (std::log(beta) - std::log(b)) +
         alpha * (b - beta) / beta;
}

// Lower triangle of M packed into `out` starting at `offset`.
void pack_lower(const Eigen::MatrixXd& M, Eigen::VectorXd& out, int offset) {
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j <= i; ++j) out[offset + packed_index(i, j)] = M(i, j);
}

}  // namespace

double softplus(double x) { return special::log1pexp(x); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse needs y > 0");
  return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y));
}

FlatParams flat_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const int d = static_cast<int>(mean.size());
  if (cov.rows() != d || cov.cols() != d) throw ShapeError("flat_gaussian: covariance shape");
  const Eigen::MatrixXd L = linalg::cholesky(cov, linalg::Jitter::kNone, "flat_gaussian covariance").matrixL();
  FlatParams p{false, d, Eigen::VectorXd(d + packed_size(d))};
  p.values.head(d) = mean;
  pack_lower(L, p.values, d);
  for (int i = 0; i < d; ++i) p.values[d + packed_index(i, i)] = softplus_inverse(L(i, i));
  return p;
}

FlatParams flat_gamma(double shape, double rate) {
  return {true, 1, Eigen::Vector2d(softplus_inverse(shape), softplus_inverse(rate))};
}

VariationalObjective::VariationalObjective(const Model& model) : factors_(model.factors) {
  validate(model.spec);
  const int n = site_count(model.spec);
  for (const auto& f : factors_) {
    if (f.target < 0 || f.target >= n) throw ShapeError("factor target out of range");
  }
  if (const auto* g = std::get_if<GammaPriorSpec>(&model.spec)) {
    gamma_ = true;
    dim_ = 1;
    a_ = g->a;
    b_ = g->b;
    return;
  }
  if (const auto* s = std::get_if<LinRegSpec>(&model.spec)) {
    dim_ = static_cast<int>(s->design.cols());
    prior_cov_ = s->delta * Eigen::MatrixXd::Identity(dim_, dim_);
    projection_ = s->design;
  } else if (const auto* s = std::get_if<GpSpec>(&model.spec)) {
    dim_ = static_cast<int>(s->kernel.rows());
    prior_cov_ = s->kernel;
    projection_ = Eigen::MatrixXd::Identity(dim_, dim_);
  } else if (const auto* s = std::get_if<KalmanSpec>(&model.spec)) {
    dim_ = s->horizon + 1;
    prior_cov_ = chain_covariance(s->horizon, s->sigma2);
    projection_ = Eigen::MatrixXd::Zero(s->horizon, dim_);
    for (int k = 0; k < s->horizon; ++k) projection_(k, k + 1) = 1.0;
  }
  const auto llt = linalg::cholesky(prior_cov_, linalg::Jitter::kOnce, "prior covariance");
  prior_prec_ = linalg::inverse(llt);
  prior_log_det_ = linalg::log_det(llt);
}

void VariationalObjective::check(const FlatParams& p) const {
  const int expected = gamma_ ? 2 : dim_ + packed_size(dim_);
  if (p.gamma != gamma_ || p.dim != dim_ || p.values.size() != expected)
    throw ShapeError("flat parameters do not match the model");
  if (!p.values.allFinite()) throw NumericError("non-finite variational parameters");
}

Eigen::MatrixXd VariationalObjective::cholesky_factor(const FlatParams& p) const {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(dim_, dim_);
  for (int i = 0; i < dim_; ++i) {
    for (int j = 0; j < i; ++j) L(i, j) = p.values[dim_ + packed_index(i, j)];
    L(i, i) = softplus(p.values[dim_ + packed_index(i, i)]);
  }
  return L;
}

FlatParams VariationalObjective::prior_params() const {
  if (gamma_) return flat_gamma(a_, b_);
  return flat_gaussian(Eigen::VectorXd::Zero(dim_), prior_cov_);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> VariationalObjective::gaussian_moments(const FlatParams& p) const {
  check(p);
  if (gamma_) throw ShapeError("gaussian_moments on a Gamma model");
  const Eigen::MatrixXd L = cholesky_factor(p);
  return {p.values.head(dim_), L * L.transpose()};
}

NatParams VariationalObjective::gamma_q(const FlatParams& p) const {
  check(p);
  if (!gamma_) throw ShapeError("gamma_q on a Gaussian model");
  return gamma_dist(softplus(p.values[0]), softplus(p.values[1]));
}

Marginals VariationalObjective::site_marginals(const FlatParams& p) const {
  check(p);
  if (gamma_) throw ShapeError("site_marginals on a Gamma model");
  const Eigen::MatrixXd W = projection_ * cholesky_factor(p);
  return {projection_ * p.values.head(dim_), W.rowwise().squaredNorm()};
}

double VariationalObjective::elbo(const FlatParams& p) const {
  Rng unused(0);
  return elbo_and_grad(p, 0, unused).value;
}

ElboGrad VariationalObjective::elbo_and_grad(const FlatParams& p, int S, Rng& rng) const {
  check(p);
  if (S < 0) throw ConfigError("sample count must be >= 0");
  ElboGrad out;
  out.grad = Eigen::VectorXd::Zero(p.values.size());

  if (gamma_) {
    const double alpha = softplus(p.values[0]), beta = softplus(p.values[1]);
    const double psi = special::digamma(alpha), lb = std::log(beta);
    double e = 0.0, d_alpha = 0.0, d_beta = 0.0;
    std::vector<ScalarFunction> fs;
    for (const auto& f : factors_) fs.push_back(as_scalar_function(f));
    auto total = [&](double z) {
      double acc = 0.0;
      for (const auto& f : fs) acc += f.f(z);
      return acc;
    };
    if (S == 0) {
      const auto v = quad::gamma_expectations(
          [&](double z, double* o) {
            const double t = total(z);
            o[0] = t;
            o[1] = t * (std::log(z) - psi + lb);
            o[2] = t * (alpha / beta - z);
          },
          3, alpha, beta);
      e = v[0], d_alpha = v[1], d_beta = v[2];
    } else {
      // z = u / beta with u ~ Ga(alpha, 1): pathwise in the rate, score
      // function (leave-one-out baseline) in the shape.
      std::vector<double> u(S), t(S);
      double sum = 0.0;
      for (int s = 0; s < S; ++s) {
        u[s] = rng.gamma(alpha, 1.0);
        const double z = u[s] / beta;
        t[s] = 0.0;
        double dz = 0.0;
        for (const auto& f : fs) {
          t[s] += f.f(z);
          dz += f.d1(z);
        }
        if (!std::isfinite(t[s]) || !std::isfinite(dz)) throw EstimationError("non-finite likelihood", z);
        sum += t[s];
        d_beta -= dz * z / beta / S;
      }
      e = sum / S;
      for (int s = 0; s < S; ++s) {
        const double base = S > 1 ? (sum - t[s]) / (S - 1) : 0.0;
        d_alpha += (t[s] - base) * (std::log(u[s]) - psi) / S;
      }
    }
    d_alpha -= (alpha - a_) * special::trigamma(alpha) + (b_ - beta) / beta;
    d_beta -= a_ / beta - alpha * b_ / (beta * beta);
    out.value = e - gamma_kl(alpha, beta, a_, b_);
    out.grad[0] = d_alpha * special::sigmoid(p.values[0]);
    out.grad[1] = d_beta * special::sigmoid(p.values[1]);
    return out;
  }

  const int d = dim_;
  const Eigen::VectorXd m = p.values.head(d);
  const Eigen::MatrixXd L = cholesky_factor(p);
  Eigen::VectorXd g_m = -prior_prec_ * m;
  Eigen::MatrixXd g_L = -prior_prec_ * L;
  g_L.diagonal() += L.diagonal().cwiseInverse();
  const double kl = 0.5 * ((prior_prec_ * L * L.transpose()).trace() + m.dot(prior_prec_ * m) - d + prior_log_det_ -
                           2.0 * L.diagonal().array().log().sum());
  double e = 0.0;
  if (S == 0) {
    const Eigen::VectorXd mu = projection_ * m;
    const Eigen::MatrixXd W = projection_ * L;  // row n: (L' a_n)'
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(projection_.rows());
    Eigen::VectorXd d2 = Eigen::VectorXd::Zero(projection_.rows());
    for (const auto& f : factors_) {
      const ScalarFunction sf = as_scalar_function(f);
      const int n = f.target;
      const auto v = quad::normal_expectations(
          [&](double z, double* o) {
            o[0] = sf.f(z);
            o[1] = sf.d1(z);
            o[2] = sf.d2(z);
          },
          3, mu[n], W.row(n).squaredNorm());
      e += v[0];
      d1[n] += v[1];
      d2[n] += v[2];
    }
    g_m += projection_.transpose() * d1;
    g_L += projection_.transpose() * d2.asDiagonal() * W;
  } else {
    Eigen::VectorXd eps(d);
    Eigen::VectorXd d1(projection_.rows());
    for (int s = 0; s < S; ++s) {
      for (int i = 0; i < d; ++i) eps[i] = rng.normal();
      const Eigen::VectorXd u = projection_ * (m + L * eps);
      d1.setZero();
      for (const auto& f : factors_) {
        const LogLik ll = loglik_eval(f, u[f.target]);
        if (!std::isfinite(ll.value) || !std::isfinite(ll.d1)) throw EstimationError("non-finite likelihood", u[f.target]);
        e += ll.value / S;
        d1[f.target] += ll.d1 / S;
      }
      const Eigen::VectorXd back = projection_.transpose() * d1;
      g_m += back;
      g_L += back * eps.transpose();
    }
  }
  out.value = e - kl;
  out.grad.head(d) = g_m;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) out.grad[d + packed_index(i, j)] = g_L(i, j);
    out.grad[d + packed_index(i, i)] = g_L(i, i) * special::sigmoid(p.values[d + packed_index(i, i)]);
  }
  return out;
}

ElboGrad elbo_and_grad(const Model& model, const FlatParams& params, int S, Rng& rng) {
  return VariationalObjective(model).elbo_and_grad(params, S, rng);
}

FlatParams sgd_step(const FlatParams& params, const Eigen::VectorXd& g, double rho) {
  if (g.size() != params.values.size()) throw ShapeError("sgd_step: gradient size");
  if (!(rho > 0.0)) throw ConfigError("sgd_step: rho must be > 0");
  FlatParams out = params;
  out.values += rho * g;
  return out;
}

FlatParams adam_step(const FlatParams& params, const Eigen::VectorXd& g, AdamState& state, const AdamHyper& hyper) {
  if (g.size() != params.values.size()) throw ShapeError("adam_step: gradient size");
  if (state.t == 0) {
    state.m = Eigen::VectorXd::Zero(g.size());
    state.v = Eigen::VectorXd::Zero(g.size());
  }
  ++state.t;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * g;
  state.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * g.cwiseAbs2();
  const double c1 = 1.0 - std::pow(hyper.beta1, state.t);
  const double c2 = 1.0 - std::pow(hyper.beta2, state.t);
  FlatParams out = params;
  out.values.array() += hyper.w0 * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + hyper.eps);
  return out;
}

BaselineResult run_baseline(const Model& model, const BaselineConfig& cfg, const BaselineHooks& hooks) {
  if (!(cfg.step > 0.0)) throw ConfigError("baseline step must be > 0");
  if (cfg.mc_samples < 0 || cfg.max_iters < 1) throw ConfigError("invalid baseline iteration counts");
  const VariationalObjective objective(model);
  BaselineResult out{objective.prior_params(), {}};
  AdamState adam;
  const AdamHyper hyper{cfg.step};
  const auto start = std::chrono::steady_clock::now();
  for (int t = 1; t <= cfg.max_iters; ++t) {
    Rng rng = Rng::derive(cfg.seed, Stream::kMonteCarlo, static_cast<std::uint64_t>(t));
    try {
      const ElboGrad eg = objective.elbo_and_grad(out.params, cfg.mc_samples, rng);
      if (!eg.grad.allFinite()) throw NumericError("non-finite ELBO gradient");
      out.params = cfg.optimizer == Optimizer::kSgd ? sgd_step(out.params, eg.grad, cfg.step)
                                                    : adam_step(out.params, eg.grad, adam, hyper);
      if (!out.params.values.allFinite()) throw NumericError("variational parameters diverged");
    } catch (const NumericError& e) {
      throw IterationError(t, e.what());
    }
    TraceRow row;
    row.iter = t;
    row.effective_beta = cfg.step;
    row.neg_elbo = hooks.compute_elbo ? -objective.elbo(out.params) : std::numeric_limits<double>::quiet_NaN();
    if (hooks.on_iteration) hooks.on_iteration(t, objective, out.params, row);
    row.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    out.trace.rows.push_back(row);
  }
  return out;
}

}  // namespace cvi
