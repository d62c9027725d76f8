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

#include "cvi/meanfield.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cvi/errors.hpp"
#include "cvi/special.hpp"

namespace cvi::mf {

namespace {

using Clock = std::chrono::steady_clock;

double gauss_expected_log(double mean, double var, double mu1, double mu2) {
  return -0.5 * (special::kLog2Pi + std::log(var)) - 0.5 * (mu2 - 2.0 * mean * mu1 + mean * mean) / var;
}

double entropy(const NatParams& q) {
  if (q.family.tag == Family::kGamma) {
    const auto [a, b] = gamma_shape_rate(q);
    return a - std::log(b) + std::lgamma(a) + (1.0 - a) * special::digamma(a);
  }
  const auto [m, v] = scalar_moments(q);
  return 0.5 * (special::kLog2Pi + std::log(v) + 1.0);
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw DomainError(std::string(what) + " must be > 0");
}

}  // namespace

GaussianFactor::GaussianFactor(int node, double mean, double var) : Factor({node}), mean_(mean), var_(var) {
  require_positive(var, "gaussian factor variance");
}

Eigen::Vector2d GaussianFactor::message(int, const Moments&) const {
  return {mean_ / var_, -0.5 / var_};
}

double GaussianFactor::expected_log(const std::vector<Node>&, const Moments& mu) const {
  const auto& m = mu[neighbors()[0]];
  return gauss_expected_log(mean_, var_, m[0], m[1]);
}

GaussianChainFactor::GaussianChainFactor(int from, int to, double var) : Factor({from, to}), var_(var) {
  if (from == to) throw ShapeError("chain factor needs two distinct nodes");
  require_positive(var, "chain factor variance");
}

Eigen::Vector2d GaussianChainFactor::message(int node, const Moments& mu) const {
  const int other = node == neighbors()[0] ? neighbors()[1] : neighbors()[0];
  return {mu[other][0] / var_, -0.5 / var_};
}

double GaussianChainFactor::expected_log(const std::vector<Node>&, const Moments& mu) const {
  const auto& a = mu[neighbors()[0]];
  const auto& b = mu[neighbors()[1]];
  return -0.5 * (special::kLog2Pi + std::log(var_)) - 0.5 * (b[1] - 2.0 * a[0] * b[0] + a[1]) / var_;
}

GammaFactor::GammaFactor(int node, double a, double b) : Factor({node}), a_(a), b_(b) {
  require_positive(a, "gamma factor shape");
  require_positive(b, "gamma factor rate");
}

Eigen::Vector2d GammaFactor::message(int, const Moments&) const { return {-b_, a_ - 1.0}; }

double GammaFactor::expected_log(const std::vector<Node>&, const Moments& mu) const {
  const auto& m = mu[neighbors()[0]];
  return a_ * std::log(b_) - std::lgamma(a_) + (a_ - 1.0) * m[1] - b_ * m[0];
}

LikelihoodFactor::LikelihoodFactor(int node, Likelihood kind, double y, double noise_var)
    : Factor({node}), factor_{node, kind, y, noise_var} {
  if (kind == Likelihood::kGammaShape) require_positive(y, "gamma-shape observation");
  if (kind == Likelihood::kBernoulliLogit || kind == Likelihood::kBernoulliProbit) {
    if (y != 0.0 && y != 1.0) throw DataError("Bernoulli labels must be 0 or 1");
  }
}

FamilyKind LikelihoodFactor::family_at(int) const {
  return factor_.kind == Likelihood::kGammaShape ? FamilyKind::gamma() : FamilyKind::gaussian_scalar();
}

std::optional<ScalarFunction> LikelihoodFactor::nonconjugate(int, const Moments&) const {
  return as_scalar_function(factor_);
}

double LikelihoodFactor::expected_log(const std::vector<Node>& nodes, const Moments&) const {
  const Node& n = nodes[neighbors()[0]];
  if (n.observed) return loglik_eval(factor_, *n.observed).value;
  return quad_expectation(as_scalar_function(factor_), n.q);
}

int BayesNet::add_latent(std::string name, const NatParams& init) {
  if (!in_domain(init)) throw DomainError("initial q of node " + name + " is outside the natural domain");
  if (init.family.param_dim() != 2) throw ShapeError("mean-field nodes must be scalar");
  nodes_.push_back({std::move(name), init.family, init, std::nullopt});
  adjacency_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

int BayesNet::add_observed(std::string name, FamilyKind family, double value) {
  if (family.param_dim() != 2) throw ShapeError("mean-field nodes must be scalar");
  if (family.tag == Family::kGamma && !(value > 0.0)) throw DomainError("observed Gamma node needs value > 0");
  nodes_.push_back({std::move(name), family, NatParams{family, Eigen::Vector2d::Zero()}, value});
  adjacency_.emplace_back();
  return static_cast<int>(nodes_.size()) - 1;
}

void BayesNet::add_factor(std::shared_ptr<const Factor> factor) {
  const int index = static_cast<int>(factors_.size());
  for (int i : factor->neighbors()) {
    if (i < 0 || i >= static_cast<int>(nodes_.size())) throw ShapeError("factor references an unknown node");
    if (!(factor->family_at(i) == nodes_[i].family))
      throw ShapeError("factor family does not match node " + nodes_[i].name);
    adjacency_[i].push_back(index);
  }
  factors_.push_back(std::move(factor));
}

std::vector<int> BayesNet::latent_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    if (!nodes_[i].observed) out.push_back(i);
  }
  return out;
}

Moments BayesNet::moments() const {
  Moments mu(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.observed) {
      const double x = *n.observed;
      mu[i] = n.family.tag == Family::kGamma ? Eigen::Vector2d(x, std::log(x)) : Eigen::Vector2d(x, x * x);
    } else {
      mu[i] = nat_to_mean(n.q).values;
    }
  }
  return mu;
}

double BayesNet::elbo() const {
  const Moments mu = moments();
  double out = 0.0;
  for (const auto& f : factors_) out += f->expected_log(nodes_, mu);
  for (const Node& n : nodes_) {
    if (!n.observed) out += entropy(n.q);
  }
  return out;
}

void BayesNet::validate() const {
  for (const Node& n : nodes_) {
    if (!n.observed && !in_domain(n.q)) throw DomainError("node " + n.name + " is outside the natural domain");
  }
  for (const auto& f : factors_) {
    for (int i : f->neighbors()) {
      if (!(f->family_at(i) == nodes_.at(i).family)) throw ShapeError("factor family does not match its node");
    }
  }
}

Eigen::Vector2d conjugate_message(const BayesNet& net, int factor, int node) {
  const auto& f = net.factors().at(factor);
  const auto& nb = f->neighbors();
  if (std::find(nb.begin(), nb.end(), node) == nb.end()) throw ShapeError("node is not a neighbor of the factor");
  return f->message(node, net.moments());
}

NodeState node_update(const BayesNet& net, int node, double beta, int mc_samples, Rng& rng, GradientMode mode,
                      int max_halvings) {
  const Node& n = net.nodes().at(node);
  if (n.observed) throw ShapeError("cannot update observed node " + n.name);
  const Moments mu = net.moments();
  NodeState out;
  out.target.setZero();
  for (int a : net.factors_of(node)) {
    const auto& f = *net.factors()[a];
    out.target += f.message(node, mu);
    if (auto h = f.nonconjugate(node, mu)) out.target += mean_gradient(*h, n.q, mode, mc_samples, rng).g;
  }
  double b = beta;
  for (int k = 0; k <= max_halvings; ++k) {
    NatParams trial{n.family, (1.0 - b) * n.q.values + b * out.target};
    if (b == 1.0) trial.values = out.target;
    if (trial.values.allFinite() && in_domain(trial)) {
      out.lambda = std::move(trial);
      out.guard_halvings = k;
      return out;
    }
    b *= 0.5;
  }
  out.lambda = n.q;
  out.guard_halvings = max_halvings;
  out.degenerate = true;
  return out;
}

NatParams ncvmp_step(const BayesNet& net, int node) {
  const Node& n = net.nodes().at(node);
  if (n.observed) throw ShapeError("cannot update observed node " + n.name);
  const Moments mu = net.moments();
  const Eigen::MatrixXd C = fisher_info(n.q);
  const Eigen::LLT<Eigen::MatrixXd> llt(C);
  if (llt.info() != Eigen::Success) throw SingularSystemError("Fisher matrix of node " + n.name + " is singular");
  Eigen::Vector2d out = Eigen::Vector2d::Zero();
  for (int a : net.factors_of(node)) {
    const auto& f = *net.factors()[a];
    // grad_lambda E_q <eta, phi(z)> = C eta.
    out += llt.solve(C * f.message(node, mu));
    if (auto h = f.nonconjugate(node, mu)) out += fisher_solve_grad_exact(*h, n.q).g;
  }
  return {n.family, out};
}

MeanfieldResult run_meanfield(BayesNet net, Schedule schedule, const CviConfig& cfg, const MeanfieldHooks& hooks) {
  cfg.validate();
  net.validate();
  const double beta = cfg.schedule.beta();
  const std::vector<int> latent = net.latent_nodes();
  if (schedule == Schedule::kDoublyStochastic) {
    if (!cfg.minibatch) throw ConfigError("doubly-stochastic schedule needs a minibatch size");
    if (*cfg.minibatch > static_cast<int>(latent.size())) throw ConfigError("minibatch larger than the node count");
  }
  MeanfieldResult out{std::move(net), {}};
  BayesNet& g = out.net;
  const auto start = Clock::now();
  const Rng unused(0);

  for (int t = 1; t <= cfg.max_iters; ++t) {
    Rng rng = cfg.gradient == GradientMode::kMonteCarlo
                  ? Rng::derive(cfg.seed, Stream::kMonteCarlo, static_cast<std::uint64_t>(t))
                  : unused;
    std::vector<int> order = latent;
    if (schedule == Schedule::kDoublyStochastic) {
      Rng pick = Rng::derive(cfg.seed, Stream::kMinibatch, static_cast<std::uint64_t>(t));
      order.clear();
      for (std::size_t k : pick.sample_without_replacement(latent.size(), static_cast<std::size_t>(*cfg.minibatch)))
        order.push_back(latent[k]);
    }
    TraceRow row;
    row.iter = t;
    row.effective_beta = beta;
    try {
      std::vector<NodeState> pending;
      for (int i : order) {
        NodeState s = node_update(g, i, beta, cfg.mc_samples, rng, cfg.gradient, cfg.guard_max_halvings);
        row.guard_halvings += s.guard_halvings;
        row.degenerate = row.degenerate || s.degenerate;
        if (schedule == Schedule::kParallel) {
          pending.push_back(std::move(s));
        } else {
          g.nodes()[i].q = std::move(s.lambda);
        }
      }
      for (std::size_t k = 0; k < pending.size(); ++k) g.nodes()[order[k]].q = std::move(pending[k].lambda);
    } catch (const NumericError& e) {
      throw IterationError(t, e.what());
    }
    row.neg_elbo = hooks.compute_elbo ? -g.elbo() : std::numeric_limits<double>::quiet_NaN();
    if (hooks.on_iteration) hooks.on_iteration(t, g, row);
    row.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.trace.rows.push_back(row);
    if (stop_criterion_met(out.trace, cfg)) break;
  }
  return out;
}

namespace {

BayesNet chain_skeleton(int horizon, double sigma2) {
  if (horizon < 1) throw ShapeError("chain needs T >= 1");
  BayesNet net;
  for (int k = 0; k <= horizon; ++k) net.add_latent("z" + std::to_string(k), gaussian_scalar(0.0, 1.0));
  net.add_factor(std::make_shared<GaussianFactor>(0, 0.0, 1.0));
  for (int k = 1; k <= horizon; ++k) net.add_factor(std::make_shared<GaussianChainFactor>(k - 1, k, sigma2));
  return net;
}

}  // namespace

BayesNet gaussian_chain_net(const Eigen::VectorXd& y, double sigma2, double noise_var) {
  BayesNet net = chain_skeleton(static_cast<int>(y.size()), sigma2);
  for (int k = 1; k <= y.size(); ++k) net.add_factor(std::make_shared<GaussianFactor>(k, y[k - 1], noise_var));
  return net;
}

BayesNet logit_chain_net(const Eigen::VectorXd& y, double sigma2) {
  BayesNet net = chain_skeleton(static_cast<int>(y.size()), sigma2);
  for (int k = 1; k <= y.size(); ++k)
    net.add_factor(std::make_shared<LikelihoodFactor>(k, Likelihood::kBernoulliLogit, y[k - 1]));
  return net;
}

BayesNet gamma_shape_net(double y, double a, double b) {
  BayesNet net;
  const int z = net.add_latent("z", gamma_dist(a, b));
  net.add_factor(std::make_shared<GammaFactor>(z, a, b));
  net.add_factor(std::make_shared<LikelihoodFactor>(z, Likelihood::kGammaShape, y));
  return net;
}

}  // namespace cvi::mf
