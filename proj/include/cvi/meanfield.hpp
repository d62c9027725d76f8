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

// Mean-field CVI over a Bayesian network of scalar nodes. Each factor sends a
// conjugate message to each neighbor and may carry a non-conjugate part whose
// mean-parameter gradient is added to that message.

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cvi/cvi.hpp"
#include "cvi/expfam.hpp"
#include "cvi/gradients.hpp"

namespace cvi::mf {

struct Node {
  std::string name;
  FamilyKind family = FamilyKind::gaussian_scalar();
  /// Current q_i; ignored for observed nodes.
  NatParams q;
  std::optional<double> observed;
};

/// Expectations E_q[phi(z_i)] of every node; observed nodes contribute
/// phi(x) itself.
using Moments = std::vector<Eigen::Vector2d>;

class Factor {
 public:
  explicit Factor(std::vector<int> neighbors) : neighbors_(std::move(neighbors)) {}
  virtual ~Factor() = default;

  const std::vector<int>& neighbors() const { return neighbors_; }

  /// Family the factor expects at `node`.
  virtual FamilyKind family_at(int node) const = 0;
  /// Conjugate message eta~_{a,i}: expectations over the other neighbors.
  virtual Eigen::Vector2d message(int node, const Moments& mu) const = 0;
  /// Non-conjugate part as a function of z_node, if any.
  virtual std::optional<ScalarFunction> nonconjugate(int /*node*/, const Moments& /*mu*/) const {
    return std::nullopt;
  }
  /// E_q log p(x_a | x_pa(a)).
  virtual double expected_log(const std::vector<Node>& nodes, const Moments& mu) const = 0;

 private:
  std::vector<int> neighbors_;
};

/// N(z_i | mean, var); also serves as a Gaussian observation of z_i.
class GaussianFactor : public Factor {
 public:
  GaussianFactor(int node, double mean, double var);
  FamilyKind family_at(int) const override { return FamilyKind::gaussian_scalar(); }
  Eigen::Vector2d message(int node, const Moments& mu) const override;
  double expected_log(const std::vector<Node>& nodes, const Moments& mu) const override;

 private:
  double mean_, var_;
};

/// N(z_to | z_from, var).
class GaussianChainFactor : public Factor {
 public:
  GaussianChainFactor(int from, int to, double var);
  FamilyKind family_at(int) const override { return FamilyKind::gaussian_scalar(); }
  Eigen::Vector2d message(int node, const Moments& mu) const override;
  double expected_log(const std::vector<Node>& nodes, const Moments& mu) const override;

 private:
  double var_;
};

/// Ga(z_i | a, b), rate b.
class GammaFactor : public Factor {
 public:
  GammaFactor(int node, double a, double b);
  FamilyKind family_at(int) const override { return FamilyKind::gamma(); }
  Eigen::Vector2d message(int node, const Moments& mu) const override;
  double expected_log(const std::vector<Node>& nodes, const Moments& mu) const override;

 private:
  double a_, b_;
};

/// A single-node likelihood from the models module (logit, probit,
/// gamma-shape, Gaussian). Its whole contribution is non-conjugate.
class LikelihoodFactor : public Factor {
 public:
  LikelihoodFactor(int node, Likelihood kind, double y, double noise_var = 1.0);
  FamilyKind family_at(int) const override;
  Eigen::Vector2d message(int, const Moments&) const override { return Eigen::Vector2d::Zero(); }
  std::optional<ScalarFunction> nonconjugate(int node, const Moments& mu) const override;
  double expected_log(const std::vector<Node>& nodes, const Moments& mu) const override;

 private:
  NonConjugateFactor factor_;
};

class BayesNet {
 public:
  /// Latent node initialized at `init`.
  int add_latent(std::string name, const NatParams& init);
  int add_observed(std::string name, FamilyKind family, double value);
  void add_factor(std::shared_ptr<const Factor> factor);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<std::shared_ptr<const Factor>>& factors() const { return factors_; }
  /// Indices of the factors touching node i.
  const std::vector<int>& factors_of(int i) const { return adjacency_.at(i); }
  std::vector<int> latent_nodes() const;

  Moments moments() const;
  /// Sum of expected log factors plus the entropies of the latent nodes.
  double elbo() const;
  void validate() const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::shared_ptr<const Factor>> factors_;
  std::vector<std::vector<int>> adjacency_;
};

/// Message eta~_{a,i} from factor a to node i under the current q.
Eigen::Vector2d conjugate_message(const BayesNet& net, int factor, int node);

struct NodeState {
  NatParams lambda;
  /// Message sum lambda~_{i,t}.
  Eigen::Vector2d target;
  int guard_halvings = 0;
  bool degenerate = false;
};

/// One guarded CVI update of node i against the current net (not committed).
NodeState node_update(const BayesNet& net, int node, double beta, int mc_samples, Rng& rng,
                      GradientMode mode = GradientMode::kMonteCarlo, int max_halvings = 30);

/// NC-VMP update: sum_a C^{-1} grad_lambda E_q log p_a, with the conjugate
/// parts pushed through the Fisher matrix explicitly.
NatParams ncvmp_step(const BayesNet& net, int node);

enum class Schedule { kSequential, kParallel, kDoublyStochastic };

struct MeanfieldHooks {
  bool compute_elbo = true;
  std::function<void(int iter, const BayesNet& net, TraceRow& row)> on_iteration;
};

struct MeanfieldResult {
  BayesNet net;
  RunTrace trace;
};

/// One iteration is a sweep over the latent nodes (sequential or
/// synchronous), or over a sample of cfg.minibatch nodes.
MeanfieldResult run_meanfield(BayesNet net, Schedule schedule, const CviConfig& cfg,
                              const MeanfieldHooks& hooks = {});

// Demo nets. Node 0 is z_0 ~ N(0, 1); z_k | z_{k-1} ~ N(z_{k-1}, sigma2).
BayesNet gaussian_chain_net(const Eigen::VectorXd& y, double sigma2, double noise_var);
BayesNet logit_chain_net(const Eigen::VectorXd& y, double sigma2);
BayesNet gamma_shape_net(double y, double a, double b);

}  // namespace cvi::mf
