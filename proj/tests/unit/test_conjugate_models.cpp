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

#include <cmath>
#include <random>

#include "cvi/conjugate_models.hpp"
#include "cvi/errors.hpp"
#include "doctest.h"
#include "unit/oracle_helpers.hpp"

using namespace cvi;
using doctest::Approx;

namespace {

// Dense oracle: posterior of N(0, Sigma0) times exp(sum_n lam1 u_n + lam2 u_n^2)
// with u = A z, by forming the precision explicitly.
struct Dense {
  Eigen::VectorXd m;
  Eigen::MatrixXd V;
  double kl;
};

Dense dense_posterior(const Eigen::MatrixXd& Sigma0, const Eigen::MatrixXd& A, const Sites& s) {
  const int d = static_cast<int>(Sigma0.rows());
  Eigen::MatrixXd P0 = Sigma0.inverse();
  Eigen::MatrixXd P = P0 + A.transpose() * (-2.0 * s.row(1).transpose()).asDiagonal() * A;
  Dense out;
  out.V = P.inverse();
  out.m = out.V * (A.transpose() * s.row(0).transpose());
  out.kl = 0.5 * ((P0 * out.V).trace() + out.m.dot(P0 * out.m) - d + std::log(Sigma0.determinant()) -
                  std::log(out.V.determinant()));
  return out;
}

Sites random_sites(std::mt19937_64& g, int n, double neg_frac = 0.0) {
  std::uniform_real_distribution<double> u(0, 1);
  Sites s(2, n);
  for (int i = 0; i < n; ++i) {
    s(0, i) = 2 * u(g) - 1;
    s(1, i) = -0.5 * u(g) - 0.05;
    if (u(g) < neg_frac) s(1, i) = 0.05 * u(g);
  }
  return s;
}

Eigen::MatrixXd random_kernel(std::mt19937_64& g, int n) {
  std::normal_distribution<double> nd;
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x[i] = 2 * nd(g);
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = 1.5 * std::exp(-0.5 * (x[i] - x[j]) * (x[i] - x[j])) + (i == j ? 0.1 : 0.0);
  return K;
}

}  // namespace

TEST_CASE("linreg posterior") {
  LinRegSpec spec{Eigen::MatrixXd::Ones(1, 1), 1.0};
  Sites none = Sites::Zero(2, 1);
  auto p = linreg_summary(spec, none);
  CHECK(p.latent_mean[0] == 0.0);
  CHECK(p.site_var[0] == Approx(1.0));
  CHECK(p.kl_to_prior == Approx(0.0).scale(1));

  Sites one(2, 1);
  one << 1, -0.5;
  p = linreg_summary(spec, one);
  CHECK(p.latent_mean[0] == Approx(0.5));
  CHECK(p.site_var[0] == Approx(0.5));
  auto full = linreg_posterior(spec, one);
  auto [m, V] = moment_form(full);
  CHECK(m[0] == Approx(0.5));
  CHECK(V(0, 0) == Approx(0.5));

  // Prior only for a wider design: N(0, delta I).
  LinRegSpec wide{Eigen::MatrixXd::Random(4, 3), 2.5};
  auto q = linreg_posterior(wide, Sites::Zero(2, 4));
  auto [m0, V0] = moment_form(q);
  CHECK(m0.norm() < 1e-15);
  CHECK((V0 - 2.5 * Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("linreg primal and dual paths agree on N=5, D=50") {
  std::mt19937_64 g(3);
  std::normal_distribution<double> nd;
  Eigen::MatrixXd X(5, 51);
  for (int i = 0; i < 5; ++i) {
    X(i, 0) = 1.0;
    for (int j = 1; j < 51; ++j) X(i, j) = nd(g);
  }
  LinRegSpec spec{X, 0.7};
  Sites s = random_sites(g, 5);
  auto dual = linreg_summary(spec, s);
  auto primal = linreg_summary(spec, s, true);
  CHECK(dual.dual_path);
  CHECK_FALSE(primal.dual_path);
  CHECK((dual.site_mean - primal.site_mean).norm() < 1e-8);
  CHECK((dual.site_var - primal.site_var).norm() < 1e-8);
  CHECK((dual.latent_mean - primal.latent_mean).norm() < 1e-8);
  CHECK(dual.kl_to_prior == Approx(primal.kl_to_prior).epsilon(1e-8));
  auto d = dense_posterior(0.7 * Eigen::MatrixXd::Identity(51, 51), X, s);
  CHECK((d.m - primal.latent_mean).norm() < 1e-8);
  CHECK(d.kl == Approx(primal.kl_to_prior).epsilon(1e-8));

  // A negative site precision falls back to the primal path.
  s(1, 2) = 0.01;
  CHECK_FALSE(linreg_summary(spec, s).dual_path);
}

TEST_CASE("gp marginals") {
  GpSpec prior{Eigen::MatrixXd::Identity(2, 2)};
  auto mg = gp_marginals(prior, Sites::Zero(2, 2));
  CHECK(mg.mean.norm() == 0.0);
  CHECK(mg.var[0] == Approx(1.0));
  Sites s = Sites::Zero(2, 2);
  s(0, 0) = 1.0;
  s(1, 0) = -0.5;
  mg = gp_marginals(prior, s);
  CHECK(mg.mean[0] == Approx(0.5));
  CHECK(mg.var[0] == Approx(0.5));
  CHECK(std::abs(mg.mean[1]) < 1e-15);
  CHECK(mg.var[1] == Approx(1.0));
  auto q = gp_marginals(prior, s, {1});
  CHECK(q.var.size() == 1);
  CHECK(q.var[0] == Approx(1.0));

  std::mt19937_64 g(4);
  for (double neg : {0.0, 0.3}) {
    Eigen::MatrixXd K = random_kernel(g, 10);
    Sites r = random_sites(g, 10, neg);
    auto p = gp_summary({K}, r);
    auto d = dense_posterior(K, Eigen::MatrixXd::Identity(10, 10), r);
    CHECK((p.site_mean - d.m).norm() < 1e-8);
    CHECK((p.site_var - d.V.diagonal()).norm() < 1e-8);
    CHECK(p.kl_to_prior == Approx(d.kl).epsilon(1e-8));
  }
}

TEST_CASE("linreg with identity design equals gp with delta I") {
  std::mt19937_64 g(5);
  Sites s = random_sites(g, 6);
  const double delta = 1.7;
  auto a = linreg_summary({Eigen::MatrixXd::Identity(6, 6), delta}, s);
  auto b = gp_summary({delta * Eigen::MatrixXd::Identity(6, 6)}, s);
  CHECK((a.site_mean - b.site_mean).norm() < 1e-9);
  CHECK((a.site_var - b.site_var).norm() < 1e-9);
  CHECK(a.kl_to_prior == Approx(b.kl_to_prior).epsilon(1e-9));
}

TEST_CASE("kalman marginals") {
  KalmanSpec spec{1, 0.3};
  auto mg = kalman_marginals(spec, Sites::Zero(2, 1));
  CHECK(mg.var[0] == Approx(1.0));
  CHECK(mg.var[1] == Approx(1.3));
  CHECK(mg.mean.norm() == 0.0);

  // One site on z_1 ~ N(0, 1.3): complete the square.
  Sites s(2, 1);
  s << 0.8, -0.6;
  mg = kalman_marginals(spec, s);
  const double prec = 1 / 1.3 + 1.2;
  CHECK(mg.var[1] == Approx(1 / prec));
  CHECK(mg.mean[1] == Approx(0.8 / prec));

  std::mt19937_64 g(6);
  for (int T = 1; T <= 8; ++T) {
    KalmanSpec k{T, 0.45};
    Sites r = random_sites(g, T);
    auto km = kalman_marginals(k, r);
    Eigen::MatrixXd Kc = chain_covariance(T, 0.45);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(T, T + 1);
    A.rightCols(T) = Eigen::MatrixXd::Identity(T, T);
    auto d = dense_posterior(Kc, A, r);
    CHECK((km.mean - d.m).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((km.var - d.V.diagonal()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(kalman_summary(k, r).kl_to_prior == Approx(d.kl).epsilon(1e-9));
    // Same model through the GP backend on z_1..z_T.
    auto gp = gp_summary({Kc.bottomRightCorner(T, T)}, r);
    CHECK((gp.site_mean - km.mean.tail(T)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((gp.site_var - km.var.tail(T)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("gamma posterior") {
  GammaPriorSpec spec{2, 3};
  auto q = gamma_posterior(spec, Eigen::Vector2d(0, 0));
  auto [a, b] = gamma_shape_rate(q);
  CHECK(a == 2.0);
  CHECK(b == 3.0);
  std::tie(a, b) = gamma_shape_rate(gamma_posterior(spec, Eigen::Vector2d(-1, 1)));
  CHECK(a == 3.0);
  CHECK(b == 4.0);
  CHECK_THROWS_AS(gamma_posterior(spec, Eigen::Vector2d(3.5, 0)), DomainError);
  CHECK_THROWS_AS(gamma_posterior(spec, Eigen::Vector2d(0, -2.5)), DomainError);

  // Normalize prior * exp(site) on a grid and compare moments.
  const Eigen::Vector2d site(0.7, -0.4);
  auto dens = [&](double z) {
    return z <= 0 ? 0.0 : std::exp((spec.a - 1) * std::log(z) - spec.b * z + site[0] * z + site[1] * std::log(z));
  };
  const double Z = oracle::simpson(dens, 0, 60, 600000);
  const double mean = oracle::simpson([&](double z) { return z * dens(z); }, 0, 60, 600000) / Z;
  std::tie(a, b) = gamma_shape_rate(gamma_posterior(spec, site));
  CHECK(a / b == Approx(mean).epsilon(1e-7));
}

TEST_CASE("out-of-domain sites raise DomainError") {
  Sites s(2, 1);
  s << 0, 2.0;
  CHECK_THROWS_AS(linreg_summary({Eigen::MatrixXd::Ones(1, 1), 1.0}, s), DomainError);
  CHECK_THROWS_AS(gp_summary({Eigen::MatrixXd::Identity(1, 1)}, s), DomainError);
  CHECK_THROWS_AS(kalman_summary({1, 1.0}, s), DomainError);
  CHECK_THROWS_AS(linreg_summary({Eigen::MatrixXd::Ones(1, 1), 1.0}, Sites::Zero(2, 3)), ShapeError);
}
