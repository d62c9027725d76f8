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

#include "cvi/conjugate_models.hpp"

#include <cmath>

#include "cvi/errors.hpp"
#include "cvi/linalg.hpp"

namespace cvi {

namespace {

using linalg::Jitter;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_sites(const Sites& sites, int expected, const char* what) {
  if (sites.cols() != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) + " sites, got " +
                     std::to_string(sites.cols()));
  }
  if (!sites.allFinite()) throw DomainError(std::string(what) + ": non-finite site parameters");
}

Eigen::VectorXd site_precisions(const Sites& sites) { return -2.0 * sites.row(1).transpose(); }

Posterior linreg_primal(const LinRegSpec& spec, const Sites& sites) {
  const auto& X = spec.design;
  const int D = static_cast<int>(X.cols());
  const Eigen::VectorXd tau = site_precisions(sites);
  Eigen::MatrixXd P = X.transpose() * tau.asDiagonal() * X;
  P.diagonal().array() += 1.0 / spec.delta;
  const auto llt = linalg::cholesky(P, Jitter::kOnce, "linreg posterior precision");
  Posterior out;
  out.site_family = FamilyKind::gaussian_scalar();
  out.latent_mean = llt.solve(X.transpose() * sites.row(0).transpose());
  out.site_mean = X * out.latent_mean;
  const Eigen::MatrixXd W = llt.matrixL().solve(X.transpose());
  out.site_var = W.colwise().squaredNorm().transpose();
  const Eigen::MatrixXd Linv = llt.matrixL().solve(Eigen::MatrixXd::Identity(D, D));
  const double trV = Linv.squaredNorm();
  const double logdetV = -linalg::log_det(llt);
  out.kl_to_prior = 0.5 * (trV / spec.delta + out.latent_mean.squaredNorm() / spec.delta - D +
                           D * std::log(spec.delta) - logdetV);
  return out;
}

// Matrix-inversion-lemma path for N < D, valid when every site precision is
// non-negative: V = delta I - delta^2 X' S B^{-1} S X with B = I + delta S G S,
// G = X X', S = diag(sqrt(tau)).
Posterior linreg_dual(const LinRegSpec& spec, const Sites& sites) {
  const auto& X = spec.design;
  const int N = static_cast<int>(X.rows());
  const double delta = spec.delta;
  const Eigen::VectorXd s = site_precisions(sites).cwiseSqrt();
  const Eigen::MatrixXd G = X * X.transpose();
  const Eigen::MatrixXd SG = s.asDiagonal() * G;
  Eigen::MatrixXd B = delta * SG * s.asDiagonal();
  B.diagonal().array() += 1.0;
  const auto llt = linalg::cholesky(B, Jitter::kOnce, "linreg dual system");
  const Eigen::VectorXd lam1 = sites.row(0).transpose();
  const Eigen::VectorXd a = G * lam1;
  const Eigen::VectorXd corr = s.asDiagonal() * llt.solve(s.asDiagonal() * a);
  Posterior out;
  out.site_family = FamilyKind::gaussian_scalar();
  out.dual_path = true;
  out.site_mean = delta * a - delta * delta * G * corr;
  const Eigen::MatrixXd Q = llt.matrixL().solve(SG);
  out.site_var = delta * G.diagonal() - delta * delta * Q.colwise().squaredNorm().transpose();
  out.latent_mean = delta * X.transpose() * (lam1 - delta * corr);
  const double trBinv = linalg::inverse(llt).trace();
  out.kl_to_prior = 0.5 * (trBinv - N + out.latent_mean.squaredNorm() / delta + linalg::log_det(llt));
  return out;
}

struct KalmanPass {
  Marginals marginals;
  double log_z = 0.0;
};

// Forward filter in information form, then Rauch-Tung-Striebel smoothing.
KalmanPass kalman_smooth(const KalmanSpec& spec, const Sites& sites) {
  validate(spec);
  const int T = spec.horizon;
  check_sites(sites, T, "kalman");
  Eigen::VectorXd mf(T + 1), vf(T + 1), pred_m(T + 1), pred_v(T + 1);
  KalmanPass out;
  for (int k = 0; k <= T; ++k) {
    const double a = k == 0 ? 0.0 : mf[k - 1];
    const double p = k == 0 ? 1.0 : vf[k - 1] + spec.sigma2;
    pred_m[k] = a;
    pred_v[k] = p;
    if (k == 0) {
      mf[k] = a;
      vf[k] = p;
      continue;
    }
    const double l1 = sites(0, k - 1), l2 = sites(1, k - 1);
    const double prec = 1.0 / p - 2.0 * l2;
    if (!(prec > 0.0) || !std::isfinite(prec)) {
      throw DomainError("kalman: non-positive filtered precision at time " + std::to_string(k));
    }
    const double h = a / p + l1;
    vf[k] = 1.0 / prec;
    mf[k] = h * vf[k];
    out.log_z += -0.5 * std::log(p * prec) - 0.5 * a * a / p + 0.5 * h * h / prec;
  }
  Eigen::VectorXd ms = mf, vs = vf;
  for (int k = T - 1; k >= 0; --k) {
    const double g = vf[k] / pred_v[k + 1];
    ms[k] = mf[k] + g * (ms[k + 1] - pred_m[k + 1]);
    vs[k] = vf[k] + g * g * (vs[k + 1] - pred_v[k + 1]);
  }
  if (!(vs.minCoeff() > 0.0)) throw DomainError("kalman: non-positive smoothed variance");
  out.marginals.mean = ms;
  out.marginals.var = vs;
  return out;
}

}  // namespace

int site_count(const ConjugateModelSpec& spec) {
  return std::visit(Overloaded{[](const LinRegSpec& s) { return static_cast<int>(s.design.rows()); },
                               [](const GpSpec& s) { return static_cast<int>(s.kernel.rows()); },
                               [](const KalmanSpec& s) { return s.horizon; },
                               [](const GammaPriorSpec&) { return 1; }},
                    spec);
}

FamilyKind site_family(const ConjugateModelSpec& spec) {
  return std::holds_alternative<GammaPriorSpec>(spec) ? FamilyKind::gamma() : FamilyKind::gaussian_scalar();
}

void validate(const ConjugateModelSpec& spec) {
  std::visit(Overloaded{[](const LinRegSpec& s) {
                          if (!(s.delta > 0.0) || !std::isfinite(s.delta)) throw DomainError("linreg: delta must be > 0");
                          if (s.design.cols() < 1) throw ShapeError("linreg: design needs at least the bias column");
                          if (!s.design.allFinite()) throw DomainError("linreg: non-finite design entries");
                        },
                        [](const GpSpec& s) {
                          if (s.kernel.rows() != s.kernel.cols()) throw ShapeError("gp: kernel must be square");
                          if (!s.kernel.allFinite()) throw DomainError("gp: non-finite kernel entries");
                          if (s.kernel.size() == 0) return;
                          const double asym = (s.kernel - s.kernel.transpose()).cwiseAbs().maxCoeff();
                          if (asym > 1e-12 * s.kernel.cwiseAbs().maxCoeff()) {
                            throw DomainError("gp: kernel must be symmetric");
                          }
                        },
                        [](const KalmanSpec& s) {
                          if (s.horizon < 1) throw ShapeError("kalman: horizon must be >= 1");
                          if (!(s.sigma2 > 0.0)) throw DomainError("kalman: sigma2 must be > 0");
                        },
                        [](const GammaPriorSpec& s) {
                          if (!(s.a > 0.0) || !(s.b > 0.0)) throw DomainError("gamma prior: a, b must be > 0");
                        }},
             spec);
}

NatParams Posterior::site_marginal(int n) const {
  if (site_family.tag == Family::kGamma) return gamma;
  if (!(site_var[n] > 0.0)) throw DomainError("non-positive marginal variance at site " + std::to_string(n));
  return gaussian_scalar(site_mean[n], site_var[n]);
}

Posterior conjugate_posterior(const ConjugateModelSpec& spec, const Sites& sites) {
  return std::visit(
      Overloaded{[&](const LinRegSpec& s) { return linreg_summary(s, sites); },
                 [&](const GpSpec& s) { return gp_summary(s, sites); },
                 [&](const KalmanSpec& s) { return kalman_summary(s, sites); },
                 [&](const GammaPriorSpec& s) {
                   check_sites(sites, 1, "gamma");
                   Posterior out;
                   out.site_family = FamilyKind::gamma();
                   out.gamma = gamma_posterior(s, sites.col(0));
                   auto [a, b] = gamma_shape_rate(out.gamma);
                   out.latent_mean = Eigen::VectorXd::Constant(1, a / b);
                   out.kl_to_prior = kl(out.gamma, gamma_dist(s.a, s.b));
                   return out;
                 }},
      spec);
}

NatParams linreg_posterior(const LinRegSpec& spec, const Sites& sites) {
  check_sites(sites, static_cast<int>(spec.design.rows()), "linreg");
  const auto& X = spec.design;
  Eigen::MatrixXd P = X.transpose() * site_precisions(sites).asDiagonal() * X;
  P.diagonal().array() += 1.0 / spec.delta;
  return gaussian_full_from_precision(X.transpose() * sites.row(0).transpose(), P);
}

Posterior linreg_summary(const LinRegSpec& spec, const Sites& sites, bool force_primal) {
  validate(spec);
  check_sites(sites, static_cast<int>(spec.design.rows()), "linreg");
  const bool nonneg = sites.cols() == 0 || sites.row(1).maxCoeff() <= 0.0;
  if (!force_primal && spec.design.rows() < spec.design.cols() && nonneg) return linreg_dual(spec, sites);
  return linreg_primal(spec, sites);
}

Posterior gp_summary(const GpSpec& spec, const Sites& sites) {
  validate(spec);
  const auto& K = spec.kernel;
  const int N = static_cast<int>(K.rows());
  check_sites(sites, N, "gp");
  const Eigen::VectorXd tau = site_precisions(sites);
  const Eigen::VectorXd lam1 = sites.row(0).transpose();
  Posterior out;
  out.site_family = FamilyKind::gaussian_scalar();
  if (N == 0) return out;
  if (tau.minCoeff() >= 0.0) {
    // Pseudo-observation form: B = I + S K S, V = K - K S B^{-1} S K.
    const Eigen::VectorXd s = tau.cwiseSqrt();
    const Eigen::MatrixXd SK = s.asDiagonal() * K;
    Eigen::MatrixXd B = SK * s.asDiagonal();
    B.diagonal().array() += 1.0;
    const auto llt = linalg::cholesky(B, Jitter::kOnce, "gp site system");
    const Eigen::VectorXd Kl = K * lam1;
    const Eigen::VectorXd corr = s.asDiagonal() * llt.solve(s.asDiagonal() * Kl);
    out.latent_mean = Kl - K * corr;
    const Eigen::MatrixXd Q = llt.matrixL().solve(SK);
    out.site_var = K.diagonal() - Q.colwise().squaredNorm().transpose();
    const Eigen::VectorXd a = lam1 - corr;  // K^{-1} m
    out.kl_to_prior =
        0.5 * (linalg::inverse(llt).trace() - N + out.latent_mean.dot(a) + linalg::log_det(llt));
  } else {
    // Some site precisions are negative: congruence with K = L L',
    // V = L M^{-1} L', M = I + L' T L.
    const auto lk = linalg::cholesky(K, Jitter::kOnce, "gp kernel");
    const Eigen::MatrixXd L = lk.matrixL();
    Eigen::MatrixXd M = L.transpose() * tau.asDiagonal() * L;
    M.diagonal().array() += 1.0;
    const auto lm = linalg::cholesky(M, Jitter::kOnce, "gp site system");
    const Eigen::VectorXd w = lm.solve(L.transpose() * lam1);
    out.latent_mean = L * w;
    const Eigen::MatrixXd Q = lm.matrixL().solve(L.transpose());
    out.site_var = Q.colwise().squaredNorm().transpose();
    out.kl_to_prior = 0.5 * (linalg::inverse(lm).trace() + w.squaredNorm() - N + linalg::log_det(lm));
  }
  out.site_mean = out.latent_mean;
  if (!(out.site_var.minCoeff() > 0.0)) throw DomainError("gp: non-positive posterior variance");
  return out;
}

Marginals linreg_predict(const LinRegSpec& spec, const Sites& sites, const Eigen::MatrixXd& Xq) {
  validate(spec);
  const auto& X = spec.design;
  check_sites(sites, static_cast<int>(X.rows()), "linreg");
  if (Xq.cols() != X.cols()) throw ShapeError("linreg_predict: query width does not match the design");
  const bool nonneg = sites.cols() == 0 || sites.row(1).maxCoeff() <= 0.0;
  Marginals out;
  if (X.rows() < X.cols() && nonneg) {
    const Posterior p = linreg_dual(spec, sites);
    const double delta = spec.delta;
    const Eigen::VectorXd s = site_precisions(sites).cwiseSqrt();
    Eigen::MatrixXd B = delta * s.asDiagonal() * (X * X.transpose()) * s.asDiagonal();
    B.diagonal().array() += 1.0;
    const auto llt = linalg::cholesky(B, Jitter::kOnce, "linreg dual system");
    const Eigen::MatrixXd Q = llt.matrixL().solve(s.asDiagonal() * (X * Xq.transpose()));
    out.mean = Xq * p.latent_mean;
    out.var = delta * Xq.rowwise().squaredNorm() - delta * delta * Q.colwise().squaredNorm().transpose();
  } else {
    const Eigen::VectorXd tau = site_precisions(sites);
    Eigen::MatrixXd P = X.transpose() * tau.asDiagonal() * X;
    P.diagonal().array() += 1.0 / spec.delta;
    const auto llt = linalg::cholesky(P, Jitter::kOnce, "linreg posterior precision");
    out.mean = Xq * llt.solve(X.transpose() * sites.row(0).transpose());
    out.var = llt.matrixL().solve(Xq.transpose()).colwise().squaredNorm().transpose();
  }
  if (Xq.rows() > 0 && !(out.var.minCoeff() > 0.0)) throw DomainError("linreg_predict: non-positive variance");
  return out;
}

Marginals gp_predict(const GpSpec& spec, const Sites& sites, const Eigen::MatrixXd& cross,
                     const Eigen::VectorXd& self_var) {
  validate(spec);
  const auto& K = spec.kernel;
  const int N = static_cast<int>(K.rows());
  check_sites(sites, N, "gp");
  if (cross.cols() != N || cross.rows() != self_var.size()) throw ShapeError("gp_predict: shape mismatch");
  const Eigen::VectorXd tau = site_precisions(sites);
  const Eigen::VectorXd lam1 = sites.row(0).transpose();
  Marginals out;
  if (N == 0) {
    out.mean = Eigen::VectorXd::Zero(self_var.size());
    out.var = self_var;
    return out;
  }
  if (tau.minCoeff() >= 0.0) {
    const Eigen::VectorXd s = tau.cwiseSqrt();
    Eigen::MatrixXd B = s.asDiagonal() * K * s.asDiagonal();
    B.diagonal().array() += 1.0;
    const auto llt = linalg::cholesky(B, Jitter::kOnce, "gp site system");
    const Eigen::VectorXd corr = s.asDiagonal() * llt.solve(s.asDiagonal() * (K * lam1));
    out.mean = cross * (lam1 - corr);
    const Eigen::MatrixXd Q = llt.matrixL().solve(s.asDiagonal() * cross.transpose());
    out.var = self_var - Q.colwise().squaredNorm().transpose();
  } else {
    const auto lk = linalg::cholesky(K, Jitter::kOnce, "gp kernel");
    const Eigen::MatrixXd L = lk.matrixL();
    Eigen::MatrixXd M = L.transpose() * tau.asDiagonal() * L;
    M.diagonal().array() += 1.0;
    const auto lm = linalg::cholesky(M, Jitter::kOnce, "gp site system");
    const Eigen::VectorXd w = lm.solve(L.transpose() * lam1);
    // K^{-1} m = L^{-T} w.
    const Eigen::MatrixXd C = lk.matrixL().solve(cross.transpose());
    out.mean = C.transpose() * w;
    out.var = self_var - C.colwise().squaredNorm().transpose() +
              lm.matrixL().solve(C).colwise().squaredNorm().transpose();
  }
  if (!(out.var.minCoeff() > 0.0)) throw DomainError("gp_predict: non-positive predictive variance");
  return out;
}

Marginals gp_marginals(const GpSpec& spec, const Sites& sites, const std::vector<int>& query) {
  const Posterior p = gp_summary(spec, sites);
  Marginals out;
  if (query.empty()) {
    out.mean = p.site_mean;
    out.var = p.site_var;
    return out;
  }
  out.mean.resize(static_cast<int>(query.size()));
  out.var.resize(static_cast<int>(query.size()));
  for (std::size_t i = 0; i < query.size(); ++i) {
    const int n = query[i];
    if (n < 0 || n >= p.site_mean.size()) throw ShapeError("gp_marginals: query index out of range");
    out.mean[i] = p.site_mean[n];
    out.var[i] = p.site_var[n];
  }
  return out;
}

Marginals kalman_marginals(const KalmanSpec& spec, const Sites& sites) {
  return kalman_smooth(spec, sites).marginals;
}

Posterior kalman_summary(const KalmanSpec& spec, const Sites& sites) {
  const KalmanPass pass = kalman_smooth(spec, sites);
  const auto& ms = pass.marginals.mean;
  const auto& vs = pass.marginals.var;
  const int T = spec.horizon;
  Posterior out;
  out.site_family = FamilyKind::gaussian_scalar();
  out.latent_mean = ms;
  out.site_mean = ms.tail(T);
  out.site_var = vs.tail(T);
  // KL(q || prior) = E_q[sum of site log-terms] - log Z.
  double expected_sites = 0.0;
  for (int k = 1; k <= T; ++k) {
    expected_sites += sites(0, k - 1) * ms[k] + sites(1, k - 1) * (vs[k] + ms[k] * ms[k]);
  }
  out.kl_to_prior = expected_sites - pass.log_z;
  return out;
}

NatParams gamma_posterior(const GammaPriorSpec& spec, const Eigen::Vector2d& site) {
  const double shape = spec.a + site[1];
  const double rate = spec.b - site[0];
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw DomainError("gamma posterior needs a + lambda2 > 0 and b - lambda1 > 0");
  }
  return gamma_dist(shape, rate);
}

Eigen::MatrixXd chain_covariance(int horizon, double sigma2) {
  Eigen::MatrixXd K(horizon + 1, horizon + 1);
  for (int i = 0; i <= horizon; ++i) {
    for (int j = 0; j <= horizon; ++j) K(i, j) = 1.0 + sigma2 * std::min(i, j);
  }
  return K;
}

}  // namespace cvi
