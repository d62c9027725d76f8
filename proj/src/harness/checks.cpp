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

#include "cvi/harness/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "cvi/cvi.hpp"
#include "cvi/expfam.hpp"
#include "cvi/gradients.hpp"
#include "cvi/harness/data.hpp"
#include "cvi/harness/metrics.hpp"
#include "cvi/models.hpp"
#include "cvi/quadrature.hpp"
#include "cvi/random.hpp"

namespace cvi {

namespace {

double rel_err(double a, double b, double floor = 1e-2) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-2) {
  if (a.size() != b.size()) return INFINITY;
  double e = 0.0;
  for (int i = 0; i < a.size(); ++i) e = std::max(e, rel_err(a[i], b[i], floor));
  return e;
}

void add(CheckReport& r, std::string name, double err, double tol) {
  r.checks.push_back({std::move(name), err, tol, std::isfinite(err) && err <= tol});
}

// Runs `body`, recording an exception as an infinite error.
void guarded(CheckReport& r, const std::string& name, double tol, const std::function<double()>& body) {
  double err = INFINITY;
  try {
    err = body();
  } catch (const std::exception&) {
  }
  add(r, name, err, tol);
}

struct Case {
  std::string name;
  ScalarFunction f;
  NatParams q;
};

double log_sig(double z) { return z > 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }
double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<Case> battery() {
  std::vector<Case> out;
  out.push_back({"logit y=1 N(0,1)",
                 {log_sig, [](double z) { return 1 - sig(z); }, [](double z) { return -sig(z) * (1 - sig(z)); }, {}},
                 gaussian_scalar(0, 1)});
  out.push_back({"logit y=0 N(1.5,0.5)",
                 {[](double z) { return log_sig(-z); }, [](double z) { return -sig(z); },
                  [](double z) { return -sig(z) * (1 - sig(z)); }, {}},
                 gaussian_scalar(1.5, 0.5)});
  out.push_back({"sin N(0.3,0.8)",
                 {[](double z) { return std::sin(z); }, [](double z) { return std::cos(z); },
                  [](double z) { return -std::sin(z); }, {}},
                 gaussian_scalar(0.3, 0.8)});
  out.push_back({"cubic N(0.5,1)",
                 {[](double z) { return z * z * z / 10; }, [](double z) { return 0.3 * z * z; },
                  [](double z) { return 0.6 * z; }, {}},
                 gaussian_scalar(0.5, 1.0)});
  out.push_back({"exp N(0,1)",
                 {[](double z) { return std::exp(z / 2); }, [](double z) { return std::exp(z / 2) / 2; },
                  [](double z) { return std::exp(z / 2) / 4; }, {}},
                 gaussian_scalar(0.0, 1.0)});
  out.push_back({"bump N(-0.7,1.7)",
                 {[](double z) { return z * std::exp(-z * z / 4); },
                  [](double z) { return (1 - z * z / 2) * std::exp(-z * z / 4); }, {}, {}},
                 gaussian_scalar(-0.7, 1.7)});
  out.push_back({"gamma-shape y=1.5 Ga(3,2)",
                 {[](double z) { return (z - 1) * std::log(1.5) - 1.5 - std::lgamma(z); }, {}, {}, {}},
                 gamma_dist(3, 2)});
  out.push_back({"log1p Ga(2,1)", {[](double z) { return std::log1p(z); }, {}, {}, {}}, gamma_dist(2, 1)});
  out.push_back({"pow1.5 Ga(4,2)", {[](double z) { return std::pow(z, 1.5); }, {}, {}, {}}, gamma_dist(4, 2)});
  out.push_back({"sqrt Ga(5,3)", {[](double z) { return std::sqrt(z); }, {}, {}, {}}, gamma_dist(5, 3)});
  return out;
}

double quad_expectation(const std::function<double(double)>& f, const MeanParams& mu) {
  const NatParams q = mean_to_nat(mu);
  if (q.family.tag == Family::kGamma) {
    const auto [a, b] = gamma_shape_rate(q);
    return quad::gamma_expectation(f, a, b);
  }
  const auto [m, v] = scalar_moments(q);
  return quad::normal_expectation(f, m, v);
}

// Largest |mean - oracle| / SE over coordinates, from independent replicates.
double z_score(const std::function<Eigen::VectorXd(Rng&)>& estimate, const Eigen::VectorXd& oracle, int reps,
               std::uint64_t seed, std::uint64_t tag) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(oracle.size()), sq = sum;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::derive(seed, {tag, static_cast<std::uint64_t>(r)});
    const Eigen::VectorXd g = estimate(rng);
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const Eigen::VectorXd mean = sum / reps;
  const Eigen::VectorXd var = (sq / reps - mean.cwiseProduct(mean)) * reps / (reps - 1.0);
  double z = 0.0;
  for (int i = 0; i < mean.size(); ++i) {
    const double se = std::sqrt(std::max(var[i], 0.0) / reps);
    const double d = std::abs(mean[i] - oracle[i]);
    z = std::max(z, se > 0 ? d / se : (d < 1e-10 ? 0.0 : INFINITY));
  }
  return z;
}

}  // namespace

bool CheckReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

CheckReport check_gradients(const GradientCheckOptions& opts) {
  CheckReport report;
  std::mt19937_64 gen(opts.seed);

  // Likelihood derivative triples against central differences.
  struct Lik {
    Likelihood kind;
    double y;
    double lo, hi;
  };
  const std::vector<Lik> liks{{Likelihood::kBernoulliLogit, 1, -6, 6},  {Likelihood::kBernoulliLogit, 0, -6, 6},
                              {Likelihood::kBernoulliProbit, 1, -6, 6}, {Likelihood::kBernoulliProbit, 0, -6, 6},
                              {Likelihood::kGammaShape, 1.5, 0.2, 6},   {Likelihood::kGaussian, 0.3, -4, 4}};
  for (const auto& l : liks) {
    const NonConjugateFactor f{0, l.kind, l.y, 0.7};
    const bool flip = opts.inject_sign_flip && l.kind == Likelihood::kBernoulliLogit;
    std::uniform_real_distribution<double> u(l.lo, l.hi);
    double err = 0.0;
    const double h = 1e-5;
    for (int i = 0; i < 20; ++i) {
      const double z = u(gen);
      const LogLik c = loglik_eval(f, z);
      const double d2 = flip ? -c.d2 : c.d2;
      const double fd1 = (loglik_eval(f, z + h).value - loglik_eval(f, z - h).value) / (2 * h);
      const double fd2 = (loglik_eval(f, z + h).d1 - loglik_eval(f, z - h).d1) / (2 * h);
      err = std::max({err, rel_err(c.d1, fd1), rel_err(d2, fd2)});
    }
    char name[96];
    std::snprintf(name, sizeof name, "derivatives %s y=%g", to_string(l.kind).c_str(), l.y);
    add(report, name, err, 1e-6);
  }

  // Integrands linear in the sufficient statistics are recovered exactly.
  {
    const Eigen::Vector2d c(0.7, -0.3);
    const ScalarFunction lin_g{[&](double z) { return c[0] * z + c[1] * z * z; },
                               [&](double z) { return c[0] + 2 * c[1] * z; }, [&](double) { return 2 * c[1]; }, {}};
    const ScalarFunction lin_gamma{[&](double z) { return c[0] * z + c[1] * std::log(z); }, {}, {}, {}};
    Rng rng = Rng::derive(opts.seed, {11});
    double err = 0.0;
    for (int S : {4, 10, 100}) {
      err = std::max(err, rel_err(gauss_grad_mean(lin_g, gaussian_scalar(0.4, 1.3), S, rng).g, c, 1.0));
      err = std::max(err, rel_err(fisher_solve_grad(lin_g, gaussian_scalar(0.4, 1.3), S, rng).g, c, 1.0));
      err = std::max(err, rel_err(fisher_solve_grad(lin_gamma, gamma_dist(3, 2), S, rng).g, c, 1.0));
    }
    add(report, "exact on linear-in-statistics integrands", err, 1e-10);
  }

  // Monte Carlo estimators against the quadrature finite-difference oracle.
  const auto cases = battery();
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Case& c = cases[k];
    guarded(report, "fisher_solve_grad vs oracle: " + c.name, 4.0, [&] {
      const Eigen::VectorXd oracle =
          finite_diff_mean_grad([&](const MeanParams& mu) { return quad_expectation(c.f.f, mu); }, nat_to_mean(c.q), 1e-4);
      return z_score([&](Rng& rng) { return fisher_solve_grad(c.f, c.q, opts.mc_samples, rng).g; }, oracle,
                     opts.replicates, opts.seed, 100 + k);
    });
    if (c.q.family.tag != Family::kGaussianScalar) continue;
    guarded(report, "gauss_grad_mean vs oracle: " + c.name, 4.0, [&] {
      const Eigen::VectorXd oracle =
          finite_diff_mean_grad([&](const MeanParams& mu) { return quad_expectation(c.f.f, mu); }, nat_to_mean(c.q), 1e-4);
      return z_score([&](Rng& rng) { return gauss_grad_mean(c.f, c.q, opts.mc_samples, rng).g; }, oracle,
                     opts.replicates, opts.seed, 200 + k);
    });
  }
  return report;
}

CheckReport selftest(std::uint64_t seed) {
  CheckReport report;
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rand_scalar = [&] { return gaussian_scalar(3 * u(gen), std::exp(2 * u(gen))); };
  auto rand_gamma = [&] { return gamma_dist(std::exp(1.5 * u(gen) + 0.5), std::exp(2 * u(gen))); };

  guarded(report, "nat/mean round trip", 1e-8, [&] {
    double err = 0.0;
    for (int i = 0; i < 200; ++i) {
      for (const NatParams& q : {rand_scalar(), rand_gamma()}) {
        err = std::max(err, rel_err(mean_to_nat(nat_to_mean(q)).values, q.values, 1e-12));
      }
    }
    return err;
  });

  guarded(report, "Bregman dual equals KL", 1e-9, [&] {
    double err = 0.0;
    for (int i = 0; i < 200; ++i) {
      for (auto make : {std::function<NatParams()>(rand_scalar), std::function<NatParams()>(rand_gamma)}) {
        const NatParams a = make(), b = make();
        err = std::max(err, rel_err(bregman_dual(nat_to_mean(a), nat_to_mean(b)), kl(a, b), 1e-12));
      }
    }
    return err;
  });

  guarded(report, "exact recovery on Gaussian-likelihood regression", 1e-10, [&] {
    double err = 0.0;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
      const int N = 6, D = 3;
      Eigen::MatrixXd X(N, D);
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < D; ++j) X(i, j) = n(gen);
      Model m;
      m.spec = LinRegSpec{X, 1.5};
      Sites exact(2, N);
      for (int i = 0; i < N; ++i) {
        const double y = n(gen), s2 = 0.5 + std::abs(n(gen));
        m.factors.push_back({i, Likelihood::kGaussian, y, s2});
        exact.col(i) << y / s2, -0.5 / s2;
      }
      CviConfig cfg;
      cfg.schedule = StepSchedule::constant(1.0);
      cfg.max_iters = 1;
      cfg.gradient = GradientMode::kExact;
      const CviResult r = run_cvi(m, cfg);
      const Posterior p = linreg_summary(std::get<LinRegSpec>(m.spec), exact);
      err = std::max({err, rel_err(r.posterior.latent_mean, p.latent_mean, 1.0),
                      rel_err(r.posterior.site_var, p.site_var, 1.0)});
    }
    return err;
  });

  guarded(report, "Kalman smoother vs dense chain covariance", 1e-9, [&] {
    double err = 0.0;
    for (int T = 1; T <= 8; ++T) {
      Sites sites(2, T);
      for (int k = 0; k < T; ++k) sites.col(k) << u(gen), -0.5 * (0.2 + std::abs(u(gen)));
      const KalmanSpec spec{T, 0.7};
      const Marginals m = kalman_marginals(spec, sites);
      const Eigen::MatrixXd K = chain_covariance(T, spec.sigma2);
      Eigen::MatrixXd P = K.inverse();
      Eigen::VectorXd h = Eigen::VectorXd::Zero(T + 1);
      const int off = static_cast<int>(K.rows()) - T;
      for (int k = 0; k < T; ++k) {
        P(off + k, off + k) -= 2 * sites(1, k);
        h[off + k] += sites(0, k);
      }
      const Eigen::MatrixXd V = P.inverse();
      const Eigen::VectorXd mean = V * h;
      const int moff = static_cast<int>(m.mean.size()) - T;
      for (int k = 0; k < T; ++k) {
        err = std::max({err, rel_err(m.mean[moff + k], mean[off + k], 1.0),
                        rel_err(m.var[moff + k], V(off + k, off + k), 1.0)});
      }
    }
    return err;
  });

  guarded(report, "doubly-stochastic with B = N matches full batch", 0.0, [&] {
    Eigen::MatrixXd X(5, 2);
    X << 0.3, -1.0, 1.2, 0.4, -0.7, 0.9, 0.1, 0.1, 2.0, -0.5;
    const Eigen::VectorXd y = (Eigen::VectorXd(5) << 1, 0, 1, 1, 0).finished();
    const Model m = build_blr(X, y, 2.0);
    CviConfig cfg;
    cfg.schedule = StepSchedule::ratio(0.4);
    cfg.max_iters = 5;
    cfg.seed = seed;
    cfg.minibatch = static_cast<int>(m.factors.size());
    const CviResult full = run_cvi(m, cfg);
    const CviResult ds = run_cvi_doubly_stochastic(m, cfg);
    return (full.state.sites - ds.state.sites).cwiseAbs().maxCoeff();
  });

  guarded(report, "gamma-shape fixed point vs quadrature posterior", 0.05, [&] {
    const double y = 1.3, a = 2.0, b = 1.5;
    CviConfig cfg;
    cfg.schedule = StepSchedule::constant(0.2);
    cfg.max_iters = 300;
    cfg.gradient = GradientMode::kExact;
    const MeanParams mu = nat_to_mean(run_cvi(build_gamma_shape(y, a, b), cfg).posterior.gamma);
    // Unnormalized posterior density on a grid.
    double z0 = 0.0, z1 = 0.0, zl = 0.0;
    for (int i = 1; i <= 40000; ++i) {
      const double z = i * 5e-4;
      const double w = std::exp((z - 1) * std::log(y) - y - std::lgamma(z) + (a - 1) * std::log(z) - b * z);
      z0 += w;
      z1 += w * z;
      zl += w * std::log(z);
    }
    return std::max(std::abs(mu.values[0] - z1 / z0), std::abs(mu.values[1] - zl / z0));
  });

  add(report, "log loss of a coin toss is one bit", std::abs(log_loss(0.5, 1) - 1.0) + std::abs(log_loss(0.5, 0) - 1.0),
      1e-15);

  guarded(report, "libsvm write/read round trip", 0.0, [&] {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(12, 7);
    Eigen::VectorXd y(12);
    for (int r = 0; r < 12; ++r) {
      y[r] = u(gen) > 0 ? 1 : -1;
      for (int c = 0; c < 7; ++c)
        if (u(gen) > 0.4) X(r, c) = u(gen) * 100;
    }
    X(0, 6) = 1.0;  // keep the width
    std::stringstream ss;
    write_libsvm(ss, X, y);
    const LibsvmTable t = parse_libsvm(ss);
    return std::max((t.X - X).cwiseAbs().maxCoeff(), (t.labels - y).cwiseAbs().maxCoeff());
  });
  return report;
}

void write_report(std::ostream& out, const CheckReport& report) {
  for (const auto& c : report.checks) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "max_err=%.3g tol=%.3g", c.max_error, c.tolerance);
    out << (c.pass ? "PASS " : "FAIL ") << c.name << "  " << buf << '\n';
  }
}

}  // namespace cvi
