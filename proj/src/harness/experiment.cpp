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

#include "cvi/harness/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cvi/baselines.hpp"
#include "cvi/errors.hpp"
#include "cvi/harness/metrics.hpp"
#include "cvi/meanfield.hpp"

namespace cvi {

namespace {

const std::vector<std::string> kMethods{"cvi", "cvi-exact", "cvi-ds", "meanfield", "sgd", "adam"};
const std::vector<std::string> kModels{"blr", "gpc", "kalman", "gamma"};

bool one_of(const std::string& s, const std::vector<std::string>& v) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + value + "'");
}

double parse_real(const std::string& key, const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x)) bad_value(key, v, "a number");
  return x;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

bool is_cvi_method(const std::string& m) { return m == "cvi" || m == "cvi-exact" || m == "cvi-ds"; }

// Everything the metric hooks need besides the iterate.
struct Problem {
  Model model;
  Likelihood kind = Likelihood::kBernoulliLogit;
  bool binary = true;
  Eigen::VectorXd train_y;
  Eigen::VectorXd test_y;
  Eigen::MatrixXd test_design;  // blr: bias column prepended
  Eigen::MatrixXd test_cross;   // gpc: k(x*, X)
  Eigen::VectorXd test_self;    // gpc: k(x*, x*)
  Eigen::LLT<Eigen::MatrixXd> kernel_llt;
  int n_train = 0;
  int n_test = 0;
  int features = 0;
};

Eigen::MatrixXd with_bias(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(X.cols()) = X;
  return out;
}

Problem build_problem(const ExperimentConfig& cfg, const Dataset& data) {
  Problem p;
  p.features = data.features();
  p.train_y = data.train_y();
  p.test_y = data.test_y();
  p.n_train = static_cast<int>(p.train_y.size());
  p.n_test = static_cast<int>(p.test_y.size());
  if (p.n_train == 0) throw DataError("no training rows");
  if (cfg.model == "blr") {
    p.model = build_blr(data.train_X(), p.train_y, cfg.delta, p.kind);
    p.test_design = with_bias(data.test_X());
  } else if (cfg.model == "gpc") {
    const KernelSpec kernel{cfg.log_sigma_f, cfg.log_l};
    const Eigen::MatrixXd Xtr = data.train_X();
    p.model = build_gpc(Xtr, p.train_y, kernel, p.kind);
    p.test_cross = kernel_cross(kernel, data.test_X(), Xtr);
    p.test_self = Eigen::VectorXd::Constant(p.n_test, std::exp(2.0 * cfg.log_sigma_f));
    p.kernel_llt.compute(std::get<GpSpec>(p.model.spec).kernel);
  } else if (cfg.model == "kalman") {
    if (p.n_test > 0) throw ConfigError("model=kalman uses the whole label sequence; set test_split=0");
    p.model = build_kalman_glm(p.train_y, cfg.sigma2);
  }
  return p;
}

void fill_losses(const Problem& p, const Marginals& train, const std::optional<Marginals>& test, TraceRow& row) {
  row.train_logloss = mean_log_loss(predictive_probs(p.kind, train.mean, train.var), p.train_y);
  if (test) row.test_logloss = mean_log_loss(predictive_probs(p.kind, test->mean, test->var), p.test_y);
}

std::optional<Marginals> cvi_test_marginals(const Problem& p, const Sites& sites) {
  if (p.n_test == 0) return std::nullopt;
  if (const auto* lr = std::get_if<LinRegSpec>(&p.model.spec)) return linreg_predict(*lr, sites, p.test_design);
  if (const auto* gp = std::get_if<GpSpec>(&p.model.spec)) return gp_predict(*gp, sites, p.test_cross, p.test_self);
  return std::nullopt;
}

std::optional<Marginals> baseline_test_marginals(const Problem& p, const VariationalObjective& obj,
                                                 const FlatParams& params) {
  if (p.n_test == 0) return std::nullopt;
  const auto [m, V] = obj.gaussian_moments(params);
  Marginals out;
  if (std::holds_alternative<LinRegSpec>(p.model.spec)) {
    out.mean = p.test_design * m;
    out.var = (p.test_design * V).cwiseProduct(p.test_design).rowwise().sum();
  } else {
    // f* | z ~ N(k' K^{-1} z, k** - k' K^{-1} k).
    const Eigen::MatrixXd A = p.kernel_llt.solve(p.test_cross.transpose());
    out.mean = A.transpose() * m;
    out.var = p.test_self - p.test_cross.cwiseProduct(A.transpose()).rowwise().sum() +
              (V * A).cwiseProduct(A).colwise().sum().transpose();
  }
  return out;
}

StepSchedule cvi_schedule(const ExperimentConfig& cfg) {
  return cfg.step_w ? StepSchedule::ratio(*cfg.step_w) : StepSchedule::constant(*cfg.step_beta);
}

CviConfig cvi_config(const ExperimentConfig& cfg) {
  CviConfig c;
  c.schedule = cvi_schedule(cfg);
  c.mc_samples = cfg.mc_samples;
  c.max_iters = cfg.max_iters;
  c.minibatch = cfg.minibatch;
  c.seed = cfg.seed;
  c.gradient = cfg.method == "cvi-exact" ? GradientMode::kExact : GradientMode::kMonteCarlo;
  return c;
}

void add_gamma_summary(Summary& s, const NatParams& q) {
  const auto [shape, rate] = gamma_shape_rate(q);
  const MeanParams mu = nat_to_mean(q);
  s.emplace_back("posterior_shape", fmt(shape));
  s.emplace_back("posterior_rate", fmt(rate));
  s.emplace_back("posterior_mean", fmt(mu.values[0]));
  s.emplace_back("posterior_mean_log", fmt(mu.values[1]));
}

ExperimentResult finish(const ExperimentConfig& cfg, const RunOptions& opts, RunTrace trace, Summary extra,
                        int n_train, int n_test, int features) {
  if (!opts.timing) {
    for (auto& r : trace.rows) r.elapsed_ms = 0.0;
  }
  ExperimentResult res;
  res.trace = std::move(trace);
  const auto& rows = res.trace.rows;
  int halvings = 0, degenerate = 0;
  for (const auto& r : rows) {
    halvings += r.guard_halvings;
    degenerate += r.degenerate ? 1 : 0;
  }
  const TraceRow last = rows.empty() ? TraceRow{} : rows.back();
  Summary& s = res.summary;
  s.emplace_back("method", cfg.method);
  s.emplace_back("model", cfg.model);
  s.emplace_back("seed", std::to_string(cfg.seed));
  s.emplace_back("n_train", std::to_string(n_train));
  s.emplace_back("n_test", std::to_string(n_test));
  s.emplace_back("features", std::to_string(features));
  s.emplace_back("iterations", std::to_string(rows.size()));
  s.emplace_back("neg_elbo", fmt(last.neg_elbo));
  s.emplace_back("train_logloss", fmt(last.train_logloss));
  s.emplace_back("test_logloss", fmt(last.test_logloss));
  s.emplace_back("guard_halvings", std::to_string(halvings));
  s.emplace_back("degenerate_steps", std::to_string(degenerate));
  s.emplace_back("elapsed_ms", fmt(last.elapsed_ms));
  for (auto& kv : extra) s.push_back(std::move(kv));
  return res;
}

ExperimentResult run_gamma(const ExperimentConfig& cfg, const RunOptions& opts) {
  const LibsvmTable table = read_libsvm_table(cfg.data_path);
  if (table.labels.size() != 1) throw DataError("model=gamma expects exactly one observation in " + cfg.data_path);
  const double y = table.labels[0];
  if (!(y > 0.0)) throw DataError("model=gamma: observation must be positive");
  Summary extra;
  RunTrace trace;
  if (cfg.method == "meanfield") {
    auto r = mf::run_meanfield(mf::gamma_shape_net(y, cfg.a, cfg.b),
                               cfg.minibatch ? mf::Schedule::kDoublyStochastic : mf::Schedule::kSequential,
                               cvi_config(cfg));
    add_gamma_summary(extra, r.net.nodes()[0].q);
    trace = std::move(r.trace);
  } else {
    const Model model = build_gamma_shape(y, cfg.a, cfg.b);
    if (is_cvi_method(cfg.method)) {
      auto r = cfg.method == "cvi-ds" ? run_cvi_doubly_stochastic(model, cvi_config(cfg)) : run_cvi(model, cvi_config(cfg));
      add_gamma_summary(extra, r.posterior.gamma);
      trace = std::move(r.trace);
    } else {
      BaselineConfig bc;
      bc.optimizer = cfg.method == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
      bc.step = cfg.step_beta.value_or(AdamHyper{}.w0);
      bc.mc_samples = cfg.mc_samples;
      bc.max_iters = cfg.max_iters;
      bc.seed = cfg.seed;
      auto r = run_baseline(model, bc);
      add_gamma_summary(extra, VariationalObjective(model).gamma_q(r.params));
      trace = std::move(r.trace);
    }
  }
  return finish(cfg, opts, std::move(trace), std::move(extra), 1, 0, 0);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!one_of(method, kMethods)) throw ConfigError("unknown method '" + method + "'");
  if (!one_of(model, kModels)) throw ConfigError("unknown model '" + model + "'");
  if (data_path.empty()) throw ConfigError("data_path is required");
  TestSplit::parse(test_split);
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(sigma2 > 0.0)) throw ConfigError("sigma2 must be positive");
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("a and b must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (mc_samples < 0) throw ConfigError("mc_samples must be non-negative");
  const bool baseline = method == "sgd" || method == "adam";
  if (!baseline && method != "cvi-exact" && mc_samples < 1) throw ConfigError("mc_samples must be at least 1");
  if (minibatch && method != "cvi-ds" && method != "meanfield") {
    throw ConfigError("minibatch applies to cvi-ds and meanfield only");
  }
  if (method == "cvi-ds" && !minibatch) throw ConfigError("cvi-ds requires minibatch");
  if (minibatch && *minibatch < 1) throw ConfigError("minibatch must be at least 1");
  if (method == "meanfield" && model != "kalman" && model != "gamma") {
    throw ConfigError("meanfield supports model=kalman and model=gamma");
  }
  if (baseline) {
    if (step_w) throw ConfigError(method + " takes its step from step_beta, not step_w");
    if (method == "sgd" && !step_beta) throw ConfigError("sgd requires step_beta (rho)");
    if (step_beta && !(*step_beta > 0.0)) throw ConfigError("step_beta must be positive");
  } else {
    if (step_w.has_value() == step_beta.has_value()) throw ConfigError("set exactly one of step_w and step_beta");
    cvi_schedule(*this).beta();
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  ExperimentConfig c;
  std::map<std::string, bool> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), v = trim(line.substr(eq + 1));
    if (!seen.emplace(key, true).second) throw ConfigError(source + ": duplicate key '" + key + "'");
    try {
      if (key == "method") c.method = v;
      else if (key == "model") c.model = v;
      else if (key == "data_path") c.data_path = v;
      else if (key == "test_split") c.test_split = v;
      else if (key == "standardize") c.standardize = parse_bool(key, v);
      else if (key == "delta") c.delta = parse_real(key, v);
      else if (key == "sigma2") c.sigma2 = parse_real(key, v);
      else if (key == "a") c.a = parse_real(key, v);
      else if (key == "b") c.b = parse_real(key, v);
      else if (key == "log_sigma_f") c.log_sigma_f = parse_real(key, v);
      else if (key == "log_l") c.log_l = parse_real(key, v);
      else if (key == "step_w") c.step_w = parse_real(key, v);
      else if (key == "step_beta") c.step_beta = parse_real(key, v);
      else if (key == "mc_samples") c.mc_samples = parse_integer<int>(key, v);
      else if (key == "minibatch") c.minibatch = parse_integer<int>(key, v);
      else if (key == "max_iters") c.max_iters = parse_integer<int>(key, v);
      else if (key == "seed") c.seed = parse_integer<std::uint64_t>(key, v);
      else if (key == "out_path") c.out_path = v;
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  ExperimentConfig c = parse_config(in, path);
  namespace fs = std::filesystem;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
  };
  if (const auto comma = c.data_path.find(','); comma != std::string::npos) {
    c.data_path = resolve(c.data_path.substr(0, comma)) + "," + resolve(c.data_path.substr(comma + 1));
  } else {
    c.data_path = resolve(c.data_path);
  }
  c.out_path = resolve(c.out_path);
  return c;
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os << "method=" << c.method << "\nmodel=" << c.model << "\ndata_path=" << c.data_path
     << "\ntest_split=" << c.test_split << "\nstandardize=" << (c.standardize ? "true" : "false")
     << "\ndelta=" << fmt(c.delta) << "\nsigma2=" << fmt(c.sigma2) << "\na=" << fmt(c.a) << "\nb=" << fmt(c.b)
     << "\nlog_sigma_f=" << fmt(c.log_sigma_f) << "\nlog_l=" << fmt(c.log_l) << '\n';
  if (c.step_w) os << "step_w=" << fmt(*c.step_w) << '\n';
  if (c.step_beta) os << "step_beta=" << fmt(*c.step_beta) << '\n';
  os << "mc_samples=" << c.mc_samples << '\n';
  if (c.minibatch) os << "minibatch=" << *c.minibatch << '\n';
  os << "max_iters=" << c.max_iters << "\nseed=" << c.seed << '\n';
  if (!c.out_path.empty()) os << "out_path=" << c.out_path << '\n';
  return os.str();
}

const std::string& ExperimentResult::get(const std::string& key) const {
  for (const auto& [k, v] : summary) {
    if (k == key) return v;
  }
  throw ConfigError("summary has no key '" + key + "'");
}

double ExperimentResult::number(const std::string& key) const {
  const std::string& v = get(key);
  return v == "nan" ? std::nan("") : std::stod(v);
}

bool is_marker(int iter, int max_iters) {
  switch (iter) {
    case 1: case 2: case 3: case 5: case 8:
      return true;
    default:
      return iter % 10 == 0 || iter == max_iters;
  }
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  cfg.validate();
  if (cfg.model == "gamma") return run_gamma(cfg, opts);
  const Dataset data = load_dataset(cfg.data_path, TestSplit::parse(cfg.test_split), cfg.standardize, cfg.seed);
  return run_experiment(cfg, data, opts);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& data, const RunOptions& opts) {
  cfg.validate();
  if (cfg.model == "gamma") throw ConfigError("model=gamma reads its observation from data_path");
  data.validate();
  const Problem p = build_problem(cfg, data);
  const int T = cfg.max_iters;
  Summary extra;
  RunTrace trace;

  if (is_cvi_method(cfg.method)) {
    EvalHooks hooks;
    hooks.on_iteration = [&](int t, const Posterior& q, const SiteState& s, TraceRow& row) {
      if (!is_marker(t, T)) return;
      fill_losses(p, Marginals{q.site_mean, q.site_var}, cvi_test_marginals(p, s.sites), row);
    };
    auto r = cfg.method == "cvi-ds" ? run_cvi_doubly_stochastic(p.model, cvi_config(cfg), hooks)
                                    : run_cvi(p.model, cvi_config(cfg), hooks);
    if (cfg.model == "blr") extra.emplace_back("dual_path", r.posterior.dual_path ? "true" : "false");
    trace = std::move(r.trace);
  } else if (cfg.method == "meanfield") {
    mf::MeanfieldHooks hooks;
    hooks.on_iteration = [&](int t, const mf::BayesNet& net, TraceRow& row) {
      if (!is_marker(t, T)) return;
      Marginals m{Eigen::VectorXd(p.n_train), Eigen::VectorXd(p.n_train)};
      for (int k = 0; k < p.n_train; ++k) std::tie(m.mean[k], m.var[k]) = scalar_moments(net.nodes()[k + 1].q);
      fill_losses(p, m, std::nullopt, row);
    };
    auto r = mf::run_meanfield(mf::logit_chain_net(p.train_y, cfg.sigma2),
                               cfg.minibatch ? mf::Schedule::kDoublyStochastic : mf::Schedule::kSequential,
                               cvi_config(cfg), hooks);
    trace = std::move(r.trace);
  } else {
    BaselineConfig bc;
    bc.optimizer = cfg.method == "sgd" ? Optimizer::kSgd : Optimizer::kAdam;
    bc.step = cfg.step_beta.value_or(AdamHyper{}.w0);
    bc.mc_samples = cfg.mc_samples;
    bc.max_iters = T;
    bc.seed = cfg.seed;
    BaselineHooks hooks;
    hooks.on_iteration = [&](int t, const VariationalObjective& obj, const FlatParams& params, TraceRow& row) {
      if (!is_marker(t, T)) return;
      fill_losses(p, obj.site_marginals(params), baseline_test_marginals(p, obj, params), row);
    };
    trace = run_baseline(p.model, bc, hooks).trace;
  }
  return finish(cfg, opts, std::move(trace), std::move(extra), p.n_train, p.n_test, p.features);
}

void write_trace(std::ostream& out, const RunTrace& trace) {
  std::ostringstream os;
  os << "iter,elapsed_ms,neg_elbo,train_logloss,test_logloss,guard_halvings\n";
  for (const auto& r : trace.rows) {
    os << r.iter << ',' << fmt(r.elapsed_ms) << ',' << fmt(r.neg_elbo) << ',' << fmt(r.train_logloss) << ','
       << fmt(r.test_logloss) << ',' << r.guard_halvings << '\n';
  }
  out << os.str();
}

void write_summary(std::ostream& out, const Summary& summary) {
  for (const auto& [k, v] : summary) out << k << '=' << v << '\n';
}

void save_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  if (cfg.out_path.empty()) return;
  std::ofstream trace(cfg.out_path);
  if (!trace) throw DataError("cannot write '" + cfg.out_path + "'");
  write_trace(trace, result.trace);
  std::ofstream summary(cfg.out_path + ".summary");
  if (!summary) throw DataError("cannot write '" + cfg.out_path + ".summary'");
  write_summary(summary, result.summary);
}

void write_comparison(std::ostream& out, const std::vector<std::string>& labels,
                      const std::vector<ExperimentResult>& results) {
  const std::vector<std::string> keys{"method", "model", "iterations", "neg_elbo", "train_logloss", "test_logloss",
                                      "elapsed_ms"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"run"});
  cells.back().insert(cells.back().end(), keys.begin(), keys.end());
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::vector<std::string> row{i < labels.size() ? labels[i] : std::to_string(i)};
    for (const auto& k : keys) row.push_back(results[i].get(k));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cells[0].size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) out << std::string(width[c] - row[c].size() + 2, ' ');
    }
    out << '\n';
  }
}

}  // namespace cvi
