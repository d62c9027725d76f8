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

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cvi/errors.hpp"
#include "cvi/expfam.hpp"
#include "cvi/harness/checks.hpp"
#include "cvi/harness/experiment.hpp"
#include "cvi/harness/metrics.hpp"

namespace py = pybind11;
using namespace cvi;

namespace {

py::dict trace_columns(const RunTrace& trace) {
  std::vector<int> iter, halvings;
  std::vector<double> elapsed, elbo, train, test;
  for (const auto& r : trace.rows) {
    iter.push_back(r.iter);
    elapsed.push_back(r.elapsed_ms);
    elbo.push_back(r.neg_elbo);
    train.push_back(r.train_logloss);
    test.push_back(r.test_logloss);
    halvings.push_back(r.guard_halvings);
  }
  py::dict d;
  d["iter"] = iter;
  d["elapsed_ms"] = elapsed;
  d["neg_elbo"] = elbo;
  d["train_logloss"] = train;
  d["test_logloss"] = test;
  d["guard_halvings"] = halvings;
  return d;
}

py::dict result_dict(const ExperimentResult& r) {
  py::dict summary;
  for (const auto& [k, v] : r.summary) summary[py::str(k)] = v;
  py::dict out;
  out["summary"] = summary;
  out["trace"] = trace_columns(r.trace);
  return out;
}

std::vector<py::tuple> report_rows(const CheckReport& rep) {
  std::vector<py::tuple> rows;
  for (const auto& c : rep.checks) rows.push_back(py::make_tuple(c.name, c.max_error, c.tolerance, c.pass));
  return rows;
}

Likelihood likelihood_from(const std::string& name) {
  if (name == "logit") return Likelihood::kBernoulliLogit;
  if (name == "probit") return Likelihood::kBernoulliProbit;
  throw ConfigError("likelihood must be 'logit' or 'probit', got '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conjugate-computation variational inference";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("method", &ExperimentConfig::method)
      .def_readwrite("model", &ExperimentConfig::model)
      .def_readwrite("data_path", &ExperimentConfig::data_path)
      .def_readwrite("test_split", &ExperimentConfig::test_split)
      .def_readwrite("standardize", &ExperimentConfig::standardize)
      .def_readwrite("delta", &ExperimentConfig::delta)
      .def_readwrite("sigma2", &ExperimentConfig::sigma2)
      .def_readwrite("a", &ExperimentConfig::a)
      .def_readwrite("b", &ExperimentConfig::b)
      .def_readwrite("log_sigma_f", &ExperimentConfig::log_sigma_f)
      .def_readwrite("log_l", &ExperimentConfig::log_l)
      .def_readwrite("step_w", &ExperimentConfig::step_w)
      .def_readwrite("step_beta", &ExperimentConfig::step_beta)
      .def_readwrite("mc_samples", &ExperimentConfig::mc_samples)
      .def_readwrite("minibatch", &ExperimentConfig::minibatch)
      .def_readwrite("max_iters", &ExperimentConfig::max_iters)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("out_path", &ExperimentConfig::out_path)
      .def("validate", &ExperimentConfig::validate)
      .def("__str__", &format_config);

  m.def(
      "parse_config",
      [](const std::string& text) {
        std::istringstream in(text);
        return parse_config(in);
      },
      py::arg("text"));
  m.def("load_config", &load_config, py::arg("path"));

  m.def(
      "run_experiment",
      [](const ExperimentConfig& cfg, bool timing) {
        ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(cfg, RunOptions{timing});
        }
        return result_dict(r);
      },
      py::arg("config"), py::arg("timing") = true,
      "Runs one experiment. Returns {'summary': {...}, 'trace': {column: list}}.");

  m.def("log_loss", &log_loss, py::arg("p"), py::arg("y"));
  m.def(
      "predictive_prob",
      [](const std::string& likelihood, double mean, double var) {
        return predictive_prob(likelihood_from(likelihood), mean, var);
      },
      py::arg("likelihood"), py::arg("mean"), py::arg("var"));

  m.def(
      "selftest", [](std::uint64_t seed) { return report_rows(selftest(seed)); }, py::arg("seed") = 0,
      "List of (name, max_error, tolerance, passed).");
  m.def(
      "check_gradients",
      [](int samples, int replicates, std::uint64_t seed) {
        GradientCheckOptions o;
        o.mc_samples = samples;
        o.replicates = replicates;
        o.seed = seed;
        return report_rows(check_gradients(o));
      },
      py::arg("samples") = 1000, py::arg("replicates") = 100, py::arg("seed") = 0);

  // Scalar Gaussian and Gamma helpers on raw parameter vectors.
  m.def("gaussian_natural", [](double mean, double var) { return gaussian_scalar(mean, var).values; });
  m.def("gamma_natural", [](double shape, double rate) { return gamma_dist(shape, rate).values; });
  m.def("kl_gaussian", [](double m1, double v1, double m2, double v2) {
    return kl(gaussian_scalar(m1, v1), gaussian_scalar(m2, v2));
  });
  m.def("kl_gamma", [](double a1, double b1, double a2, double b2) {
    return kl(gamma_dist(a1, b1), gamma_dist(a2, b2));
  });
  m.def("gaussian_mean_params", [](double mean, double var) { return nat_to_mean(gaussian_scalar(mean, var)).values; });
}
