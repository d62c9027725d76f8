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

// Command-line front end: run, compare, check-gradients, selftest.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "cvi/errors.hpp"
#include "cvi/harness/checks.hpp"
#include "cvi/harness/experiment.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kNumeric = 4 };

template <class F>
int with_exit_codes(F&& body) {
  try {
    return body();
  } catch (const cvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cvi::ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const cvi::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const cvi::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjugate-computation variational inference"};
  app.require_subcommand(1);
  bool no_timing = false;
  app.add_flag("--no-timing", no_timing, "Write elapsed_ms as 0 so traces are byte-stable");

  std::string run_config;
  std::string trace_out;
  auto* run = app.add_subcommand("run", "Run one experiment and print its summary");
  run->add_option("config", run_config, "key=value config file")->required();
  run->add_option("--trace", trace_out, "Write the trace here (overrides out_path)");

  std::vector<std::string> compare_configs;
  auto* compare = app.add_subcommand("compare", "Run several experiments and tabulate their summaries");
  compare->add_option("configs", compare_configs, "config files")->required();

  cvi::GradientCheckOptions gopts;
  auto* check = app.add_subcommand("check-gradients", "Finite-difference and cross-estimator checks");
  check->add_option("--samples", gopts.mc_samples, "Monte Carlo samples per estimate");
  check->add_option("--replicates", gopts.replicates, "Independent estimates per case");
  check->add_option("--seed", gopts.seed);
  check->add_flag("--inject", gopts.inject_sign_flip)->group("");

  std::uint64_t selftest_seed = 0;
  auto* self = app.add_subcommand("selftest", "Property battery");
  self->add_option("--seed", selftest_seed);

  CLI11_PARSE(app, argc, argv);
  const cvi::RunOptions opts{!no_timing};

  return with_exit_codes([&]() -> int {
    if (*run) {
      cvi::ExperimentConfig cfg = cvi::load_config(run_config);
      if (!trace_out.empty()) cfg.out_path = trace_out;
      const auto res = cvi::run_experiment(cfg, opts);
      cvi::save_outputs(cfg, res);
      cvi::write_summary(std::cout, res.summary);
      return kOk;
    }
    if (*compare) {
      std::vector<cvi::ExperimentResult> results;
      for (const auto& path : compare_configs) {
        const cvi::ExperimentConfig cfg = cvi::load_config(path);
        results.push_back(cvi::run_experiment(cfg, opts));
        cvi::save_outputs(cfg, results.back());
      }
      cvi::write_comparison(std::cout, compare_configs, results);
      return kOk;
    }
    const cvi::CheckReport report = *check ? cvi::check_gradients(gopts) : cvi::selftest(selftest_seed);
    cvi::write_report(std::cout, report);
    return report.all_pass() ? kOk : kFailure;
  });
}
