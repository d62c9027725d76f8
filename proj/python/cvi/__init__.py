# Copyright 2026 The cvi Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python bindings for the cvi library."""

from cvi._core import (
    ConfigError,
    DataError,
    Error,
    ExperimentConfig,
    NumericError,
    ShapeError,
    check_gradients,
    gamma_natural,
    gaussian_mean_params,
    gaussian_natural,
    kl_gamma,
    kl_gaussian,
    load_config,
    log_loss,
    parse_config,
    predictive_prob,
    run_experiment,
    selftest,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "ExperimentConfig",
    "NumericError",
    "ShapeError",
    "check_gradients",
    "gamma_natural",
    "gaussian_mean_params",
    "gaussian_natural",
    "kl_gamma",
    "kl_gaussian",
    "load_config",
    "log_loss",
    "parse_config",
    "predictive_prob",
    "run_experiment",
    "selftest",
]
