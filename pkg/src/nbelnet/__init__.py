# SPDX-License-Identifier: Apache-2.0
# SPDX-FileCopyrightText: 2026 The nbelnet developers
#
#   Copyright 2026 The nbelnet developers
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.
"""Elastic-net negative binomial regression in high dimensions.

This library fits the elastic-net estimator of a negative binomial (NB)
regression with known dispersion ``theta``, minimizing the scaled negative
log-likelihood plus ``lambda1 |b|_1 + lambda2 |b|_2^2`` with
:func:`fit`. Every fit carries a KKT certificate, see :func:`kkt_check`.

Around the estimator it provides a verification toolkit:

* Cone constants of a Hessian (compatibility factor, weak cone invertibility
  factor, Stabil constant) and the oracle inequalities built on them, in
  :mod:`nbelnet.theory`
* Support and sign recovery checks and thresholds in
  :mod:`nbelnet.selection`
* The de-biased estimator with nodewise confidence intervals in
  :mod:`nbelnet.debias`
* Simulated designs, NB sampling, the Cameron-Trivedi overdispersion test
  and a seeded replication engine in :mod:`nbelnet.simulate`

The command line tool ``nbelnet`` exposes these as subcommands, see
:mod:`nbelnet.cli`.
"""

__version__ = '0.1.0'

from .debias import DebiasResult, debias, nodewise_inverse
from .model import (Dataset, DimensionError, NBDomainError, Penalty,
                    nb_hessian, nb_loss, nb_score, objective)
from .selection import selection_report, support_and_signs
from .simulate import (Design, SimSpec, cameron_trivedi_test, gen_design,
                       run_replications, sample_nb, simulate_dataset)
from .solver import (ConvergenceWarning, ExistenceWarning, Fit, SolverConfig,
                     brute_force_fit, fit, fit_path, kkt_check,
                     lambda_grid, lambda_max)
from .theory import (BoundInapplicableError, ConeSpec, TheoryConfig,
                     TheoryWarning, compatibility_factor, stabil_constant,
                     theory_report, weak_cif)

__all__ = """Dataset Penalty nb_loss nb_score nb_hessian objective
NBDomainError DimensionError fit fit_path kkt_check brute_force_fit Fit
lambda_grid lambda_max SolverConfig ConvergenceWarning ExistenceWarning
ConeSpec TheoryConfig compatibility_factor weak_cif stabil_constant theory_report
BoundInapplicableError TheoryWarning selection_report support_and_signs
debias nodewise_inverse DebiasResult SimSpec Design gen_design sample_nb
simulate_dataset cameron_trivedi_test run_replications""".split()
