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
"""Test the de-biased estimator and its nodewise inverse."""

import importlib
import math
import os
import unittest

import numpy as np
from scipy.stats import norm

from nbelnet.model import Dataset, DimensionError, Penalty, nb_hessian
from nbelnet.simulate import SimSpec, run_replications, simulate_dataset
from nbelnet.solver import ConvergenceWarning, SolverConfig, fit

# nbelnet.__init__ re-exports the debias() function under the submodule's
# name, so load the submodule itself from sys.modules.
db = importlib.import_module('nbelnet.debias')


def instance(n=300, p=4, seed=8):
    spec = SimSpec(n=n, p=p, d_star=2, beta_min=0.5, seed=seed)
    return simulate_dataset(spec)


class TestNodewise(unittest.TestCase):
    def setUp(self):
        self.data, self.beta_star = instance()

    def test_default_lambda(self):
        self.assertAlmostEqual(math.sqrt(math.log(50) / 200),
                               db.default_lambda_node(200, 50))
        self.assertEqual(0.0, db.default_lambda_node(200, 1))

    def test_exact_inverse(self):
        theta_hat = db.nodewise_inverse(self.data, self.beta_star,
                                        lambda_node=0)
        hessian = nb_hessian(self.beta_star, self.data)
        np.testing.assert_allclose(theta_hat @ hessian, np.eye(4),
                                   atol=1e-8)

    def test_penalized_rows(self):
        nodewise = db.nodewise_fit(self.data, self.beta_star)
        self.assertAlmostEqual(db.default_lambda_node(300, 4),
                               nodewise.lambda_node)
        self.assertTrue(np.all(nodewise.tau_sq > 0))
        np.testing.assert_allclose(np.diag(nodewise.theta_hat),
                                   1 / nodewise.tau_sq)

    def test_single_column(self):
        data = Dataset(self.data.X[:, :1], self.data.y, self.data.theta)
        nodewise = db.nodewise_fit(data, [0.5])
        hessian = nb_hessian([0.5], data)
        self.assertAlmostEqual(1 / hessian[0, 0], nodewise.theta_hat[0, 0])

    def test_negative_lambda(self):
        with self.assertRaises(ValueError):
            db.nodewise_fit(self.data, self.beta_star, lambda_node=-1)


class TestDebias(unittest.TestCase):
    def setUp(self):
        self.data, self.beta_star = instance()

    def test_unpenalized(self):
        fitted = fit(self.data, Penalty(0.0), SolverConfig(tol=1e-11))
        result = db.debias(fitted, self.data, lambda_node=0)
        np.testing.assert_allclose(result.b_hat, fitted.beta, atol=1e-8)
        self.assertEqual(0.0, result.lambda_node)

    def test_intervals(self):
        fitted = fit(self.data, Penalty(0.05, 0.01))
        result = db.debias(fitted, self.data, level=0.9)
        half = norm.ppf(0.95) * result.se
        np.testing.assert_allclose(result.ci_high - result.b_hat, half)
        np.testing.assert_allclose(result.b_hat - result.ci_low, half)
        self.assertTrue(np.all(result.se > 0))
        self.assertEqual(0.9, result.level)

    def test_kkt_rewrite_agrees(self):
        pen = Penalty(0.05, 0.01)
        fitted = fit(self.data, pen, SolverConfig(tol=1e-11))
        result = db.debias(fitted, self.data)
        self.assertLess(result.rewrite_gap, 1e-8)

    def test_rewrite_without_score(self):
        pen = Penalty(0.1, 0.0)
        beta = np.array([0.5, 0.0])
        theta_hat = np.eye(2)
        np.testing.assert_allclose([0.6, 0.0],
                                   db.kkt_rewrite(beta, pen, theta_hat))
        np.testing.assert_allclose(
            [0.6, -0.05],
            db.kkt_rewrite(beta, pen, theta_hat, score=[-0.1, 0.05]))

    def test_given_theta(self):
        fitted = fit(self.data, Penalty(0.05, 0.01))
        result = db.debias(fitted, self.data, theta_hat=np.eye(4))
        self.assertTrue(math.isnan(result.lambda_node))
        with self.assertRaises(DimensionError):
            db.debias(fitted, self.data, theta_hat=np.eye(3))

    def test_invalid_level(self):
        fitted = fit(self.data, Penalty(0.05, 0.01))
        for level in (0.0, 1.0):
            with self.assertRaises(ValueError):
                db.debias(fitted, self.data, level=level)

    def test_not_converged(self):
        with self.assertWarns(ConvergenceWarning):
            fitted = fit(self.data, Penalty(0.05, 0.01),
                         SolverConfig(max_iter=1))
        with self.assertWarns(ConvergenceWarning):
            db.debias(fitted, self.data)


@unittest.skipUnless(os.environ.get("NBELNET_SLOW"), "Monte Carlo check, set NBELNET_SLOW=1")
class TestCoverage(unittest.TestCase):
    def test_nominal_coverage(self):
        sim = SimSpec(n=500, p=10, d_star=3, beta_min=0.5, theta=2.0,
                      seed=2026)
        summary = run_replications(sim, "debias-coverage", 300, threads=4,
                                   coordinate=0)
        self.assertGreaterEqual(summary.metrics["covered"], 0.88)
        self.assertLessEqual(summary.metrics["covered"], 0.99)
