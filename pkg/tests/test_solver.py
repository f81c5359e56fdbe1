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
"""Test the proximal gradient solver and its KKT certificate."""

import math
import unittest
import warnings

import numpy as np

from nbelnet import solver
from nbelnet.model import Dataset, NBDomainError, Penalty, objective
from nbelnet.solver import (ConvergenceWarning, ExistenceWarning,
                            SolverConfig, brute_force_fit, fit, kkt_check)


def instance(seed, n=60, p=5, theta=2.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:min(p, 2)] = [0.6, -0.4][:p]
    mu = np.exp(X @ beta)
    y = rng.poisson(rng.gamma(theta, mu / theta))
    return Dataset(X, y, theta)


class TestSoftThreshold(unittest.TestCase):
    def test_values(self):
        np.testing.assert_array_equal(
            [-1.0, 0.0, 0.0, 0.0, 2.0],
            solver.soft_threshold(np.array([-2.0, -0.5, 0.0, 1.0, 3.0]), 1.0))


class TestConfig(unittest.TestCase):
    def test_invalid(self):
        for bad in ({"tol": 0}, {"max_iter": 0}, {"step_init": -1.0},
                    {"backtrack": 1.0}, {"backtrack": 0.0}):
            with self.assertRaises(ValueError):
                SolverConfig(**bad)


class TestFit(unittest.TestCase):
    def test_zero_above_lambda_max(self):
        data = instance(0)
        top = solver.lambda_max(data)
        result = fit(data, Penalty(top * 1.01, 0.1))
        np.testing.assert_array_equal(np.zeros(data.p), result.beta)
        self.assertTrue(result.converged)
        self.assertEqual(0, result.iterations)

    def test_converged_and_certified(self):
        data = instance(1)
        pen = Penalty(0.05, 0.05)
        result = fit(data, pen)
        self.assertTrue(result.converged)
        self.assertTrue(result.kkt.exact)
        self.assertLessEqual(result.kkt.max_violation, 1e-8)
        report = kkt_check(result.beta, data, pen)
        self.assertAlmostEqual(result.kkt.max_violation, report.max_violation,
                               delta=1e-15)
        self.assertAlmostEqual(objective(result.beta, data, pen),
                               result.objective_value, places=12)

    def test_monotone(self):
        data = instance(2)
        history = fit(data, Penalty(0.02, 0.01)).history
        self.assertTrue(all(b <= a + solver.MONOTONE_SLACK
                            for a, b in zip(history, history[1:])))

    def test_lasso_only_not_exact(self):
        data = instance(3)
        result = fit(data, Penalty(0.05, 0.0))
        self.assertFalse(result.kkt.exact)
        self.assertTrue(result.converged)

    def test_unique_from_different_starts(self):
        data = instance(4)
        pen = Penalty(0.03, 0.5)
        config = SolverConfig(tol=1e-10)
        rng = np.random.default_rng(4)
        first = fit(data, pen, config, beta0=rng.uniform(-1, 1, data.p))
        second = fit(data, pen, config, beta0=rng.uniform(-1, 1, data.p))
        self.assertTrue(first.converged and second.converged)
        self.assertLessEqual(np.max(np.abs(first.beta - second.beta)),
                             10 * config.tol)

    def test_brute_force_agreement(self):
        data = instance(5, n=40, p=2)
        pen = Penalty(0.05, 0.05)
        result = fit(data, pen)
        reference = brute_force_fit(data, pen, box=3.0, step=0.05)
        np.testing.assert_allclose(reference, result.beta, atol=2e-3)
        self.assertLessEqual(objective(result.beta, data, pen),
                             objective(reference, data, pen) + 1e-9)

    def test_perturbed_fit_fails_kkt(self):
        data = instance(1)
        pen = Penalty(0.02, 0.5)
        tol = 1e-8
        result = fit(data, pen, SolverConfig(tol=1e-11))
        self.assertTrue(kkt_check(result.beta, data, pen, tol).satisfied)
        k = int(np.argmax(np.abs(result.beta)))
        self.assertNotEqual(0.0, result.beta[k])
        moved = result.beta.copy()
        moved[k] += 10 * tol * np.sign(moved[k])
        self.assertFalse(kkt_check(moved, data, pen, tol).satisfied)

    def test_brute_force_seeded_instances(self):
        for seed in range(20):
            p = 1 + seed % 2
            data = instance(100 + seed, n=40, p=p)
            pen = Penalty(0.05, 0.05)
            result = fit(data, pen)
            if p == 1:
                reference = brute_force_fit(data, pen, box=10.0, step=1e-3)
            else:
                reference = brute_force_fit(data, pen, box=3.0, step=0.05)
            np.testing.assert_allclose(reference, result.beta, atol=2e-3)
            self.assertLessEqual(abs(objective(result.beta, data, pen)
                                     - objective(reference, data, pen)), 1e-6)

    def test_not_converged(self):
        data = instance(6)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = fit(data, Penalty(0.01, 0.01), SolverConfig(max_iter=1))
        self.assertFalse(result.converged)
        self.assertEqual(1, result.iterations)
        self.assertTrue(any(issubclass(w.category, ConvergenceWarning)
                            for w in caught))

    def test_existence_warning(self):
        rng = np.random.default_rng(7)
        data = Dataset(rng.standard_normal((5, 8)), [0, 1, 2, 1, 0], 2.0)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            fit(data, Penalty(0.0, 0.0), SolverConfig(max_iter=5))
        self.assertTrue(any(issubclass(w.category, ExistenceWarning)
                            for w in caught))

    def test_bad_start(self):
        data = instance(8)
        with self.assertRaises(NBDomainError):
            fit(data, Penalty(0.1), beta0=np.full(data.p, 1000.0))


class TestPath(unittest.TestCase):
    def test_lambda1_from_rate(self):
        self.assertAlmostEqual(2 * math.sqrt(math.log(50) / 400),
                               solver.lambda1_from_rate(400, 50, 2.0))
        with self.assertRaises(ValueError):
            solver.lambda1_from_rate(0, 50, 2.0)

    def test_grid(self):
        data = instance(9)
        grid = solver.lambda_grid(data, num=5, ratio=0.01)
        self.assertEqual(5, len(grid))
        self.assertAlmostEqual(solver.lambda_max(data), grid[0])
        self.assertAlmostEqual(0.01 * grid[0], grid[-1])
        self.assertTrue(np.all(np.diff(grid) < 0))

    def test_path(self):
        data = instance(10)
        grid = solver.lambda_grid(data, num=6, ratio=0.05)
        fits = solver.fit_path(data, grid, 0.01)
        self.assertEqual(6, len(fits))
        np.testing.assert_array_equal(np.zeros(data.p), fits[0].beta)
        for f, lambda1 in zip(fits, grid):
            self.assertTrue(f.converged)
            self.assertEqual(lambda1, f.penalty.lambda1)
        sizes = [np.count_nonzero(f.beta) for f in fits]
        self.assertGreater(sizes[-1], 0)

    def test_path_l1_norm_grows(self):
        data = instance(14)
        grid = solver.lambda_grid(data, num=10, ratio=0.02)
        norms = [np.sum(np.abs(f.beta))
                 for f in solver.fit_path(data, grid, 0.01)]
        for before, after in zip(norms, norms[1:]):
            self.assertGreaterEqual(after, before - 1e-6)

    def test_path_order(self):
        data = instance(11)
        with self.assertRaises(ValueError):
            solver.fit_path(data, [0.01, 0.1], 0.0)
        with self.assertRaises(ValueError):
            solver.fit_path(data, [], 0.0)


class TestBruteForce(unittest.TestCase):
    def test_too_many_coordinates(self):
        with self.assertRaises(ValueError):
            brute_force_fit(instance(12, p=4), Penalty(0.1), 1.0, 0.1)

    def test_one_dimension(self):
        data = instance(13, n=30, p=1)
        pen = Penalty(0.02, 0.02)
        reference = brute_force_fit(data, pen, box=2.0, step=0.01)
        np.testing.assert_allclose(fit(data, pen).beta, reference, atol=1e-4)
