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
"""Test the command line tool"""

import importlib.resources
import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np

from nbelnet import cli
from nbelnet.model import Penalty
from nbelnet.simulate import Design, SimSpec, simulate_dataset
from nbelnet.solver import brute_force_fit, kkt_check

DATA = {name: importlib.resources.read_text("tests.data", name)
        for name in ("tiny.csv", "single.csv", "missing.csv",
                     "negative.csv", "text.csv")}


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.out = self.tmp / "out"

    def tearDown(self):
        self._tmp.cleanup()

    def data_file(self, name):
        path = self.tmp / name
        path.write_text(DATA[name], encoding="utf-8")
        return str(path)

    def run_cli(self, *args):
        return cli.main(*args, "-o", str(self.out), "-q")

    def result(self, name):
        return json.loads((self.out / name).read_text(encoding="utf-8"))


class TestParsing(CliTestCase):
    def test_no_command_sys_args(self):
        with mock.patch("sys.argv", ["nbelnet"]):
            self.assertEqual(cli.ERROR.INPUT_ERROR, cli.main())

    def test_theta_required(self):
        code = self.run_cli("fit", self.data_file("tiny.csv"))
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)

    def test_bad_datasets(self):
        for name in ("missing.csv", "negative.csv", "text.csv"):
            with self.subTest(name=name):
                code = self.run_cli("fit", self.data_file(name),
                                    "--theta", "2")
                self.assertEqual(cli.ERROR.INPUT_ERROR, code)
                self.assertFalse((self.out / "fit.json").exists())

    def test_parse_error_lines(self):
        with self.assertRaises(cli.DatasetParseError) as ctx:
            cli.read_frame(self.data_file("missing.csv"))
        self.assertIn("line 3", str(ctx.exception))
        with self.assertRaises(cli.DatasetParseError) as ctx:
            cli.read_frame(self.data_file("text.csv"))
        self.assertIn("line 3", str(ctx.exception))
        self.assertIn("'abc'", str(ctx.exception))

    def test_missing_file(self):
        code = self.run_cli("fit", str(self.tmp / "absent.csv"),
                            "--theta", "2")
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)


class TestJson(unittest.TestCase):
    def test_float_precision(self):
        text = json.dumps(cli._jsonable({"a": 1 / 3, "b": float("inf"),
                                         "c": np.float64(2.5)}))
        self.assertEqual('{"a": 0.3333333333333, "b": null, "c": 2.5}', text)


class TestFit(CliTestCase):
    def test_large_lambda_gives_zero(self):
        code = self.run_cli("fit", self.data_file("tiny.csv"), "--theta",
                            "2", "--lambda1", "100")
        self.assertEqual(cli.ERROR.OK, code)
        fitted = self.result("fit.json")
        self.assertEqual([0.0, 0.0], fitted["beta"])
        self.assertEqual([], fitted["support"])
        self.assertEqual(cli.SCHEMA_VERSION, fitted["schema_version"])
        self.assertEqual("fit", fitted["command"])
        self.assertEqual(100.0, fitted["config"]["lambda1"])
        self.assertNotIn("out", fitted["config"])

    def test_rerun_is_identical(self):
        path = self.data_file("tiny.csv")
        args = ("fit", path, "--theta", "2", "--lambda1", "0.05",
                "--lambda2", "0.01")
        self.assertEqual(cli.ERROR.OK, self.run_cli(*args))
        first = (self.out / "fit.json").read_bytes()
        self.assertEqual(cli.ERROR.OK, self.run_cli(*args))
        self.assertEqual(first, (self.out / "fit.json").read_bytes())

    def test_single_covariate_matches_grid(self):
        path = self.data_file("single.csv")
        code = self.run_cli("fit", path, "--theta", "2", "--lambda1", "0.05",
                            "--lambda2", "0.01", "--tol", "1e-10")
        self.assertEqual(cli.ERROR.OK, code)
        fitted = self.result("fit.json")
        data = cli.read_dataset(path, 2.0)
        pen = Penalty(0.05, 0.01)
        reference = brute_force_fit(data, pen, box=3.0, step=0.01)
        self.assertAlmostEqual(reference[0], fitted["beta"][0], delta=2e-3)

    def test_reported_kkt_is_reproducible(self):
        path = self.data_file("tiny.csv")
        code = self.run_cli("fit", path, "--theta", "2", "--lambda1", "0.05",
                            "--lambda2", "0.01")
        self.assertEqual(cli.ERROR.OK, code)
        fitted = self.result("fit.json")
        data = cli.read_dataset(path, 2.0)
        report = kkt_check(np.array(fitted["beta"]), data,
                           Penalty(fitted["lambda1"], fitted["lambda2"]))
        self.assertAlmostEqual(fitted["kkt_max_violation"],
                               report.max_violation, delta=1e-12)

    def test_not_converged(self):
        code = self.run_cli("fit", self.data_file("single.csv"), "--theta",
                            "2", "--lambda1", "0.01", "--max-iter", "1")
        self.assertEqual(cli.ERROR.NOT_CONVERGED, code)
        fitted = self.result("fit.json")
        self.assertFalse(fitted["converged"])
        self.assertTrue(any(w.startswith("ConvergenceWarning")
                            for w in fitted["warnings"]))

    def test_default_lambda1_single_covariate(self):
        code = self.run_cli("fit", self.data_file("single.csv"), "--theta",
                            "2")
        self.assertEqual(cli.ERROR.OK, code)
        fitted = self.result("fit.json")
        self.assertEqual(0.0, fitted["lambda1"])
        self.assertTrue(any("p = 1" in w for w in fitted["warnings"]))

    def test_config_overlay(self):
        config = self.tmp / "config.json"
        config.write_text(json.dumps({"lambda1": 100.0, "theta": 2.0}))
        path = self.data_file("tiny.csv")
        self.assertEqual(cli.ERROR.OK,
                         self.run_cli("fit", path, "--config", str(config)))
        self.assertEqual([0.0, 0.0], self.result("fit.json")["beta"])
        # the command line wins over the file
        self.assertEqual(cli.ERROR.OK,
                         self.run_cli("fit", path, "--config", str(config),
                                      "--lambda1", "0.01"))
        self.assertNotEqual([0.0, 0.0], self.result("fit.json")["beta"])

    def test_config_unknown_key(self):
        config = self.tmp / "config.json"
        config.write_text(json.dumps({"lambda3": 1.0}))
        code = self.run_cli("fit", self.data_file("tiny.csv"), "--theta",
                            "2", "--config", str(config))
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)


class TestSimulate(CliTestCase):
    def test_dataset_written(self):
        code = self.run_cli("simulate", "--n", "30", "--p", "4",
                            "--d-star", "2", "--seed", "3")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("simulate.json")
        self.assertEqual([1.0, -1.0, 0.0, 0.0], result["beta_star"])
        data = cli.read_dataset(str(self.out / "simulated.csv"), 2.0)
        self.assertEqual((30, 4), data.X.shape)

    def test_seed_from_environment(self):
        args = ("simulate", "--n", "30", "--p", "4", "--d-star", "2")
        self.assertEqual(cli.ERROR.OK, self.run_cli(*args, "--seed", "7"))
        expected = (self.out / "simulated.csv").read_bytes()
        with mock.patch.dict(os.environ, {cli.SEED_ENV: "7"}):
            self.assertEqual(cli.ERROR.OK, self.run_cli(*args, "--seed", "1"))
        self.assertEqual(expected, (self.out / "simulated.csv").read_bytes())
        self.assertEqual(7, self.result("simulate.json")["config"]["seed"])

    def test_bad_seed_environment(self):
        with mock.patch.dict(os.environ, {cli.SEED_ENV: "seven"}):
            code = self.run_cli("simulate", "--n", "30", "--p", "4")
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)

    def test_experiment(self):
        code = self.run_cli("simulate", "--n", "60", "--p", "5",
                            "--d-star", "2", "--experiment", "fit-error",
                            "--replicates", "3")
        self.assertEqual(cli.ERROR.OK, code)
        summary = self.result("simulate.json")["summary"]
        self.assertEqual(3, summary["replicates"])
        self.assertIn("l1_error", summary["metrics"])
        lines = (self.out / "fit-error.csv").read_text().splitlines()
        self.assertEqual(4, len(lines))

    def test_invalid_spec(self):
        code = self.run_cli("simulate", "--n", "30", "--p", "4",
                            "--d-star", "5")
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)


class TestTheoryCommands(CliTestCase):
    def test_oracle_check(self):
        code = self.run_cli("oracle-check", "--n", "100", "--p", "8",
                            "--d-star", "2", "--beta-min", "0.5",
                            "--replicates", "2", "--cone-budget", "500")
        result = self.result("oracle-check.json")
        self.assertEqual(2, result["replicates"])
        if result["applicable"]:
            self.assertEqual(cli.ERROR.OK, code)
        else:
            self.assertEqual(cli.ERROR.BOUND_INAPPLICABLE, code)
        self.assertTrue((self.out / "oracle-check.csv").exists())

    def test_oracle_check_inapplicable(self):
        # a huge lambda1 pushes tau past exp(-1)/2 on every replicate
        code = self.run_cli("oracle-check", "--n", "50", "--p", "5",
                            "--d-star", "2", "--replicates", "2",
                            "--lambda1", "50", "--cone-budget", "0")
        self.assertEqual(cli.ERROR.BOUND_INAPPLICABLE, code)
        self.assertEqual(0, self.result("oracle-check.json")["applicable"])

    def test_grouping_duplicated_pairs(self):
        spec = SimSpec(n=80, p=4, d_star=2, beta_min=0.5,
                       design=Design.duplicated_pairs, seed=1)
        data, _ = simulate_dataset(spec)
        path = self.tmp / "pairs.csv"
        cli.write_dataset(path, data)
        code = self.run_cli("grouping", str(path), "--theta", "2",
                            "--lambda1", "0.02", "--lambda2", "0.05",
                            "--pair", "0,1", "--pair", "2,3")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("grouping.json")
        self.assertTrue(result["all_hold"])
        self.assertEqual([(0, 1), (2, 3)],
                         [(r["k"], r["l"]) for r in result["pairs"]])
        for row in result["pairs"]:
            self.assertLessEqual(row["lhs"], 1e-6)

    def test_grouping_needs_ridge(self):
        code = self.run_cli("grouping", self.data_file("tiny.csv"),
                            "--theta", "2", "--lambda1", "0.05")
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)

    def test_sign_consistency(self):
        code = self.run_cli("sign-consistency", "--n", "100", "--p", "6",
                            "--d-star", "2", "--replicates", "2")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("sign-consistency.json")
        self.assertIn("sign_match", result["metrics"])
        self.assertAlmostEqual(2 * np.sqrt(np.log(6) / 100),
                               result["lambda1"])

    def test_select(self):
        code = self.run_cli("select", "--n", "100", "--p", "6",
                            "--d-star", "2", "--replicates", "2",
                            "--cone-budget", "0")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("select.json")
        self.assertEqual(1.0, result["metrics"]["missed_implies_error"])


class TestDataCommands(CliTestCase):
    def test_debias(self):
        code = self.run_cli("debias", self.data_file("single.csv"),
                            "--theta", "2", "--lambda1", "0.05",
                            "--level", "0.9")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("debias.json")
        self.assertEqual(1, len(result["b_hat"]))
        self.assertLess(result["ci_low"][0], result["b_hat"][0])
        self.assertLess(result["b_hat"][0], result["ci_high"][0])
        self.assertEqual(0.9, result["level"])

    def test_disp_test_given_means(self):
        path = self.tmp / "means.csv"
        path.write_text("y,mu\n" + "1,2.0\n" * 10)
        code = self.run_cli("disp-test", str(path))
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("disp-test.json")
        self.assertEqual("mu", result["mu_source"])
        self.assertEqual(0.0, result["alpha_hat"])
        self.assertEqual(1.0, result["p_value"])

    def test_disp_test_fitted_means(self):
        code = self.run_cli("disp-test", self.data_file("single.csv"),
                            "--theta", "2", "--lambda1", "0.01",
                            "--variant", "linear")
        self.assertEqual(cli.ERROR.OK, code)
        result = self.result("disp-test.json")
        self.assertEqual("fit", result["mu_source"])
        self.assertEqual("linear", result["variant"])

    def test_disp_test_bad_counts(self):
        path = self.tmp / "means.csv"
        path.write_text("y,mu\n1.5,2.0\n1,2.0\n")
        code = self.run_cli("disp-test", str(path))
        self.assertEqual(cli.ERROR.INPUT_ERROR, code)
