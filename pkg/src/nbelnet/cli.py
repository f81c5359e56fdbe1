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
"""
Command line interface.

USAGE:
    nbelnet fit data.csv --theta 2 --lambda1-rate 2 --lambda2 0.01
    nbelnet oracle-check --n 400 --p 50 --d-star 5 --replicates 20
    nbelnet disp-test data.csv --theta 2

Every subcommand writes a JSON summary (sorted keys, floats rounded to 13
significant digits, non-finite values as ``null``) into ``--out``, carrying
``schema_version``, the resolved configuration and the warnings raised
during the run. Monte Carlo subcommands also write a per-replicate CSV.

A ``--config`` JSON file may hold defaults for any option, keyed by the
option's name with ``_`` for ``-``; options given on the command line win.
The environment variable ``NBELNET_SEED`` overrides the seed from both.
"""

import argparse
import enum
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import (Any, Callable, Dict, Iterable, List, Optional, Sequence,
                    Tuple)

import numpy as np
import pandas as pd

from .debias import debias
from .experiments import EXPERIMENTS, resolve_penalty
from .model import Dataset, Penalty, linear_predictor
from .selection import (honest_selection_experiment,
                        sign_consistency_experiment, support_and_signs)
from .simulate import (Design, ReplicationSummary, SimSpec,
                       cameron_trivedi_test, run_replications,
                       simulate_dataset)
from .solver import SolverConfig, fit, lambda1_from_rate
from .theory import BoundInapplicableError, grouping_table

ERROR = enum.IntEnum("Error",
                     "OK INPUT_ERROR NOT_CONVERGED BOUND_INAPPLICABLE",
                     start=0)
"""Exit codes returned by the CLI"""

SCHEMA_VERSION = 1
SEED_ENV = "NBELNET_SEED"

_UNRECORDED = ("command", "config", "out", "quiet", "threads")
"""Options that do not change results and are left out of the recorded
configuration"""


class DatasetParseError(Exception):
    """A dataset CSV could not be parsed"""

    def __init__(self, message: str, cause: Optional[Exception] = None):
        super().__init__("Invalid dataset: %s" % message)
        self.__cause__ = cause


def read_frame(path: str) -> pd.DataFrame:
    """Read a numeric CSV with a header row.

    Line numbers in errors count the header as line 1.

    :raise DatasetParseError: if the file cannot be read, or a value is
        missing or not numeric
    """
    try:
        frame = pd.read_csv(path, sep=",", decimal=".", encoding="utf-8")
    except (OSError, UnicodeDecodeError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as e:
        raise DatasetParseError("cannot read %s: %s" % (path, e), e)
    if frame.empty:
        raise DatasetParseError("%s has no data rows" % path)
    missing = frame.isna().to_numpy()
    if missing.any():
        row, col = np.argwhere(missing)[0]
        raise DatasetParseError("missing value at line %d, column %r"
                                % (row + 2, frame.columns[col]))
    numeric = frame.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise DatasetParseError("non-numeric value %r at line %d, column %r"
                                % (frame.iat[row, col], row + 2,
                                   frame.columns[col]))
    return numeric.astype(float)


def read_dataset(path: str, theta: float, response: str = "y",
                 drop: Sequence[str] = ()) -> Dataset:
    """Read a dataset CSV; ``response`` holds the counts and every other
    column not in ``drop`` is a covariate.

    :raise DatasetParseError: if the CSV is malformed or fails the
        :class:`~nbelnet.model.Dataset` checks
    """
    frame = read_frame(path)
    if response not in frame.columns:
        raise DatasetParseError("missing response column %r" % response)
    try:
        return Dataset.from_frame(frame.drop(columns=list(drop)), theta,
                                  response)
    except ValueError as e:
        raise DatasetParseError(str(e), e)


def write_dataset(path: Path, data: Dataset) -> None:
    frame = pd.DataFrame(data.X, columns=["x%d" % j for j in range(data.p)])
    frame["y"] = data.y.astype(int)
    frame.to_csv(path, index=False, float_format="%.12e")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return sorted(_jsonable(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, enum.Enum):
        return _jsonable(value.value)
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return float("%.12e" % value) if math.isfinite(value) else None
    if isinstance(value, (SolverConfig, Penalty)):
        return _jsonable(vars(value))
    return str(value)


class _Run:
    """Output and diagnostics of one CLI invocation."""

    def __init__(self, parsed: argparse.Namespace,
                 caught: List[warnings.WarningMessage]):
        self.parsed = parsed
        self.caught = caught
        self.out = Path(parsed.out)

    def progress(self, message: str) -> None:
        if not self.parsed.quiet:
            print(message, file=sys.stderr)

    def config(self) -> Dict[str, Any]:
        return {k: v for k, v in sorted(vars(self.parsed).items())
                if k not in _UNRECORDED}

    def diagnostics(self) -> List[str]:
        return sorted({"%s: %s" % (w.category.__name__, w.message)
                       for w in self.caught
                       if issubclass(w.category, UserWarning)})

    def emit_json(self, name: str, payload: Dict[str, Any]) -> Path:
        record = dict(payload, schema_version=SCHEMA_VERSION,
                      command=self.parsed.command, config=self.config(),
                      warnings=self.diagnostics())
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        path.write_text(json.dumps(_jsonable(record), sort_keys=True,
                                   indent=2) + "\n", encoding="utf-8")
        self.progress("Wrote %s" % path)
        return path

    def emit_csv(self, name: str, frame: pd.DataFrame) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        frame.to_csv(path, index=False, float_format="%.12e")
        self.progress("Wrote %s" % path)
        return path


def _parse_pair(text: str) -> Tuple[int, int]:
    try:
        k, l = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected K,L but got %r" % text)
    return k, l


def _parser() -> Tuple[argparse.ArgumentParser,
                       Dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--out", default=".",
                        help="Directory for output files (default: .)")
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--seed", type=int, default=0,
                        help="Master seed (default: 0, or $%s)" % SEED_ENV)
    common.add_argument("--threads", type=int, default=1,
                        help="Worker threads for replicates; results do not "
                             "depend on it")
    common.add_argument("-q", "--quiet", action="store_true",
                        help="Do not report progress on STDERR")

    penalty = argparse.ArgumentParser(add_help=False)
    penalty.add_argument("--lambda1", type=float,
                         help="l1 penalty weight (default: RATE * "
                              "sqrt(log p / n), which is 0 when p = 1)")
    penalty.add_argument("--lambda1-rate", type=float,
                         help="Set lambda1 = RATE * sqrt(log p / n) "
                              "(default rate: 2)")
    penalty.add_argument("--lambda2", type=float,
                         help="Ridge penalty weight (default: "
                              "lambda1 / (8 B) for simulations, 0 for data)")
    penalty.add_argument("--tol", type=float, default=1e-8,
                         help="KKT tolerance of the solver")
    penalty.add_argument("--max-iter", type=int, default=10000)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("input", help="CSV with header and count column y")
    data.add_argument("--theta", type=float,
                      help="Known NB dispersion (required)")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--n", type=int, default=200)
    sim.add_argument("--p", type=int, default=50)
    sim.add_argument("--d-star", type=int, default=3)
    sim.add_argument("--beta-min", type=float, default=1.0)
    sim.add_argument("--beta-max", type=float)
    sim.add_argument("--design", choices=[d.value for d in Design],
                     default=Design.iid_gaussian.value)
    sim.add_argument("--rho", type=float, default=0.0)
    sim.add_argument("--clamp-L", dest="clamp_L", type=float, default=3.0)
    sim.add_argument("--theta", type=float, default=2.0)
    sim.add_argument("--random-signs", action="store_true")
    sim.add_argument("--replicates", type=int, default=100)

    theory = argparse.ArgumentParser(add_help=False)
    theory.add_argument("--zeta", type=float, default=3.0)
    theory.add_argument("--B", type=float,
                        help="Bound on |beta*|_inf (default: realized)")
    theory.add_argument("--L", type=float,
                        help="Bound on |x_ij| (default: realized)")
    theory.add_argument("--epsilon-n", type=float, default=0.0)
    theory.add_argument("--cone-budget", type=int, default=2000,
                        help="Sampling budget of the cone searches")

    parser = argparse.ArgumentParser(
        prog="nbelnet",
        description="Elastic-net negative binomial regression and checks "
                    "of its theoretical guarantees")
    commands = parser.add_subparsers(dest="command")
    sub = {}

    def add(name: str, parents: Iterable[argparse.ArgumentParser],
            summary: str) -> argparse.ArgumentParser:
        sub[name] = commands.add_parser(name, parents=list(parents),
                                        help=summary)
        return sub[name]

    add("fit", (common, data, penalty), "Fit one dataset")
    simulate = add("simulate", (common, sim, penalty, theory),
                   "Write one simulated dataset, optionally replicate an "
                   "experiment")
    simulate.add_argument("--experiment", choices=sorted(EXPERIMENTS))
    simulate.add_argument("--eta", type=float, default=0.5)
    simulate.add_argument("--coordinate", type=int, default=0)
    simulate.add_argument("--level", type=float, default=0.95)
    simulate.add_argument("--lambda-node", type=float)
    simulate.add_argument("--zero-tol", type=float, default=0.0)
    add("oracle-check", (common, sim, penalty, theory),
        "Compare l1 errors with the oracle bounds on replicates")
    grouping = add("grouping", (common, data, penalty),
                   "Check the grouping bound for pairs of covariates")
    grouping.add_argument("--pair", dest="pairs", action="append",
                          type=_parse_pair, metavar="K,L",
                          help="Covariate pair to check, repeatable "
                               "(default: all pairs)")
    consistency = add("sign-consistency", (common, sim, penalty),
                      "Monte Carlo sign recovery")
    consistency.add_argument("--eta", type=float, default=0.5)
    select = add("select", (common, sim, penalty, theory),
                 "Monte Carlo support recovery against the thresholds")
    select.add_argument("--zero-tol", type=float, default=0.0)
    debiased = add("debias", (common, data, penalty),
                   "De-biased estimate with confidence intervals")
    debiased.add_argument("--level", type=float, default=0.95)
    debiased.add_argument("--lambda-node", type=float)
    disp = add("disp-test", (common, data, penalty),
               "Cameron-Trivedi overdispersion test")
    disp.add_argument("--variant", choices=("linear", "quadratic"),
                      default="quadratic")
    disp.add_argument("--mu-column", default="mu",
                      help="Column of fitted means; fitted when absent")
    return parser, sub


def _load_config(path: str, known: Iterable[str]) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            config = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError("Cannot read config %s: %s" % (path, e))
    if not isinstance(config, dict):
        raise ValueError("Config %s must hold a JSON object" % path)
    unknown = sorted(set(config) - set(known) - {"command"})
    if unknown:
        raise ValueError("Unknown config keys: %s" % ", ".join(unknown))
    config.pop("command", None)
    return config


def _seed(parsed: argparse.Namespace) -> int:
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ValueError("%s must be an integer, got %r" % (SEED_ENV,
                                                                env))
    return parsed.seed


def _solver_config(parsed: argparse.Namespace) -> SolverConfig:
    return SolverConfig(tol=parsed.tol, max_iter=parsed.max_iter)


def _theta(parsed: argparse.Namespace) -> float:
    if parsed.theta is None:
        raise ValueError("--theta is required")
    return parsed.theta


def _data_penalty(parsed: argparse.Namespace, data: Dataset) -> Penalty:
    if parsed.lambda1 is None and data.p == 1:
        warnings.warn("The default lambda1 = rate * sqrt(log p / n) is 0 for "
                      "p = 1, the fit is not l1 penalized; pass --lambda1")
    return resolve_penalty(data, None, None, parsed.lambda1,
                           parsed.lambda1_rate, parsed.lambda2)


def _sim_spec(parsed: argparse.Namespace) -> SimSpec:
    return SimSpec(n=parsed.n, p=parsed.p, d_star=parsed.d_star,
                   beta_min=parsed.beta_min, beta_max=parsed.beta_max,
                   design=Design(parsed.design), rho=parsed.rho,
                   clamp_L=parsed.clamp_L, theta=parsed.theta,
                   seed=parsed.seed, random_signs=parsed.random_signs)


def _sim_penalty(parsed: argparse.Namespace, spec: SimSpec) -> Penalty:
    """Penalty shared by all replicates; ``B`` is the largest magnitude
    a simulated coefficient can take."""
    lambda1 = parsed.lambda1
    if lambda1 is None:
        rate = 2.0 if parsed.lambda1_rate is None else parsed.lambda1_rate
        lambda1 = lambda1_from_rate(spec.n, spec.p, rate)
    lambda2 = parsed.lambda2
    if lambda2 is None:
        B = spec.beta_max if spec.beta_max is not None else spec.beta_min
        lambda2 = lambda1 / (8 * B) if spec.d_star > 0 else 0.0
    return Penalty(lambda1, lambda2)


_EXPERIMENT_OPTIONS = {
    "fit-error": (),
    "oracle-check": ("B", "L", "zeta", "epsilon_n", "cone_budget"),
    "sign-consistency": ("eta",),
    "honest-selection": ("B", "L", "zeta", "epsilon_n", "cone_budget",
                         "zero_tol"),
    "debias-coverage": ("coordinate", "level", "lambda_node"),
}


def _experiment_params(parsed: argparse.Namespace,
                       experiment: str) -> Dict[str, Any]:
    params = {name: getattr(parsed, name)
              for name in _EXPERIMENT_OPTIONS[experiment]
              if getattr(parsed, name, None) is not None}
    params["config"] = _solver_config(parsed)
    return params


def _summary_payload(summary: ReplicationSummary,
                     pen: Penalty) -> Dict[str, Any]:
    return dict(summary.as_dict(), lambda1=pen.lambda1, lambda2=pen.lambda2)


def cmd_fit(run: _Run) -> int:
    parsed = run.parsed
    data = read_dataset(parsed.input, _theta(parsed))
    pen = _data_penalty(parsed, data)
    run.progress("Fitting n=%d p=%d lambda1=%g lambda2=%g"
                 % (data.n, data.p, pen.lambda1, pen.lambda2))
    fitted = fit(data, pen, _solver_config(parsed))
    run.emit_json("fit.json", {
        "beta": fitted.beta,
        "objective": fitted.objective_value,
        "iterations": fitted.iterations,
        "converged": fitted.converged,
        "kkt_max_violation": fitted.kkt.max_violation,
        "support": support_and_signs(fitted).indices,
        "lambda1": pen.lambda1,
        "lambda2": pen.lambda2,
        "theta": data.theta,
    })
    return ERROR.OK if fitted.converged else ERROR.NOT_CONVERGED


def cmd_simulate(run: _Run) -> int:
    parsed = run.parsed
    spec = _sim_spec(parsed)
    data, beta_star = simulate_dataset(spec, parsed.seed)
    run.out.mkdir(parents=True, exist_ok=True)
    write_dataset(run.out / "simulated.csv", data)
    payload: Dict[str, Any] = {"beta_star": beta_star, "n": data.n,
                               "p": data.p, "theta": data.theta}
    if parsed.experiment:
        pen = _sim_penalty(parsed, spec)
        run.progress("Running %s on %d replicates"
                     % (parsed.experiment, parsed.replicates))
        summary = run_replications(
            spec, parsed.experiment, parsed.replicates, parsed.seed,
            parsed.threads, penalty=pen,
            **_experiment_params(parsed, parsed.experiment))
        payload["summary"] = _summary_payload(summary, pen)
        run.emit_csv("%s.csv" % parsed.experiment, summary.per_replicate)
    run.emit_json("simulate.json", payload)
    return ERROR.OK


def cmd_oracle_check(run: _Run) -> int:
    parsed = run.parsed
    spec = _sim_spec(parsed)
    pen = _sim_penalty(parsed, spec)
    run.progress("Checking oracle bounds on %d replicates"
                 % parsed.replicates)
    summary = run_replications(spec, "oracle-check", parsed.replicates,
                               parsed.seed, parsed.threads, penalty=pen,
                               **_experiment_params(parsed, "oracle-check"))
    violated = summary.counts.get("violated", {"true": 0, "observed": 0})
    applicable = summary.counts["applicable"]["true"]
    payload = _summary_payload(summary, pen)
    payload.update(violations=violated["true"], checked=violated["observed"],
                   applicable=applicable)
    run.emit_csv("oracle-check.csv", summary.per_replicate)
    run.emit_json("oracle-check.json", payload)
    if applicable == 0:
        print("No replicate satisfied tau <= exp(-1)/2; the compatibility "
              "bound does not apply", file=sys.stderr)
        return ERROR.BOUND_INAPPLICABLE
    return ERROR.OK


def cmd_grouping(run: _Run) -> int:
    parsed = run.parsed
    data = read_dataset(parsed.input, _theta(parsed))
    pen = _data_penalty(parsed, data)
    fitted = fit(data, pen, _solver_config(parsed))
    rows = grouping_table(fitted, data, pen, parsed.pairs)
    frame = pd.DataFrame([{"k": r.k, "l": r.l, "rho_kl": r.rho_kl,
                           "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}
                          for r in rows],
                         columns=["k", "l", "rho_kl", "lhs", "rhs", "holds"])
    run.emit_csv("grouping.csv", frame)
    run.emit_json("grouping.json", {
        "pairs": frame.to_dict(orient="records"),
        "all_hold": bool(frame["holds"].all()),
        "beta": fitted.beta,
        "converged": fitted.converged,
        "lambda1": pen.lambda1,
        "lambda2": pen.lambda2,
    })
    return ERROR.OK if fitted.converged else ERROR.NOT_CONVERGED


def cmd_sign_consistency(run: _Run) -> int:
    parsed = run.parsed
    spec = _sim_spec(parsed)
    pen = _sim_penalty(parsed, spec)
    run.progress("Estimating sign consistency on %d replicates"
                 % parsed.replicates)
    summary = sign_consistency_experiment(spec, pen, parsed.replicates,
                                          parsed.seed, parsed.threads,
                                          eta=parsed.eta,
                                          config=_solver_config(parsed))
    run.emit_csv("sign-consistency.csv", summary.per_replicate)
    run.emit_json("sign-consistency.json", _summary_payload(summary, pen))
    return ERROR.OK


def cmd_select(run: _Run) -> int:
    parsed = run.parsed
    spec = _sim_spec(parsed)
    pen = _sim_penalty(parsed, spec)
    run.progress("Estimating support recovery on %d replicates"
                 % parsed.replicates)
    params = _experiment_params(parsed, "honest-selection")
    config = params.pop("config")
    summary = honest_selection_experiment(spec, pen, parsed.replicates,
                                          parsed.seed, parsed.threads,
                                          config=config, **params)
    run.emit_csv("select.csv", summary.per_replicate)
    run.emit_json("select.json", _summary_payload(summary, pen))
    return ERROR.OK


def cmd_debias(run: _Run) -> int:
    parsed = run.parsed
    data = read_dataset(parsed.input, _theta(parsed))
    pen = _data_penalty(parsed, data)
    fitted = fit(data, pen, _solver_config(parsed))
    result = debias(fitted, data, level=parsed.level,
                    lambda_node=parsed.lambda_node)
    run.emit_json("debias.json", {
        "beta_hat": fitted.beta,
        "b_hat": result.b_hat,
        "se": result.se,
        "ci_low": result.ci_low,
        "ci_high": result.ci_high,
        "level": result.level,
        "lambda_node": result.lambda_node,
        "rewrite_gap": result.rewrite_gap,
        "converged": fitted.converged,
        "lambda1": pen.lambda1,
        "lambda2": pen.lambda2,
    })
    return ERROR.OK if fitted.converged else ERROR.NOT_CONVERGED


def cmd_disp_test(run: _Run) -> int:
    parsed = run.parsed
    frame = read_frame(parsed.input)
    if "y" not in frame.columns:
        raise DatasetParseError("missing response column 'y'")
    payload: Dict[str, Any] = {"variant": parsed.variant}
    if parsed.mu_column in frame.columns:
        y = frame["y"].to_numpy()
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise DatasetParseError("y must hold nonnegative integers")
        mu = frame[parsed.mu_column].to_numpy()
        payload["mu_source"] = parsed.mu_column
    else:
        data = read_dataset(parsed.input, _theta(parsed))
        pen = _data_penalty(parsed, data)
        fitted = fit(data, pen, _solver_config(parsed))
        y, mu = data.y, np.exp(linear_predictor(fitted.beta, data))
        payload.update(mu_source="fit", converged=fitted.converged,
                       lambda1=pen.lambda1, lambda2=pen.lambda2)
    result = cameron_trivedi_test(y, mu, parsed.variant)
    payload.update(result._asdict())
    run.emit_json("disp-test.json", payload)
    return ERROR.OK


COMMANDS: Dict[str, Callable[[_Run], int]] = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
    "grouping": cmd_grouping,
    "sign-consistency": cmd_sign_consistency,
    "select": cmd_select,
    "debias": cmd_debias,
    "disp-test": cmd_disp_test,
}


def main(*args: str) -> int:
    """Run a subcommand and return its exit code"""
    parser, subparsers = _parser()
    argv = list(args) if args else sys.argv[1:]
    parsed = parser.parse_args(argv)
    if not parsed.command:
        parser.print_help(sys.stderr)
        return ERROR.INPUT_ERROR

    try:
        if parsed.config:
            config = _load_config(parsed.config, vars(parsed))
            subparsers[parsed.command].set_defaults(**config)
            parsed = parser.parse_args(argv)
        parsed.seed = _seed(parsed)
    except ValueError as e:
        print("Invalid configuration", file=sys.stderr)
        print("%s" % e, file=sys.stderr)
        return ERROR.INPUT_ERROR

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UserWarning)
        run = _Run(parsed, caught)
        try:
            code = COMMANDS[parsed.command](run)
        except DatasetParseError as e:
            print("Could not read dataset %s" % parsed.input, file=sys.stderr)
            print("%s" % e, file=sys.stderr)
            return ERROR.INPUT_ERROR
        except BoundInapplicableError as e:
            print("Bound does not apply", file=sys.stderr)
            print("%s" % e, file=sys.stderr)
            return ERROR.BOUND_INAPPLICABLE
        except ValueError as e:
            print("Invalid input for %s" % parsed.command, file=sys.stderr)
            print("%s" % e, file=sys.stderr)
            return ERROR.INPUT_ERROR
    if not parsed.quiet:
        for line in run.diagnostics():
            print(line, file=sys.stderr)
    return code
