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
Simulated designs and NB responses, the overdispersion test and the
replication engine.

Responses follow the mean parameterization ``mu = exp(x' beta)`` with
``Var(Y) = mu + mu^2 / theta``, sampled as a Gamma-Poisson mixture.

Replicates draw from independent streams whose seeds are derived from the
master seed and the replicate index with :func:`derive_seed`, so a run gives
the same summary for any number of threads.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
import statsmodels.api as sm

from .model import ArrayLike, Dataset

SeedLike = Union[None, int, np.random.Generator]

_MASK64 = (1 << 64) - 1
_QUANTILES = (0.05, 0.5, 0.95)
_STANDARDIZE_TOL = 1e-12


class DesignError(ValueError):
    """A generated design column is degenerate."""


class Design(str, enum.Enum):
    iid_gaussian = "iid_gaussian"
    ar1 = "ar1"
    equicorrelated = "equicorrelated"
    duplicated_pairs = "duplicated_pairs"


@dataclass(frozen=True)
class SimSpec:
    """A simulation regime.

    Entries of the design are truncated to ``[-clamp_L, clamp_L]`` before
    the columns are centered and scaled to ``(1/n) sum_i x_ij^2 = 1``.
    The true coefficients are supported on the first ``d_star`` columns.
    """

    n: int
    p: int
    d_star: int
    beta_min: float
    beta_max: Optional[float] = None
    """Upper end for nonzero magnitudes drawn uniformly; ``None`` fixes every
    magnitude at ``beta_min``"""

    design: Design = Design.iid_gaussian
    rho: float = 0.0
    """Correlation of the ``ar1`` and ``equicorrelated`` designs"""

    clamp_L: float = 3.0
    theta: float = 2.0
    seed: int = 0
    random_signs: bool = False
    """Draw signs at random instead of alternating ``+, -, +, ...``"""

    def __post_init__(self):
        object.__setattr__(self, "design", Design(self.design))
        if int(self.n) < 1 or int(self.p) < 1:
            raise ValueError("n and p must be positive, got n=%r p=%r"
                             % (self.n, self.p))
        if not 0 <= int(self.d_star) <= int(self.p):
            raise ValueError("d_star must be in [0, p], got %r" % self.d_star)
        if not self.beta_min > 0:
            raise ValueError("beta_min must be positive, got %r"
                             % self.beta_min)
        if self.beta_max is not None and not self.beta_max >= self.beta_min:
            raise ValueError("beta_max must be >= beta_min, got %r"
                             % self.beta_max)
        if not -1 < self.rho < 1:
            raise ValueError("rho must be in (-1, 1), got %r" % self.rho)
        if (self.design is Design.equicorrelated and self.p > 1
                and not self.rho > -1 / (self.p - 1)):
            raise ValueError("equicorrelated rho must exceed -1/(p-1) = %r"
                             % (-1 / (self.p - 1)))
        if not self.clamp_L > 0:
            raise ValueError("clamp_L must be positive, got %r" % self.clamp_L)
        if not self.theta > 0:
            raise ValueError("theta must be positive, got %r" % self.theta)


def _rng(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


def _raw_design(spec: SimSpec, rng: np.random.Generator) -> np.ndarray:
    n, p, rho = int(spec.n), int(spec.p), spec.rho
    Z = rng.standard_normal((n, p))
    if spec.design is Design.ar1:
        X = np.empty_like(Z)
        X[:, 0] = Z[:, 0]
        innovation = math.sqrt(1 - rho ** 2)
        for j in range(1, p):
            X[:, j] = rho * X[:, j - 1] + innovation * Z[:, j]
        return X
    if spec.design is Design.equicorrelated:
        cov = np.full((p, p), rho)
        np.fill_diagonal(cov, 1.0)
        return Z @ np.linalg.cholesky(cov).T
    if spec.design is Design.duplicated_pairs:
        Z[:, 1::2] = Z[:, 0:p - p % 2:2]
    return Z


def gen_design(spec: SimSpec, rng: SeedLike = None) -> np.ndarray:
    """Generate an ``n x p`` design for ``spec``.

    Entries are clamped to ``[-L, L]``, then every column is centered and
    scaled to mean square one. With ``duplicated_pairs`` columns ``2k`` and
    ``2k + 1`` (counting from zero) are identical.

    :param rng: generator or seed, ``spec.seed`` when ``None``
    :raise DesignError: if a column is constant after clamping
    """
    rng = _rng(spec.seed if rng is None else rng)
    X = np.clip(_raw_design(spec, rng), -spec.clamp_L, spec.clamp_L)
    X = X - X.mean(axis=0)
    scale = np.sqrt(np.mean(X ** 2, axis=0))
    degenerate = np.flatnonzero(scale == 0)
    if degenerate.size:
        raise DesignError("Generated column %d is constant"
                          % int(degenerate[0]))
    X /= scale
    # one correction pass, then the post-condition is asserted
    X -= X.mean(axis=0)
    X /= np.sqrt(np.mean(X ** 2, axis=0))
    if (np.max(np.abs(X.mean(axis=0))) > _STANDARDIZE_TOL
            or np.max(np.abs(np.mean(X ** 2, axis=0) - 1)) > _STANDARDIZE_TOL):
        raise DesignError("Could not standardize the generated design")
    return X


def make_beta_star(spec: SimSpec, rng: SeedLike = None) -> np.ndarray:
    """True coefficients supported on the first ``d_star`` columns."""
    rng = _rng(spec.seed if rng is None else rng)
    d = int(spec.d_star)
    if spec.beta_max is None:
        magnitudes = np.full(d, float(spec.beta_min))
    else:
        magnitudes = rng.uniform(spec.beta_min, spec.beta_max, d)
    if spec.random_signs:
        signs = rng.choice([-1.0, 1.0], size=d)
    else:
        signs = np.where(np.arange(d) % 2 == 0, 1.0, -1.0)
    beta = np.zeros(int(spec.p))
    beta[:d] = signs * magnitudes
    return beta


def sample_nb(mu: ArrayLike, theta: float, seed: SeedLike = None) -> np.ndarray:
    """Draw NB counts with means ``mu`` and dispersion ``theta``.

    ``Y ~ Poisson(G)`` with ``G ~ Gamma(shape=theta, scale=mu/theta)``.

    :raise ValueError: if any ``mu <= 0`` or ``theta <= 0``
    """
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)) or np.any(mu <= 0):
        raise ValueError("mu must be positive and finite")
    if not theta > 0 or not math.isfinite(theta):
        raise ValueError("theta must be positive and finite, got %r" % theta)
    rng = _rng(seed)
    return rng.poisson(rng.gamma(shape=theta, scale=mu / theta))


def simulate_dataset(spec: SimSpec,
                     seed: SeedLike = None) -> Tuple[Dataset, np.ndarray]:
    """Generate one dataset for ``spec`` and return it with ``beta*``."""
    rng = _rng(spec.seed if seed is None else seed)
    X = gen_design(spec, rng)
    beta_star = make_beta_star(spec, rng)
    y = sample_nb(np.exp(X @ beta_star), spec.theta, rng)
    return Dataset(X, y, spec.theta), beta_star


class DispersionTest(NamedTuple):
    alpha_hat: float
    t_stat: float
    p_value: float
    se: float


def cameron_trivedi_test(y: ArrayLike, mu_hat: ArrayLike,
                         variant: str = "quadratic") -> DispersionTest:
    """Regression-based test of ``H0: alpha = 0`` in
    ``Var(Y) = mu + alpha g(mu)``.

    Regresses ``((y - mu)^2 - y) / mu`` on ``g(mu) / mu`` without intercept,
    with ``g(mu) = mu`` (``linear``) or ``mu^2`` (``quadratic``). A response
    vector with ``(y - mu)^2 = y`` everywhere gives ``alpha_hat = 0`` and
    ``p_value = 1``.

    :raise ValueError: on an unknown variant, non-positive ``mu_hat``,
        mismatched lengths or a zero regressor
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    mu = np.asarray(mu_hat, dtype=float).reshape(-1)
    if y.shape != mu.shape:
        raise ValueError("y and mu_hat have different lengths: %d != %d"
                         % (y.size, mu.size))
    if np.any(mu <= 0) or not np.all(np.isfinite(mu)):
        raise ValueError("mu_hat must be positive and finite")
    if variant == "linear":
        regressor = np.ones_like(mu)
    elif variant == "quadratic":
        regressor = mu.copy()
    else:
        raise ValueError("Unknown variant %r, expected 'linear' or "
                         "'quadratic'" % variant)
    if not np.any(regressor):
        raise ValueError("Regressor vector is zero")
    response = ((y - mu) ** 2 - y) / mu
    if not np.any(response):
        return DispersionTest(0.0, 0.0, 1.0, 0.0)
    result = sm.OLS(response, regressor[:, np.newaxis]).fit()
    return DispersionTest(alpha_hat=float(result.params[0]),
                          t_stat=float(result.tvalues[0]),
                          p_value=float(result.pvalues[0]),
                          se=float(result.bse[0]))


def derive_seed(seed: int, index: int) -> int:
    """Seed of replicate ``index``, a splitmix64 step from the master seed"""
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass
class ReplicationSummary:
    """Aggregated outcome of a replicated experiment."""

    experiment: str
    replicates: int
    seed: int
    metrics: Dict[str, float]
    """Frequencies of boolean metrics, means of numeric ones"""

    quantiles: Dict[str, Dict[str, float]]
    counts: Dict[str, Dict[str, int]]
    """``true`` and ``observed`` counts of boolean metrics; a conditional
    metric is unobserved on replicates where its condition failed"""

    per_replicate: pd.DataFrame = field(repr=False)

    def as_dict(self) -> Dict[str, Any]:
        return {"experiment": self.experiment,
                "replicates": self.replicates,
                "seed": self.seed,
                "metrics": dict(self.metrics),
                "quantiles": {k: dict(v) for k, v in self.quantiles.items()},
                "counts": {k: dict(v) for k, v in self.counts.items()}}


def _is_flag(value: Any) -> bool:
    return isinstance(value, (bool, np.bool_))


def summarize(frame: pd.DataFrame, experiment: str = "",
              seed: int = 0) -> ReplicationSummary:
    """Aggregate a per-replicate table.

    Columns whose observed values are all booleans become frequencies over
    the replicates where they are observed (not ``NaN``). Other columns
    become means and quantiles over their finite values. The ``replicate``
    and ``seed`` columns are bookkeeping and are skipped.
    """
    if "replicate" in frame.columns:
        frame = frame.sort_values("replicate").reset_index(drop=True)
    metrics: Dict[str, float] = {}
    quantiles: Dict[str, Dict[str, float]] = {}
    counts: Dict[str, Dict[str, int]] = {}
    for name in frame.columns:
        if name in ("replicate", "seed"):
            continue
        present = frame[name].dropna()
        if present.size and present.map(_is_flag).all():
            flags = present.astype(bool)
            metrics[name] = float(flags.mean())
            counts[name] = {"true": int(flags.sum()),
                            "observed": int(flags.size)}
            continue
        numbers = pd.to_numeric(frame[name], errors="coerce").astype(float)
        finite = numbers[np.isfinite(numbers)]
        if finite.size:
            metrics[name] = float(finite.mean())
            quantiles[name] = {"q%02d" % round(100 * q):
                               float(finite.quantile(q)) for q in _QUANTILES}
        else:
            metrics[name] = math.nan
    return ReplicationSummary(experiment=experiment, replicates=len(frame),
                              seed=int(seed), metrics=metrics,
                              quantiles=quantiles, counts=counts,
                              per_replicate=frame)


def run_replications(sim: SimSpec, experiment: str, replicates: int,
                     seed: Optional[int] = None, threads: int = 1,
                     **params) -> ReplicationSummary:
    """Run a registered experiment on ``replicates`` simulated datasets.

    Replicate ``i`` uses ``derive_seed(seed, i)`` both for its data and for
    any randomness of the experiment itself. Extra keyword ``params`` are
    passed to the experiment, see :mod:`nbelnet.experiments`.

    :param seed: master seed, ``sim.seed`` when ``None``
    :raise ValueError: on an unknown experiment, ``replicates < 1`` or
        ``threads < 1``
    """
    from .experiments import EXPERIMENTS

    if experiment not in EXPERIMENTS:
        raise ValueError("Unknown experiment %r, expected one of: %s"
                         % (experiment, ", ".join(sorted(EXPERIMENTS))))
    if int(replicates) < 1:
        raise ValueError("replicates must be at least 1, got %r" % replicates)
    if int(threads) < 1:
        raise ValueError("threads must be at least 1, got %r" % threads)
    master = sim.seed if seed is None else int(seed)
    run = EXPERIMENTS[experiment]

    def replicate(index: int) -> Dict[str, Any]:
        sub_seed = derive_seed(master, index)
        data, beta_star = simulate_dataset(sim, sub_seed)
        row = run(data, beta_star, sim, seed=sub_seed, **params)
        return {"replicate": index, "seed": sub_seed, **row}

    if threads == 1:
        rows = [replicate(i) for i in range(int(replicates))]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(replicate, range(int(replicates))))
    return summarize(pd.DataFrame(rows), experiment, master)
