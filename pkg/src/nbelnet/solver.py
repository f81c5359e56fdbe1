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
Fitting the elastic-net NB estimator and certifying optimality.

The estimator minimizes :func:`nbelnet.model.objective` by proximal
gradient descent with backtracking. The proximal map of
``lambda1 |b|_1 + lambda2 |b|_2^2`` with step ``t`` is the coordinatewise

    ``soft_threshold(z, t * lambda1) / (1 + 2 * t * lambda2)``

which produces exact zeros, so supports can be read off directly.

Convergence is judged by the KKT residual of :func:`kkt_check` rather than
by objective change.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .model import (ArrayLike, Dataset, NBDomainError, Penalty, as_coef,
                    nb_loss, nb_loss_batch, nb_score, objective)


MONOTONE_SLACK = 1e-12
"""Largest objective increase tolerated for an accepted step"""

_MIN_STEP = 1e-20
_MAX_STEP = 1e12
_BRUTE_FORCE_CHUNK = 20000


class ExistenceWarning(UserWarning):
    """The unpenalized estimate may not exist (``p > n`` without penalty)."""


class ConvergenceWarning(UserWarning):
    """The solver stopped before meeting its KKT tolerance."""


@dataclass(frozen=True)
class SolverConfig:
    """Settings for :func:`fit`."""

    tol: float = 1e-8
    """KKT tolerance, the largest residual accepted as converged"""

    max_iter: int = 10000
    """Maximum number of proximal steps"""

    step_init: float = 1.0
    """First trial step size"""

    backtrack: float = 0.5
    """Step shrink factor in ``(0, 1)`` used when a trial step is rejected"""

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive, got %r" % self.tol)
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be at least 1, got %r"
                             % self.max_iter)
        if not self.step_init > 0:
            raise ValueError("step_init must be positive, got %r"
                             % self.step_init)
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack must be in (0, 1), got %r"
                             % self.backtrack)


@dataclass(frozen=True)
class KktReport:
    """Coordinatewise optimality certificate."""

    residuals: np.ndarray
    """Per-coordinate KKT residuals, all ``>= 0``"""

    max_violation: float
    """Largest residual"""

    satisfied: bool
    """Whether ``max_violation <= tol``"""

    tol: float
    """Tolerance the report was computed against"""

    exact: bool
    """``True`` when ``lambda2 > 0``, where the conditions are both necessary
    and sufficient. With ``lambda2 = 0`` a satisfied report is only a
    necessary condition."""


@dataclass
class Fit:
    """An elastic-net estimate with its certificate."""

    beta: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    kkt: KktReport
    penalty: Penalty
    history: List[float] = field(default_factory=list)
    """Objective value after every accepted step, starting point first"""


def soft_threshold(z: np.ndarray, t: float) -> np.ndarray:
    """Coordinatewise ``sgn(z) max(|z| - t, 0)``"""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def _prox(z: np.ndarray, step: float, pen: Penalty) -> np.ndarray:
    return soft_threshold(z, step * pen.lambda1) / (1 + 2 * step * pen.lambda2)


def _kkt_residuals(beta: np.ndarray, score: np.ndarray,
                   pen: Penalty) -> np.ndarray:
    nonzero = beta != 0
    return np.where(
        nonzero,
        np.abs(score + np.sign(beta)
               * (pen.lambda1 + 2 * pen.lambda2 * np.abs(beta))),
        # a residual of exactly lambda1 is on the closed subdifferential
        np.maximum(0.0, np.abs(score) - pen.lambda1))


def _report(residuals: np.ndarray, tol: float, pen: Penalty) -> KktReport:
    worst = float(np.max(residuals)) if residuals.size else 0.0
    return KktReport(residuals=residuals, max_violation=worst,
                     satisfied=worst <= tol, tol=tol,
                     exact=pen.lambda2 > 0)


def kkt_check(beta: ArrayLike, data: Dataset, pen: Penalty,
              tol: float = 1e-8) -> KktReport:
    """Check the elastic-net KKT conditions at ``beta``.

    For ``beta_k != 0`` the residual is
    ``|grad_k + sgn(beta_k) (lambda1 + 2 lambda2 |beta_k|)|``; for
    ``beta_k == 0`` it is ``max(0, |grad_k| - lambda1)``.

    :raise DimensionError: if ``beta`` does not have length ``data.p``
    """
    beta = as_coef(beta, data.p)
    return _report(_kkt_residuals(beta, nb_score(beta, data), pen), tol, pen)


def fit(data: Dataset, pen: Penalty, config: Optional[SolverConfig] = None,
        beta0: Optional[ArrayLike] = None) -> Fit:
    """Compute the elastic-net NB estimate.

    Starts from ``beta0`` (zero by default) and takes proximal gradient
    steps. Each trial step size starts from a Barzilai-Borwein estimate and
    is shrunk by ``config.backtrack`` until the quadratic upper bound holds
    and the objective does not increase.

    When the iteration budget runs out the last (best) iterate is returned
    with ``converged=False`` and a :class:`ConvergenceWarning`.

    :raise NBDomainError: if the starting point is outside the model domain
    """
    config = config or SolverConfig()
    if pen.lambda1 == 0 and pen.lambda2 == 0 and data.p > data.n:
        warnings.warn("No penalty with p=%d > n=%d: the unpenalized estimate "
                      "may not exist" % (data.p, data.n), ExistenceWarning)

    beta = (np.zeros(data.p) if beta0 is None
            else as_coef(beta0, data.p).copy())
    loss = nb_loss(beta, data)
    value = loss + pen.value(beta)
    score = nb_score(beta, data)
    residuals = _kkt_residuals(beta, score, pen)
    history = [value]
    step = config.step_init
    iterations = 0

    while residuals.max() > config.tol and iterations < config.max_iter:
        while True:
            candidate = _prox(beta - step * score, step, pen)
            delta = candidate - beta
            try:
                cand_loss = nb_loss(candidate, data)
            except NBDomainError:
                cand_loss = np.inf
            upper = loss + score @ delta + (delta @ delta) / (2 * step)
            cand_value = cand_loss + pen.value(candidate)
            if (cand_loss <= upper + MONOTONE_SLACK * max(1.0, abs(loss))
                    and cand_value <= value + MONOTONE_SLACK):
                break
            step *= config.backtrack
            if step < _MIN_STEP:
                break
        if step < _MIN_STEP or not np.any(delta):
            # no acceptable move left at machine precision
            break

        new_score = nb_score(candidate, data)
        curvature = delta @ (new_score - score)
        beta, loss, value, score = candidate, cand_loss, cand_value, new_score
        residuals = _kkt_residuals(beta, score, pen)
        history.append(value)
        iterations += 1
        step = (float(np.clip((delta @ delta) / curvature, _MIN_STEP * 1e4,
                              _MAX_STEP))
                if curvature > 0 else step / config.backtrack)

    kkt = _report(residuals, config.tol, pen)
    if not kkt.satisfied:
        warnings.warn("Solver stopped after %d iterations with KKT violation "
                      "%.3g > tol %.3g" % (iterations, kkt.max_violation,
                                           config.tol), ConvergenceWarning)
    return Fit(beta=beta, objective_value=value, iterations=iterations,
               converged=kkt.satisfied, kkt=kkt, penalty=pen, history=history)


def lambda_max(data: Dataset) -> float:
    """Smallest ``lambda1`` with a zero estimate, ``|grad l(0)|_inf``"""
    return float(np.max(np.abs(nb_score(np.zeros(data.p), data))))


def lambda1_from_rate(n: int, p: int, rate: float) -> float:
    """``rate * sqrt(log p / n)``, the usual high-dimensional scaling"""
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive, got n=%r p=%r" % (n, p))
    return float(rate * np.sqrt(np.log(p) / n))


def lambda_grid(data: Dataset, num: int = 50,
                ratio: float = 1e-3) -> np.ndarray:
    """Geometric descending grid from :func:`lambda_max` down to
    ``ratio * lambda_max``."""
    if num < 1 or not 0 < ratio <= 1:
        raise ValueError("num must be >= 1 and ratio in (0, 1]")
    top = lambda_max(data)
    return np.geomspace(top, top * ratio, num) if num > 1 else np.array([top])


def fit_path(data: Dataset, lambda1_grid: Sequence[float], lambda2: float,
             config: Optional[SolverConfig] = None) -> List[Fit]:
    """Fit a warm-started regularization path.

    :param lambda1_grid: ``lambda1`` values in descending order
    :raise ValueError: if the grid is empty or not descending
    """
    grid = np.asarray(lambda1_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("lambda1 grid is empty")
    if np.any(np.diff(grid) > 0):
        raise ValueError("lambda1 grid must be sorted in descending order")
    fits: List[Fit] = []
    beta0 = None
    for lambda1 in grid:
        result = fit(data, Penalty(lambda1, lambda2), config, beta0)
        fits.append(result)
        beta0 = result.beta
    return fits


def _grid_minimum(axes: Sequence[np.ndarray], data: Dataset,
                  pen: Penalty) -> np.ndarray:
    best_value, best = np.inf, None
    points = itertools.product(*axes)
    while True:
        chunk = np.array(list(itertools.islice(points, _BRUTE_FORCE_CHUNK)))
        if chunk.size == 0:
            break
        values = (nb_loss_batch(chunk, data)
                  + pen.lambda1 * np.sum(np.abs(chunk), axis=1)
                  + pen.lambda2 * np.sum(chunk ** 2, axis=1))
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value, best = values[i], chunk[i]
    return np.array(best, dtype=float)


def brute_force_fit(data: Dataset, pen: Penalty, box: float, step: float,
                    refine: bool = True, rounds: int = 6) -> np.ndarray:
    """Minimize the objective over the grid ``[-box, box]^p``.

    An independent reference for small problems. With ``refine`` the
    search zooms ``rounds`` times around the best grid point, dividing the
    spacing by ten each time.

    :raise ValueError: if ``p > 3`` or ``step``/``box`` are not positive
    """
    if data.p > 3:
        raise ValueError("brute_force_fit supports p <= 3, got p=%d" % data.p)
    if not step > 0 or not box > 0:
        raise ValueError("box and step must be positive")
    count = int(np.floor(box / step + 1e-9))
    axis = np.arange(-count, count + 1) * step
    best = _grid_minimum([axis] * data.p, data, pen)
    if refine:
        spacing = step
        local = np.arange(-10, 11)
        for _ in range(rounds):
            spacing /= 10
            axes = [np.clip(c + local * spacing, -box, box) for c in best]
            candidate = _grid_minimum(axes, data, pen)
            if objective(candidate, data, pen) <= objective(best, data, pen):
                best = candidate
    return best
