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
Per-replicate experiments for :func:`nbelnet.simulate.run_replications`.

Every experiment is called as ``run(data, beta_star, sim, seed=..., **params)``
on one simulated dataset and returns a flat ``dict`` of metrics. Booleans are
aggregated into frequencies; a metric that only makes sense when some event
holds is ``None`` on replicates where it fails.

Parameters understood by every experiment:

``penalty``
    A :class:`~nbelnet.model.Penalty`, overriding the three below
``lambda1``, ``lambda1_rate``
    ``lambda1`` directly or as ``rate * sqrt(log p / n)`` (rate 2 by default)
``lambda2``
    defaults to ``lambda1 / (8 B)`` with ``B = |beta*|_inf``
``config``
    a :class:`~nbelnet.solver.SolverConfig`
"""

from __future__ import annotations

import math
from typing import Any, Callable, Dict, Optional

import numpy as np

from .debias import debias
from .model import Dataset, Penalty, nb_hessian, nb_score
from .selection import (DetectionThresholds, detection_thresholds,
                        free_threshold, min_signal, selection_report,
                        support_and_signs)
from .simulate import SimSpec
from .solver import Fit, SolverConfig, fit, lambda1_from_rate
from .theory import (STABIL_SLOPE, ConeSpec, TheoryConfig, curvature_constant,
                     noise_event_check, score_event_check,
                     stabil_constant, theory_report)

Metrics = Dict[str, Any]
Experiment = Callable[..., Metrics]

DEFAULT_RATE = 2.0
DEFAULT_CONE_BUDGET = 2000


def resolve_penalty(data: Dataset, beta_star: Optional[np.ndarray] = None,
                    penalty: Optional[Penalty] = None,
                    lambda1: Optional[float] = None,
                    lambda1_rate: Optional[float] = None,
                    lambda2: Optional[float] = None) -> Penalty:
    """The penalty an experiment fits with.

    Without ``lambda2`` the ridge weight is ``lambda1 / (8 B)`` where ``B``
    is the largest true coefficient, or ``0`` when the truth is unknown or
    zero.
    """
    if penalty is not None:
        return penalty
    if lambda1 is None:
        rate = DEFAULT_RATE if lambda1_rate is None else lambda1_rate
        lambda1 = lambda1_from_rate(data.n, data.p, rate)
    if lambda2 is None:
        B = (float(np.max(np.abs(beta_star)))
             if beta_star is not None and beta_star.size else 0.0)
        lambda2 = lambda1 / (8 * B) if B > 0 else 0.0
    return Penalty(lambda1, lambda2)


def _fit(data: Dataset, beta_star: np.ndarray, params: Dict[str, Any]
         ) -> Fit:
    pen = resolve_penalty(data, beta_star, params.get("penalty"),
                          params.get("lambda1"), params.get("lambda1_rate"),
                          params.get("lambda2"))
    config: Optional[SolverConfig] = params.get("config")
    return fit(data, pen, config)


def _support(beta_star: np.ndarray) -> np.ndarray:
    return np.flatnonzero(beta_star)


def _theory_config(data: Dataset, beta_star: np.ndarray, seed: int,
                   params: Dict[str, Any]) -> TheoryConfig:
    B = params.get("B") or float(np.max(np.abs(beta_star))) or 1.0
    L = params.get("L") or float(np.max(np.abs(data.X)))
    return TheoryConfig(B=B, L_or_K=L,
                        epsilon_n=params.get("epsilon_n", 0.0),
                        zeta=params.get("zeta", 3.0),
                        samples=max(1, params.get("cone_budget",
                                                  DEFAULT_CONE_BUDGET)),
                        seed=seed)


def fit_error(data: Dataset, beta_star: np.ndarray, sim: SimSpec,
              seed: int = 0, **params) -> Metrics:
    """Estimation error of one fit."""
    fitted = _fit(data, beta_star, params)
    delta = fitted.beta - beta_star
    return {"l1_error": float(np.sum(np.abs(delta))),
            "l2_error": float(np.sqrt(delta @ delta)),
            "linf_error": float(np.max(np.abs(delta))),
            "converged": fitted.converged,
            "iterations": fitted.iterations,
            "kkt_max_violation": fitted.kkt.max_violation,
            "support_size": len(support_and_signs(fitted).indices),
            "lambda1": fitted.penalty.lambda1,
            "lambda2": fitted.penalty.lambda2}


def oracle_check(data: Dataset, beta_star: np.ndarray, sim: SimSpec,
                 seed: int = 0, **params) -> Metrics:
    """Compare the realized l1 error with the oracle bounds.

    A bound counts as violated only on replicates where the score event
    holds and the bound applies; elsewhere ``violated`` is ``None``.
    Extra parameters: ``B``, ``L``, ``zeta``, ``epsilon_n``, ``cone_budget``.
    """
    fitted = _fit(data, beta_star, params)
    l1_error = float(np.sum(np.abs(fitted.beta - beta_star)))
    noise = noise_event_check(fitted.beta, beta_star, data,
                              fitted.penalty.lambda1)
    if not _support(beta_star).size:
        # the cone constants need a nonempty support
        event = score_event_check(beta_star, data, fitted.penalty,
                                  params.get("zeta", 3.0))
        return {"l1_error": l1_error,
                "l1_bound": math.inf,
                "lq_bound": math.inf,
                "tau": math.nan,
                "compat": math.nan,
                "applicable": False,
                "score_event": event.holds,
                "violated": None,
                "l1_bound_stabil": math.inf,
                "stabil_k": math.nan,
                "violated_stabil": None,
                "noise_event": noise.holds,
                "converged": fitted.converged}
    cfg = _theory_config(data, beta_star, seed, params)
    report = theory_report(data, beta_star, fitted.penalty, cfg)
    applicable = math.isfinite(report.l1_bound_compat)
    stabil_applicable = math.isfinite(report.l1_bound_stabil)
    checked = report.score_event and applicable
    stabil_checked = report.score_event and stabil_applicable
    return {"l1_error": l1_error,
            "l1_bound": report.l1_bound_compat,
            "lq_bound": report.lq_bound_compat,
            "tau": report.tau,
            "compat": report.compat,
            "applicable": applicable,
            "score_event": report.score_event,
            "violated": (l1_error > report.l1_bound_compat
                         if checked else None),
            "l1_bound_stabil": report.l1_bound_stabil,
            "stabil_k": report.stabil_k,
            "violated_stabil": (l1_error > report.l1_bound_stabil
                                if stabil_checked else None),
            "noise_event": noise.holds,
            "converged": fitted.converged}


def _oracle_restricted(data: Dataset, H: np.ndarray, pen: Penalty,
                       config: Optional[SolverConfig]) -> np.ndarray:
    beta = np.zeros(data.p)
    if H.size:
        restricted = Dataset(data.X[:, H], data.y, data.theta)
        beta[H] = fit(restricted, pen, config).beta
    return beta


def sign_consistency(data: Dataset, beta_star: np.ndarray, sim: SimSpec,
                     seed: int = 0, eta: float = 0.5, **params) -> Metrics:
    """Sign recovery and the events it is derived from.

    The restricted estimate for ``event_E3`` is the elastic-net fit using
    only the columns of ``H``.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must be in (0, 1), got %r" % eta)
    fitted = _fit(data, beta_star, params)
    pen = fitted.penalty
    H = _support(beta_star)
    off = np.setdiff1d(np.arange(data.p), H)
    score_star = nb_score(beta_star, data)
    restricted = _oracle_restricted(data, H, pen, params.get("config"))
    witness = nb_score(restricted, data) - score_star
    report = selection_report(fitted, beta_star)
    return {"sign_match": report.sign_match,
            "event_E1": bool(np.max(np.abs(fitted.beta - beta_star))
                             < report.min_signal),
            "event_E2": bool(not off.size or np.max(np.abs(score_star[off]))
                             <= eta * pen.lambda1),
            "event_E3": bool(not off.size or np.max(np.abs(witness[off]))
                             <= (1 - eta) * pen.lambda1),
            "converged": fitted.converged}


def honest_selection(data: Dataset, beta_star: np.ndarray, sim: SimSpec,
                     seed: int = 0, zero_tol: float = 0.0,
                     **params) -> Metrics:
    """Support recovery against the truth and the detection thresholds.

    ``B0`` needs a Stabil constant estimate on the Hessian at the truth
    (budget ``cone_budget``); set ``cone_budget=0`` to skip it.
    """
    fitted = _fit(data, beta_star, params)
    pen = fitted.penalty
    cfg = _theory_config(data, beta_star, seed, params)
    H = tuple(int(j) for j in _support(beta_star))
    a_const = curvature_constant(data.theta, cfg.L_or_K, cfg.B,
                                 cfg.epsilon_n)
    stabil_k = math.nan
    if H and params.get("cone_budget", DEFAULT_CONE_BUDGET) > 0:
        estimate = stabil_constant(nb_hessian(beta_star, data),
                                   ConeSpec(STABIL_SLOPE, H, cfg.epsilon_n),
                                   cfg.samples, seed,
                                   radius=max(1.0, 2 * cfg.M))
        stabil_k = math.nan if estimate.degenerate else estimate.k
    if pen.lambda1 > 0 and stabil_k > 0:
        thresholds = detection_thresholds(pen, cfg, len(H), stabil_k,
                                          a_const)
    else:
        thresholds = DetectionThresholds(
            B0=math.nan,
            free=free_threshold(pen.lambda1, a_const, cfg.epsilon_n))
    report = selection_report(fitted, beta_star, zero_tol, thresholds)
    signal = min_signal(beta_star)
    l1_error = float(np.sum(np.abs(fitted.beta - beta_star)))
    reached = l1_error >= signal
    missed = not report.contains_H
    return {"contains_H": report.contains_H,
            "within_H": report.H_hat <= frozenset(H),
            "equals_H": report.equals_H,
            "sign_match": report.sign_match,
            "l1_error": l1_error,
            "error_reaches_signal": reached,
            "missed_implies_error": (not missed) or reached,
            "cleared_free": (signal >= report.threshold_free
                             if math.isfinite(report.threshold_free)
                             else None),
            "cleared_B0": (signal >= report.threshold_B0
                           if math.isfinite(report.threshold_B0) else None),
            "threshold_free": report.threshold_free,
            "threshold_B0": report.threshold_B0,
            "converged": fitted.converged}


def debias_coverage(data: Dataset, beta_star: np.ndarray, sim: SimSpec,
                    seed: int = 0, coordinate: int = 0, level: float = 0.95,
                    lambda_node: Optional[float] = None,
                    **params) -> Metrics:
    """Confidence interval coverage of one true coefficient."""
    if not 0 <= coordinate < data.p:
        raise ValueError("coordinate %r out of range for p=%d"
                         % (coordinate, data.p))
    fitted = _fit(data, beta_star, params)
    result = debias(fitted, data, level=level, lambda_node=lambda_node)
    low, high = result.ci_low[coordinate], result.ci_high[coordinate]
    truth = beta_star[coordinate]
    return {"covered": bool(low <= truth <= high),
            "ci_width": float(high - low),
            "bias": float(result.b_hat[coordinate] - truth),
            "se": float(result.se[coordinate]),
            "rewrite_gap": result.rewrite_gap,
            "converged": fitted.converged}


EXPERIMENTS: Dict[str, Experiment] = {
    "fit-error": fit_error,
    "oracle-check": oracle_check,
    "sign-consistency": sign_consistency,
    "honest-selection": honest_selection,
    "debias-coverage": debias_coverage,
}
