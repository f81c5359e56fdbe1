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
Support and sign recovery.

* :func:`support_and_signs` reads the estimated support ``H_hat``
* :func:`detection_thresholds` gives the weakest-signal thresholds
* :func:`check_design_conditions` evaluates the design conditions behind
  the selection results on one sample
* :func:`sign_consistency_experiment` and
  :func:`honest_selection_experiment` estimate recovery probabilities by
  Monte Carlo

Supports are read at exact zeros by default, since the proximal solver
produces exact zeros.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import FrozenSet, Iterable, NamedTuple, Optional, Union

import numpy as np
from scipy.special import exprel

from .model import (ArrayLike, Dataset, Penalty, as_coef, dispersion_ratio,
                    linear_predictor, mean_ratio)
from .simulate import ReplicationSummary, SimSpec, run_replications
from .solver import Fit, SolverConfig
from .theory import TheoryConfig, TheoryWarning, stabil_l1_bound


class Support(NamedTuple):
    indices: FrozenSet[int]
    signs: np.ndarray


class DetectionThresholds(NamedTuple):
    B0: float
    """Weakest signal detectable through the Stabil l1 bound"""

    free: float
    """Constant-free threshold ``3 lambda1 + 3 (1 + a/lambda1) eps_n``"""


@dataclass(frozen=True)
class SelectionReport:
    """Support recovery of one estimate against the truth."""

    H_hat: FrozenSet[int]
    signs: np.ndarray
    min_signal: float
    """Weakest true signal ``min_{j in H} |beta*_j|``, ``inf`` if ``H`` is
    empty"""

    contains_H: bool
    equals_H: bool
    sign_match: bool
    threshold_B0: float = math.nan
    threshold_free: float = math.nan


@dataclass(frozen=True)
class ConditionReport:
    """Design conditions of the selection results, evaluated on one
    sample.

    Intermediate points of the weighted-correlation conditions are
    unobservable; both endpoints ``beta_hat`` and ``beta*`` are evaluated
    and the worse value is recorded.
    """

    identifiable_ok: bool
    max_offdiag_rho: float
    wcc1_ok: bool
    wcc2_ok: bool
    irrepresentable_I: float
    ussc_ok: Optional[bool]
    """``None`` when no l1 bound was supplied"""

    threshold: float
    """``h / (theta d*)``"""

    wcc1_offdiag: float
    wcc1_diag: float
    wcc2_offdiag: float
    wcc2_diag: float
    min_signal: float
    h_admissible: Optional[bool] = None
    endpoint_approximation: bool = True


def _beta_of(fit_or_beta: Union[Fit, ArrayLike]) -> np.ndarray:
    if isinstance(fit_or_beta, Fit):
        return np.asarray(fit_or_beta.beta, dtype=float)
    return np.asarray(fit_or_beta, dtype=float).reshape(-1)


def support_and_signs(fit_or_beta: Union[Fit, ArrayLike],
                      zero_tol: float = 0.0) -> Support:
    """Estimated support ``{j : |beta_j| > zero_tol}`` and signs.

    :raise ValueError: if ``zero_tol < 0``
    """
    if not zero_tol >= 0:
        raise ValueError("zero_tol must be >= 0, got %r" % zero_tol)
    beta = _beta_of(fit_or_beta)
    kept = np.abs(beta) > zero_tol
    signs = np.where(kept, np.sign(beta), 0.0).astype(int)
    return Support(frozenset(int(j) for j in np.flatnonzero(kept)), signs)


def min_signal(beta_star: ArrayLike) -> float:
    """``min_{j in H} |beta*_j|``, ``inf`` for an all-zero truth"""
    magnitudes = np.abs(np.asarray(beta_star, dtype=float))
    magnitudes = magnitudes[magnitudes > 0]
    return float(magnitudes.min()) if magnitudes.size else math.inf


def detection_thresholds(pen: Penalty, cfg: TheoryConfig, d_star: int,
                         stabil_k: float,
                         a_const: float) -> DetectionThresholds:
    """Weakest-signal thresholds for honest selection.

    ``B0`` is the Stabil l1 bound, computed by the same function as
    :func:`nbelnet.theory.stabil_oracle_bounds`; ``free`` is
    ``3 lambda1 + 3 (1 + a / lambda1) eps_n``, so ``3 lambda1`` when
    ``eps_n = 0``.
    """
    B0 = stabil_l1_bound(pen.lambda1, pen.lambda2, d_star, a_const,
                         stabil_k, cfg.epsilon_n)
    return DetectionThresholds(
        B0=B0, free=free_threshold(pen.lambda1, a_const, cfg.epsilon_n))


def free_threshold(lambda1: float, a_const: float,
                   epsilon_n: float = 0.0) -> float:
    """``3 lambda1 + 3 (1 + a / lambda1) eps_n``"""
    free = 3 * lambda1
    if epsilon_n > 0:
        ratio = a_const / lambda1 if lambda1 > 0 else math.inf
        free += 3 * (1 + ratio) * epsilon_n
    return free


def selection_report(beta_hat: Union[Fit, ArrayLike], beta_star: ArrayLike,
                     zero_tol: float = 0.0,
                     thresholds: Optional[DetectionThresholds] = None
                     ) -> SelectionReport:
    """Compare the estimated support and signs with the truth."""
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    support = support_and_signs(beta_hat, zero_tol)
    if support.signs.shape != beta_star.shape:
        raise ValueError("Estimate and truth have different lengths")
    H = frozenset(int(j) for j in np.flatnonzero(beta_star))
    sign_match = bool(np.array_equal(support.signs,
                                     np.sign(beta_star).astype(int)))
    B0, free = thresholds if thresholds is not None else (math.nan,
                                                          math.nan)
    return SelectionReport(H_hat=support.indices, signs=support.signs,
                           min_signal=min_signal(beta_star),
                           contains_H=H <= support.indices,
                           equals_H=H == support.indices,
                           sign_match=sign_match,
                           threshold_B0=B0, threshold_free=free)


def identifiable_h_limit(a_const: float, lambda2: float, L: float,
                         epsilon_n: float = 0.0) -> float:
    """Largest admissible ``h`` for constant-free honest selection,
    ``min((a + 2 lambda2) / (20.25 L + a (8 + eps_n)), 1 / (8 + eps_n))``"""
    return min((a_const + 2 * lambda2) / (20.25 * L + a_const
                                          * (8 + epsilon_n)),
               1 / (8 + epsilon_n))


def _weighted_maxima(XH: np.ndarray, weights: np.ndarray):
    gram = XH.T @ (XH * weights[:, np.newaxis]) / XH.shape[0]
    diag = float(np.max(np.abs(np.diag(gram))))
    off = np.abs(gram - np.diag(np.diag(gram)))
    return (float(off.max()) if gram.shape[0] > 1 else 0.0), diag


def check_design_conditions(data: Dataset, beta_hat: ArrayLike,
                            beta_star: ArrayLike, H: Iterable[int],
                            h: float, theta: Optional[float] = None, *,
                            L1: float = 1.0, L2: float = 1.0,
                            l1_bound: Optional[float] = None,
                            pen: Optional[Penalty] = None,
                            epsilon_n: float = 0.0,
                            a_const: Optional[float] = None
                            ) -> ConditionReport:
    """Evaluate the selection design conditions on one sample.

    * Identifiable: ``max_{k != l in H} |rho_kl| <= h / (theta d*)``
    * Weighted correlation (1): with ``w = theta e^a / (theta + e^a)^2``,
      off-diagonal weighted correlations (weights ``w`` and ``1 - w``) at
      most ``h / (theta d*)`` and diagonal ones at most
      ``h L1 / (theta d*)``
    * Weighted correlation (2): the same with weights
      ``y e^b / (theta + e^b)^2`` and ``L2``
    * Irrepresentable statistic ``I``: the largest
      ``|theta (theta + y_i) / (theta + e^{x_iH' bhat_H})
      (e^{v_i} - 1) / v_i|`` with ``v_i = x_iH' (bhat_H - b*_H)``, evaluated
      at the actual ``beta*``
    * Uniform signal strength: ``min_{j in H} |b*_j| >= l1_bound``

    Columns of ``H`` should satisfy ``(theta/n) sum_i x_ik^2 = 1``;
    otherwise a :class:`~nbelnet.theory.TheoryWarning` is given.

    :raise ValueError: if ``H`` is empty or out of range
    """
    H = np.array(sorted({int(j) for j in H}), dtype=int)
    if H.size == 0:
        raise ValueError("Condition checks need a nonempty support H")
    if H[0] < 0 or H[-1] >= data.p:
        raise ValueError("Support index out of range for p=%d" % data.p)
    theta = data.theta if theta is None else float(theta)
    beta_hat = as_coef(beta_hat, data.p)
    beta_star = as_coef(beta_star, data.p)
    d_star = H.size
    threshold = h / (theta * d_star)
    XH = data.X[:, H]

    scales = theta * np.mean(XH ** 2, axis=0)
    if not np.allclose(scales, 1.0, atol=1e-6):
        warnings.warn("Columns of H are not scaled to (theta/n) sum x^2 = 1; "
                      "the identifiable condition assumes it", TheoryWarning)

    rho = XH.T @ XH / data.n
    max_rho = (float(np.max(np.abs(rho - np.diag(np.diag(rho)))))
               if d_star > 1 else 0.0)

    wcc1 = [0.0, 0.0]
    wcc2 = [0.0, 0.0]
    for beta in (beta_hat, beta_star):
        u = linear_predictor(beta, data)
        # theta e^u / (theta + e^u)^2
        w = mean_ratio(u, data.theta) * dispersion_ratio(u, data.theta)
        for weights in (w, 1 - w):
            off, diag = _weighted_maxima(XH, weights)
            wcc1 = [max(wcc1[0], off), max(wcc1[1], diag)]
        off, diag = _weighted_maxima(XH, data.y * w / data.theta)
        wcc2 = [max(wcc2[0], off), max(wcc2[1], diag)]

    head = XH @ beta_hat[H]
    shift = XH @ (beta_hat[H] - beta_star[H])
    ratio = (data.theta + data.y) * dispersion_ratio(head, data.theta)
    irrepresentable = float(np.max(np.abs(ratio * exprel(shift))))

    signal = float(np.min(np.abs(beta_star[H])))
    h_admissible = None
    if pen is not None and a_const is not None:
        h_admissible = h <= identifiable_h_limit(a_const, pen.lambda2,
                                                 max(L1, L2), epsilon_n)
    return ConditionReport(
        identifiable_ok=max_rho <= threshold, max_offdiag_rho=max_rho,
        wcc1_ok=wcc1[0] <= threshold and wcc1[1] <= threshold * L1,
        wcc2_ok=wcc2[0] <= threshold and wcc2[1] <= threshold * L2,
        irrepresentable_I=irrepresentable,
        ussc_ok=None if l1_bound is None else signal >= l1_bound,
        threshold=threshold, wcc1_offdiag=wcc1[0], wcc1_diag=wcc1[1],
        wcc2_offdiag=wcc2[0], wcc2_diag=wcc2[1], min_signal=signal,
        h_admissible=h_admissible)


def sign_consistency_experiment(sim: SimSpec, pen: Penalty, replicates: int,
                                seed: Optional[int] = None, threads: int = 1,
                                eta: float = 0.5,
                                config: Optional[SolverConfig] = None
                                ) -> ReplicationSummary:
    """Monte Carlo estimate of ``P(sgn beta_hat = sgn beta*)``.

    Also reports the frequencies of the events behind sign consistency:

    * ``event_E1``: ``|beta_hat - beta*|_inf < min_{j in H} |beta*_j|``
    * ``event_E2``: ``max_{j not in H} |grad_j l(beta*)| <= eta lambda1``
    * ``event_E3``: ``max_{j not in H} |grad_j l(beta_hat restricted to H)
      - grad_j l(beta*)| <= (1 - eta) lambda1``
    """
    return run_replications(sim, "sign-consistency", replicates, seed,
                            threads, penalty=pen, eta=eta, config=config)


def honest_selection_experiment(sim: SimSpec, pen: Penalty,
                                replicates: int, seed: Optional[int] = None,
                                threads: int = 1,
                                config: Optional[SolverConfig] = None,
                                **params) -> ReplicationSummary:
    """Monte Carlo estimate of ``P(H in H_hat)``, ``P(H_hat in H)`` and
    ``P(H = H_hat)``.

    Per replicate it also records whether ``|beta_hat - beta*|_1`` reached
    the weakest signal, whether a missed true variable implied that
    (``missed_implies_error``), and whether the weakest signal cleared the
    ``B0`` and constant-free thresholds.
    """
    return run_replications(sim, "honest-selection", replicates, seed,
                            threads, penalty=pen, config=config, **params)
