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
De-biased elastic-net estimator with nodewise confidence intervals.

The de-biased estimate is ``b = beta_hat - Theta grad l(beta_hat)`` where
``Theta`` approximates the inverse Hessian at ``beta_hat``. ``Theta`` is
built by nodewise Lasso regressions on the weighted design
``W^{1/2} X``, whose Gram matrix ``Z'Z / n`` is the Hessian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.stats import norm
from sklearn.linear_model import Lasso

from .model import (ArrayLike, Dataset, DimensionError, Penalty, as_coef,
                    hessian_weights, nb_score, observation_scores)
from .solver import ConvergenceWarning, Fit

_LASSO_TOL = 1e-12
_LASSO_MAX_ITER = 100000


@dataclass(frozen=True)
class DebiasResult:
    b_hat: np.ndarray
    theta_hat: np.ndarray
    """Approximate inverse Hessian"""

    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    level: float
    lambda_node: float
    """Nodewise penalty used, ``nan`` when ``theta_hat`` was supplied"""

    rewrite_gap: float
    """Largest difference on the support between the gradient form and the
    KKT rewrite of ``b_hat``"""


class Nodewise(NamedTuple):
    theta_hat: np.ndarray
    tau_sq: np.ndarray
    lambda_node: float


def default_lambda_node(n: int, p: int) -> float:
    return math.sqrt(math.log(p) / n) if p > 1 else 0.0


def nodewise_fit(data: Dataset, beta_hat: ArrayLike,
                 lambda_node: Optional[float] = None) -> Nodewise:
    """Nodewise regressions of the weighted design.

    For each column ``j`` of ``Z = W^{1/2} X`` the remaining columns are
    Lasso-regressed on it (scikit-learn's ``(1/2n) |r|^2 + lambda |g|_1``
    scaling). With ``tau_j^2 = |r_j|^2 / n + lambda |g_j|_1``, row ``j`` of
    ``Theta`` is ``(e_j - g_j) / tau_j^2``. ``lambda_node = 0`` uses least
    squares and returns the exact inverse of a nonsingular Hessian.

    :param lambda_node: defaults to ``sqrt(log p / n)``
    :raise ValueError: if ``lambda_node < 0`` or some ``tau_j^2 <= 0``
    """
    beta_hat = as_coef(beta_hat, data.p)
    n, p = data.n, data.p
    if lambda_node is None:
        lambda_node = default_lambda_node(n, p)
    if not lambda_node >= 0:
        raise ValueError("lambda_node must be >= 0, got %r" % lambda_node)
    weights = hessian_weights(beta_hat, data)
    if not np.all(np.isfinite(weights)):
        raise ValueError("Hessian weights are not finite at beta_hat")
    Z = data.X * np.sqrt(weights)[:, np.newaxis]

    theta_hat = np.zeros((p, p))
    tau_sq = np.zeros(p)
    for j in range(p):
        target = Z[:, j]
        others = np.delete(Z, j, axis=1)
        if p == 1:
            gamma = np.zeros(0)
        elif lambda_node == 0:
            gamma = np.linalg.lstsq(others, target, rcond=None)[0]
        else:
            lasso = Lasso(alpha=lambda_node, fit_intercept=False,
                          tol=_LASSO_TOL, max_iter=_LASSO_MAX_ITER)
            gamma = lasso.fit(others, target).coef_
        residual = target - others @ gamma
        tau_sq[j] = (residual @ residual / n
                     + lambda_node * np.sum(np.abs(gamma)))
        if not tau_sq[j] > 0:
            raise ValueError("Nodewise regression of column %d is degenerate "
                             "(tau^2 = %r)" % (j, tau_sq[j]))
        row = -np.insert(gamma, j, -1.0)
        theta_hat[j] = row / tau_sq[j]
    return Nodewise(theta_hat, tau_sq, float(lambda_node))


def nodewise_inverse(data: Dataset, beta_hat: ArrayLike,
                     lambda_node: Optional[float] = None) -> np.ndarray:
    """Approximate inverse of the Hessian at ``beta_hat``, see
    :func:`nodewise_fit`."""
    return nodewise_fit(data, beta_hat, lambda_node).theta_hat


def debiased_estimate(beta_hat: ArrayLike, gradient: ArrayLike,
                      theta_hat: ArrayLike) -> np.ndarray:
    """``beta_hat - theta_hat @ gradient``"""
    beta_hat = np.asarray(beta_hat, dtype=float)
    return beta_hat - np.asarray(theta_hat, dtype=float) @ np.asarray(
        gradient, dtype=float)


def kkt_rewrite(beta_hat: ArrayLike, pen: Penalty, theta_hat: ArrayLike,
                score: Optional[ArrayLike] = None) -> np.ndarray:
    """De-biased estimate with the KKT conditions substituted for the
    gradient, ``(I + 2 lambda2 Theta) beta_hat + lambda1 Theta s``.

    ``s`` is ``sgn(beta_hat)`` on the support. Off the support the
    subgradient is unidentified; it is ``0`` unless ``score`` is given, in
    which case the value ``clip(-score / lambda1, -1, 1)`` implied by the
    gradient is used.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    theta_hat = np.asarray(theta_hat, dtype=float)
    signs = np.sign(beta_hat)
    if score is not None and pen.lambda1 > 0:
        implied = np.clip(-np.asarray(score, dtype=float) / pen.lambda1,
                          -1.0, 1.0)
        signs = np.where(beta_hat != 0, signs, implied)
    return (beta_hat + theta_hat @ (2 * pen.lambda2 * beta_hat
                                    + pen.lambda1 * signs))


def debias(fit: Fit, data: Dataset, theta_hat: Optional[ArrayLike] = None,
           level: float = 0.95,
           lambda_node: Optional[float] = None) -> DebiasResult:
    """De-biased estimate with per-coordinate confidence intervals.

    Standard errors are ``sqrt([Theta S Theta']_jj / n)`` with ``S`` the
    mean outer product of the per-observation scores at ``beta_hat``.

    :param theta_hat: inverse Hessian estimate, nodewise by default
    :param level: confidence level in ``(0, 1)``
    :raise DimensionError: if the fit, ``theta_hat`` and data disagree on
        ``p``
    :raise ValueError: if ``level`` is outside ``(0, 1)``
    """
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1), got %r" % level)
    beta_hat = as_coef(fit.beta, data.p)
    if not fit.converged:
        warnings.warn("De-biasing a fit that did not converge (KKT violation "
                      "%.3g)" % fit.kkt.max_violation, ConvergenceWarning)
    if theta_hat is None:
        nodewise = nodewise_fit(data, beta_hat, lambda_node)
        theta, used_lambda = nodewise.theta_hat, nodewise.lambda_node
    else:
        theta = np.asarray(theta_hat, dtype=float)
        used_lambda = math.nan
        if theta.shape != (data.p, data.p):
            raise DimensionError("theta_hat has shape %s, expected (%d, %d)"
                                 % (theta.shape, data.p, data.p))

    gradient = nb_score(beta_hat, data)
    b_hat = debiased_estimate(beta_hat, gradient, theta)
    scores = observation_scores(beta_hat, data)
    sandwich = theta @ (scores.T @ scores / data.n) @ theta.T
    se = np.sqrt(np.maximum(np.diag(sandwich), 0.0) / data.n)
    half = norm.ppf(1 - (1 - level) / 2) * se

    rewrite = kkt_rewrite(beta_hat, fit.penalty, theta, score=gradient)
    support = beta_hat != 0
    gap = (float(np.max(np.abs(b_hat - rewrite)[support]))
           if support.any() else 0.0)
    return DebiasResult(b_hat=b_hat, theta_hat=theta, se=se,
                        ci_low=b_hat - half, ci_high=b_hat + half,
                        level=level, lambda_node=used_lambda,
                        rewrite_gap=gap)
