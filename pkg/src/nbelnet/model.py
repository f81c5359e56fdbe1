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
Negative binomial likelihood core.

* :class:`Dataset` holds a regression instance ``(X, y, theta)``
* :class:`Penalty` holds the elastic-net pair ``(lambda1, lambda2)``
* :func:`nb_loss`, :func:`nb_score` and :func:`nb_hessian` evaluate the
  empirical loss, its gradient and its Hessian
* :func:`objective` and :func:`bregman_symmetric` build on those

The mean is parameterized as ``mu_i = exp(x_i^T beta)`` with a known
dispersion ``theta``, so that ``Var(y_i) = mu_i + mu_i**2 / theta``.

Gradients are always gradients of the *loss* ``l(beta)``, never of the
log-likelihood, so a positive score component means increasing that
coefficient increases the loss.

All functions here are pure and may be called concurrently.
"""

# PEP-563 support self-references of types in class definitions
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import expit, gammaln


MAX_LINEAR_PREDICTOR = 700.0
"""Largest ``|x_i^T beta|`` accepted before raising :class:`NBDomainError`"""

ArrayLike = Union[np.ndarray, Sequence[float]]


class NBDomainError(ValueError):
    """A linear predictor is non-finite or exceeds
    :const:`MAX_LINEAR_PREDICTOR` in absolute value."""


class DimensionError(ValueError):
    """Coefficient vector or matrix does not match the data dimensions."""


class Dataset:
    """A negative binomial regression instance.

    Instances are validated at construction, so consumers can assume
    finite covariates, nonnegative integer counts and a positive
    dispersion.
    """

    X: np.ndarray
    """Design matrix, shape ``(n, p)``"""

    y: np.ndarray
    """Count responses, shape ``(n,)``, stored as floats holding integers"""

    theta: float
    """Known dispersion parameter, ``theta > 0``.

    Smaller values mean more extra-Poisson variance; Poisson regression is
    the limit ``theta -> inf``.
    """

    def __init__(self, X: ArrayLike, y: ArrayLike, theta: float):
        """Construct and validate a dataset.

        :param X: Covariates, a 2-D array of shape ``(n, p)``
        :param y: Counts, nonnegative integers of length ``n``
        :param theta: Dispersion, a positive finite real
        :raise ValueError: if any of the invariants above does not hold
        """
        X = np.array(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D matrix, got %d dimension(s)"
                             % X.ndim)
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError("X must have at least one row and one column, "
                             "got shape %s" % (X.shape,))
        if not np.all(np.isfinite(X)):
            row, col = np.argwhere(~np.isfinite(X))[0]
            raise ValueError("X has a non-finite entry at row %d, column %d"
                             % (row, col))
        y = np.array(y, dtype=float)
        if y.shape != (n,):
            raise ValueError("y must have length %d to match X, got shape %s"
                             % (n, y.shape))
        bad = ~np.isfinite(y) | (y < 0) | (y != np.floor(y))
        if np.any(bad):
            row = int(np.flatnonzero(bad)[0])
            raise ValueError("y must hold nonnegative integers, row %d is %r"
                             % (row, y[row]))
        theta = float(theta)
        if not np.isfinite(theta) or theta <= 0:
            raise ValueError("theta must be a positive finite real, got %r"
                             % theta)
        self.X = X
        self.y = y
        self.theta = theta

    @property
    def n(self) -> int:
        """Number of observations"""
        return self.X.shape[0]

    @property
    def p(self) -> int:
        """Number of covariates"""
        return self.X.shape[1]

    @classmethod
    def from_frame(cls, frame, theta: float, response: str = "y") -> Dataset:
        """Build a dataset from a :class:`pandas.DataFrame`.

        The ``response`` column becomes ``y``, all remaining columns
        become covariates in their frame order.

        :raise ValueError: if the response column is missing or the
            values fail validation
        """
        if response not in frame.columns:
            raise ValueError("Missing response column %r" % response)
        covariates = frame.drop(columns=[response])
        return cls(covariates.to_numpy(dtype=float),
                   frame[response].to_numpy(dtype=float), theta)

    def __repr__(self):
        return "<Dataset n=%d p=%d theta=%g>" % (self.n, self.p, self.theta)


@dataclass(frozen=True)
class Penalty:
    """Elastic-net penalty ``lambda1 * |b|_1 + lambda2 * |b|_2^2``."""

    lambda1: float
    """Weight of the l1 term, ``>= 0``"""

    lambda2: float = 0.0
    """Weight of the squared l2 term, ``>= 0``"""

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError("%s must be a nonnegative finite real, "
                                 "got %r" % (name, value))
            object.__setattr__(self, name, value)

    def value(self, beta: np.ndarray) -> float:
        """Evaluate the penalty at ``beta``"""
        return (self.lambda1 * float(np.sum(np.abs(beta)))
                + self.lambda2 * float(np.dot(beta, beta)))


def as_coef(beta: ArrayLike, p: int) -> np.ndarray:
    """Validate a coefficient vector of length ``p``.

    :raise DimensionError: if the length differs from ``p``
    :raise ValueError: if an entry is not finite
    """
    beta = np.array(beta, dtype=float).reshape(-1)
    if beta.shape != (p,):
        raise DimensionError("Coefficient vector has length %d, expected %d"
                             % (beta.size, p))
    if not np.all(np.isfinite(beta)):
        raise ValueError("Coefficient vector has non-finite entries")
    return beta


def linear_predictor(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Return ``X beta`` after checking it stays in the safe domain.

    :raise NBDomainError: if any entry is non-finite or its absolute value
        exceeds :const:`MAX_LINEAR_PREDICTOR`
    """
    beta = as_coef(beta, data.p)
    with np.errstate(over="ignore", invalid="ignore"):
        u = data.X @ beta
    if not np.all(np.isfinite(u)):
        raise NBDomainError("Linear predictor is not finite")
    worst = int(np.argmax(np.abs(u)))
    if abs(u[worst]) > MAX_LINEAR_PREDICTOR:
        raise NBDomainError(
            "Linear predictor %.6g at row %d exceeds +/-%g"
            % (u[worst], worst, MAX_LINEAR_PREDICTOR))
    return u


def _log_theta_plus_exp(u: np.ndarray, theta: float) -> np.ndarray:
    # log(theta + e^u) without forming e^u
    return np.logaddexp(np.log(theta), u)


def mean_ratio(u: np.ndarray, theta: float) -> np.ndarray:
    """``e^u / (theta + e^u)``"""
    return expit(u - np.log(theta))


def dispersion_ratio(u: np.ndarray, theta: float) -> np.ndarray:
    """``theta / (theta + e^u)``, the complement of :func:`mean_ratio`"""
    return expit(np.log(theta) - u)


def _score_terms(u: np.ndarray, data: Dataset) -> np.ndarray:
    # theta (e^u - y) / (theta + e^u), rewritten without e^u
    return (data.theta * mean_ratio(u, data.theta)
            - data.y * dispersion_ratio(u, data.theta))


def nb_loss(beta: ArrayLike, data: Dataset) -> float:
    """Empirical NB loss.

    ``l(beta) = (1/n) sum_i (theta + y_i) log(theta + e^{u_i}) - y_i u_i``
    with ``u_i = x_i^T beta``.
    """
    u = linear_predictor(beta, data)
    terms = ((data.theta + data.y) * _log_theta_plus_exp(u, data.theta)
             - data.y * u)
    return float(np.mean(terms))


def nb_loss_batch(betas: np.ndarray, data: Dataset) -> np.ndarray:
    """Evaluate :func:`nb_loss` for every row of ``betas`` at once.

    No domain check is made; used by exhaustive grid searches where
    candidate vectors are bounded by construction.
    """
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    u = data.X @ betas.T
    y = data.y[:, np.newaxis]
    terms = (data.theta + y) * _log_theta_plus_exp(u, data.theta) - y * u
    return np.mean(terms, axis=0)


def nb_score(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Gradient of :func:`nb_loss`.

    ``(1/n) sum_i x_i theta (e^{u_i} - y_i) / (theta + e^{u_i})``
    """
    u = linear_predictor(beta, data)
    return data.X.T @ _score_terms(u, data) / data.n


def observation_scores(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Per-observation score rows, shape ``(n, p)``.

    Their column means equal :func:`nb_score`.
    """
    u = linear_predictor(beta, data)
    return data.X * _score_terms(u, data)[:, np.newaxis]


def hessian_weights(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Observation weights ``theta (theta + y_i) e^u / (theta + e^u)^2``"""
    u = linear_predictor(beta, data)
    r = mean_ratio(u, data.theta)
    return (data.theta + data.y) * r * dispersion_ratio(u, data.theta)


def nb_hessian(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Hessian of :func:`nb_loss`, symmetric positive semidefinite."""
    w = hessian_weights(beta, data)
    hessian = data.X.T @ (data.X * w[:, np.newaxis]) / data.n
    return (hessian + hessian.T) / 2


def objective(beta: ArrayLike, data: Dataset, pen: Penalty) -> float:
    """Penalized objective ``nb_loss + lambda1 |b|_1 + lambda2 |b|_2^2``"""
    beta = as_coef(beta, data.p)
    return nb_loss(beta, data) + pen.value(beta)


def bregman_symmetric(beta1: ArrayLike, beta2: ArrayLike, data: Dataset,
                      pen: Optional[Penalty] = None,
                      include_ridge: bool = False) -> float:
    """Symmetric Bregman divergence of the loss.

    ``D = (b1 - b2)^T [grad l(b1) - grad l(b2)]``, which is nonnegative by
    convexity. With ``include_ridge`` the ridge part of the penalty is
    included, adding ``2 lambda2 |b1 - b2|_2^2``.

    :raise ValueError: if ``include_ridge`` is set but ``pen`` is missing
    """
    beta1 = as_coef(beta1, data.p)
    beta2 = as_coef(beta2, data.p)
    delta = beta1 - beta2
    divergence = float(delta @ (nb_score(beta1, data) - nb_score(beta2, data)))
    if include_ridge:
        if pen is None:
            raise ValueError("include_ridge requires a Penalty")
        divergence += 2 * pen.lambda2 * float(delta @ delta)
    return divergence


def nb_log_likelihood(beta: ArrayLike, data: Dataset) -> float:
    """Full NB log-likelihood including the normalizing constants.

    Differs from ``-n * nb_loss(beta)`` by a term free of ``beta``.
    """
    u = linear_predictor(beta, data)
    theta, y = data.theta, data.y
    log_norm = gammaln(theta + y) - gammaln(theta) - gammaln(y + 1)
    terms = (log_norm + theta * np.log(theta) + y * u
             - (theta + y) * _log_theta_plus_exp(u, theta))
    return float(np.sum(terms))


def poisson_loss(beta: ArrayLike, data: Dataset) -> float:
    """Poisson loss ``(1/n) sum_i e^{u_i} - y_i u_i``, the ``theta -> inf``
    limit of :func:`nb_loss` up to a constant."""
    u = linear_predictor(beta, data)
    return float(np.mean(np.exp(u) - data.y * u))


def poisson_score(beta: ArrayLike, data: Dataset) -> np.ndarray:
    """Gradient of :func:`poisson_loss`"""
    u = linear_predictor(beta, data)
    return data.X.T @ (np.exp(u) - data.y) / data.n
