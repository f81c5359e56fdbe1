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
Design constants, oracle bounds and event checks for the elastic-net
NB estimator.

Two families of error bounds are computed:

* bounds driven by the *compatibility factor* and the *weak cone
  invertibility factor* of a matrix ``Sigma`` over the cone
  ``S(zeta, H) = {b : |b_Hc|_1 <= zeta |b_H|_1}``, see
  :func:`compatibility_oracle_bounds`
* bounds driven by the *Stabil constant* ``k`` over the restricted set
  ``V(c, eps) = {b : |b_Hc|_1 <= c |b_H|_1 + eps}``, see
  :func:`stabil_oracle_bounds`

The cone constants are infima of nonconvex problems. They are estimated
by projected gradient descent over every sign pattern of ``b_H`` (or a
random subset of patterns when ``|H|`` is large) plus uniform random
sampling of the cone. Estimates are upper bounds of the true infimum and
never increase when the sampling budget grows.

Index sets are 0-based.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import bisect

from .model import (ArrayLike, Dataset, Penalty, as_coef, dispersion_ratio,
                    linear_predictor, mean_ratio, nb_hessian, nb_score)
from .solver import Fit


TAU_MAX = 0.5 * math.exp(-1)
"""Largest admissible ``tau``, the maximum of ``a e^{-2a}``"""

STABIL_SLOPE = 3.5
"""Slope ``c`` of the restricted set used by the Stabil-based bounds"""

_PATTERN_LIMIT = 256
_SAMPLE_CHUNK = 1024
_DESCENT_ITER = 200
_RANDOM_STARTS_PER = 500
_RANDOM_STARTS_MAX = 32


class BoundInapplicableError(ValueError):
    """A theoretical bound's precondition does not hold for the inputs."""

    def __init__(self, message: str, quantity: float = float("nan")):
        super().__init__(message)
        self.quantity = quantity
        """The offending value, e.g. ``tau``"""


class TheoryWarning(UserWarning):
    """Inputs deviate from a choice a bound assumes (e.g. of ``lambda2``)."""


@dataclass(frozen=True)
class ConeSpec:
    """A cone ``S(slope, H)`` (``epsilon = 0``) or restricted set
    ``V(slope, epsilon)``."""

    slope: float
    """``zeta`` for ``S(zeta, H)`` or ``c`` for ``V(c, eps)``"""

    H: Tuple[int, ...]
    """Support indices, 0-based, nonempty"""

    epsilon: float = 0.0

    def __post_init__(self):
        H = tuple(sorted({int(j) for j in self.H}))
        if not H:
            raise ValueError("Cone support H must be nonempty")
        if H[0] < 0:
            raise ValueError("Cone support indices must be >= 0")
        if not self.slope > 0:
            raise ValueError("Cone slope must be positive, got %r"
                             % self.slope)
        if not self.epsilon >= 0:
            raise ValueError("Cone epsilon must be >= 0, got %r"
                             % self.epsilon)
        object.__setattr__(self, "H", H)

    @property
    def d_star(self) -> int:
        return len(self.H)


@dataclass(frozen=True)
class TheoryConfig:
    """Constants shared by the bounds."""

    B: float
    """Bound on ``|beta*|_inf``"""

    L_or_K: float
    """Bound on ``|x_ij|``"""

    epsilon_n: float = 0.0
    """Slack of the restricted set; ``0`` or ``1/n`` are the usual choices"""

    zeta: float = 3.0
    """Cone slope for the compatibility bounds, ``> 1``"""

    samples: int = 20000
    """Random sampling budget of the cone searches"""

    seed: int = 0

    def __post_init__(self):
        if not self.B > 0 or not self.L_or_K > 0:
            raise ValueError("B and L_or_K must be positive")
        if not self.epsilon_n >= 0:
            raise ValueError("epsilon_n must be >= 0, got %r"
                             % self.epsilon_n)
        if not self.zeta > 1:
            raise ValueError("zeta must be > 1, got %r" % self.zeta)
        if int(self.samples) < 0:
            raise ValueError("samples must be >= 0")

    @property
    def M(self) -> float:
        return localization_radius(self.B, self.epsilon_n)


@dataclass(frozen=True)
class StabilEstimate:
    k: float
    """Estimated Stabil constant clipped to ``[0, 1]``"""

    degenerate: bool
    """The unclipped estimate was ``<= 0``, so no positive ``k`` exists"""

    raw: float
    """Unclipped minimum of ``(b' Sigma b + eps) / |b_H|_2^2``"""


@dataclass(frozen=True)
class CompatibilityBounds:
    tau: float
    a_tau: float
    l1_bound: float
    lq_bound: float
    q: float


@dataclass(frozen=True)
class StabilBounds:
    l1_bound: float
    pred_bound: float
    a_const: float


@dataclass(frozen=True)
class EventCheck:
    """Outcome of evaluating a probabilistic event on one sample."""

    statistic: float
    threshold: float
    holds: bool
    approximate: bool = False
    """``True`` when unobservable intermediate points were replaced by the
    segment endpoints"""


@dataclass(frozen=True)
class GroupingCheck:
    k: int
    l: int
    lhs: float
    """``|beta_k - beta_l|``"""

    rhs: float
    rho_kl: float
    holds: bool


@dataclass
class TheoryReport:
    """All constants and bounds computed for one instance.

    Bounds whose preconditions fail are ``inf`` and named in
    :attr:`inapplicable`.
    """

    compat: float
    cif_q: float
    q: float
    stabil_k: float
    tau: float
    a_tau: float
    l1_bound_compat: float
    lq_bound_compat: float
    l1_bound_stabil: float
    pred_bound_stabil: float
    a_const: float
    z_star: float
    score_event: bool
    inapplicable: List[str] = field(default_factory=list)


# Cone searches

def _check_sigma(sigma: ArrayLike) -> np.ndarray:
    sigma = np.array(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("Sigma must be a square matrix, got shape %s"
                         % (sigma.shape,))
    if not np.all(np.isfinite(sigma)):
        raise ValueError("Sigma has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(sigma))))
    if not np.allclose(sigma, sigma.T, atol=1e-10 * scale, rtol=0):
        raise ValueError("Sigma is not symmetric")
    sigma = (sigma + sigma.T) / 2
    smallest = float(np.linalg.eigvalsh(sigma)[0])
    if smallest < -1e-10 * scale:
        raise ValueError("Sigma is not positive semidefinite, smallest "
                         "eigenvalue %.3g" % smallest)
    return sigma


def _split(cone: ConeSpec, p: int) -> Tuple[np.ndarray, np.ndarray]:
    if cone.H[-1] >= p:
        raise ValueError("Cone support index %d out of range for p=%d"
                         % (cone.H[-1], p))
    H = np.array(cone.H, dtype=int)
    return H, np.setdiff1d(np.arange(p), H)


def _project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x) = total}``"""
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - total
    index = np.arange(1, v.size + 1)
    rho = index[u - cumulative / index > 0][-1]
    return np.maximum(v - cumulative[rho - 1] / rho, 0.0)


def _project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    if radius <= 0:
        return np.zeros_like(v)
    if np.sum(np.abs(v)) <= radius:
        return v
    return np.sign(v) * _project_simplex(np.abs(v), radius)


def _sign_patterns(d: int, rng: np.random.Generator) -> np.ndarray:
    # b and -b give the same criterion value, so the first sign is fixed
    if 2 ** (d - 1) <= _PATTERN_LIMIT:
        rest = itertools.product((1.0, -1.0), repeat=d - 1)
        return np.array([(1.0,) + signs for signs in rest])
    drawn = rng.choice((-1.0, 1.0), size=(_PATTERN_LIMIT - 1, d))
    drawn[:, 0] = 1.0
    return np.vstack([np.ones((1, d)), drawn])


Criterion = Callable[[np.ndarray], Tuple[float, np.ndarray]]
BatchCriterion = Callable[[np.ndarray], np.ndarray]


class _ConeSearch:
    """Minimize a criterion over ``{|b_H|_1 = 1, |b_Hc|_1 <= radius}``."""

    def __init__(self, p: int, H: np.ndarray, Hc: np.ndarray,
                 radius: float):
        self.p = p
        self.H = H
        self.Hc = Hc
        self.radius = radius

    def project(self, b: np.ndarray, signs: np.ndarray) -> np.ndarray:
        out = np.zeros_like(b)
        out[self.H] = signs * _project_simplex(signs * b[self.H])
        if self.Hc.size:
            out[self.Hc] = _project_l1_ball(b[self.Hc], self.radius)
        return out

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` points uniformly spread over the feasible set"""
        d = self.H.size
        points = np.zeros((count, self.p))
        weights = rng.exponential(size=(count, d))
        signs = rng.choice((-1.0, 1.0), size=(count, d))
        points[:, self.H] = signs * weights / weights.sum(axis=1,
                                                          keepdims=True)
        if self.Hc.size:
            # dropping the slack coordinate of a flat Dirichlet draw gives a
            # uniform point of the l1 ball
            slack = rng.exponential(size=(count, self.Hc.size + 1))
            ball = slack[:, :-1] / slack.sum(axis=1, keepdims=True)
            signs = rng.choice((-1.0, 1.0), size=(count, self.Hc.size))
            points[:, self.Hc] = self.radius * signs * ball
        return points

    def descend(self, b0: np.ndarray, signs: np.ndarray,
                criterion: Criterion) -> float:
        """Projected gradient with Armijo backtracking within one sign
        pattern of ``b_H``"""
        b = self.project(b0, signs)
        value, grad = criterion(b)
        step = 1.0
        for _ in range(_DESCENT_ITER):
            while True:
                candidate = self.project(b - step * grad, signs)
                delta = candidate - b
                cand_value, cand_grad = criterion(candidate)
                if cand_value <= value + grad @ delta + (delta @ delta) / (
                        2 * step):
                    break
                step /= 2
                if step < 1e-14:
                    return value
            improvement = value - cand_value
            b, value, grad = candidate, cand_value, cand_grad
            step *= 2
            if improvement <= 1e-15 * max(1.0, abs(value)):
                break
        return value

    def minimize(self, criterion: Criterion, batch: BatchCriterion,
                 budget: int, seed: int) -> float:
        pattern_seq, start_seq, sample_seq = np.random.SeedSequence(
            seed).spawn(3)
        d = self.H.size
        patterns = _sign_patterns(d, np.random.default_rng(pattern_seq))
        best = np.inf
        for signs in patterns:
            center = np.zeros(self.p)
            center[self.H] = signs / d
            best = min(best, self.descend(center, signs, criterion))

        # prefix-consistent streams keep the estimate monotone in budget
        start_rng = np.random.default_rng(start_seq)
        starts = min(budget // _RANDOM_STARTS_PER, _RANDOM_STARTS_MAX)
        for _ in range(starts):
            signs = patterns[start_rng.integers(len(patterns))]
            b0 = self.sample(start_rng, 1)[0]
            best = min(best, self.descend(b0, signs, criterion))

        sample_rng = np.random.default_rng(sample_seq)
        remaining = int(budget)
        while remaining > 0:
            points = self.sample(sample_rng, _SAMPLE_CHUNK)[:remaining]
            best = min(best, float(np.min(batch(points))))
            remaining -= _SAMPLE_CHUNK
        return float(best)


def _quadratic_batch(sigma: np.ndarray, points: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", points @ sigma, points)


def compatibility_factor(sigma: ArrayLike, cone: ConeSpec,
                         budget: int = 20000, seed: int = 0) -> float:
    """Estimate the compatibility factor of ``sigma`` on ``S(zeta, H)``.

    ``inf_b sqrt(d* b' Sigma b) / |b_H|_1`` over nonzero ``b`` in the cone,
    with ``d* = |H|``.

    :raise ValueError: if ``sigma`` is not symmetric positive semidefinite,
        ``cone.epsilon`` is not zero or ``H`` is out of range
    """
    sigma = _check_sigma(sigma)
    if cone.epsilon != 0:
        raise ValueError("The compatibility factor is defined on cones "
                         "with epsilon = 0")
    H, Hc = _split(cone, sigma.shape[0])
    search = _ConeSearch(sigma.shape[0], H, Hc, cone.slope)

    def criterion(b):
        sb = sigma @ b
        return float(b @ sb), 2 * sb

    smallest = search.minimize(criterion,
                               lambda pts: _quadratic_batch(sigma, pts),
                               budget, seed)
    return math.sqrt(cone.d_star * max(smallest, 0.0))


def _norm_and_grad(b: np.ndarray, q: float) -> Tuple[float, np.ndarray]:
    if q == 1:
        return float(np.sum(np.abs(b))), np.sign(b)
    if np.isinf(q):
        j = int(np.argmax(np.abs(b)))
        grad = np.zeros_like(b)
        grad[j] = np.sign(b[j])
        return float(abs(b[j])), grad
    norm = float(np.linalg.norm(b, ord=q))
    return norm, np.sign(b) * np.abs(b) ** (q - 1) / norm ** (q - 1)


def weak_cif(sigma: ArrayLike, cone: ConeSpec, q: float = 2.0,
             budget: int = 20000, seed: int = 0) -> float:
    """Estimate the weak cone invertibility factor of order ``q``.

    ``inf_b d*^{1/q} b' Sigma b / (|b_H|_1 |b|_q)`` over nonzero ``b`` in
    ``S(zeta, H)``.

    :raise ValueError: as :func:`compatibility_factor`, or if ``q < 1``
    """
    if not q >= 1:
        raise ValueError("q must be >= 1, got %r" % q)
    sigma = _check_sigma(sigma)
    if cone.epsilon != 0:
        raise ValueError("The weak cone invertibility factor is defined on "
                         "cones with epsilon = 0")
    H, Hc = _split(cone, sigma.shape[0])
    search = _ConeSearch(sigma.shape[0], H, Hc, cone.slope)

    def criterion(b):
        sb = sigma @ b
        quad = float(b @ sb)
        norm, norm_grad = _norm_and_grad(b, q)
        return quad / norm, 2 * sb / norm - quad * norm_grad / norm ** 2

    def batch(points):
        norms = np.linalg.norm(points, ord=q, axis=1)
        return _quadratic_batch(sigma, points) / norms

    smallest = search.minimize(criterion, batch, budget, seed)
    return cone.d_star ** (1.0 / q) * max(smallest, 0.0)


def stabil_constant(sigma: ArrayLike, cone: ConeSpec, budget: int = 20000,
                    seed: int = 0,
                    radius: Optional[float] = None) -> StabilEstimate:
    """Estimate the Stabil constant of ``sigma`` on ``V(c, eps)``.

    The largest ``k`` with ``b' Sigma b >= k |b_H|_2^2 - eps`` over the
    sampled ``b`` in ``V(c, eps)`` with ``|b|_1 <= radius``. The ratio
    ``(b' Sigma b + eps) / |b_H|_2^2`` is minimized and the result clipped
    to ``[0, 1]``.

    With ``eps = 0`` the ratio is scale invariant and ``radius`` is unused.
    Otherwise ``radius`` defaults to ``1``; pass
    ``max(1, 2 * localization_radius(B, eps))`` to localize around the
    truth.

    :raise ValueError: as :func:`compatibility_factor`
    """
    sigma = _check_sigma(sigma)
    p = sigma.shape[0]
    H, Hc = _split(cone, p)
    c, eps = cone.slope, cone.epsilon
    R = 1.0 if radius is None else float(radius)
    if not R > 0:
        raise ValueError("radius must be positive, got %r" % radius)
    # with eps > 0, points are t * b with |b_H|_1 = 1 and the largest
    # feasible scale t for the given |b_Hc|_1
    search = _ConeSearch(p, H, Hc, c + eps if eps > 0 else c)

    def inverse_scale_sq(rho):
        rho = np.asarray(rho, dtype=float)
        by_radius = (1 + rho) / R
        by_cone = np.where(rho > c, (rho - c) / max(eps, 1e-300), 0.0)
        use_radius = by_radius >= by_cone
        inv = np.where(use_radius, by_radius, by_cone)
        slope = np.where(use_radius, 2 * (1 + rho) / R ** 2,
                         2 * (rho - c) / max(eps, 1e-300) ** 2)
        return inv ** 2, slope

    def criterion(b):
        sb = sigma @ b
        quad = float(b @ sb)
        head = np.zeros_like(b)
        head[H] = b[H]
        denom = float(head @ head)
        grad = 2 * sb / denom
        if eps > 0:
            inv_sq, slope = inverse_scale_sq(np.sum(np.abs(b[Hc])))
            extra = eps * float(inv_sq)
            grad[Hc] += eps * float(slope) * np.sign(b[Hc]) / denom
        else:
            extra = 0.0
        grad -= (quad + extra) * 2 * head / denom ** 2
        return (quad + extra) / denom, grad

    def batch(points):
        denom = np.sum(points[:, H] ** 2, axis=1)
        values = _quadratic_batch(sigma, points)
        if eps > 0:
            rho = np.sum(np.abs(points[:, Hc]), axis=1)
            values = values + eps * inverse_scale_sq(rho)[0]
        return values / denom

    raw = search.minimize(criterion, batch, budget, seed)
    return StabilEstimate(k=float(min(max(raw, 0.0), 1.0)),
                          degenerate=raw <= 1e-12, raw=raw)


# Roots and bounds

def a_tau_root(tau: float) -> float:
    """Smaller root ``a`` in ``[0, 1/2]`` of ``a e^{-2a} = tau``.

    :raise BoundInapplicableError: if ``tau`` is outside ``[0, e^{-1}/2]``
    """
    if not 0 <= tau <= TAU_MAX + 1e-15:
        raise BoundInapplicableError(
            "tau=%.6g outside [0, %.7f]: the bound does not apply"
            % (tau, TAU_MAX), tau)
    if tau == 0:
        return 0.0
    if tau >= TAU_MAX - 1e-13:
        return 0.5
    return float(bisect(lambda a: a * math.exp(-2 * a) - tau, 0.0, 0.5,
                        xtol=1e-16, rtol=4 * np.finfo(float).eps,
                        maxiter=200))


def compatibility_bound_values(lambda1: float, zeta: float, d_star: int,
                               K: float, compat: float, cif_q: float,
                               q: float = 2.0) -> CompatibilityBounds:
    """Plug constants into the compatibility-factor oracle inequality.

    ``tau = K (zeta + 1) d* lambda1 / (2 C^2)``, then with ``a_tau`` from
    :func:`a_tau_root`

    * ``l1 = e^{2 a_tau} (zeta + 1) d* lambda1 / (2 C^2)``
    * ``lq = 2 e^{2 a_tau} zeta d*^{1/q} lambda1 / ((zeta + 1) C_q)``

    :raise BoundInapplicableError: if ``tau > e^{-1}/2`` (including
        ``C = 0``)
    """
    if compat <= 0:
        raise BoundInapplicableError(
            "Compatibility factor is zero: the bound does not apply",
            math.inf)
    base = (zeta + 1) * d_star * lambda1 / (2 * compat ** 2)
    tau = K * base
    a_tau = a_tau_root(tau)
    growth = math.exp(2 * a_tau)
    lq = (2 * growth * zeta * d_star ** (1.0 / q) * lambda1
          / ((zeta + 1) * cif_q) if cif_q > 0 else math.inf)
    return CompatibilityBounds(tau=tau, a_tau=a_tau, l1_bound=growth * base,
                               lq_bound=lq, q=q)


def compatibility_oracle_bounds(sigma: ArrayLike, cone: ConeSpec,
                                pen: Penalty, cfg: TheoryConfig,
                                q: float = 2.0) -> CompatibilityBounds:
    """Estimate ``C(zeta, H)`` and ``C_q(zeta, H)`` of ``sigma`` (normally
    the Hessian at the truth) and evaluate the oracle bounds.

    ``zeta`` is ``cone.slope``; ``K`` is ``cfg.L_or_K``.

    :raise BoundInapplicableError: see :func:`compatibility_bound_values`
    """
    compat = compatibility_factor(sigma, cone, cfg.samples, cfg.seed)
    cif = weak_cif(sigma, cone, q, cfg.samples, cfg.seed)
    return compatibility_bound_values(pen.lambda1, cone.slope, cone.d_star,
                                      cfg.L_or_K, compat, cif, q)


def localization_radius(B: float, epsilon_n: float = 0.0) -> float:
    """``M = 16 B + 2 eps_n``, the l1 radius around the truth that
    contains the estimate"""
    return 16 * B + 2 * epsilon_n


def loss_bound_constant(L: float, B: float, theta: float) -> float:
    """``T(L, B) = L B + log(theta + e^{L B})``, bounding
    ``|x' beta + log(theta + e^{x' beta})|`` for bounded designs"""
    return L * B + float(np.logaddexp(math.log(theta), L * B))


def curvature_constant(theta: float, L: float, B: float,
                       epsilon_n: float = 0.0) -> float:
    """Lower curvature constant ``a`` of the Stabil-based bounds.

    The minimum over ``|x| <= L (M + B)`` and ``|y| <= L B`` of
    ``(1/2) theta e^x (e^y + theta) / (theta + e^x)^2``. The ``y`` factor
    is smallest at ``y = -L B``; the ``x`` factor peaks at ``x = log
    theta`` and is smallest at an interval end, so both ends are evaluated.
    """
    if not theta > 0 or not L > 0 or not B > 0:
        raise ValueError("theta, L and B must be positive")
    edge = L * (localization_radius(B, epsilon_n) + B)
    ends = np.array([-edge, edge])
    x_factor = (mean_ratio(ends, theta) * dispersion_ratio(ends, theta))
    return float(0.5 * (math.exp(-L * B) + theta) * np.min(x_factor))


def _epsilon_term(coefficient: float, epsilon_n: float) -> float:
    return coefficient * epsilon_n if epsilon_n > 0 else 0.0


def stabil_l1_bound(lambda1: float, lambda2: float, d_star: int,
                    a_const: float, stabil_k: float,
                    epsilon_n: float = 0.0) -> float:
    """``2.25^2 lambda1 d* / (a k + 2 lambda2) + (1 + a/lambda1) eps_n``

    Shared by :func:`stabil_oracle_bounds` and
    :func:`nbelnet.selection.detection_thresholds`.
    """
    ratio = a_const / lambda1 if lambda1 > 0 else math.inf
    return (2.25 ** 2 * lambda1 * d_star / (a_const * stabil_k + 2 * lambda2)
            + _epsilon_term(1 + ratio, epsilon_n))


def stabil_oracle_bounds(pen: Penalty, cfg: TheoryConfig, theta: float,
                         d_star: int, stabil_k: float) -> StabilBounds:
    """Oracle bounds under the Stabil condition ``S(3.5, eps_n, k)``.

    * ``l1 = 2.25^2 lambda1 d* / (a k + 2 lambda2) + (1 + a/lambda1) eps_n``
    * ``pred = 17.71875 d* lambda1^2 / (a (a k + 2 lambda2))
      + (4.5 lambda1 / a + 3.5) eps_n``

    with ``a`` from :func:`curvature_constant`. The bounds are stated for
    ``lambda2 = lambda1 / (8 B)``; other choices give a
    :class:`TheoryWarning`.

    :raise ValueError: if ``stabil_k <= 0`` or ``lambda1 <= 0``
    """
    if not stabil_k > 0:
        raise ValueError("Stabil constant must be positive, got %r"
                         % stabil_k)
    if not pen.lambda1 > 0:
        raise ValueError("lambda1 must be positive for the Stabil bounds")
    expected = pen.lambda1 / (8 * cfg.B)
    if not math.isclose(pen.lambda2, expected, rel_tol=1e-9):
        warnings.warn("lambda2=%.6g differs from lambda1/(8B)=%.6g assumed "
                      "by the Stabil bounds" % (pen.lambda2, expected),
                      TheoryWarning)
    a = curvature_constant(theta, cfg.L_or_K, cfg.B, cfg.epsilon_n)
    l1 = stabil_l1_bound(pen.lambda1, pen.lambda2, d_star, a, stabil_k,
                         cfg.epsilon_n)
    pred = (17.71875 * d_star * pen.lambda1 ** 2
            / (a * (a * stabil_k + 2 * pen.lambda2))
            + _epsilon_term(4.5 * pen.lambda1 / a + 3.5, cfg.epsilon_n))
    return StabilBounds(l1_bound=l1, pred_bound=pred, a_const=a)


def high_probability_level(p: int, A: float) -> float:
    """``1 - 2 (2p)^{1 - A^2} - (2p)^{-A^2}``, the probability level of the
    Stabil-based bounds for ``A > 1``"""
    if not A > 1:
        raise ValueError("A must be > 1, got %r" % A)
    return 1 - 2 * (2 * p) ** (1 - A ** 2) - (2 * p) ** (-A ** 2)


def selection_probability_level(p: int, A: float) -> float:
    """``1 - (4p + 1) (2p)^{-A^2}``, the level at which all true variables
    are selected"""
    if not A > 1:
        raise ValueError("A must be > 1, got %r" % A)
    return 1 - (4 * p + 1) * (2 * p) ** (-A ** 2)


def honest_dimension(A: float, delta: float) -> float:
    """Dimension ``p`` solving ``5 p (2p)^{-A^2} = delta``.

    ``p = exp{log(5 / (2^{A^2} delta)) / (A^2 - 1)}``. The selection result
    needs ``delta < 1``; larger values are solved but warned about.

    :raise ValueError: if ``A <= 1`` or ``delta <= 0``
    """
    if not A > 1:
        raise ValueError("A must be > 1, got %r" % A)
    if not delta > 0:
        raise ValueError("delta must be positive, got %r" % delta)
    if delta >= 1:
        warnings.warn("delta=%g is not a probability in (0, 1)" % delta,
                      TheoryWarning)
    A2 = A * A
    return math.exp(math.log(5 / (2 ** A2 * delta)) / (A2 - 1))


# Events and grouping

def score_event_check(beta_star: ArrayLike, data: Dataset, pen: Penalty,
                      zeta: float) -> EventCheck:
    """Check ``z* = |grad l(beta*) + 2 lambda2 beta*|_inf <=
    lambda1 (zeta - 1) / (zeta + 1)``."""
    if not zeta > 1:
        raise ValueError("zeta must be > 1, got %r" % zeta)
    beta_star = as_coef(beta_star, data.p)
    z_star = float(np.max(np.abs(nb_score(beta_star, data)
                                 + 2 * pen.lambda2 * beta_star)))
    threshold = pen.lambda1 * (zeta - 1) / (zeta + 1)
    return EventCheck(statistic=z_star, threshold=threshold,
                      holds=z_star <= threshold)


def noise_event_check(beta_hat: ArrayLike, beta_star: ArrayLike,
                      data: Dataset, lambda1: float) -> EventCheck:
    """Check the centred-noise event at both segment endpoints.

    ``max_j |(1/n) sum_i x_ij (y_i - E y_i) theta / (theta + e^{x_i' b})|
    <= lambda1 / 4`` for ``b`` in ``{beta*, beta_hat}``, with
    ``E y_i = e^{x_i' beta*}``. The event concerns an intermediate point on
    the segment, which is unobservable, so the result is flagged as an
    approximation.
    """
    u_star = linear_predictor(beta_star, data)
    noise = data.y - np.exp(u_star)
    statistic = 0.0
    for u in (u_star, linear_predictor(beta_hat, data)):
        terms = noise * dispersion_ratio(u, data.theta)
        statistic = max(statistic,
                        float(np.max(np.abs(data.X.T @ terms))) / data.n)
    threshold = lambda1 / 4
    return EventCheck(statistic=statistic, threshold=threshold,
                      holds=statistic <= threshold, approximate=True)


def _beta_and_tol(fit_or_beta: Union[Fit, ArrayLike], p: int,
                  tol: Optional[float]) -> Tuple[np.ndarray, float]:
    if isinstance(fit_or_beta, Fit):
        return as_coef(fit_or_beta.beta, p), (
            fit_or_beta.kkt.tol if tol is None else tol)
    return as_coef(fit_or_beta, p), 1e-8 if tol is None else tol


def grouping_bound(fit_or_beta: Union[Fit, ArrayLike], data: Dataset,
                   pen: Penalty, k: int, l: int,
                   tol: Optional[float] = None) -> GroupingCheck:
    """Evaluate the grouping inequality for covariates ``k`` and ``l``.

    ``|b_k - b_l| <= (1 / (2 n lambda2)) sum_i theta |x_ik - x_il|
    |e^{u_i} - y_i| / (theta + e^{u_i})``. ``holds`` allows ``10 * tol``
    of slack for the solver's KKT tolerance.

    :raise ValueError: if ``lambda2 = 0`` or an index is out of range
    """
    if not pen.lambda2 > 0:
        raise ValueError("The grouping bound requires lambda2 > 0")
    for index in (k, l):
        if not 0 <= index < data.p:
            raise ValueError("Covariate index %r out of range" % index)
    beta, tol = _beta_and_tol(fit_or_beta, data.p, tol)
    u = linear_predictor(beta, data)
    residual = np.abs(data.theta * mean_ratio(u, data.theta)
                      - data.y * dispersion_ratio(u, data.theta))
    gap = np.abs(data.X[:, k] - data.X[:, l])
    rhs = float(gap @ residual) / (2 * data.n * pen.lambda2)
    lhs = abs(float(beta[k] - beta[l]))
    rho = float(data.X[:, k] @ data.X[:, l]) / data.n
    return GroupingCheck(k=k, l=l, lhs=lhs, rhs=rhs, rho_kl=rho,
                         holds=lhs <= rhs + 10 * tol)


def grouping_table(fit_or_beta: Union[Fit, ArrayLike], data: Dataset,
                   pen: Penalty, pairs: Optional[Iterable[Tuple[int, int]]]
                   = None) -> List[GroupingCheck]:
    """:func:`grouping_bound` for every pair ``k < l`` (or the given
    pairs)."""
    if pairs is None:
        pairs = itertools.combinations(range(data.p), 2)
    return [grouping_bound(fit_or_beta, data, pen, k, l) for k, l in pairs]


def theory_report(data: Dataset, beta_star: ArrayLike, pen: Penalty,
                  cfg: TheoryConfig, H: Optional[Iterable[int]] = None,
                  q: float = 2.0) -> TheoryReport:
    """Compute every constant and bound for one instance.

    ``Sigma`` is the Hessian at the truth, which depends on the sampled
    responses. ``H`` defaults to the support of ``beta_star``.

    :raise ValueError: if ``H`` is empty
    """
    beta_star = as_coef(beta_star, data.p)
    if H is None:
        H = np.flatnonzero(beta_star)
    sigma = nb_hessian(beta_star, data)
    cone = ConeSpec(cfg.zeta, tuple(H))
    inapplicable: List[str] = []

    compat = compatibility_factor(sigma, cone, cfg.samples, cfg.seed)
    cif = weak_cif(sigma, cone, q, cfg.samples, cfg.seed)
    try:
        bounds = compatibility_bound_values(pen.lambda1, cfg.zeta,
                                            cone.d_star, cfg.L_or_K, compat,
                                            cif, q)
        tau, a_tau = bounds.tau, bounds.a_tau
        l1_compat, lq_compat = bounds.l1_bound, bounds.lq_bound
    except BoundInapplicableError as e:
        inapplicable.append("compatibility: %s" % e)
        tau, a_tau = e.quantity, math.nan
        l1_compat = lq_compat = math.inf

    radius = max(1.0, 2 * cfg.M)
    stabil = stabil_constant(sigma, ConeSpec(STABIL_SLOPE, cone.H,
                                             cfg.epsilon_n),
                             cfg.samples, cfg.seed, radius=radius)
    a_const = curvature_constant(data.theta, cfg.L_or_K, cfg.B,
                                 cfg.epsilon_n)
    if stabil.degenerate or not pen.lambda1 > 0:
        inapplicable.append("stabil: no positive Stabil constant"
                            if stabil.degenerate else "stabil: lambda1 = 0")
        l1_stabil = pred_stabil = math.inf
    else:
        stabil_bounds = stabil_oracle_bounds(pen, cfg, data.theta,
                                             cone.d_star, stabil.k)
        l1_stabil = stabil_bounds.l1_bound
        pred_stabil = stabil_bounds.pred_bound

    event = score_event_check(beta_star, data, pen, cfg.zeta)
    return TheoryReport(compat=compat, cif_q=cif, q=q, stabil_k=stabil.k,
                        tau=tau, a_tau=a_tau, l1_bound_compat=l1_compat,
                        lq_bound_compat=lq_compat, l1_bound_stabil=l1_stabil,
                        pred_bound_stabil=pred_stabil, a_const=a_const,
                        z_star=event.statistic, score_event=event.holds,
                        inapplicable=inapplicable)
