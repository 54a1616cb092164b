"""Polygamma functions and noncentral chi-square mixtures.

Every noncentral quantity is evaluated as a Poisson mixture over central
components,

    E[f(chi2_nu(lam))] = sum_j Pois(j; lam/2) * E[f(chi2_{nu+2j})],

truncated once the remaining Poisson mass drops below ``TAIL_MASS``.
For the central components the truncated inverse moments collapse to
regularized incomplete gamma functions because
``t**-r * f_m(t) = f_{m-2r}(t) / ((m-2)...(m-2r))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammainc, gammaln

from ._backend import kernels
from .errors import DomainError

TAIL_MASS = 1e-12
MAX_TERMS = 10_000
CENTRAL_EPS = 1e-14


def digamma(x):
    """Digamma function for positive arguments.

    Accepts scalars or arrays; returns the same shape.

    Raises
    ------
    DomainError
        If any argument is not strictly positive.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 0):
        raise DomainError("digamma requires x > 0")
    out = kernels.digamma(arr)
    return float(out) if arr.ndim == 0 else out


def trigamma(x):
    """Trigamma function (derivative of digamma) for positive arguments."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 0):
        raise DomainError("trigamma requires x > 0")
    out = kernels.trigamma(arr)
    return float(out) if arr.ndim == 0 else out


@dataclass(frozen=True)
class NoncentralChi2:
    """Chi-square law with ``dof`` degrees of freedom and noncentrality ``noncentrality``.

    The noncentrality is the squared norm of the mean of the underlying
    normal vector (no factor 1/2).
    """

    dof: int
    noncentrality: float = 0.0

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 1:
            raise DomainError(f"dof must be a positive integer, got {self.dof!r}")
        if not self.noncentrality >= 0:
            raise DomainError(f"noncentrality must be >= 0, got {self.noncentrality!r}")

    @property
    def central(self) -> bool:
        return self.noncentrality < CENTRAL_EPS

    def cdf(self, x: float) -> float:
        return noncentral_chi2_cdf(self, x)

    def inv_moment(self, power: int) -> float:
        return inv_moment(self, power)

    def truncated_expectation(self, power: int, cutoff: float) -> float:
        return truncated_expectation(self, power, cutoff)


@lru_cache(maxsize=512)
def _poisson_weights(noncentrality: float) -> np.ndarray:
    lam = 0.5 * noncentrality
    upper = int(min(MAX_TERMS, np.ceil(lam + 40.0 * np.sqrt(lam) + 60.0)))
    j = np.arange(upper)
    w = np.exp(j * np.log(lam) - lam - gammaln(j + 1.0))
    tail = np.cumsum(w[::-1])[::-1]
    # keep term j while the mass from j onwards is still >= TAIL_MASS
    keep = int(np.searchsorted(-tail, -TAIL_MASS, side="right"))
    keep = max(1, min(keep + 1, upper))
    w = w[:keep]
    w.setflags(write=False)
    return w


def poisson_weights(noncentrality: float) -> np.ndarray:
    """Mixture weights Pois(j; noncentrality/2), j = 0, 1, ..., truncated."""
    if noncentrality < CENTRAL_EPS:
        return np.ones(1)
    return _poisson_weights(float(noncentrality))


def _inverse_factor(m, power):
    # E[chi2_m ** -power] for central chi2_m
    if power == 0:
        return np.ones_like(m, dtype=np.float64)
    if power == 1:
        return 1.0 / (m - 2.0)
    return 1.0 / ((m - 2.0) * (m - 4.0))


def _check_power(d: NoncentralChi2, power: int, allowed):
    if power not in allowed:
        raise DomainError(f"power must be one of {allowed}, got {power!r}")
    if power >= 1 and d.dof <= 2 * power:
        raise DomainError(
            f"E[chi2^-{power}] is infinite for dof={d.dof}; need dof >= {2 * power + 1}")


def noncentral_chi2_cdf(d: NoncentralChi2, x: float) -> float:
    """P(chi2_dof(noncentrality) <= x)."""
    if x < 0:
        raise DomainError("cdf argument must be >= 0")
    if x == 0:
        return 0.0
    w = poisson_weights(d.noncentrality)
    m = d.dof + 2.0 * np.arange(w.size)
    return float(min(1.0, np.dot(w, gammainc(0.5 * m, 0.5 * x))))


def inv_moment(d: NoncentralChi2, power: int) -> float:
    """E[(chi2_dof(noncentrality)) ** -power] for power 1 or 2."""
    _check_power(d, power, (1, 2))
    w = poisson_weights(d.noncentrality)
    m = d.dof + 2.0 * np.arange(w.size)
    return float(np.dot(w, _inverse_factor(m, power)))


def truncated_expectation(d: NoncentralChi2, power: int, cutoff: float) -> float:
    """E[chi2 ** -power * I(chi2 < cutoff)] for power 0, 1 or 2.

    ``cutoff`` may be ``np.inf``, which gives the untruncated moment.
    """
    _check_power(d, power, (0, 1, 2))
    if not cutoff > 0:
        raise DomainError("cutoff must be > 0")
    w = poisson_weights(d.noncentrality)
    m = d.dof + 2.0 * np.arange(w.size)
    return float(np.dot(w, _inverse_factor(m, power) * gammainc(0.5 * m - power, 0.5 * cutoff)))


@dataclass(frozen=True)
class SteinMoments:
    """Chi-square expectations used by the Stein-type risk formulas.

    Suffix ``_2`` refers to chi2_{p2+2}(noncentrality), ``_4`` to
    chi2_{p2+4}(noncentrality); ``a = p2 - 2`` is the Stein constant.
    """

    p2: int
    noncentrality: float
    inv1_2: float
    inv1_4: float
    inv2_2: float
    inv2_4: float
    shrink_sq_2: float
    shrink_sq_4: float
    # pieces of the truncated terms, kept for the positive-part formulas
    cdf_a_2: float
    cdf_a_4: float
    trunc1_2: float
    trunc1_4: float
    trunc2_2: float
    trunc2_4: float

    @property
    def a(self) -> int:
        return self.p2 - 2


def stein_factor_moments(p2: int, delta_star: float) -> SteinMoments:
    """Bundle of inverse and truncated moments for a restriction of rank ``p2``.

    ``shrink_sq_v = E[(1 - a/chi2_v)**2 I(chi2_v < a)]`` is assembled from
    the truncated moments by expanding the square.
    """
    if p2 < 3:
        raise DomainError("Stein-type quantities need p2 >= 3")
    a = p2 - 2.0
    d2 = NoncentralChi2(p2 + 2, delta_star)
    d4 = NoncentralChi2(p2 + 4, delta_star)
    parts = {}
    for tag, d in (("2", d2), ("4", d4)):
        t0 = truncated_expectation(d, 0, a)
        t1 = truncated_expectation(d, 1, a)
        t2 = truncated_expectation(d, 2, a)
        parts[tag] = dict(
            inv1=inv_moment(d, 1),
            inv2=inv_moment(d, 2),
            shrink_sq=max(0.0, t0 - 2.0 * a * t1 + a * a * t2),
            cdf_a=t0,
            trunc1=t1,
            trunc2=t2,
        )
    return SteinMoments(
        p2=p2,
        noncentrality=float(delta_star),
        **{f"{k}_{tag}": v for tag, vals in parts.items() for k, v in vals.items()},
    )


def whitened_first_moment(mu_y, expectation) -> np.ndarray:
    """E[y * f(y'y)] for y ~ N(mu_y, I), given ``expectation(d) = E[f(chi2)]``.

    Evaluates ``mu_y * E[f(chi2_{q+2}(|mu_y|^2))]`` where q = len(mu_y).
    """
    mu_y = np.asarray(mu_y, dtype=np.float64)
    d = NoncentralChi2(mu_y.size + 2, float(mu_y @ mu_y))
    return mu_y * expectation(d)


def whitened_second_moment(mu_y, expectation) -> np.ndarray:
    """E[y y' f(y'y)] for y ~ N(mu_y, I).

    Equals ``I * E[f(chi2_{q+2})] + mu_y mu_y' * E[f(chi2_{q+4})]``.
    """
    mu_y = np.asarray(mu_y, dtype=np.float64)
    lam = float(mu_y @ mu_y)
    q = mu_y.size
    e2 = expectation(NoncentralChi2(q + 2, lam))
    e4 = expectation(NoncentralChi2(q + 4, lam))
    return np.eye(q) * e2 + np.outer(mu_y, mu_y) * e4
