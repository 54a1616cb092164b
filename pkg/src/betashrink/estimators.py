"""Ridge, restricted and shrinkage estimators built on one beta-regression fit.

All shrinkage estimators are points on the line through the unrestricted
ridge estimate ``ur`` and the restricted ridge estimate ``rr``:
``rr + t * (ur - rr)`` with a data-driven ``t``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.stats import chi2

from .errors import DomainError, SolverError
from .model import BetaFit

ESTIMATORS = ("UR", "RR", "RLS", "RPT", "SPE", "RS", "RPS")


@dataclass(frozen=True)
class Restriction:
    """Linear hypothesis ``H beta = h`` with ``H`` of full row rank p2."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=np.float64))
        h = np.asarray(self.h, dtype=np.float64).ravel()
        if H.shape[0] == 0 or H.size == 0:
            H = H.reshape(0, H.shape[1] if H.ndim == 2 else 0)
        if h.size != H.shape[0]:
            raise DomainError(f"h has {h.size} entries for {H.shape[0]} restrictions")
        if H.shape[0] and np.linalg.matrix_rank(H) != H.shape[0]:
            raise DomainError("H must have full row rank")
        H.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "h", h)

    @property
    def p2(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return self.H.shape[1]

    @classmethod
    def zero(cls, p: int, inactive) -> "Restriction":
        """``beta[inactive] = 0``; the (0, I) contrast when inactive come last."""
        inactive = sorted(int(j) for j in inactive)
        if len(set(inactive)) != len(inactive) or any(j < 0 or j >= p for j in inactive):
            raise DomainError(f"bad inactive indices {inactive} for p={p}")
        H = np.zeros((len(inactive), p))
        H[np.arange(len(inactive)), inactive] = 1.0
        return cls(H, np.zeros(len(inactive)))

    def inactive(self) -> list[int]:
        """Column indices pinned by a zero restriction (empty otherwise)."""
        if np.any(self.h != 0):
            return []
        cols = []
        for row in self.H:
            nz = np.flatnonzero(row)
            if nz.size != 1 or row[nz[0]] != 1.0:
                return []
            cols.append(int(nz[0]))
        return cols


@dataclass(frozen=True)
class RidgeContext:
    """Ridge smoother ``A`` and restriction projector ``J`` for one fit.

    ``A = (X'WX + kI)^-1 X'WX``, ``J = I^-1 H' (H I^-1 H')^-1``.
    """

    k: float
    A: np.ndarray
    J: np.ndarray


def beta_information(fit: BetaFit, kind: str = "profile") -> np.ndarray:
    """Information matrix for beta used by the restriction and Wald test.

    ``"profile"`` accounts for phi being estimated (inverse of the beta
    block of the joint inverse information); ``"k_bb"`` is the plain block.
    """
    if kind == "profile":
        return fit.info.profile_k_bb()
    if kind == "k_bb":
        return fit.info.k_bb
    raise ValueError(f"unknown information kind {kind!r}")


def estimate_k(fit: BetaFit, X=None) -> float:
    """Ridge parameter ``1 / (phi_hat' phi_hat)`` with ``phi_hat = C' beta_hat``.

    ``C`` holds the eigenvectors of X'WX.  ``X`` is accepted for API
    symmetry; the weighted cross-product stored on the fit is used.
    """
    xtwx = fit.xtwx if X is None else X.T @ (fit.info.W[:, None] * X)
    _, C = np.linalg.eigh(xtwx)
    alpha = C.T @ fit.beta
    ss = float(alpha @ alpha)
    if ss == 0.0:
        raise DomainError("beta_hat is zero; k = 1/(beta'beta) is undefined")
    return 1.0 / ss


def smoother(xtwx: np.ndarray, k: float) -> np.ndarray:
    if k < 0:
        raise DomainError("ridge parameter must be >= 0")
    p = xtwx.shape[0]
    try:
        return linalg.solve(xtwx + k * np.eye(p), xtwx, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError("X'WX + kI is singular; use k > 0") from exc


def projector(info: np.ndarray, r: Restriction) -> np.ndarray:
    """``I^-1 H' (H I^-1 H')^-1`` as a p x p2 matrix."""
    try:
        iht = linalg.solve(info, r.H.T, assume_a="pos")
        return linalg.solve(r.H @ iht, iht.T, assume_a="pos").T
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError("H I^-1 H' is singular") from exc


def ridge_context(fit: BetaFit, k: float, r: Restriction, information: str = "profile") -> RidgeContext:
    J = projector(beta_information(fit, information), r) if r.p2 else np.zeros((fit.p, 0))
    return RidgeContext(k=float(k), A=smoother(fit.xtwx, k), J=J)


def ridge_unrestricted(fit: BetaFit, k: float) -> np.ndarray:
    return smoother(fit.xtwx, k) @ fit.beta


def restricted_mle(fit: BetaFit, r: Restriction, information: str = "profile") -> np.ndarray:
    if r.p2 == 0:
        return fit.beta.copy()
    J = projector(beta_information(fit, information), r)
    return fit.beta - J @ (r.H @ fit.beta - r.h)


def ridge_restricted(fit: BetaFit, r: Restriction, k: float, information: str = "profile") -> np.ndarray:
    return smoother(fit.xtwx, k) @ restricted_mle(fit, r, information)


def wald_statistic(fit: BetaFit, ur, r: Restriction, information: str = "profile") -> float:
    """``(H ur - h)' (H I^-1 H')^-1 (H ur - h)`` with the full-sample information."""
    if r.p2 == 0:
        return 0.0
    info = beta_information(fit, information)
    diff = r.H @ np.asarray(ur) - r.h
    try:
        inner = r.H @ linalg.solve(info, r.H.T, assume_a="pos")
        return max(0.0, float(diff @ linalg.solve(inner, diff, assume_a="pos")))
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError("H I^-1 H' is singular") from exc


def pretest_threshold(p2: int, alpha: float) -> float:
    """Upper-alpha quantile of chi2_{p2}."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    return float(chi2.isf(alpha, p2))


def _check_delta(delta):
    if not 0 <= delta <= 1:
        raise DomainError(f"delta must lie in [0, 1], got {delta!r}")


def shrink_linear(ur, rr, delta: float) -> np.ndarray:
    _check_delta(delta)
    ur, rr = np.asarray(ur), np.asarray(rr)
    return delta * rr + (1.0 - delta) * ur


def shrink_pretest(ur, rr, t_n: float, p2: int, alpha: float, delta: float = 1.0) -> np.ndarray:
    """Pretest (delta = 1) or shrinkage pretest estimator."""
    _check_delta(delta)
    ur, rr = np.asarray(ur), np.asarray(rr)
    if t_n > pretest_threshold(p2, alpha):
        return ur.copy()
    return rr.copy() if delta == 1 else ur - delta * (ur - rr)


def stein_factor(t_n: float, p2: int) -> float:
    if p2 < 3:
        raise DomainError("Stein estimators need p2 >= 3")
    if t_n <= 0:
        raise DomainError("Stein factor undefined at T_n = 0")
    return 1.0 - (p2 - 2) / t_n


def shrink_stein(ur, rr, t_n: float, p2: int, positive_part: bool = False) -> np.ndarray:
    ur, rr = np.asarray(ur), np.asarray(rr)
    if positive_part and t_n == 0:
        if p2 < 3:
            raise DomainError("Stein estimators need p2 >= 3")
        return rr.copy()
    g = stein_factor(t_n, p2)
    if positive_part:
        g = max(0.0, g)
    return rr + g * (ur - rr)


@dataclass
class EstimatorSet:
    """All estimates from one fit; RS and RPS are ``None`` when p2 < 3."""

    mle: np.ndarray
    ur: np.ndarray
    rr: np.ndarray
    rls: np.ndarray
    rpt: np.ndarray
    spe: np.ndarray
    rs: np.ndarray | None
    rps: np.ndarray | None
    k: float
    delta: float
    alpha: float
    t_n: float
    p2: int
    pretest_accepted: bool
    names: tuple = ()
    extra: dict = field(default_factory=dict)

    def get(self, name: str):
        return getattr(self, name.lower())

    def as_dict(self) -> dict:
        return {name: self.get(name) for name in ESTIMATORS}


def build_estimators(fit: BetaFit, r: Restriction, k=None, alpha: float = 0.05,
                     delta=0.5, information: str = "profile") -> EstimatorSet:
    """Every estimator from one fit, one ``k`` and one restriction.

    ``k=None`` estimates k from the fit.  ``delta="optimize"`` picks the
    linear-shrinkage weight by a grid search on the plug-in asymptotic
    risk of RLS.
    """
    if r.p != fit.p:
        raise DomainError(f"restriction is for p={r.p}, fit has p={fit.p}")
    if k is None:
        k = estimate_k(fit)
    ctx = ridge_context(fit, k, r, information)
    ur = ctx.A @ fit.beta
    if r.p2 == 0:
        rr = ur.copy()
    else:
        rr = ctx.A @ (fit.beta - ctx.J @ (r.H @ fit.beta - r.h))
    t_n = wald_statistic(fit, ur, r, information)
    extra = {}
    if isinstance(delta, str):
        if delta != "optimize":
            raise ValueError(f"delta must be a number or 'optimize', got {delta!r}")
        from .asymptotics import optimal_delta
        delta, extra["delta_grid_risk"] = optimal_delta(fit, ctx, r, ur, alpha, information)
    _check_delta(delta)
    if r.p2 == 0:
        accepted = True
        rpt = spe = rr.copy()
    else:
        accepted = t_n <= pretest_threshold(r.p2, alpha)
        rpt = shrink_pretest(ur, rr, t_n, r.p2, alpha, 1.0)
        spe = shrink_pretest(ur, rr, t_n, r.p2, alpha, delta)
    rs = rps = None
    if r.p2 >= 3:
        if t_n > 0:
            rs = shrink_stein(ur, rr, t_n, r.p2)
        rps = shrink_stein(ur, rr, t_n, r.p2, positive_part=True)
    elif r.p2 == 0:
        rs, rps = ur.copy(), ur.copy()
    return EstimatorSet(
        mle=fit.beta.copy(), ur=ur, rr=rr, rls=shrink_linear(ur, rr, delta), rpt=rpt, spe=spe,
        rs=rs, rps=rps, k=float(k), delta=float(delta), alpha=float(alpha), t_n=float(t_n),
        p2=r.p2, pretest_accepted=bool(accepted), names=fit.names, extra=extra,
    )
