"""Asymptotic distributional bias and risk matrices under local alternatives.

Under ``H beta = h + vartheta / sqrt(n)`` every estimator is of the form

    sqrt(n) (b* - beta) = kappa1 - f(T) * kappa4,

where ``kappa1 = sqrt(n)(ur - beta)``, ``kappa4 = sqrt(n)(ur - rr)`` and
``f`` is 0 (UR), 1 (RR), delta (RLS), an indicator (RPT, SPE) or a Stein
factor (RS, RPS).  Two sets of closed forms are provided:

``form="paper"``
    the published displays, evaluated term by term;
``form="derived"``
    the same quantities re-derived from the general ``f`` representation
    with the normal-vector moment identities, for ``rr = A * rmle``.

The published displays expand ``kappa4`` as ``J sqrt(n)(H ur - h)``, which
is exact for the projected ridge estimator ``ur - J(H ur - h)``.  For
``rr = A rmle`` one has ``kappa4 = A J sqrt(n)(H mle - h)`` instead, so the
derived form uses ``m = A J vartheta`` and ``G = A J H I^-1 A'``.  At
``A = I`` both forms coincide for UR, RR, RLS, RPT and SPE; the RS risk
and the RPS bias/risk displays differ from the derived ones at any ``A``.

Notation used below: ``b = (A - I) beta``, ``c = chi2_{p2, alpha}``,
``a = p2 - 2``; for the published form ``m = J H b + J vartheta`` and
``G = J H A I^-1 A'``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DomainError, SolverError
from .estimators import ESTIMATORS, Restriction, RidgeContext, beta_information, pretest_threshold
from .special import NoncentralChi2, SteinMoments, stein_factor_moments

FORMS = ("paper", "derived")


def delta_star(r: Restriction, info: np.ndarray, vartheta) -> float:
    """Noncentrality ``vartheta' (H I^-1 H')^-1 vartheta``."""
    vartheta = np.asarray(vartheta, dtype=np.float64)
    try:
        inner = r.H @ linalg.solve(info, r.H.T, assume_a="pos")
        val = float(vartheta @ linalg.solve(inner, vartheta, assume_a="pos"))
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError("H I^-1 H' is singular") from exc
    return max(0.0, val)


@dataclass(frozen=True)
class LocalAlternative:
    vartheta: np.ndarray
    delta_star: float

    @classmethod
    def build(cls, r: Restriction, info: np.ndarray, vartheta) -> "LocalAlternative":
        vartheta = np.asarray(vartheta, dtype=np.float64).ravel()
        if vartheta.size != r.p2:
            raise DomainError(f"vartheta has {vartheta.size} entries for p2={r.p2}")
        return cls(vartheta, delta_star(r, info, vartheta))

    def check(self, r: Restriction, info: np.ndarray, rtol: float = 1e-10) -> bool:
        ref = delta_star(r, info, self.vartheta)
        return abs(ref - self.delta_star) <= rtol * max(1.0, abs(ref))


@dataclass
class AsymptoticReport:
    bias: dict
    variance: dict
    A: np.ndarray
    J: np.ndarray
    info: np.ndarray
    beta: np.ndarray
    vartheta: np.ndarray
    delta_star: float
    alpha: float
    delta: float
    p2: int
    form: str
    moments: SteinMoments | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class _Blocks:
    aia: np.ndarray
    b: np.ndarray
    m: np.ndarray
    b_rr: np.ndarray
    jhb: np.ndarray
    jv: np.ndarray
    G: np.ndarray
    psi2: float
    psi4: float
    moments: SteinMoments | None
    p2: int


def _blocks(ctx: RidgeContext, info, beta, r: Restriction, la: LocalAlternative, alpha,
            form: str = "paper") -> _Blocks:
    p = ctx.A.shape[0]
    if r.p2 == 0:
        raise DomainError("asymptotic formulas need at least one restriction")
    info_inv = linalg.inv(info)
    aia = ctx.A @ info_inv @ ctx.A.T
    b = (ctx.A - np.eye(p)) @ np.asarray(beta, dtype=np.float64)
    jh = ctx.J @ r.H
    jhb = jh @ b
    jv = ctx.J @ la.vartheta
    if form == "paper":
        m, G = jhb + jv, jh @ aia
    else:
        m, G = ctx.A @ jv, ctx.A @ jh @ info_inv @ ctx.A.T
    c = pretest_threshold(r.p2, alpha)
    return _Blocks(
        aia=aia, b=b, m=m, b_rr=b - m, jhb=jhb, jv=jv, G=G,
        psi2=NoncentralChi2(r.p2 + 2, la.delta_star).cdf(c),
        psi4=NoncentralChi2(r.p2 + 4, la.delta_star).cdf(c),
        moments=stein_factor_moments(r.p2, la.delta_star) if r.p2 >= 3 else None,
        p2=r.p2,
    )


def _check(form, delta):
    if form not in FORMS:
        raise ValueError(f"form must be one of {FORMS}")
    if not 0 <= delta <= 1:
        raise DomainError("delta must lie in [0, 1]")


def _weights(B: _Blocks, delta: float) -> dict:
    """(E_{p2+2}[f], E_{p2+4}[f], E_{p2+2}[f^2], E_{p2+4}[f^2]) per estimator."""
    out = {
        "UR": (0.0, 0.0, 0.0, 0.0),
        "RR": (1.0, 1.0, 1.0, 1.0),
        "RLS": (delta, delta, delta ** 2, delta ** 2),
        "RPT": (B.psi2, B.psi4, B.psi2, B.psi4),
        "SPE": (delta * B.psi2, delta * B.psi4, delta ** 2 * B.psi2, delta ** 2 * B.psi4),
    }
    s = B.moments
    if s is not None:
        a = s.a
        out["RS"] = (a * s.inv1_2, a * s.inv1_4, a * a * s.inv2_2, a * a * s.inv2_4)
        out["RPS"] = (
            a * s.inv1_2 + s.cdf_a_2 - a * s.trunc1_2,
            a * s.inv1_4 + s.cdf_a_4 - a * s.trunc1_4,
            a * a * s.inv2_2 + s.cdf_a_2 - a * a * s.trunc2_2,
            a * a * s.inv2_4 + s.cdf_a_4 - a * a * s.trunc2_4,
        )
    return out


def _paper_bias(B: _Blocks, delta: float) -> dict:
    b, m = B.b, B.m
    out = {
        "UR": b,
        "RR": B.b_rr,
        "RLS": b - delta * m,
        "RPT": b - m * B.psi2,
        "SPE": b - delta * m * B.psi2,
        "RS": None,
        "RPS": None,
    }
    s = B.moments
    if s is not None:
        out["RS"] = b - s.a * m * s.inv1_2
        out["RPS"] = out["RS"] - m * (B.psi2 + s.a * s.trunc1_2)
    return out


def _paper_variance(B: _Blocks, delta: float) -> dict:
    b, m, brr, G = B.b, B.m, B.b_rr, B.G
    mm = np.outer(m, m)
    v_ur = B.aia + np.outer(b, b)
    out = {
        "UR": v_ur,
        "RR": B.aia - G + np.outer(brr, brr),
        "RLS": v_ur - 2 * delta * np.outer(brr, m) - delta * (2 - delta) * (G + mm),
        "RPT": v_ur - 2 * np.outer(brr, m) * B.psi2 - (G * B.psi2 + mm * B.psi4),
        "SPE": v_ur - 2 * delta * np.outer(brr, m) * B.psi2
        - delta * (2 - delta) * (G * B.psi2 + mm * B.psi4),
        "RS": None,
        "RPS": None,
    }
    s = B.moments
    if s is not None:
        a, p2 = s.a, B.p2
        v_rs = (v_ur - 2 * a * np.outer(brr, m) * s.inv1_2
                + a * (p2 - 4) * G * (s.inv2_2 - s.inv1_2)
                + a * (p2 - 4) * mm * (s.inv2_4 - s.inv1_4))
        out["RS"] = v_rs
        # the display's bracket [JH(A-I)beta - J vartheta + J vartheta], kept unsimplified
        bracket = B.jhb - B.jv + B.jv
        e_lin = s.cdf_a_2 - a * s.trunc1_2
        out["RPS"] = (v_rs - 2 * np.outer(brr, bracket) * e_lin
                      - (G * s.shrink_sq_2 + mm * s.shrink_sq_4))
    return out


def _derived_bias(B: _Blocks, delta: float) -> dict:
    out = dict.fromkeys(ESTIMATORS)
    for name, (e2, _, _, _) in _weights(B, delta).items():
        out[name] = B.b - B.m * e2
    return out


def _derived_variance(B: _Blocks, delta: float) -> dict:
    b, m, G = B.b, B.m, B.G
    bm = np.outer(b, m)
    mm = np.outer(m, m)
    v_ur = B.aia + np.outer(b, b)
    out = dict.fromkeys(ESTIMATORS)
    for name, (e2, e4, f2, f4) in _weights(B, delta).items():
        out[name] = (v_ur - e2 * (bm + bm.T) - 2 * e2 * G - 2 * (e4 - e2) * mm
                     + f2 * G + f4 * mm)
    return out


def _sym(M):
    return None if M is None else 0.5 * (M + M.T)


def bias_all(ctx: RidgeContext, info, beta, r: Restriction, la: LocalAlternative,
             alpha: float = 0.05, delta: float = 0.5, form: str = "paper") -> dict:
    """Asymptotic bias vector of every estimator (``None`` where p2 < 3)."""
    _check(form, delta)
    B = _blocks(ctx, info, beta, r, la, alpha, form)
    return (_paper_bias if form == "paper" else _derived_bias)(B, delta)


def variance_all(ctx: RidgeContext, info, beta, r: Restriction, la: LocalAlternative,
                 alpha: float = 0.05, delta: float = 0.5, form: str = "paper") -> dict:
    """Asymptotic second-moment matrix of every estimator, symmetrised."""
    _check(form, delta)
    B = _blocks(ctx, info, beta, r, la, alpha, form)
    raw = (_paper_variance if form == "paper" else _derived_variance)(B, delta)
    return {k: _sym(v) for k, v in raw.items()}


def report(ctx: RidgeContext, info, beta, r: Restriction, la: LocalAlternative,
           alpha: float = 0.05, delta: float = 0.5, form: str = "paper") -> AsymptoticReport:
    _check(form, delta)
    B = _blocks(ctx, info, beta, r, la, alpha, form)
    if form == "paper":
        bias, var = _paper_bias(B, delta), _paper_variance(B, delta)
    else:
        bias, var = _derived_bias(B, delta), _derived_variance(B, delta)
    return AsymptoticReport(
        bias=bias, variance={k: _sym(v) for k, v in var.items()}, A=ctx.A, J=ctx.J,
        info=np.asarray(info), beta=np.asarray(beta), vartheta=la.vartheta,
        delta_star=la.delta_star, alpha=alpha, delta=delta, p2=r.p2, form=form,
        moments=B.moments,
    )


DELTA_GRID = np.round(np.linspace(0.0, 1.0, 101), 10)


def optimal_delta(fit, ctx: RidgeContext, r: Restriction, ur, alpha: float,
                  information: str = "profile"):
    """Grid search over delta in {0, 0.01, ..., 1} for the smallest plug-in RLS risk.

    The risk is the trace of the RLS asymptotic risk matrix evaluated at
    the per-observation information, ``vartheta_hat = sqrt(n)(H ur - h)``
    and the drift ``sqrt(n)(A - I) beta_hat``.  Returns ``(delta, risks)``.
    """
    if r.p2 == 0:
        return 0.0, np.zeros_like(DELTA_GRID)
    n = fit.n
    info = beta_information(fit, information) / n
    vartheta = np.sqrt(n) * (r.H @ np.asarray(ur) - r.h)
    la = LocalAlternative.build(r, info, vartheta)
    B = _blocks(ctx, info, np.sqrt(n) * fit.beta, r, la, alpha, "derived")
    risks = np.array([np.trace(_derived_variance_rls(B, d)) for d in DELTA_GRID])
    return float(DELTA_GRID[int(np.argmin(risks))]), risks


def _derived_variance_rls(B: _Blocks, delta: float) -> np.ndarray:
    bm = np.outer(B.b, B.m)
    return (B.aia + np.outer(B.b, B.b) - delta * (bm + bm.T) - delta * (2 - delta) * B.G
            + delta ** 2 * np.outer(B.m, B.m))


def population_report(X, beta, phi: float, r: Restriction, vartheta, k: float,
                      alpha: float = 0.05, delta: float = 0.5, form: str = "paper",
                      information: str = "profile") -> AsymptoticReport:
    """Report at the true ``(beta, phi)`` on a fixed design.

    Uses the expected information at the truth, ``A`` from the true
    weights, the per-observation information ``I/n`` and the drift
    ``sqrt(n)(A - I) beta``.
    """
    from .model import Dataset, fisher_information
    from .estimators import projector, smoother

    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    pop = fisher_information(Dataset(np.full(n, 0.5), X), beta, phi)
    info_n = pop.profile_k_bb() if information == "profile" else pop.k_bb
    ctx = RidgeContext(k=float(k), A=smoother(pop.xtwx, k), J=projector(info_n, r))
    info = info_n / n
    la = LocalAlternative.build(r, info, vartheta)
    return report(ctx, info, np.sqrt(n) * np.asarray(beta, dtype=np.float64), r, la,
                  alpha, delta, form)
