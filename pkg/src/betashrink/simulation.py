"""Monte Carlo studies: relative-MSE sweeps and local-alternative checks.

Each replication owns a generator seeded from ``(seed, cell index, rep
index)`` through :class:`numpy.random.SeedSequence`, so results do not
depend on the order in which worker threads pick replications up.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.special import expit

from .errors import DomainError, SolverError
from .estimators import ESTIMATORS, Restriction, build_estimators, estimate_k
from .model import Dataset, fit_mle

log = logging.getLogger(__name__)

DEFAULT_BETA1 = (2.75, -1.75, 1.45)
FAILURE_FLAG = 0.05


@dataclass
class SimConfig:
    n: int = 100
    p1: int = 3
    p2: int = 10
    rho: float = 0.9
    phi: float = 5.0
    beta1: tuple = DEFAULT_BETA1
    delta_grid: tuple = tuple(np.round(np.linspace(0.0, 2.0, 11), 10))
    reps: int = 1000
    alpha: float = 0.05
    delta_shrink: float = 0.5
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        self.beta1 = tuple(float(b) for b in np.atleast_1d(self.beta1))
        self.delta_grid = tuple(float(d) for d in np.atleast_1d(self.delta_grid))
        if not 0 <= self.rho < 1:
            raise DomainError("rho must lie in [0, 1)")
        if self.phi <= 0 or self.n < 1 or self.p1 < 0 or self.p2 < 0 or self.reps < 1:
            raise DomainError("invalid simulation configuration")
        if any(d < 0 for d in self.delta_grid):
            raise DomainError("Delta values must be >= 0")

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def active_coefficients(self) -> np.ndarray:
        """beta1 truncated or zero-padded to length p1."""
        b = np.zeros(self.p1)
        m = min(self.p1, len(self.beta1))
        b[:m] = self.beta1[:m]
        return b

    def true_beta(self, Delta: float) -> np.ndarray:
        b2 = np.zeros(self.p2)
        if self.p2:
            b2[0] = math.sqrt(Delta)
        return np.concatenate([self.active_coefficients(), b2])


@lru_cache(maxsize=16)
def _ar1_cholesky(p: int, rho: float) -> np.ndarray:
    idx = np.arange(p)
    sigma = rho ** np.abs(np.subtract.outer(idx, idx))
    L = np.linalg.cholesky(sigma)
    L.setflags(write=False)
    return L


def gen_design(config: SimConfig, rng: np.random.Generator, p: int | None = None) -> np.ndarray:
    """n x p matrix with i.i.d. N(0, Sigma) rows, ``Sigma_ij = rho^|i-j|``."""
    p = config.p if p is None else p
    L = _ar1_cholesky(p, float(config.rho))
    return rng.standard_normal((config.n, p)) @ L.T


def gen_response(X, beta, phi: float, rng: np.random.Generator, max_redraws: int = 100) -> np.ndarray:
    """Beta(mu*phi, (1-mu)*phi) draws with ``mu = logistic(X beta)``.

    Draws that round to exactly 0 or 1 are redrawn up to ``max_redraws``
    times.  Rows whose mean is so extreme that every redraw rounds to the
    boundary are set to the nearest representable interior value.
    """
    if not phi > 0:
        raise DomainError("phi must be positive")
    mu = expit(np.asarray(X) @ np.asarray(beta))
    a, b = mu * phi, (1.0 - mu) * phi
    y = rng.beta(a, b)
    bad = np.flatnonzero((y <= 0) | (y >= 1))
    n_redrawn = bad.size
    for _ in range(max_redraws):
        if not bad.size:
            break
        y[bad] = rng.beta(a[bad], b[bad])
        bad = bad[(y[bad] <= 0) | (y[bad] >= 1)]
    if n_redrawn:
        log.debug("redrew %d boundary responses", n_redrawn)
    if bad.size:
        log.info("%d responses stayed on the boundary after %d redraws; clamped",
                    bad.size, max_redraws)
        y[bad] = np.clip(y[bad], np.finfo(float).tiny, np.nextafter(1.0, 0.0))
    return y


def rep_rng(seed: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


def _map(fn, items, n_jobs: int):
    if n_jobs == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class RmseTable:
    """Relative MSE ``sum MSE(UR) / sum MSE(estimator)`` per (Delta, estimator)."""

    rows: list
    config: dict
    meta: dict = field(default_factory=dict)

    def value(self, Delta: float, estimator: str) -> float:
        return self._row(Delta, estimator)["rmse"]

    def se(self, Delta: float, estimator: str) -> float:
        return self._row(Delta, estimator)["se"]

    def _row(self, Delta, estimator):
        for r in self.rows:
            if abs(r["delta"] - Delta) < 1e-12 and r["estimator"] == estimator:
                return r
        raise KeyError((Delta, estimator))

    def series(self, estimator: str) -> np.ndarray:
        return np.array([r["rmse"] for r in self.rows if r["estimator"] == estimator])

    def deltas(self) -> list:
        return sorted({r["delta"] for r in self.rows})

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("delta,estimator,rmse,reps_used\n")
            for r in self.rows:
                fh.write(f"{r['delta']:.17g},{r['estimator']},{r['rmse']:.17g},{r['reps_used']}\n")

    def to_figure_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("delta,estimator,rmse,se,mse,reps_used,failures,flagged\n")
            for r in self.rows:
                fh.write(f"{r['delta']:.17g},{r['estimator']},{r['rmse']:.17g},{r['se']:.17g},"
                         f"{r['mse']:.17g},{r['reps_used']},{r['failures']},{int(r['flagged'])}\n")


def _ratio_with_se(u: np.ndarray, e: np.ndarray):
    """Ratio of sums and its delta-method standard error."""
    n = u.size
    if n == 0 or e.sum() == 0:
        return float("nan"), float("nan")
    ratio = u.sum() / e.sum()
    if n < 2:
        return float(ratio), float("nan")
    resid = u - ratio * e
    se = np.sqrt(resid.var(ddof=1) / n) / e.mean()
    return float(ratio), float(se)


def _summarise(Delta, sq_errors: list, failures: int, reps: int) -> list:
    rows = []
    arr = np.array([s for s in sq_errors if s is not None], dtype=np.float64).reshape(-1, len(ESTIMATORS))
    flagged = failures > FAILURE_FLAG * reps
    for j, name in enumerate(ESTIMATORS):
        ok = np.isfinite(arr[:, j]) & np.isfinite(arr[:, 0])
        u, e = arr[ok, 0], arr[ok, j]
        if name == "UR":
            ratio, se = (1.0, 0.0) if ok.any() else (float("nan"), float("nan"))
        else:
            ratio, se = _ratio_with_se(u, e)
        rows.append(dict(delta=float(Delta), estimator=name, rmse=ratio, se=se,
                         mse=float(e.mean()) if e.size else float("nan"),
                         reps_used=int(ok.sum()), failures=int(failures), flagged=bool(flagged)))
    return rows


def _squared_errors(est, beta_true) -> list:
    out = []
    for name in ESTIMATORS:
        v = est.get(name)
        out.append(float("nan") if v is None else float(np.sum((v - beta_true) ** 2)))
    return out


def _one_replication(config: SimConfig, di: int, rep: int, Delta: float):
    rng = rep_rng(config.seed, di, rep)
    X = gen_design(config, rng)
    beta = config.true_beta(Delta)
    y = gen_response(X, beta, config.phi, rng)
    try:
        fit = fit_mle(Dataset(y, X))
        if not fit.converged:
            return None
        r = Restriction.zero(config.p, range(config.p1, config.p))
        est = build_estimators(fit, r, alpha=config.alpha, delta=config.delta_shrink)
    except (SolverError, DomainError, FloatingPointError, np.linalg.LinAlgError):
        return None
    return _squared_errors(est, beta)


def run_sweep(config: SimConfig) -> RmseTable:
    """Relative MSE of every estimator for each Delta in the grid."""
    rows = []
    meta = {"failures": {}}
    for di, Delta in enumerate(config.delta_grid):
        res = _map(lambda rep: _one_replication(config, di, rep, Delta), range(config.reps), config.n_jobs)
        failures = sum(r is None for r in res)
        meta["failures"][Delta] = failures
        rows.extend(_summarise(Delta, res, failures, config.reps))
    return RmseTable(rows=rows, config=asdict(config), meta=meta)


@dataclass(frozen=True)
class ScreenSpec:
    """How the high-dimensional study reduces p1 + p2 columns to a working set.

    ``kind``:
      ``"oracle"``     true active set plus the first ``retain_inactive`` inactive columns;
      ``"partition"``  the user-given ``columns`` (indices into the full design);
      ``"marginal"``   columns whose marginal logit-scale correlation test rejects
                       at ``alpha_screen`` (divided by the column count if ``bonferroni``).
    """

    kind: str = "oracle"
    retain_inactive: int = 10
    columns: tuple = ()
    alpha_screen: float = 0.01
    bonferroni: bool = False


def marginal_screen(y, X, alpha_screen: float = 0.01, bonferroni: bool = False) -> np.ndarray:
    """Indices of columns whose correlation with logit(y) is significant."""
    z = np.log(y) - np.log1p(-y)
    n = z.size
    zc = z - z.mean()
    Xc = X - X.mean(axis=0)
    denom = np.sqrt((Xc ** 2).sum(axis=0) * (zc @ zc))
    r = np.divide(Xc.T @ zc, denom, out=np.zeros(X.shape[1]), where=denom > 0)
    r = np.clip(r, -1 + 1e-15, 1 - 1e-15)
    t = r * np.sqrt((n - 2) / (1 - r ** 2))
    pval = 2 * stats.t.sf(np.abs(t), n - 2)
    level = alpha_screen / X.shape[1] if bonferroni else alpha_screen
    return np.flatnonzero(pval < level)


def _working_set(config: SimConfig, screen: ScreenSpec, y, X) -> np.ndarray:
    if screen.kind == "oracle":
        keep = min(screen.retain_inactive, config.p2)
        cols = np.concatenate([np.arange(config.p1), config.p1 + np.arange(keep)])
    elif screen.kind == "partition":
        cols = np.asarray(sorted(screen.columns), dtype=int)
    elif screen.kind == "marginal":
        cols = marginal_screen(y, X, screen.alpha_screen, screen.bonferroni)
    else:
        raise ValueError(f"unknown screen kind {screen.kind!r}")
    return cols.astype(int)


def _one_highdim(config: SimConfig, screen: ScreenSpec, di: int, rep: int, Delta: float):
    rng = rep_rng(config.seed, di, rep)
    X = gen_design(config, rng)
    beta = config.true_beta(Delta)
    y = gen_response(X, beta, config.phi, rng)
    cols = _working_set(config, screen, y, X)
    if cols.size > config.n:
        raise DomainError(f"working set of {cols.size} columns exceeds n={config.n}")
    if cols.size == 0:
        return None
    inactive = [i for i, c in enumerate(cols) if c >= config.p1]
    try:
        full = cols.size == X.shape[1] and np.array_equal(cols, np.arange(X.shape[1]))
        fit = fit_mle(Dataset(y, X if full else X[:, cols]))
        if not fit.converged:
            return None
        est = build_estimators(fit, Restriction.zero(cols.size, inactive),
                               alpha=config.alpha, delta=config.delta_shrink)
    except (SolverError, DomainError, FloatingPointError, np.linalg.LinAlgError):
        return None
    return _squared_errors(est, beta[cols])


def run_highdim(config: SimConfig, screen: ScreenSpec | None = None) -> RmseTable:
    """Screen to a working set, then run the low-dimensional estimators on it.

    Relative MSEs are computed on the working-set coefficients.
    """
    screen = screen or ScreenSpec()
    rows = []
    meta = {"failures": {}, "screen": asdict(screen)}
    for di, Delta in enumerate(config.delta_grid):
        res = _map(lambda rep: _one_highdim(config, screen, di, rep, Delta), range(config.reps),
                   config.n_jobs)
        failures = sum(r is None for r in res)
        meta["failures"][Delta] = failures
        rows.extend(_summarise(Delta, res, failures, config.reps))
    return RmseTable(rows=rows, config=asdict(config), meta=meta)


@dataclass
class LocalAlternativeStudy:
    """Empirical sqrt(n)-scaled errors next to the closed-form predictions."""

    n: int
    reps_used: int
    failures: int
    bias: dict
    bias_se: dict
    second_moment: dict
    theory: dict
    delta_star: float
    k: float

    def bias_z(self, name: str, form: str = "paper") -> np.ndarray:
        th = self.theory[form].bias[name]
        return (self.bias[name] - th) / self.bias_se[name]

    def frobenius_error(self, name: str, form: str = "paper") -> float:
        th = self.theory[form].variance[name]
        return float(np.linalg.norm(self.second_moment[name] - th) / np.linalg.norm(th))


def local_alternative_study(n: int, reps: int, beta1, vartheta, rho: float = 0.5,
                            phi: float = 5.0, alpha: float = 0.05, delta: float = 0.5,
                            seed: int = 0, information: str = "profile",
                            n_jobs: int = 1) -> LocalAlternativeStudy:
    """Simulate ``sqrt(n)(b* - beta)`` on a fixed design under a local alternative.

    The design is drawn once.  ``beta = (beta1, vartheta/sqrt(n))`` so that
    ``H beta - h = vartheta/sqrt(n)`` for the zero restriction on the last
    ``len(vartheta)`` coordinates.  The ridge parameter is estimated once
    from a pilot sample and held fixed.  Predictions use the smoother ``A``
    and the per-observation information at the true parameters, with the
    ridge drift entering as ``sqrt(n)(A - I) beta``.
    """
    from .asymptotics import population_report

    beta1 = np.asarray(beta1, dtype=np.float64)
    vartheta = np.asarray(vartheta, dtype=np.float64)
    p1, p2 = beta1.size, vartheta.size
    p = p1 + p2
    cfg = SimConfig(n=n, p1=p1, p2=p2, rho=rho, phi=phi, reps=reps, seed=seed)
    X = gen_design(cfg, rep_rng(seed, 0))
    beta = np.concatenate([beta1, vartheta / np.sqrt(n)])
    r = Restriction.zero(p, range(p1, p))
    pilot = fit_mle(Dataset(gen_response(X, beta, phi, rep_rng(seed, 1)), X))
    k = estimate_k(pilot)

    theory = {form: population_report(X, beta, phi, r, vartheta, k, alpha, delta, form, information)
              for form in ("paper", "derived")}
    delta_star_ = theory["derived"].delta_star

    def one(rep):
        y = gen_response(X, beta, phi, rep_rng(seed, 2, rep))
        try:
            fit = fit_mle(Dataset(y, X))
            if not fit.converged:
                return None
            est = build_estimators(fit, r, k=k, alpha=alpha, delta=delta, information=information)
        except (SolverError, DomainError):
            return None
        return np.stack([np.sqrt(n) * (est.get(name) - beta) for name in ESTIMATORS])

    res = [x for x in _map(one, range(reps), n_jobs) if x is not None]
    S = np.stack(res)  # reps x estimators x p
    bias, bias_se, second = {}, {}, {}
    for j, name in enumerate(ESTIMATORS):
        s = S[:, j, :]
        bias[name] = s.mean(axis=0)
        bias_se[name] = s.std(axis=0, ddof=1) / np.sqrt(s.shape[0])
        second[name] = s.T @ s / s.shape[0]
    return LocalAlternativeStudy(n=n, reps_used=len(res), failures=reps - len(res), bias=bias,
                                 bias_se=bias_se, second_moment=second, theory=theory,
                                 delta_star=delta_star_, k=k)
