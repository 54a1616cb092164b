"""Real-data workflow: ingest, diagnose, restrict, estimate, bootstrap."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError, DomainError, SolverError
from .estimators import ESTIMATORS, Restriction, build_estimators, estimate_k
from .model import BetaFit, Dataset, fit_mle

log = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"
BOOTSTRAP_FLAG = 0.10


class StageError(RuntimeError):
    """Failure inside :func:`analyze`, labelled with the stage that raised."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class AnalysisSpec:
    """Everything :func:`analyze` needs.

    ``inactive`` is a list of predictor names or the string ``"auto-aic"``.
    ``predictors=None`` uses every column except the response.
    """

    data: str
    response: str
    predictors: list | None = None
    inactive: list | str = field(default_factory=list)
    k: float | str = "estimate"
    alpha: float = 0.05
    delta: float | str = 0.5
    bootstrap: int = 0
    seed: int = 0
    intercept: bool = True
    squeeze: bool = False
    max_inactive: int | None = None
    n_jobs: int = 1

    def validate(self, columns) -> None:
        preds = self.predictor_names(columns)
        if self.response in preds:
            raise DataError("response cannot also be a predictor")
        if self.response not in columns:
            raise DataError(f"response column {self.response!r} not found")
        missing = [c for c in preds if c not in columns]
        if missing:
            raise DataError(f"predictor columns not found: {missing}")
        if not isinstance(self.inactive, str):
            extra = [c for c in self.inactive if c not in preds]
            if extra:
                raise DataError(f"inactive columns are not predictors: {extra}")
        elif self.inactive != "auto-aic":
            raise DataError(f"inactive must be a list or 'auto-aic', got {self.inactive!r}")

    def predictor_names(self, columns) -> list:
        if self.predictors is not None:
            return list(self.predictors)
        return [c for c in columns if c != self.response]


@dataclass
class IngestReport:
    n_read: int
    n_dropped: int
    dropped_rows: list


def _read_numeric(path) -> pd.DataFrame:
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise
    except Exception as exc:  # pandas raises several parser error types
        raise DataError(f"cannot parse {path}: {exc}") from exc
    raw.columns = [c.strip() for c in raw.columns]
    na = {"", "NA", "NaN", "nan", "N/A", "null", "NULL", "."}
    out = {}
    for col in raw.columns:
        vals = raw[col].str.strip()
        missing = vals.isin(na)
        # Python's float() rounds correctly, so values survive a write/read cycle
        num = np.full(len(vals), np.nan)
        for i, (v, m) in enumerate(zip(vals, missing)):
            if m:
                continue
            try:
                num[i] = float(v)
            except ValueError:
                # +2: header line plus one-based numbering
                raise DataError(f"non-numeric value {v!r} at line {i + 2}, column {col!r}") from None
        out[col] = num
    return pd.DataFrame(out)


def ingest_csv(path, spec: AnalysisSpec):
    """Read a CSV into a :class:`Dataset`, dropping incomplete rows.

    Returns ``(dataset, report)``.  Responses must lie strictly inside
    (0, 1) unless ``spec.squeeze`` is set.
    """
    df = _read_numeric(path)
    spec.validate(list(df.columns))
    preds = spec.predictor_names(df.columns)
    sub = df[[spec.response, *preds]]
    incomplete = sub.isna().any(axis=1).to_numpy()
    dropped = np.flatnonzero(incomplete).tolist()
    if dropped:
        log.info("dropped %d incomplete rows", len(dropped))
    sub = sub.loc[~incomplete]
    if sub.empty:
        raise DataError("no complete rows")
    y = sub[spec.response].to_numpy()
    if not spec.squeeze:
        bad = np.flatnonzero(~((y > 0) & (y < 1)))
        if bad.size:
            lines = (np.flatnonzero(~incomplete)[bad] + 2).tolist()
            raise DomainError(f"response {spec.response!r} must lie strictly inside (0, 1); "
                              f"offending lines: {lines[:10]}")
    X = sub[preds].to_numpy()
    names = list(preds)
    if spec.intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = [INTERCEPT, *names]
    d = Dataset(y, X, tuple(names), squeeze=spec.squeeze)
    return d, IngestReport(n_read=len(df), n_dropped=len(dropped), dropped_rows=dropped)


def write_dataset(d: Dataset, path, response: str = "y") -> None:
    """Write a dataset to CSV at full precision (intercept column omitted)."""
    cols = {response: d.y}
    for j, name in enumerate(d.names):
        if name != INTERCEPT:
            cols[name] = d.X[:, j]
    pd.DataFrame(cols).to_csv(path, index=False, float_format="%.17g")


def condition_number(fit: BetaFit) -> float:
    """``sqrt(lambda_max / lambda_min)`` of X'WX; ``inf`` if not positive definite."""
    ev = np.linalg.eigvalsh(fit.xtwx)
    if ev[0] <= 0:
        log.warning("X'WX is rank deficient (smallest eigenvalue %.3g)", ev[0])
        return math.inf
    return float(np.sqrt(ev[-1] / ev[0]))


def aic_screen(d: Dataset, max_inactive: int | None = None, protect=(INTERCEPT,)) -> Restriction:
    """Backward elimination by AIC; returns the zero restriction on dropped columns.

    AIC counts phi as a parameter.  Columns named in ``protect`` are never
    dropped.
    """
    if d.n <= d.p:
        raise DomainError("AIC screening needs n > p")
    keep = list(range(d.p))
    dropped = []
    best = fit_mle(d).aic
    limit = d.p if max_inactive is None else max_inactive
    while len(dropped) < limit and len(keep) > 1:
        trial = []
        for j in keep:
            if d.names[j] in protect:
                continue
            cols = [c for c in keep if c != j]
            try:
                trial.append((fit_mle(d.select(cols)).aic, j))
            except SolverError:
                continue
        if not trial:
            break
        aic, j = min(trial)
        if aic >= best:
            break
        best = aic
        keep.remove(j)
        dropped.append(j)
    return Restriction.zero(d.p, dropped)


@dataclass
class CoefficientTable:
    """Coefficients and bootstrap SEs for every (variable, estimator)."""

    names: tuple
    coef: dict
    se: dict
    condition_number: float
    aic_full: float
    aic_restricted: float
    inactive: tuple
    k: float
    delta: float
    t_n: float
    bootstrap_used: int = 0
    bootstrap_failures: int = 0
    flagged: bool = False
    meta: dict = field(default_factory=dict)

    def estimators(self) -> list:
        return [e for e in ESTIMATORS if self.coef.get(e) is not None]

    def rows(self):
        for e in ESTIMATORS:
            c = self.coef.get(e)
            if c is None:
                continue
            s = self.se.get(e)
            for j, name in enumerate(self.names):
                yield name, e, float(c[j]), (float("nan") if s is None else float(s[j]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("variable,estimator,coef,se\n")
            for name, e, c, s in self.rows():
                fh.write(f"{name},{e},{c:.17g},{s:.17g}\n")

    def to_frame(self, decimals: int | None = None) -> pd.DataFrame:
        df = pd.DataFrame(list(self.rows()), columns=["variable", "estimator", "coef", "se"])
        return df.round(decimals) if decimals is not None else df

    def presentation(self) -> str:
        """Wide 4-decimal view: one block of coefficients, one of SEs."""
        df = self.to_frame()
        coef = df.pivot(index="variable", columns="estimator", values="coef")
        se = df.pivot(index="variable", columns="estimator", values="se")
        order = [e for e in ESTIMATORS if e in coef.columns]
        coef = coef.loc[list(self.names), order]
        se = se.loc[list(self.names), order]
        fmt = lambda v: f"{v:.4f}"  # noqa: E731
        return ("Coefficients\n" + coef.to_string(float_format=fmt)
                + "\n\nStandard errors\n" + se.to_string(float_format=fmt))


def _estimate(d: Dataset, r: Restriction, k, alpha, delta):
    fit = fit_mle(d)
    if not fit.converged:
        raise SolverError(f"Fisher scoring did not converge (score norm {fit.score_norm:.3g})")
    kk = estimate_k(fit) if k == "estimate" else float(k)
    return fit, build_estimators(fit, r, k=kk, alpha=alpha, delta=delta)


def bootstrap_se(d: Dataset, r: Restriction, B: int, seed: int = 0, k="estimate",
                 alpha: float = 0.05, delta=0.5, n_jobs: int = 1):
    """Case-resampling standard errors for every estimator.

    The restriction is held fixed.  Returns ``(se, used, failures)`` where
    ``se`` maps estimator name to a p-vector (``None`` if unavailable).
    """
    if B < 2:
        raise DomainError("bootstrap needs B >= 2")

    def one(b):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(b)]))
        idx = rng.integers(0, d.n, d.n)
        try:
            _, est = _estimate(d.take(idx), r, k, alpha, delta)
        except (SolverError, DomainError, np.linalg.LinAlgError):
            return None
        return est

    if n_jobs == 1:
        draws = [one(b) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            draws = list(pool.map(one, range(B)))
    ok = [e for e in draws if e is not None]
    failures = B - len(ok)
    if failures > BOOTSTRAP_FLAG * B:
        log.warning("%d of %d bootstrap resamples failed", failures, B)
    se = {}
    for name in ESTIMATORS:
        vals = [e.get(name) for e in ok if e.get(name) is not None]
        se[name] = np.std(np.stack(vals), axis=0, ddof=1) if len(vals) >= 2 else None
    return se, len(ok), failures


def restriction_for(d: Dataset, spec: AnalysisSpec) -> Restriction:
    if spec.inactive == "auto-aic":
        return aic_screen(d, spec.max_inactive)
    idx = [d.names.index(c) for c in spec.inactive]
    return Restriction.zero(d.p, idx)


def analyze(spec: AnalysisSpec, data: Dataset | None = None) -> CoefficientTable:
    """ingest -> fit -> diagnostics -> restriction -> estimators -> bootstrap."""
    stage = "ingest"
    try:
        report = None
        if data is None:
            data, report = ingest_csv(spec.data, spec)
        stage = "restriction"
        r = restriction_for(data, spec)
        stage = "fit"
        fit, est = _estimate(data, r, spec.k, spec.alpha, spec.delta)
        cn = condition_number(fit)
        inactive = tuple(data.names[j] for j in r.inactive())
        active = [j for j in range(data.p) if data.names[j] not in inactive]
        aic_r = fit_mle(data.select(active)).aic if inactive else fit.aic
        se, used, failures = ({name: None for name in ESTIMATORS}, 0, 0)
        if spec.bootstrap:
            stage = "bootstrap"
            se, used, failures = bootstrap_se(data, r, spec.bootstrap, spec.seed, spec.k,
                                              spec.alpha, spec.delta, spec.n_jobs)
    except StageError:
        raise
    except (DataError, DomainError, SolverError, FileNotFoundError, np.linalg.LinAlgError) as exc:
        raise StageError(stage, exc) from exc
    meta = {"phi": fit.phi, "iterations": fit.iterations}
    if report is not None:
        meta["dropped_rows"] = report.n_dropped
    return CoefficientTable(
        names=data.names, coef=est.as_dict(), se=se, condition_number=cn, aic_full=fit.aic,
        aic_restricted=aic_r, inactive=inactive, k=est.k, delta=est.delta, t_n=est.t_n,
        bootstrap_used=used, bootstrap_failures=failures,
        flagged=bool(spec.bootstrap) and failures > BOOTSTRAP_FLAG * spec.bootstrap, meta=meta,
    )
