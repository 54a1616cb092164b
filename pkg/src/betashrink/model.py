"""Beta regression with logit mean link and constant precision.

The response follows Beta(mu*phi, (1-mu)*phi) with ``logit(mu_i) = x_i'beta``.
Fitting is joint Fisher scoring on (beta, phi), with phi stepped on the
log scale and step-halving whenever the log-likelihood would drop.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit, gammaln

from ._backend import kernels
from .errors import DataError, DomainError, SolverError

log = logging.getLogger(__name__)

# eigenvalue ratio below which the joint information is treated as singular
SINGULAR_RCOND = 1e-13

#: Weight convention reported by the CLI: the diagonal of W.
W_CONVENTION = "w_i = phi*(trigamma(mu_i*phi) + trigamma((1-mu_i)*phi)) * (mu_i*(1-mu_i))**2"


@dataclass(frozen=True)
class Dataset:
    """Responses in the open unit interval plus an n x p design matrix.

    Arrays are copied and frozen on construction.  Pass ``squeeze=True``
    to map y onto ``(y*(n-1) + 0.5)/n`` before validation, which pulls
    exact 0/1 responses inside the interval.
    """

    y: np.ndarray
    X: np.ndarray
    names: tuple = ()
    squeeze: bool = False
    log_y: np.ndarray = field(init=False, repr=False, compare=False)
    log_1my: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64).ravel()
        X = np.array(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        n = y.size
        if n < 1 or X.shape[0] != n or X.shape[1] < 1:
            raise DataError(f"shape mismatch: y has {n} rows, X is {X.shape}")
        if self.squeeze:
            y = (y * (n - 1) + 0.5) / n
        bad = np.flatnonzero(~((y > 0) & (y < 1)))
        if bad.size:
            raise DomainError(
                f"responses must lie strictly inside (0, 1); offending rows: {bad[:10].tolist()}")
        if not np.all(np.isfinite(X)):
            raise DataError("design matrix contains non-finite values")
        names = tuple(self.names) if len(self.names) else tuple(f"x{j + 1}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} names for {X.shape[1]} columns")
        log_y = np.log(y)
        log_1my = np.log1p(-y)
        for a in (y, X, log_y, log_1my):
            a.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "log_y", log_y)
        object.__setattr__(self, "log_1my", log_1my)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows], self.names)

    def select(self, cols) -> "Dataset":
        cols = list(cols)
        return Dataset(self.y, self.X[:, cols], tuple(self.names[j] for j in cols))


@dataclass(frozen=True)
class FisherInfo:
    """Expected information blocks at (beta, phi).

    ``k_bb = phi X'WX`` is the information for beta with phi known.
    """

    k_bb: np.ndarray
    k_bphi: np.ndarray
    k_phiphi: float
    W: np.ndarray
    T: np.ndarray
    D: np.ndarray
    c: np.ndarray
    phi: float

    @property
    def xtwx(self) -> np.ndarray:
        return self.k_bb / self.phi

    def full(self) -> np.ndarray:
        """The (p+1) x (p+1) joint information matrix for (beta, phi)."""
        p = self.k_bb.shape[0]
        K = np.empty((p + 1, p + 1))
        K[:p, :p] = self.k_bb
        K[:p, p] = K[p, :p] = self.k_bphi
        K[p, p] = self.k_phiphi
        return K

    def profile_k_bb(self) -> np.ndarray:
        """Information for beta with phi estimated (Schur complement)."""
        return self.k_bb - np.outer(self.k_bphi, self.k_bphi) / self.k_phiphi


@dataclass
class BetaFit:
    beta: np.ndarray
    phi: float
    mu: np.ndarray
    info: FisherInfo
    loglik: float
    iterations: int
    converged: bool
    score_norm: float = np.nan
    trace: list = field(default_factory=list)
    names: tuple = ()

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def p(self) -> int:
        return self.beta.size

    @property
    def xtwx(self) -> np.ndarray:
        return self.info.xtwx

    @property
    def aic(self) -> float:
        # phi counts as one parameter
        return -2.0 * self.loglik + 2.0 * (self.p + 1)


def log_density(y, mu, phi):
    """Log of the Beta(mu*phi, (1-mu)*phi) density; vectorised."""
    y = np.asarray(y, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if not (np.all((y > 0) & (y < 1)) and np.all((mu > 0) & (mu < 1)) and phi > 0):
        raise DomainError("need 0 < y < 1, 0 < mu < 1 and phi > 0")
    a = mu * phi
    b = (1.0 - mu) * phi
    out = gammaln(phi) - gammaln(a) - gammaln(b) + (a - 1.0) * np.log(y) + (b - 1.0) * np.log1p(-y)
    return float(out) if out.ndim == 0 else out


def _check_phi(phi):
    if not phi > 0:
        raise DomainError(f"phi must be positive, got {phi!r}")


def log_likelihood(data: Dataset, beta, phi: float) -> float:
    _check_phi(phi)
    eta = data.X @ np.asarray(beta, dtype=np.float64)
    return kernels.beta_loglik(data.log_y, data.log_1my, np.ascontiguousarray(eta), float(phi))


def _terms(data, beta, phi):
    eta = np.ascontiguousarray(data.X @ beta)
    return kernels.beta_terms(data.log_y, data.log_1my, eta, float(phi))


def _info_from_terms(X, phi, mu, w, c, d):
    t = mu * (1.0 - mu)
    xtwx = X.T @ (w[:, None] * X)
    xtwx = 0.5 * (xtwx + xtwx.T)
    return FisherInfo(
        k_bb=phi * xtwx,
        k_bphi=X.T @ (t * c),
        k_phiphi=float(np.sum(d)),
        W=w,
        T=t,
        D=d,
        c=c,
        phi=float(phi),
    )


def score(data: Dataset, beta, phi: float):
    """Score vector ``(U_beta, U_phi)``."""
    _check_phi(phi)
    beta = np.asarray(beta, dtype=np.float64)
    _, uphi, mu, resid, *_ = _terms(data, beta, phi)
    return phi * (data.X.T @ (mu * (1.0 - mu) * resid)), uphi


def fisher_information(data: Dataset, beta, phi: float) -> FisherInfo:
    _check_phi(phi)
    beta = np.asarray(beta, dtype=np.float64)
    _, _, mu, _, w, c, d = _terms(data, beta, phi)
    return _info_from_terms(data.X, phi, mu, w, c, d)


def initial_values(data: Dataset):
    """OLS of logit(y) on X for beta; moment estimator for phi.

    Responses are squeezed towards 1/2 for the logit regression so that
    values near the boundary do not dominate the starting point.
    """
    n, p = data.X.shape
    ys = (data.y * (n - 1) + 0.5) / n
    z = np.log(ys) - np.log1p(-ys)
    beta0, *_ = np.linalg.lstsq(data.X, z, rcond=None)
    mu = expit(data.X @ beta0)
    phi0 = 1.0
    if n > p:
        # Var(y) = mu(1-mu)/(1+phi)
        s2 = np.sum((data.y - mu) ** 2) / (n - p)
        if s2 > 0:
            phi0 = float(np.mean(mu * (1.0 - mu)) / s2 - 1.0)
    if not np.isfinite(phi0) or phi0 <= 0.1:
        phi0 = 1.0
    return beta0, phi0


def fit_mle(data: Dataset, max_iter: int = 100, tol: float = 1e-8,
            beta0=None, phi0=None, max_halvings: int = 20) -> BetaFit:
    """Maximum likelihood by Fisher scoring.

    Iterates until the sup-norm of the joint score falls below ``tol``.
    Non-convergence is reported through ``BetaFit.converged``; a singular
    information matrix raises :class:`SolverError`.
    """
    X = data.X
    b_init, p_init = initial_values(data)
    beta = b_init if beta0 is None else np.asarray(beta0, dtype=np.float64).copy()
    phi = p_init if phi0 is None else float(phi0)
    ll, uphi, mu, resid, w, c, d = _terms(data, beta, phi)
    trace = [ll]
    converged = False
    it = 0
    while True:
        t = mu * (1.0 - mu)
        u = np.append(phi * (X.T @ (t * resid)), uphi)
        unorm = float(np.max(np.abs(u)))
        if unorm < tol:
            converged = True
            break
        if it >= max_iter:
            break
        info = _info_from_terms(X, phi, mu, w, c, d)
        K = info.full()
        ev = np.linalg.eigvalsh(K)
        if not ev[0] > SINGULAR_RCOND * ev[-1]:
            raise SolverError(
                "Fisher information is singular; the design is rank deficient. "
                "Use a ridge estimate instead of the plain MLE.")
        step = linalg.solve(K, u, assume_a="pos")
        if not np.all(np.isfinite(step)):
            raise SolverError("non-finite Fisher scoring step; consider a ridge path")
        it += 1
        scale = 1.0
        for _ in range(max_halvings + 1):
            b_new = beta + scale * step[:-1]
            phi_new = phi * np.exp(np.clip(scale * step[-1] / phi, -30.0, 30.0))
            ll_new = log_likelihood(data, b_new, phi_new)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            scale *= 0.5
        else:
            log.debug("step-halving exhausted at iteration %d", it)
            break
        beta, phi = b_new, float(phi_new)
        ll, uphi, mu, resid, w, c, d = _terms(data, beta, phi)
        trace.append(ll)
    info = _info_from_terms(X, phi, mu, w, c, d)
    return BetaFit(beta=beta, phi=phi, mu=mu, info=info, loglik=ll, iterations=it,
                   converged=converged, score_norm=unorm, trace=trace, names=data.names)
