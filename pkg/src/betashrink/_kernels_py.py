"""Pure NumPy twin of the compiled kernels in ``_kernels.pyx``.

Same algorithms (recurrence shift to x >= 10, then the asymptotic
series), vectorised over the observation axis instead of looped.
"""
import numpy as np
from scipy.special import gammaln

_SHIFT = 10.0

# |coefficients| of the alternating asymptotic expansions, lowest order first.
_DIGAMMA_COEF = (1 / 12, 1 / 120, 1 / 252, 1 / 240, 1 / 132, 691 / 32760, 1 / 12)
_TRIGAMMA_COEF = (1 / 6, 1 / 30, 1 / 42, 1 / 30, 5 / 66, 691 / 2730, 7 / 6)


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _add_inv_square(x, s):
    """s + 1/x**2 with the large term carried in double-double."""
    r = 1.0 / x
    p, err = _two_prod(r, x)
    e1 = ((1.0 - p) - err) / x
    hi, lo = _two_prod(r, r)
    return hi + ((lo + 2.0 * r * e1) + s)


def _shift_count(x):
    return np.where(x < _SHIFT, np.ceil(_SHIFT - x), 0.0).astype(np.int64)


def digamma(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    ok = x > 0
    z = x[ok].copy()
    acc = np.zeros_like(z)
    for _ in range(int(_shift_count(z).max(initial=0))):
        small = z < _SHIFT
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
    inv2 = 1.0 / (z * z)
    poly = np.zeros_like(z)
    for c in reversed(_DIGAMMA_COEF):
        poly = c - inv2 * poly
    out[ok] = acc + np.log(z) - 0.5 / z - inv2 * poly
    return out


def trigamma(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.full(x.shape, np.nan)
    ok = x > 0
    xs = x[ok]
    n = _shift_count(xs)
    z = xs + n
    inv = 1.0 / z
    inv2 = inv * inv
    poly = np.zeros_like(z)
    for c in reversed(_TRIGAMMA_COEF):
        poly = c - inv2 * poly
    series = inv + 0.5 * inv2 + inv * inv2 * poly
    for j in range(int(n.max(initial=0)) - 1, 0, -1):
        take = n > j
        series[take] += 1.0 / (xs[take] + j) ** 2
    take = n > 0
    series[take] = _add_inv_square(xs[take], series[take])
    out[ok] = series
    return out


def _logistic_pair(eta):
    e = np.exp(-np.abs(eta))
    big = 1.0 / (1.0 + e)
    small = e * big
    pos = eta >= 0
    return np.where(pos, big, small), np.where(pos, small, big)


def beta_terms(log_y, log_1my, eta, phi):
    mu, q = _logistic_pair(np.asarray(eta, dtype=np.float64))
    a = mu * phi
    b = q * phi
    pa, pb = digamma(a), digamma(b)
    ta, tb = trigamma(a), trigamma(b)
    psi_phi = digamma(np.array([phi]))[0]
    tri_phi = trigamma(np.array([phi]))[0]
    t = mu * q
    ll = np.sum(gammaln(phi) - gammaln(a) - gammaln(b) + (a - 1.0) * log_y + (b - 1.0) * log_1my)
    resid = (log_y - log_1my) - (pa - pb)
    uphi = np.sum(mu * resid + log_1my - pb + psi_phi)
    w = phi * (ta + tb) * t * t
    c = phi * (ta * mu - tb * q)
    d = ta * mu * mu + tb * q * q - tri_phi
    return float(ll), float(uphi), mu, resid, w, c, d


def beta_loglik(log_y, log_1my, eta, phi):
    mu, q = _logistic_pair(np.asarray(eta, dtype=np.float64))
    a = mu * phi
    b = q * phi
    return float(np.sum(gammaln(phi) - gammaln(a) - gammaln(b)
                        + (a - 1.0) * log_y + (b - 1.0) * log_1my))
