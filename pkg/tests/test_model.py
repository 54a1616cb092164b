import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from betashrink.errors import DataError, DomainError, SolverError
from betashrink.model import (Dataset, fisher_information, fit_mle, log_density, log_likelihood,
                              score)
from betashrink.special import trigamma

from betashrink.simulation import gen_response

from conftest import make_data


def test_log_density_matches_scipy():
    y = np.array([0.1, 0.5, 0.93])
    mu, phi = np.array([0.2, 0.5, 0.8]), 4.0
    ref = stats.beta.logpdf(y, mu * phi, (1 - mu) * phi)
    np.testing.assert_allclose(log_density(y, mu, phi), ref, rtol=1e-12)


def test_uniform_special_case():
    # mu = 1/2, phi = 2 is Beta(1, 1)
    assert log_density(0.37, 0.5, 2.0) == pytest.approx(0.0, abs=1e-14)


def test_log_likelihood_sums_density(small_data):
    d, beta = small_data
    mu = expit(d.X @ beta)
    assert log_likelihood(d, beta, 5.0) == pytest.approx(log_density(d.y, mu, 5.0).sum(), rel=1e-12)


def test_dataset_validation():
    X = np.ones((3, 1))
    with pytest.raises(DomainError, match="offending rows: \\[1\\]"):
        Dataset([0.2, 1.0, 0.3], X)
    with pytest.raises(DataError):
        Dataset([0.2, 0.3], X)
    d = Dataset([0.0, 1.0, 0.5], X, squeeze=True)
    assert np.all((d.y > 0) & (d.y < 1))
    with pytest.raises(ValueError):
        d.y[0] = 0.3


def _fd_grad(d, beta, phi, h=1e-6):
    g = np.zeros(beta.size + 1)
    for j in range(beta.size):
        e = np.zeros_like(beta)
        e[j] = h
        g[j] = (log_likelihood(d, beta + e, phi) - log_likelihood(d, beta - e, phi)) / (2 * h)
    g[-1] = (log_likelihood(d, beta, phi + h) - log_likelihood(d, beta, phi - h)) / (2 * h)
    return g


def test_score_matches_finite_differences(small_data, rng):
    d, beta = small_data
    for _ in range(5):
        b = beta + 0.3 * rng.standard_normal(beta.size)
        phi = rng.uniform(1, 20)
        ub, uphi = score(d, b, phi)
        g = _fd_grad(d, b, phi)
        np.testing.assert_allclose(np.append(ub, uphi), g, rtol=1e-5, atol=1e-6)


def test_fisher_information_is_expected_outer_product():
    # expected information equals E[U U'] at the truth; check by simulation
    d, beta = make_data(n=40, p1=2, p2=0, scale=0.4, seed=3)
    phi = 3.0
    info = fisher_information(d, beta, phi).full()
    rng = np.random.default_rng(0)
    mu = expit(d.X @ beta)
    U = []
    for _ in range(8000):
        y = gen_response(d.X, beta, phi, rng)
        ub, uphi = score(Dataset(y, d.X), beta, phi)
        U.append(np.append(ub, uphi))
    U = np.array(U)
    emp = U.T @ U / len(U)
    assert np.linalg.norm(emp - info) / np.linalg.norm(info) < 0.05


def test_weight_formula():
    d, beta = make_data(n=20, p1=2, p2=1, seed=1)
    phi = 2.5
    fi = fisher_information(d, beta, phi)
    mu = expit(d.X @ beta)
    w = phi * (trigamma(mu * phi) + trigamma((1 - mu) * phi)) * (mu * (1 - mu)) ** 2
    np.testing.assert_allclose(fi.W, w, rtol=1e-12)
    np.testing.assert_allclose(fi.k_bb, phi * d.X.T @ (w[:, None] * d.X), rtol=1e-12)


def test_fit_converges_and_score_is_small(small_data):
    d, beta = small_data
    fit = fit_mle(d)
    assert fit.converged
    ub, uphi = score(d, fit.beta, fit.phi)
    assert max(np.abs(ub).max(), abs(uphi)) < 1e-8
    assert np.all(np.diff(fit.trace) >= -1e-9 * abs(fit.trace[0]))
    assert fit.aic == pytest.approx(-2 * fit.loglik + 2 * (d.p + 1))


def test_fit_recovers_parameters():
    d, beta = make_data(n=5000, p1=3, p2=2, scale=0.5, seed=7)
    fit = fit_mle(d)
    se = np.sqrt(np.diag(np.linalg.inv(fit.info.full())))
    assert np.all(np.abs(np.append(fit.beta, fit.phi) - np.append(beta, 5.0)) < 4 * se)


def test_rank_deficient_design_raises():
    d, _ = make_data(n=50, p1=2, p2=0, seed=2)
    X = np.column_stack([d.X, d.X[:, 0]])
    with pytest.raises(SolverError, match="ridge"):
        fit_mle(Dataset(d.y, X))


def test_nonconvergence_is_flagged(small_data):
    d, _ = small_data
    fit = fit_mle(d, max_iter=1)
    assert not fit.converged
    assert fit.iterations == 1
