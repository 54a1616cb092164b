import re

import numpy as np
import pytest

from betashrink.model import Dataset
from betashrink.simulation import SimConfig, gen_design, gen_response, rep_rng


def make_data(n=300, p1=3, p2=4, rho=0.5, phi=5.0, scale=0.5, seed=0, Delta=0.0):
    cfg = SimConfig(n=n, p1=p1, p2=p2, rho=rho, phi=phi)
    rng = rep_rng(seed, 0)
    X = gen_design(cfg, rng)
    beta = cfg.true_beta(Delta) * scale
    y = gen_response(X, beta, phi, rng)
    return Dataset(y, X), beta


@pytest.fixture
def small_data():
    return make_data()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------

ACCEPTANCE_LINES = {}


def record_criterion(key: str, status, detail: str = "") -> None:
    """Remember a criterion outcome for the end-of-session summary.

    ``status`` is a bool or one of the strings "PASS", "FAIL", "SKIP".
    """
    if isinstance(status, bool):
        status = "PASS" if status else "FAIL"
    ACCEPTANCE_LINES[key] = f"criterion {key}: {status}  {detail}".rstrip()


def _order(key):
    m = re.match(r"(\d+)(.*)", key)
    return int(m.group(1)), m.group(2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=_order):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
