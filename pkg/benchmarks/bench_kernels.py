"""Compare the compiled and NumPy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--n 10000] [--repeat 7]

Times the per-observation beta terms, the log-likelihood, the polygamma
functions and a full Fisher-scoring fit under each backend, and checks
that both backends agree.
"""
import argparse
import timeit
from contextlib import contextmanager

import numpy as np

from betashrink import _kernels_py, model
from betashrink.model import Dataset, fit_mle
from betashrink.simulation import SimConfig, gen_design, gen_response, rep_rng

try:
    from betashrink import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


@contextmanager
def backend(mod):
    saved = model.kernels
    model.kernels = mod
    try:
        yield
    finally:
        model.kernels = saved


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--p", type=int, default=8)
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args(argv)

    cfg = SimConfig(n=args.n, p1=3, p2=args.p - 3, rho=0.9)
    rng = rep_rng(0)
    X = gen_design(cfg, rng)
    beta = cfg.true_beta(0.0) * 0.4
    d = Dataset(gen_response(X, beta, 5.0, rng), X)
    eta = np.ascontiguousarray(X @ beta)
    z = np.ascontiguousarray(rng.uniform(0.01, 50.0, args.n))

    backends = {"python": _kernels_py}
    if _kernels_c is not None:
        backends["cython"] = _kernels_c
    else:
        print("compiled extension not available; timing the NumPy backend only")

    cases = {
        "beta_terms": lambda k: (lambda: k.beta_terms(d.log_y, d.log_1my, eta, 5.0), 20),
        "beta_loglik": lambda k: (lambda: k.beta_loglik(d.log_y, d.log_1my, eta, 5.0), 20),
        "digamma": lambda k: (lambda: k.digamma(z), 20),
        "trigamma": lambda k: (lambda: k.trigamma(z), 20),
    }
    results = {}
    for name, make in cases.items():
        for label, k in backends.items():
            fn, number = make(k)
            results[name, label] = best_of(fn, args.repeat, number)
    for label, k in backends.items():
        with backend(k):
            results["fit_mle", label] = best_of(lambda: fit_mle(d), args.repeat, 1)

    print(f"n = {args.n}, p = {args.p}; best of {args.repeat} (milliseconds per call)")
    print(f"{'kernel':<12}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name in [*cases, "fit_mle"]:
        row = f"{name:<12}" + "".join(f"{1e3 * results[name, b]:>12.3f}" for b in backends)
        if len(backends) > 1:
            row += f"{results[name, 'python'] / results[name, 'cython']:>11.1f}x"
        print(row)

    if _kernels_c is not None:
        a = _kernels_py.beta_terms(d.log_y, d.log_1my, eta, 5.0)
        b = _kernels_c.beta_terms(d.log_y, d.log_1my, eta, 5.0)
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)) / (1 + np.abs(np.asarray(y)))))
                   for x, y in zip(a, b))
        with backend(_kernels_py):
            fp = fit_mle(d)
        with backend(_kernels_c):
            fc = fit_mle(d)
        print(f"max relative difference in beta_terms: {diff:.2e}; "
              f"fitted beta difference: {np.max(np.abs(fp.beta - fc.beta)):.2e}")


if __name__ == "__main__":
    main()
