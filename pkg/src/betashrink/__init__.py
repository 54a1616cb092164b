"""Ridge-type shrinkage estimators for beta regression."""
from ._backend import BACKEND
from .errors import DataError, DomainError, SolverError
from .estimators import (ESTIMATORS, EstimatorSet, Restriction, RidgeContext, build_estimators,
                         estimate_k, restricted_mle, ridge_restricted, ridge_unrestricted,
                         wald_statistic)
from .model import BetaFit, Dataset, FisherInfo, fisher_information, fit_mle, log_likelihood, score
from .special import NoncentralChi2, digamma, trigamma

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "BetaFit", "DataError", "Dataset", "DomainError", "ESTIMATORS", "EstimatorSet",
    "FisherInfo", "NoncentralChi2", "Restriction", "RidgeContext", "SolverError",
    "build_estimators", "digamma", "estimate_k", "fisher_information", "fit_mle",
    "log_likelihood", "restricted_mle", "ridge_restricted", "ridge_unrestricted", "score",
    "trigamma", "wald_statistic", "__version__",
]
