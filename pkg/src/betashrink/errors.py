class DomainError(ValueError):
    """Argument outside the domain of a function or distribution."""


class SolverError(RuntimeError):
    """A linear system or iterative fit could not be solved."""


class DataError(ValueError):
    """Input data cannot be ingested (bad cells, boundary responses, missing columns)."""
