"""Exception types shared across the package."""


class KafError(Exception):
    """Base class for all errors raised by this package."""


class CsvFormatError(KafError, ValueError):
    """Malformed CSV input (bad header, unparseable row, wrong field count)."""


class SpacingError(KafError, ValueError):
    """Time column of a dataset is not uniformly spaced."""


class ValidationError(KafError, ValueError):
    """Data violates a structural invariant (empty, non-finite, mismatched)."""


class DivergenceError(KafError, RuntimeError):
    """Numerical integration produced a non-finite state."""


class DegenerateDataError(KafError, ValueError):
    """All data points coincide; bandwidth tuning is impossible."""


class TuningError(KafError, RuntimeError):
    """Automatic bandwidth tuning failed to find a usable scale."""


class RankDeficiencyError(KafError, ValueError):
    """Requested more eigenpairs than the matrix numerically supports.

    ``usable_rank`` reports how many eigenvalues lie above the cutoff.
    """

    def __init__(self, requested: int, usable_rank: int):
        self.requested = requested
        self.usable_rank = usable_rank
        super().__init__(
            f"requested {requested} eigenpairs but only {usable_rank} "
            f"eigenvalues are above the rank cutoff"
        )
