"""Time-ordered covariate/response datasets and shift-based transforms.

A dataset holds n covariate vectors (n x m) and n scalar responses sampled
at a fixed interval dt.  Forecast targets are built by shifting the response
sequence forward by q steps and zero-padding the tail, which represents the
action of the finite-sample shift operator on the response.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import CsvFormatError, SpacingError, ValidationError

# Relative tolerance on |t[j+1]-t[j] - dt| when validating uniform sampling.
SPACING_RTOL = 1e-9


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Immutable container for time-ordered training or verification data.

    Attributes:
        covariates: float array of shape (n, m).
        responses: float array of shape (n,).
        dt: sampling interval, > 0.
    """

    covariates: np.ndarray
    responses: np.ndarray
    dt: float

    def __post_init__(self):
        cov = np.atleast_2d(np.asarray(self.covariates, dtype=np.float64))
        resp = np.asarray(self.responses, dtype=np.float64).ravel()
        if cov.ndim != 2:
            raise ValidationError("covariates must be a 2-D array (n, m)")
        if cov.shape[0] != resp.shape[0]:
            raise ValidationError(
                f"covariates ({cov.shape[0]}) and responses ({resp.shape[0]}) "
                "must have equal length"
            )
        if cov.shape[0] < 1:
            raise ValidationError("dataset must contain at least one sample")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(resp)):
            raise ValidationError("dataset contains non-finite entries")
        if not (float(self.dt) > 0.0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        cov.setflags(write=False)
        resp.setflags(write=False)
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "responses", resp)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def covariate_dim(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class AnalogVector:
    """Response sequence shifted forward by q steps with a zero-padded tail.

    values[j] = transform(y[j+q]) for j+q < n (0-based), and 0 otherwise.
    """

    values: np.ndarray
    q: int
    tau: float


def analog_vector(
    ds: TimeSeriesDataset,
    q: int,
    gamma: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> AnalogVector:
    """Build the shifted, zero-padded response vector for lead q steps.

    ``gamma`` is applied element-wise to the shifted responses (identity by
    default).  The zero padding is part of the shift-operator convention and
    is not a statement about unobserved ground truth.
    """
    if not 0 <= q <= ds.n:
        raise ValidationError(f"shift q={q} must satisfy 0 <= q <= n={ds.n}")
    values = np.zeros(ds.n, dtype=np.float64)
    shifted = ds.responses[q:]
    if gamma is not None:
        shifted = np.asarray(gamma(shifted), dtype=np.float64)
    values[: ds.n - q] = shifted
    return AnalogVector(values=values, q=q, tau=q * ds.dt)


def delay_embed(ds: TimeSeriesDataset, q_delays: int) -> TimeSeriesDataset:
    """Concatenate q_delays backward-looking covariate snapshots.

    Sample j of the result has covariate (x_j, x_{j-1}, ..., x_{j-q+1}) and
    keeps the response at index j (the most recent time in the window), so
    the embedded dataset has n - q_delays + 1 samples of dimension
    m * q_delays.
    """
    if q_delays < 1:
        raise ValidationError(f"q_delays must be >= 1, got {q_delays}")
    if q_delays > ds.n:
        raise ValidationError(
            f"q_delays={q_delays} exceeds the number of samples n={ds.n}"
        )
    if q_delays == 1:
        return ds
    n_out = ds.n - q_delays + 1
    blocks = [ds.covariates[q_delays - 1 - k : ds.n - k] for k in range(q_delays)]
    embedded = np.concatenate(blocks, axis=1)
    return TimeSeriesDataset(
        covariates=embedded,
        responses=ds.responses[q_delays - 1 :],
        dt=ds.dt,
    )


def empirical_moments(ds: TimeSeriesDataset) -> tuple[float, float]:
    """Return (mean, population std) of the responses under the 1/n weight."""
    mean = float(np.mean(ds.responses))
    std = float(np.sqrt(np.mean((ds.responses - mean) ** 2)))
    return mean, std


def load_csv(
    path: Union[str, Path],
    covariate_dim: Optional[int] = None,
) -> TimeSeriesDataset:
    """Load a dataset from a ``t,x1,...,xm,y`` CSV file.

    The time column is used only to infer dt (from the first two rows) and
    to validate uniform spacing; it is not stored.  If ``covariate_dim`` is
    given, the file's column count must match it.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if len(cols) < 3 or cols[0] != "t" or cols[-1] != "y":
            raise CsvFormatError(
                f"{path}: expected header 't,x1,...,xm,y', got {header!r}"
            )
        m = len(cols) - 2
        expected = ["t"] + [f"x{i}" for i in range(1, m + 1)] + ["y"]
        if cols != expected:
            raise CsvFormatError(
                f"{path}: expected header {','.join(expected)!r}, got {header!r}"
            )
        if covariate_dim is not None and m != covariate_dim:
            raise ValidationError(
                f"{path}: file has covariate dimension {m}, expected {covariate_dim}"
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != m + 2:
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {m + 2} fields, got {len(fields)}"
                )
            try:
                rows.append([float(v) for v in fields])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None

    if not rows:
        raise ValidationError(f"{path}: no data rows (need n >= 1)")
    data = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        bad = int(np.argwhere(~np.isfinite(data))[0, 0])
        raise ValidationError(f"{path}: non-finite value in data row {bad + 1}")

    t = data[:, 0]
    if len(t) >= 2:
        dt = t[1] - t[0]
        if dt <= 0:
            raise SpacingError(f"{path}: time column must be strictly increasing")
        gaps = np.diff(t)
        worst = int(np.argmax(np.abs(gaps - dt)))
        if abs(gaps[worst] - dt) > SPACING_RTOL * abs(dt):
            raise SpacingError(
                f"{path}: non-uniform spacing at row {worst + 3}: "
                f"gap {gaps[worst]!r} vs dt {dt!r}"
            )
    else:
        dt = 1.0  # single sample: dt is arbitrary but must be positive
    return TimeSeriesDataset(covariates=data[:, 1:-1], responses=data[:, -1], dt=float(dt))


def save_csv(ds: TimeSeriesDataset, path: Union[str, Path]) -> None:
    """Write a dataset in the ``t,x1,...,xm,y`` format read by load_csv.

    Floats are written with shortest round-trip formatting, so writing and
    re-reading is lossless and byte-deterministic on one platform.
    """
    path = Path(path)
    m = ds.covariate_dim
    header = "t," + ",".join(f"x{i}" for i in range(1, m + 1)) + ",y"
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for j in range(ds.n):
            t = j * ds.dt
            fields = [repr(float(t))]
            fields += [repr(float(v)) for v in ds.covariates[j]]
            fields.append(repr(float(ds.responses[j])))
            fh.write(",".join(fields) + "\n")
