"""Unnormalized kernel evaluation and automatic bandwidth selection.

Two kernel families are provided: the radial Gaussian kernel and a
variable-bandwidth Gaussian whose length scale shrinks in densely sampled
regions.  Bandwidths (and the effective data dimension used by the
variable-bandwidth construction) can be tuned automatically from the data
by maximizing the log-log slope of the pairwise kernel sum over a grid of
candidate scales.

Distances between delay-embedded covariates are averaged per delay block,
so a delay embedding changes the geometry only through the extra
coordinates, not through a trivial rescaling by the number of delays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import DegenerateDataError, TuningError, ValidationError

FAMILIES = ("gaussian", "variable_bandwidth")

# Tuning-grid defaults: 200 log-spaced candidate bandwidths over 16 decades.
TUNE_GRID_MIN = 1e-8
TUNE_GRID_MAX = 1e8
TUNE_GRID_SIZE = 200

# Above this sample count, tuning statistics use a strided subsample.
TUNE_SUBSAMPLE_THRESHOLD = 5000
TUNE_SUBSAMPLE_SIZE = 2000

_AUTO = "auto"


def _check_bandwidth(name: str, value: Union[float, str]):
    if isinstance(value, str):
        if value != _AUTO:
            raise ValidationError(f"{name} must be a positive number or 'auto'")
    elif not (float(value) > 0.0 and np.isfinite(value)):
        raise ValidationError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description; 'auto' fields are tuned at fit time.

    delays counts how many delay blocks the covariates contain (1 means the
    covariates are plain snapshots); it only affects the distance used.
    """

    family: str = "gaussian"
    epsilon: Union[float, str] = _AUTO
    epsilon_tilde: Union[float, str] = _AUTO
    m_tilde: Union[float, str] = _AUTO
    delays: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        _check_bandwidth("epsilon", self.epsilon)
        _check_bandwidth("epsilon_tilde", self.epsilon_tilde)
        if not isinstance(self.m_tilde, str):
            if not (float(self.m_tilde) > 0 and np.isfinite(self.m_tilde)):
                raise ValidationError(f"m_tilde must be positive, got {self.m_tilde}")
        elif self.m_tilde != _AUTO:
            raise ValidationError("m_tilde must be a positive number or 'auto'")
        if int(self.delays) < 1:
            raise ValidationError(f"delays must be >= 1, got {self.delays}")
        object.__setattr__(self, "delays", int(self.delays))

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "epsilon": self.epsilon,
            "epsilon_tilde": self.epsilon_tilde,
            "m_tilde": self.m_tilde,
            "delays": self.delays,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


@dataclass(frozen=True)
class BandwidthInfo:
    """Resolved bandwidth data for a variable-bandwidth kernel fit."""

    r_values: np.ndarray
    epsilon: Optional[float]
    epsilon_tilde: float
    m_tilde: float

    def __post_init__(self):
        r = np.asarray(self.r_values, dtype=np.float64)
        if not np.all(r > 0):
            raise ValidationError("bandwidth function must be strictly positive")
        r.setflags(write=False)
        object.__setattr__(self, "r_values", r)


def gaussian_eval(epsilon: float, x, xp) -> float:
    """Radial Gaussian kernel exp(-||x - x'||^2 / epsilon) for two vectors."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=np.float64).ravel()
    xp = np.asarray(xp, dtype=np.float64).ravel()
    if x.shape != xp.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {xp.shape}")
    return float(np.exp(-np.sum((x - xp) ** 2) / epsilon))


def vb_eval(epsilon: float, r_x: float, r_xp: float, x, xp) -> float:
    """Variable-bandwidth kernel exp(-||x - x'||^2 / (epsilon r(x) r(x')))."""
    if not epsilon > 0:
        raise ValidationError(f"epsilon must be positive, got {epsilon}")
    if not (r_x > 0 and r_xp > 0):
        raise ValidationError("bandwidth values must be positive")
    x = np.asarray(x, dtype=np.float64).ravel()
    xp = np.asarray(xp, dtype=np.float64).ravel()
    if x.shape != xp.shape:
        raise ValidationError(f"dimension mismatch: {x.shape} vs {xp.shape}")
    return float(np.exp(-np.sum((x - xp) ** 2) / (epsilon * r_x * r_xp)))


def pairwise_sq_dists(covariates: np.ndarray, delays: int = 1) -> np.ndarray:
    """Symmetric matrix of squared distances, averaged over delay blocks."""
    X = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    D = squareform(pdist(X, metric="sqeuclidean"))
    if delays > 1:
        D /= delays
    return D


def cross_sq_dists(queries: np.ndarray, covariates: np.ndarray, delays: int = 1) -> np.ndarray:
    """Squared distances from query points to training points (rows x cols)."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    X = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    if Q.shape[1] != X.shape[1]:
        raise ValidationError(
            f"query dimension {Q.shape[1]} does not match training dimension {X.shape[1]}"
        )
    D = cdist(Q, X, metric="sqeuclidean")
    if delays > 1:
        D /= delays
    return D


def density_estimate(
    covariates: np.ndarray,
    epsilon_tilde: float,
    m_tilde: float,
    x,
    sq_dists: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Gaussian kernel density estimate at x against the training points.

    q(x) = (pi * eps_tilde)^(-m_tilde/2) * mean_j exp(-||x - x_j||^2 / eps_tilde)

    ``sq_dists`` may carry precomputed (possibly delay-averaged) squared
    distances of shape (n_queries, n).
    """
    if not (epsilon_tilde > 0 and m_tilde > 0):
        raise ValidationError("epsilon_tilde and m_tilde must be positive")
    if sq_dists is None:
        sq_dists = cross_sq_dists(np.atleast_2d(x), covariates)
    pref = (np.pi * epsilon_tilde) ** (-m_tilde / 2.0)
    q = pref * np.mean(np.exp(-sq_dists / epsilon_tilde), axis=-1)
    return q


def default_tuning_grid() -> np.ndarray:
    return np.logspace(
        np.log10(TUNE_GRID_MIN), np.log10(TUNE_GRID_MAX), TUNE_GRID_SIZE
    )


def tune_bandwidth(
    sq_dists: np.ndarray,
    grid: Optional[np.ndarray] = None,
) -> tuple[float, float]:
    """Select a bandwidth and dimension estimate from pairwise distances.

    Evaluates S(eps) = mean of exp(-d^2/eps) over all ordered pairs
    (diagonal included) and returns the grid point maximizing the centered
    log-log slope of S, together with m_tilde = 2 * (slope at the maximum).
    The slope of S near its inflection scales like dim/2 for data sampled
    from a dim-dimensional set, which is what makes the second return value
    a dimension estimate.
    """
    D = np.asarray(sq_dists, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError("sq_dists must be a square matrix")
    n = D.shape[0]
    if n < 2:
        raise DegenerateDataError("need at least 2 points to tune a bandwidth")
    if grid is None:
        grid = default_tuning_grid()
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) < 3:
        raise ValidationError("tuning grid needs at least 3 points")
    if np.max(grid) / np.min(grid) < 1e4:
        raise ValidationError("tuning grid must span at least 4 decades")

    iu = np.triu_indices(n, k=1)
    d_off = D[iu]
    if np.max(d_off) == 0.0:
        raise DegenerateDataError("all data points are identical")

    # S(eps) on the condensed distances; the n diagonal zeros contribute n.
    log_s = np.empty(len(grid))
    for k, eps in enumerate(grid):
        s = (n + 2.0 * np.sum(np.exp(-d_off / eps))) / (n * n)
        log_s[k] = np.log(s)
    log_eps = np.log(grid)
    slopes = (log_s[2:] - log_s[:-2]) / (log_eps[2:] - log_eps[:-2])
    best = int(np.argmax(slopes))
    max_slope = float(slopes[best])
    if max_slope < 1e-3:
        raise TuningError("kernel sum is flat over the whole grid; tuning failed")
    epsilon = float(grid[best + 1])  # centered slope index offset
    return epsilon, 2.0 * max_slope


def bandwidth_function(
    covariates: np.ndarray,
    epsilon_tilde: float,
    m_tilde: float,
    sq_dists: Optional[np.ndarray] = None,
    epsilon: Optional[float] = None,
) -> BandwidthInfo:
    """Per-point bandwidths r_j = q(x_j)^(-1/m_tilde) from a density estimate.

    Densely sampled regions get small bandwidths.
    """
    X = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    if sq_dists is None:
        sq_dists = pairwise_sq_dists(X)
    q = density_estimate(X, epsilon_tilde, m_tilde, X, sq_dists=sq_dists)
    r = q ** (-1.0 / m_tilde)
    return BandwidthInfo(
        r_values=r, epsilon=epsilon, epsilon_tilde=epsilon_tilde, m_tilde=m_tilde
    )


def _tuning_subsample(n: int) -> Optional[np.ndarray]:
    if n <= TUNE_SUBSAMPLE_THRESHOLD:
        return None
    idx = np.unique(np.round(np.linspace(0, n - 1, TUNE_SUBSAMPLE_SIZE)).astype(int))
    return idx


@dataclass(frozen=True)
class FittedKernel:
    """A kernel spec resolved against a fixed set of training covariates.

    Provides the training kernel matrix and out-of-sample kernel rows that
    are consistent with it.
    """

    spec: KernelSpec
    covariates: np.ndarray
    epsilon: float
    bandwidth: Optional[BandwidthInfo]  # None for the plain Gaussian family

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.covariates, dtype=np.float64))
        X.setflags(write=False)
        object.__setattr__(self, "covariates", X)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    def matrix(self) -> np.ndarray:
        """Training kernel matrix: symmetric, unit diagonal, entries in (0, 1]."""
        D = pairwise_sq_dists(self.covariates, self.spec.delays)
        if self.bandwidth is not None:
            r = self.bandwidth.r_values
            D /= np.outer(r, r)
        np.exp(-D / self.epsilon, out=D)
        return D

    def rows(self, queries: np.ndarray) -> np.ndarray:
        """Kernel values of query points against the training set.

        Evaluating at a training point reproduces the corresponding matrix
        row.
        """
        D = cross_sq_dists(queries, self.covariates, self.spec.delays)
        if self.bandwidth is not None:
            info = self.bandwidth
            q = density_estimate(
                self.covariates, info.epsilon_tilde, info.m_tilde, None, sq_dists=D
            )
            r_query = q ** (-1.0 / info.m_tilde)
            D /= np.outer(r_query, info.r_values)
        return np.exp(-D / self.epsilon)

    def resolved_spec(self) -> KernelSpec:
        """The spec with every 'auto' entry replaced by its tuned value."""
        if self.bandwidth is None:
            return KernelSpec(
                family=self.spec.family,
                epsilon=self.epsilon,
                epsilon_tilde=self.spec.epsilon_tilde,
                m_tilde=self.spec.m_tilde,
                delays=self.spec.delays,
            )
        return KernelSpec(
            family=self.spec.family,
            epsilon=self.epsilon,
            epsilon_tilde=self.bandwidth.epsilon_tilde,
            m_tilde=self.bandwidth.m_tilde,
            delays=self.spec.delays,
        )


def fit_kernel(spec: KernelSpec, covariates: np.ndarray) -> FittedKernel:
    """Resolve 'auto' bandwidth parameters against data and return the fit.

    For the variable-bandwidth family the density bandwidth and dimension
    are tuned first on plain distances, then the kernel bandwidth is tuned
    on the r-scaled distances.
    """
    X = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    n = X.shape[0]
    D = pairwise_sq_dists(X, spec.delays)
    sub = _tuning_subsample(n)

    def tuning_view(M):
        return M if sub is None else M[np.ix_(sub, sub)]

    if spec.family == "gaussian":
        if spec.epsilon == _AUTO:
            epsilon, _ = tune_bandwidth(tuning_view(D))
        else:
            epsilon = float(spec.epsilon)
        return FittedKernel(spec=spec, covariates=X, epsilon=epsilon, bandwidth=None)

    # variable bandwidth: resolve the density estimate first
    if spec.epsilon_tilde == _AUTO or spec.m_tilde == _AUTO:
        eps_t, m_t = tune_bandwidth(tuning_view(D))
        epsilon_tilde = eps_t if spec.epsilon_tilde == _AUTO else float(spec.epsilon_tilde)
        m_tilde = m_t if spec.m_tilde == _AUTO else float(spec.m_tilde)
    else:
        epsilon_tilde = float(spec.epsilon_tilde)
        m_tilde = float(spec.m_tilde)

    info = bandwidth_function(X, epsilon_tilde, m_tilde, sq_dists=D)
    r = info.r_values
    if spec.epsilon == _AUTO:
        D_scaled = tuning_view(D).copy()
        r_sub = r if sub is None else r[sub]
        D_scaled /= np.outer(r_sub, r_sub)
        epsilon, _ = tune_bandwidth(D_scaled)
    else:
        epsilon = float(spec.epsilon)
    info = BandwidthInfo(
        r_values=r, epsilon=epsilon, epsilon_tilde=epsilon_tilde, m_tilde=m_tilde
    )
    return FittedKernel(spec=spec, covariates=X, epsilon=epsilon, bandwidth=info)


def kernel_matrix(spec: KernelSpec, covariates: np.ndarray) -> np.ndarray:
    """Kernel matrix for a spec (tuning any 'auto' parameters first)."""
    return fit_kernel(spec, covariates).matrix()
