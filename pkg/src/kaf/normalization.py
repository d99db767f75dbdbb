"""Markov normalizations of a base kernel, with out-of-sample extension.

Two normalizations are supported on top of a fitted base kernel:

* ``symmetric_markov`` — a bistochastic construction that composes two
  normalized copies of the kernel through an intermediate quadrature sum,
  yielding a kernel that is simultaneously symmetric and Markov.
* ``diffusion`` — the one-sided family parametrized by an exponent alpha;
  the result is row-stochastic but non-symmetric, and satisfies a detailed
  balance relation with density d = v / u^alpha, which is what the
  biorthogonal spectral path relies on.

All quadrature sums carry the 1/n weight of the empirical training measure,
so "Markov" concretely means that every row of the normalized matrix has
mean 1.  Out-of-sample rows are produced by the same formulas with the
training measure held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ValidationError
from .kernels import FittedKernel

MODES = ("none", "symmetric_markov", "diffusion")


def _require_kernel_matrix(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError("kernel matrix must be square")
    if not np.array_equal(K, K.T):
        raise ValidationError("kernel matrix must be symmetric")
    if not np.all(K > 0):
        raise ValidationError("kernel matrix must be entrywise positive")
    return K


def markov_normalize(K: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Bistochastic normalization of a symmetric positive kernel matrix.

    Returns (P, u, v) with u_i = mean_j K_ij, v_i = mean_j K_ij / u_j and

        P_ij = (1/n) sum_k K_ik K_kj / (u_i v_k u_j).

    P is symmetric and every row has mean exactly 1 in exact arithmetic.
    """
    K = _require_kernel_matrix(K)
    n = K.shape[0]
    u = K.mean(axis=1)
    v = (K / u[None, :]).mean(axis=1)
    B = K / (u[:, None] * np.sqrt(v)[None, :])
    P = (B @ B.T) / n
    P = 0.5 * (P + P.T)  # remove last-bit asymmetry from the matrix product
    return P, u, v


def diffusion_normalize(
    K: np.ndarray, alpha: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """One-sided (non-symmetric) normalization with density exponent alpha.

    Returns (P, u, v, d) with u_i = mean_j K_ij, v_i = mean_j K_ij / u_j^alpha,
    P_ij = K_ij / (v_i u_j^alpha), and the detailed-balance density
    d = v / u^alpha, satisfying d_i P_ij = d_j P_ji.
    """
    K = _require_kernel_matrix(K)
    u = K.mean(axis=1)
    ua = u**alpha
    v = (K / ua[None, :]).mean(axis=1)
    P = K / (v[:, None] * ua[None, :])
    d = v / ua
    return P, u, v, d


@dataclass
class NormalizedKernel:
    """A fitted base kernel together with its normalization state.

    Instances are logically immutable once fitted; the only mutation is an
    internal cache of the base kernel matrix, which is needed to evaluate
    out-of-sample rows in symmetric_markov mode and can be rebuilt from the
    training covariates at any time (e.g. after loading from disk).
    """

    mode: str
    base: FittedKernel
    alpha: Optional[float] = None
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None
    d: Optional[np.ndarray] = None
    _base_matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"unknown normalization mode {self.mode!r}")
        if self.mode == "diffusion" and self.alpha is None:
            raise ValidationError("diffusion mode requires alpha")

    @property
    def n(self) -> int:
        return self.base.n

    def base_matrix(self) -> np.ndarray:
        if self._base_matrix is None:
            self._base_matrix = self.base.matrix()
        return self._base_matrix

    def training_matrix(self) -> np.ndarray:
        """The normalized n x n matrix the spectral decomposition acts on."""
        if self.mode == "none":
            return self.base_matrix()
        if self.mode == "symmetric_markov":
            P, _, _ = markov_normalize(self.base_matrix())
            return P
        P, _, _, _ = diffusion_normalize(self.base_matrix(), self.alpha)
        return P

    def oos_rows(self, queries: np.ndarray) -> np.ndarray:
        """Normalized kernel rows for query points against the training set.

        The normalization functions at the query are evaluated with the
        same 1/n quadrature over the training points, so a query equal to a
        training point reproduces the corresponding training row.
        """
        kq = self.base.rows(queries)
        if self.mode == "none":
            return kq
        if self.mode == "symmetric_markov":
            K = self.base_matrix()
            n = self.n
            u_q = kq.mean(axis=1)
            A = kq / (u_q[:, None] * self.v[None, :])
            return (A @ K) / (n * self.u[None, :])
        ua = self.u**self.alpha
        v_q = (kq / ua[None, :]).mean(axis=1)
        return kq / (v_q[:, None] * ua[None, :])


def normalize_kernel(
    base: FittedKernel, mode: str, alpha: Optional[float] = None
) -> tuple[NormalizedKernel, np.ndarray]:
    """Fit the requested normalization; returns (handle, training matrix).

    The training matrix is returned separately so callers can release it
    after the spectral decomposition; the handle retains only what
    out-of-sample evaluation needs.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown normalization mode {mode!r}")
    K = base.matrix()
    if mode == "none":
        return NormalizedKernel(mode=mode, base=base, _base_matrix=K), K
    if mode == "symmetric_markov":
        P, u, v = markov_normalize(K)
        nk = NormalizedKernel(mode=mode, base=base, u=u, v=v, _base_matrix=K)
        return nk, P
    if alpha is None:
        raise ValidationError("diffusion mode requires alpha")
    P, u, v, d = diffusion_normalize(K, alpha)
    # diffusion rows only need u and v, so the base matrix is not retained
    nk = NormalizedKernel(mode=mode, base=base, alpha=float(alpha), u=u, v=v, d=d)
    return nk, P


def oos_normalized_row(nk: NormalizedKernel, x: np.ndarray) -> np.ndarray:
    """Single out-of-sample normalized kernel row (convenience wrapper)."""
    return nk.oos_rows(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
