"""Spectral decompositions of normalized kernel matrices.

Eigenpairs are always those of the operator f -> (1/n) P f, i.e. of the
matrix P/n, with eigenvectors normalized so that phi_i . phi_j / n =
delta_ij.  Out-of-sample evaluation goes through kernel-weighted sums over
the training points (Nystrom extension), which reproduce the eigenvector
values at the training points themselves.

For non-symmetric (diffusion-normalized) kernels, eigenpairs are computed
through the symmetric conjugate matrix obtained from the detailed-balance
density, which keeps everything inside self-adjoint solvers and yields a
biorthonormal pair of bases instead of a single orthonormal one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import RankDeficiencyError, ValidationError
from .kernels import FittedKernel
from .normalization import NormalizedKernel, diffusion_normalize

# Eigenvalues at or below RANK_RTOL * lambda_1 are treated as numerically zero.
RANK_RTOL = 1e-12

# Query points are processed in blocks of this many rows to bound memory.
_CHUNK = 1024


def _fix_signs(phis: np.ndarray) -> np.ndarray:
    """Make the first nonzero component of each eigenvector positive."""
    for i in range(phis.shape[1]):
        col = phis[:, i]
        nz = np.nonzero(np.abs(col) > 1e-12 * np.max(np.abs(col)))[0]
        if len(nz) and col[nz[0]] < 0:
            phis[:, i] = -col
    return phis


def _top_eigh(P: np.ndarray, ell: int) -> tuple[np.ndarray, np.ndarray]:
    """Leading ell eigenpairs of symmetric P, in decreasing order."""
    n = P.shape[0]
    if ell < n:
        w, V = scipy.linalg.eigh(P, subset_by_index=[n - ell, n - 1])
    else:
        w, V = scipy.linalg.eigh(P)
    return w[::-1], V[:, ::-1]


@dataclass(frozen=True)
class SpectralBasis:
    """Leading eigenpairs of a normalized kernel operator.

    Attributes:
        lambdas: (ell,) eigenvalues of P/n, decreasing, all above the rank
            cutoff.
        phis: (n, ell) eigenvector values at the training points, normalized
            to phi_i . phi_j / n = delta_ij.
        kernel: handle used to evaluate out-of-sample kernel rows; may be
            None for bases built from a bare matrix (no out-of-sample use).
    """

    lambdas: np.ndarray
    phis: np.ndarray
    kernel: Optional[NormalizedKernel]

    @property
    def n(self) -> int:
        return self.phis.shape[0]

    @property
    def ell(self) -> int:
        return self.phis.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.lambdas

    @property
    def coefficient_vectors(self) -> np.ndarray:
        """Vectors the response is paired with when computing coefficients."""
        return self.phis

    def training_features(self) -> np.ndarray:
        """Values of the RKHS functions psi_i at the training points."""
        return self.phis * np.sqrt(self.lambdas)[None, :]

    def feature_matrix(self, queries: np.ndarray) -> np.ndarray:
        """Nystrom evaluation of all psi_i at query points; shape (m, ell).

        psi_i(x) = k_row(x) . phi_i / (n sqrt(lambda_i)).
        """
        if self.kernel is None:
            raise ValidationError("this basis has no kernel handle for out-of-sample use")
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty((Q.shape[0], self.ell), dtype=np.float64)
        scale = 1.0 / (self.n * np.sqrt(self.lambdas))
        for start in range(0, Q.shape[0], _CHUNK):
            block = Q[start : start + _CHUNK]
            rows = self.kernel.oos_rows(block)
            out[start : start + block.shape[0]] = (rows @ self.phis) * scale[None, :]
        return out

    def truncate(self, ell: int) -> "SpectralBasis":
        """Restrict to the leading ell eigenpairs (no recomputation)."""
        if not 1 <= ell <= self.ell:
            raise ValidationError(f"cannot truncate to ell={ell} from {self.ell}")
        return SpectralBasis(
            lambdas=self.lambdas[:ell], phis=self.phis[:, :ell], kernel=self.kernel
        )


def eigendecompose(
    P: np.ndarray,
    ell: int,
    kernel: Optional[NormalizedKernel] = None,
    rank_rtol: float = RANK_RTOL,
) -> SpectralBasis:
    """Leading ell eigenpairs of the operator represented by P under 1/n.

    Raises RankDeficiencyError if lambda_ell falls at or below
    rank_rtol * lambda_1 (or is nonpositive), reporting how many
    eigenvalues are usable.  Setting rank_rtol = 0 admits eigenvalues down
    to numerical noise, which deliberately exposes the sample-error blowup
    of very-high-order expansions; positivity is still enforced.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    if P.ndim != 2 or P.shape[1] != n:
        raise ValidationError("P must be a square matrix")
    if not 1 <= ell <= n:
        raise ValidationError(f"need 1 <= ell <= n, got ell={ell}, n={n}")
    w, V = _top_eigh(P, ell)
    lambdas = w / n
    if lambdas[0] <= 0.0:
        raise RankDeficiencyError(ell, 0)
    cutoff = rank_rtol * lambdas[0]
    if lambdas[ell - 1] <= cutoff:
        usable = int(np.sum(lambdas > cutoff))
        raise RankDeficiencyError(ell, usable)
    phis = _fix_signs(V * np.sqrt(n))
    return SpectralBasis(lambdas=lambdas, phis=phis, kernel=kernel)


def nystrom_psi(basis: SpectralBasis, x: np.ndarray) -> np.ndarray:
    """psi values at a single point x; returns an (ell,) vector."""
    return basis.feature_matrix(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]


@dataclass(frozen=True)
class BiorthogonalBasis:
    """Eigen-data for a diffusion-normalized (non-symmetric) kernel.

    etas are eigenvalues of the Markov operator; xis and xi_primes hold the
    right/left eigenvector values at the training points with
    xi'_i . xi_j / n = delta_ij; hat_phis are the orthonormal eigenvectors
    of the symmetric conjugate matrix from which both are derived.
    """

    etas: np.ndarray
    xis: np.ndarray
    xi_primes: np.ndarray
    d_values: np.ndarray
    hat_phis: np.ndarray
    kernel: Optional[NormalizedKernel]

    @property
    def n(self) -> int:
        return self.xis.shape[0]

    @property
    def ell(self) -> int:
        return self.xis.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.etas

    @property
    def coefficient_vectors(self) -> np.ndarray:
        return self.xi_primes

    def training_features(self) -> np.ndarray:
        """Values of the orthogonal RKHS functions theta_i at training points."""
        return self.xis * np.sqrt(self.etas)[None, :]

    def feature_matrix(self, queries: np.ndarray) -> np.ndarray:
        """theta_i(x) = w_row(x) . xi_i / (n sqrt(eta_i)); shape (m, ell)."""
        if self.kernel is None:
            raise ValidationError("this basis has no kernel handle for out-of-sample use")
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty((Q.shape[0], self.ell), dtype=np.float64)
        scale = 1.0 / (self.n * np.sqrt(self.etas))
        for start in range(0, Q.shape[0], _CHUNK):
            block = Q[start : start + _CHUNK]
            rows = self.kernel.oos_rows(block)
            out[start : start + block.shape[0]] = (rows @ self.xis) * scale[None, :]
        return out

    def truncate(self, ell: int) -> "BiorthogonalBasis":
        if not 1 <= ell <= self.ell:
            raise ValidationError(f"cannot truncate to ell={ell} from {self.ell}")
        return BiorthogonalBasis(
            etas=self.etas[:ell],
            xis=self.xis[:, :ell],
            xi_primes=self.xi_primes[:, :ell],
            d_values=self.d_values,
            hat_phis=self.hat_phis[:, :ell],
            kernel=self.kernel,
        )


def biorthogonal_decompose(
    base: FittedKernel,
    alpha: float,
    ell: int,
) -> BiorthogonalBasis:
    """Biorthonormal eigen-system of the diffusion-normalized kernel.

    Normalizes the base kernel with exponent alpha, conjugates the resulting
    Markov matrix into symmetric form with the square root of the
    detailed-balance density, and eigendecomposes that with a self-adjoint
    solver.  The right/left eigenvectors are recovered as
    xi = d^(-1/2) hat_phi and xi' = d^(1/2) hat_phi.
    """
    K = base.matrix()
    P, u, v, d = diffusion_normalize(K, alpha)
    sqrt_d = np.sqrt(d)
    K_hat = P * np.outer(sqrt_d, 1.0 / sqrt_d)
    K_hat = 0.5 * (K_hat + K_hat.T)
    sym = eigendecompose(K_hat, ell)
    hat_phis = sym.phis
    xis = hat_phis / sqrt_d[:, None]
    xi_primes = hat_phis * sqrt_d[:, None]
    nk = NormalizedKernel(mode="diffusion", base=base, alpha=float(alpha), u=u, v=v, d=d)
    return BiorthogonalBasis(
        etas=sym.lambdas,
        xis=xis,
        xi_primes=xi_primes,
        d_values=d,
        hat_phis=hat_phis,
        kernel=nk,
    )


def nystrom_nonsym(basis: BiorthogonalBasis, x: np.ndarray, coeffs: np.ndarray) -> float:
    """Evaluate sum_i coeffs_i / sqrt(eta_i) * theta_i(x) at a single point.

    ``coeffs`` holds the pairings of the target with the dual basis,
    coeffs_i = xi'_i . f / n.
    """
    theta = basis.feature_matrix(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0]
    return float(np.dot(np.asarray(coeffs) / np.sqrt(basis.etas), theta))
