"""Forecast model fitting and evaluation of the regression estimators.

The principal-component estimator expands the shifted response in the
kernel eigenbasis: for each lead of q steps the coefficients are
alpha_i = phi_i . y_q / n with y_q the zero-padded shifted response, and
the forecast at a point x is sum_i alpha_i / sqrt(lambda_i) * psi_i(x).

The ridge estimator solves (K/n + eta I) c = y_q and evaluates
k_row(x) . c / n; with this shared 1/n quadrature the ridge, hybrid, and
principal-component forecasts agree at full rank (eta -> 0), and at q = 0
they interpolate the training responses.

Conditional variance is estimated by running the same expansion on the
squared in-sample residuals; conditional probability by applying an
indicator transform to the response before shifting and clipping the
resulting forecast to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .dataset import TimeSeriesDataset, analog_vector
from .errors import ValidationError
from .normalization import NormalizedKernel
from .spectral import BiorthogonalBasis, SpectralBasis

Basis = Union[SpectralBasis, BiorthogonalBasis]


@dataclass(frozen=True)
class ResponseTransform:
    """Element-wise response transform: identity or threshold indicator."""

    kind: str = "identity"
    theta: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("identity", "indicator"):
            raise ValidationError(f"unknown transform kind {self.kind!r}")
        if self.kind == "indicator" and self.theta is None:
            raise ValidationError("indicator transform requires a threshold")

    def __call__(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        if self.kind == "identity":
            return values
        return (values > self.theta).astype(np.float64)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "theta": self.theta}

    @classmethod
    def from_dict(cls, d: dict) -> "ResponseTransform":
        return cls(kind=d["kind"], theta=d["theta"])


IDENTITY = ResponseTransform("identity")


def indicator(theta: float) -> ResponseTransform:
    return ResponseTransform("indicator", float(theta))


@dataclass(frozen=True)
class ForecastModel:
    """A spectral basis plus per-lead expansion coefficients.

    alphas has shape (n_leads, ell); variance_alphas, when present, holds
    the coefficients of the squared-residual expansion used for error
    estimation, with the same shape.
    """

    basis: Basis
    leads: tuple
    alphas: np.ndarray
    transform: ResponseTransform
    response_mean: float
    response_std: float
    dt: float
    variance_alphas: Optional[np.ndarray] = None

    @property
    def lead_times(self) -> np.ndarray:
        return np.asarray(self.leads, dtype=np.float64) * self.dt

    def lead_index(self, q: int) -> int:
        try:
            return self.leads.index(q)
        except ValueError:
            raise ValidationError(f"lead q={q} not in model leads {self.leads}") from None


def fit_kpcr(
    basis: Basis,
    ds: TimeSeriesDataset,
    leads: Sequence[int],
    transform: ResponseTransform = IDENTITY,
) -> ForecastModel:
    """Fit per-lead expansion coefficients alpha_i = phi_i . y_q / n."""
    if basis.n != ds.n:
        raise ValidationError(
            f"basis was built from {basis.n} samples but dataset has {ds.n}"
        )
    leads = tuple(int(q) for q in leads)
    if not leads:
        raise ValidationError("need at least one lead")
    if min(leads) < 0 or max(leads) > ds.n:
        raise ValidationError(f"leads must lie in [0, n={ds.n}], got {leads}")
    C = basis.coefficient_vectors
    alphas = np.empty((len(leads), basis.ell), dtype=np.float64)
    for k, q in enumerate(leads):
        y_q = analog_vector(ds, q, transform).values
        alphas[k] = C.T @ y_q / ds.n
    transformed = transform(ds.responses)
    mean = float(np.mean(transformed))
    std = float(np.sqrt(np.mean((transformed - mean) ** 2)))
    return ForecastModel(
        basis=basis,
        leads=leads,
        alphas=alphas,
        transform=transform,
        response_mean=mean,
        response_std=std,
        dt=ds.dt,
    )


def _as_query(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim <= 1
    return np.atleast_2d(x), scalar


def predict_kpcr(model: ForecastModel, x, lead_index: int = 0):
    """Principal-component forecast at covariate(s) x for one stored lead."""
    Q, scalar = _as_query(x)
    psi = model.basis.feature_matrix(Q)
    weights = model.alphas[lead_index] / np.sqrt(model.basis.eigenvalues)
    out = psi @ weights
    return float(out[0]) if scalar else out


def predict_hybrid(model: ForecastModel, x, lead_index: int = 0, eta: float = 0.0):
    """Low-rank ridge forecast: eigenvalues shifted by eta before inversion.

    Reduces to predict_kpcr at eta = 0 and decays to 0 as eta grows.
    """
    if eta < 0:
        raise ValidationError(f"eta must be >= 0, got {eta}")
    Q, scalar = _as_query(x)
    lam = model.basis.eigenvalues
    psi = model.basis.feature_matrix(Q)
    weights = model.alphas[lead_index] * np.sqrt(lam) / (lam + eta)
    out = psi @ weights
    return float(out[0]) if scalar else out


def fit_predict_krr(
    nk: NormalizedKernel,
    ds: TimeSeriesDataset,
    q: int,
    eta: float,
    x,
    transform: ResponseTransform = IDENTITY,
):
    """Kernel ridge regression forecast, sharing this package's quadrature.

    Solves (K/n + eta I) c = y_q against the normalized training matrix and
    returns k_row(x) . c / n.
    """
    if not eta > 0:
        raise ValidationError(f"ridge parameter eta must be positive, got {eta}")
    if nk.n != ds.n:
        raise ValidationError("kernel and dataset sample counts differ")
    n = ds.n
    G = nk.training_matrix() / n
    G[np.diag_indices(n)] += eta
    y_q = analog_vector(ds, q, transform).values
    c = scipy.linalg.solve(G, y_q, assume_a="pos")
    Q, scalar = _as_query(x)
    out = nk.oos_rows(Q) @ c / n
    return float(out[0]) if scalar else out


def conditional_variance(model: ForecastModel, ds: TimeSeriesDataset) -> ForecastModel:
    """Return a copy of the model carrying squared-residual coefficients.

    For each lead q the in-sample forecast errors |y_{j+q} - f(x_j)|^2
    (zero-padded past n - q, like the shifted response itself) are expanded
    in the same basis; predict_error turns that expansion into a pointwise
    error estimate.
    """
    if model.transform.kind != "identity":
        raise ValidationError("conditional variance requires an identity-transform model")
    if model.basis.n != ds.n:
        raise ValidationError("dataset does not match the model's training size")
    n = ds.n
    feats = model.basis.training_features()  # psi_i(x_j); in-sample forecast = feats @ w
    C = model.basis.coefficient_vectors
    lam = model.basis.eigenvalues
    variance_alphas = np.empty_like(model.alphas)
    for k, q in enumerate(model.leads):
        f_in = feats @ (model.alphas[k] / np.sqrt(lam))
        beta = np.zeros(n, dtype=np.float64)
        beta[: n - q] = (ds.responses[q:] - f_in[: n - q]) ** 2
        variance_alphas[k] = C.T @ beta / n
    return replace(model, variance_alphas=variance_alphas)


def predict_error(model: ForecastModel, x, lead_index: int = 0):
    """Estimated forecast error epsilon(x) = |s(x)|^(1/2).

    s is the expansion of the squared residuals; the absolute value guards
    against small negative excursions of the projection.
    """
    if model.variance_alphas is None:
        raise ValidationError("model has no variance expansion; run conditional_variance")
    Q, scalar = _as_query(x)
    psi = model.basis.feature_matrix(Q)
    weights = model.variance_alphas[lead_index] / np.sqrt(model.basis.eigenvalues)
    out = np.sqrt(np.abs(psi @ weights))
    return float(out[0]) if scalar else out


def predict_probability(model: ForecastModel, x, lead_index: int = 0):
    """Indicator-transform forecast clipped to the probability range [0, 1]."""
    if model.transform.kind != "indicator":
        raise ValidationError("probability forecasts require an indicator transform")
    out = predict_kpcr(model, x, lead_index)
    if np.isscalar(out) or isinstance(out, float):
        return float(min(1.0, max(0.0, out)))
    return np.clip(out, 0.0, 1.0)
