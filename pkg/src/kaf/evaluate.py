"""Forecast skill metrics and verification-set evaluation.

Evaluation at lead q compares forecasts initialized from the first m - q
verification covariates against the responses observed q steps later; the
final q points are dropped because their ground truth is unobserved (the
zero padding used on the training side is a shift-operator device, not a
statement about future data).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import ValidationError
from .forecast import ForecastModel

CSV_HEADER = "lead_time,rmse,normalized_rmse,estimated_error_rms,excess_gen_error"

# oracle(covariates, tau) -> regression-function values at those covariates
Oracle = Callable[[np.ndarray, float], np.ndarray]


def rmse(pred, truth) -> float:
    """Root mean square difference of two equal-length sequences."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValidationError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size < 1:
        raise ValidationError("need at least one element")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))


def excess_gen_error(pred, oracle_values) -> float:
    """Mean square distance of forecasts from the exact regression function."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    oracle_values = np.asarray(oracle_values, dtype=np.float64).ravel()
    if pred.shape != oracle_values.shape:
        raise ValidationError(f"length mismatch: {pred.shape} vs {oracle_values.shape}")
    if pred.size < 1:
        raise ValidationError("need at least one element")
    return float(np.mean((pred - oracle_values) ** 2))


@dataclass
class SkillReport:
    """Per-lead skill metrics plus the run configuration that produced them.

    normalized_rmse divides by the training-set response standard deviation;
    estimated_error_rms and excess_gen_error entries are NaN when the model
    carries no variance expansion / no oracle was supplied.
    """

    lead_steps: list
    lead_times: list
    rmse: list
    normalized_rmse: list
    estimated_error_rms: list
    excess_gen_error: list
    params: dict = field(default_factory=dict)

    def to_csv(self, path: Union[str, Path]) -> None:
        def fmt(v: float) -> str:
            return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))

        lines = [CSV_HEADER]
        for i in range(len(self.lead_times)):
            lines.append(
                ",".join(
                    [
                        repr(float(self.lead_times[i])),
                        fmt(self.rmse[i]),
                        fmt(self.normalized_rmse[i]),
                        fmt(self.estimated_error_rms[i]),
                        fmt(self.excess_gen_error[i]),
                    ]
                )
            )
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    def to_json(self, path: Union[str, Path]) -> None:
        def clean(v):
            return None if isinstance(v, float) and np.isnan(v) else v

        payload = {
            "params": self.params,
            "results": [
                {
                    "lead_steps": int(self.lead_steps[i]),
                    "lead_time": float(self.lead_times[i]),
                    "rmse": clean(self.rmse[i]),
                    "normalized_rmse": clean(self.normalized_rmse[i]),
                    "estimated_error_rms": clean(self.estimated_error_rms[i]),
                    "excess_gen_error": clean(self.excess_gen_error[i]),
                }
                for i in range(len(self.lead_times))
            ],
        }
        Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def evaluate_forecast(
    model: ForecastModel,
    verif: TimeSeriesDataset,
    leads: Optional[Sequence[int]] = None,
    oracle: Optional[Oracle] = None,
    params: Optional[dict] = None,
) -> SkillReport:
    """Score a model against a verification dataset at its stored leads.

    The verification covariates must already match the model's covariate
    dimension (delay-embed beforehand if the model uses delays).  Truth at
    lead q is the transformed response q steps ahead; the last q points are
    truncated.  When an oracle is supplied, the mean square distance of the
    forecast from the oracle's regression values is reported as well.
    """
    basis = model.basis
    if basis.kernel is not None:
        train_dim = basis.kernel.base.covariates.shape[1]
        if verif.covariate_dim != train_dim:
            raise ValidationError(
                f"verification covariate dimension {verif.covariate_dim} does not match "
                f"training dimension {train_dim}"
            )
    if model.response_std <= 0:
        raise ValidationError("normalized RMSE undefined: training response std is 0")
    lead_list = [int(q) for q in (leads if leads is not None else model.leads)]
    indices = [model.lead_index(q) for q in lead_list]

    psi = basis.feature_matrix(verif.covariates)
    sqrt_lam = np.sqrt(basis.eigenvalues)
    report = SkillReport(
        lead_steps=[],
        lead_times=[],
        rmse=[],
        normalized_rmse=[],
        estimated_error_rms=[],
        excess_gen_error=[],
        params=dict(params or {}),
    )
    for q, k in zip(lead_list, indices):
        n_pred = verif.n - q
        if n_pred < 1:
            raise ValidationError(f"lead q={q} leaves no verification pairs (m={verif.n})")
        pred = psi[:n_pred] @ (model.alphas[k] / sqrt_lam)
        if model.transform.kind == "indicator":
            pred = np.clip(pred, 0.0, 1.0)
        truth = model.transform(verif.responses[q:])
        err = rmse(pred, truth)
        if model.variance_alphas is not None:
            s = psi[:n_pred] @ (model.variance_alphas[k] / sqrt_lam)
            eps_rms = float(np.sqrt(np.mean(np.abs(s))))
        else:
            eps_rms = float("nan")
        tau = q * model.dt
        if oracle is not None:
            z = np.asarray(oracle(verif.covariates[:n_pred], tau), dtype=np.float64)
            excess = excess_gen_error(pred, z)
        else:
            excess = float("nan")
        report.lead_steps.append(q)
        report.lead_times.append(tau)
        report.rmse.append(err)
        report.normalized_rmse.append(err / model.response_std)
        report.estimated_error_rms.append(eps_rms)
        report.excess_gen_error.append(excess)
    return report
