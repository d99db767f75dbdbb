"""Model persistence: a single self-describing binary container.

Layout (all integers ASCII decimal, all arrays raw float64 little-endian,
C order):

    line 1:  ``KAFMODEL 1``
    line 2:  byte length of the JSON metadata block
    JSON metadata (UTF-8), immediately followed by
    the concatenated array payloads, in the order listed under
    ``metadata["arrays"]`` (each entry records name and shape).

The metadata block stores the resolved kernel spec, normalization mode,
transform, leads, response statistics, dt, and the array directory.  Arrays
round-trip bit-exactly; the kernel matrix itself is not stored and is
rebuilt lazily from the training covariates when needed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ValidationError
from .forecast import ForecastModel, ResponseTransform
from .kernels import BandwidthInfo, FittedKernel, KernelSpec
from .normalization import NormalizedKernel
from .spectral import BiorthogonalBasis, SpectralBasis

MAGIC = b"KAFMODEL 1\n"
FORMAT_VERSION = 1


def _array_entries(model: ForecastModel) -> dict[str, np.ndarray]:
    basis = model.basis
    if basis.kernel is None:
        raise ValidationError("cannot save a basis without a kernel handle")
    nk = basis.kernel
    arrays: dict[str, np.ndarray] = {"covariates": nk.base.covariates}
    if nk.base.bandwidth is not None:
        arrays["r_values"] = nk.base.bandwidth.r_values
    for name in ("u", "v", "d"):
        value = getattr(nk, name)
        if value is not None:
            arrays[name] = value
    if isinstance(basis, SpectralBasis):
        arrays["eigenvalues"] = basis.lambdas
        arrays["eigenvectors"] = basis.phis
    else:
        arrays["eigenvalues"] = basis.etas
        arrays["xis"] = basis.xis
        arrays["xi_primes"] = basis.xi_primes
        arrays["hat_phis"] = basis.hat_phis
    arrays["alphas"] = model.alphas
    if model.variance_alphas is not None:
        arrays["variance_alphas"] = model.variance_alphas
    return arrays


def save_model(model: ForecastModel, path: Union[str, Path]) -> None:
    """Write a fitted model to ``path`` in the container format above."""
    basis = model.basis
    nk = basis.kernel
    arrays = _array_entries(model)
    meta = {
        "format_version": FORMAT_VERSION,
        "basis_kind": "symmetric" if isinstance(basis, SpectralBasis) else "biorthogonal",
        "kernel": nk.base.resolved_spec().to_dict(),
        "normalization": {"mode": nk.mode, "alpha": nk.alpha},
        "n": basis.n,
        "ell": basis.ell,
        "dt": model.dt,
        "leads": list(model.leads),
        "transform": model.transform.to_dict(),
        "response_stats": {"mean": model.response_mean, "std": model.response_std},
        "arrays": [
            {"name": name, "shape": list(arr.shape)} for name, arr in arrays.items()
        ],
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(f"{len(blob)}\n".encode("ascii"))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path: Union[str, Path]) -> ForecastModel:
    """Read a model container written by save_model."""
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise ValidationError(f"{path}: not a model file (bad magic)")
    offset = len(MAGIC)
    newline = raw.index(b"\n", offset)
    meta_len = int(raw[offset:newline])
    meta_start = newline + 1
    meta = json.loads(raw[meta_start : meta_start + meta_len].decode("utf-8"))
    if meta["format_version"] != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format version {meta['format_version']}")

    arrays = {}
    cursor = meta_start + meta_len
    for entry in meta["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = cursor + 8 * count
        if end > len(raw):
            raise ValidationError(f"{path}: truncated array payload for {entry['name']}")
        arrays[entry["name"]] = (
            np.frombuffer(raw[cursor:end], dtype="<f8").reshape(shape).copy()
        )
        cursor = end
    if cursor != len(raw):
        raise ValidationError(f"{path}: {len(raw) - cursor} trailing bytes")

    spec = KernelSpec.from_dict(meta["kernel"])
    bandwidth = None
    if "r_values" in arrays:
        bandwidth = BandwidthInfo(
            r_values=arrays["r_values"],
            epsilon=float(spec.epsilon),
            epsilon_tilde=float(spec.epsilon_tilde),
            m_tilde=float(spec.m_tilde),
        )
    base = FittedKernel(
        spec=spec,
        covariates=arrays["covariates"],
        epsilon=float(spec.epsilon),
        bandwidth=bandwidth,
    )
    norm = meta["normalization"]
    nk = NormalizedKernel(
        mode=norm["mode"],
        base=base,
        alpha=norm["alpha"],
        u=arrays.get("u"),
        v=arrays.get("v"),
        d=arrays.get("d"),
    )
    if meta["basis_kind"] == "symmetric":
        basis = SpectralBasis(
            lambdas=arrays["eigenvalues"], phis=arrays["eigenvectors"], kernel=nk
        )
    else:
        basis = BiorthogonalBasis(
            etas=arrays["eigenvalues"],
            xis=arrays["xis"],
            xi_primes=arrays["xi_primes"],
            d_values=arrays["d"],
            hat_phis=arrays["hat_phis"],
            kernel=nk,
        )
    stats = meta["response_stats"]
    return ForecastModel(
        basis=basis,
        leads=tuple(int(q) for q in meta["leads"]),
        alphas=arrays["alphas"],
        transform=ResponseTransform.from_dict(meta["transform"]),
        response_mean=float(stats["mean"]),
        response_std=float(stats["std"]),
        dt=float(meta["dt"]),
        variance_alphas=arrays.get("variance_alphas"),
    )
