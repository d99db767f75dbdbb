"""Reference dynamical systems: circle rotation and the Lorenz 63 flow.

Both generators emit TimeSeriesDataset objects.  The circle system also has
a closed-form regression oracle, which makes it the standard correctness
benchmark for the forecasting pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesDataset
from .errors import DivergenceError, ValidationError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class L63Params:
    """Lorenz 63 parameters; defaults are the classical chaotic values."""

    sigma: float = 10.0
    mu: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        if not all(np.isfinite([self.sigma, self.mu, self.beta])):
            raise ValidationError("L63 parameters must be finite")


@dataclass(frozen=True)
class CircleParams:
    """Circle rotation with angular frequency alpha (rad per time unit)."""

    alpha: float = float(np.sqrt(2.0))

    def __post_init__(self):
        if self.alpha == 0.0 or not np.isfinite(self.alpha):
            raise ValidationError("alpha must be finite and nonzero")


def l63_vector_field(p: L63Params, state) -> np.ndarray:
    """Evaluate the Lorenz 63 vector field at a 3-vector state."""
    w = np.asarray(state, dtype=np.float64)
    return np.array(
        [
            p.sigma * (w[1] - w[0]),
            w[0] * (p.mu - w[2]),
            w[0] * w[1] - p.beta * w[2],
        ]
    )


def _rk4_step(p: L63Params, w: np.ndarray, h: float) -> np.ndarray:
    k1 = l63_vector_field(p, w)
    k2 = l63_vector_field(p, w + 0.5 * h * k1)
    k3 = l63_vector_field(p, w + 0.5 * h * k2)
    k4 = l63_vector_field(p, w + h * k3)
    return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_rk4(
    p: L63Params,
    initial,
    dt_out: float,
    n_steps: int,
    substeps: int = 10,
) -> np.ndarray:
    """Integrate L63 with classical fixed-step RK4.

    Takes ``substeps`` internal steps per output interval ``dt_out`` and
    returns an (n_steps + 1, 3) array that includes the initial state.
    """
    if dt_out <= 0:
        raise ValidationError(f"dt_out must be positive, got {dt_out}")
    if substeps < 1:
        raise ValidationError(f"substeps must be >= 1, got {substeps}")
    h = dt_out / substeps
    states = np.empty((n_steps + 1, 3), dtype=np.float64)
    w = np.asarray(initial, dtype=np.float64).copy()
    if w.shape != (3,):
        raise ValidationError("initial state must be a 3-vector")
    states[0] = w
    for j in range(1, n_steps + 1):
        for _ in range(substeps):
            w = _rk4_step(p, w, h)
        if not np.all(np.isfinite(w)):
            raise DivergenceError(f"non-finite state at output step {j}")
        states[j] = w
    return states


def l63_trajectory(
    p: L63Params,
    n: int,
    dt: float,
    spinup_time: float = 100.0,
    seed: int = 0,
    substeps: int = 10,
) -> np.ndarray:
    """Sample n post-spinup states of L63 at interval dt.

    The initial condition is drawn uniformly from [-10, 10]^3 with the given
    seed; the first ``spinup_time`` time units are discarded so that samples
    lie on the attractor.
    """
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-10.0, 10.0, size=3)
    spin_steps = int(round(spinup_time / dt))
    states = integrate_rk4(p, x0, dt, spin_steps + n - 1, substeps=substeps)
    return states[spin_steps:]


def _select_columns(states: np.ndarray, selector) -> np.ndarray:
    if selector == "full":
        return states
    idx = int(selector)
    if idx not in (1, 2, 3):
        raise ValidationError(f"component selector must be 'full' or 1..3, got {selector}")
    return states[:, idx - 1 : idx]


def generate_l63(
    p: L63Params,
    n: int,
    dt: float,
    spinup_time: float = 100.0,
    seed: int = 0,
    covariate="full",
    response=1,
    substeps: int = 10,
) -> TimeSeriesDataset:
    """Generate an L63 dataset with the given covariate/response selectors.

    ``covariate`` is "full" (m = 3) or a component index 1..3 (m = 1);
    ``response`` is a component index 1..3.
    """
    states = l63_trajectory(p, n, dt, spinup_time=spinup_time, seed=seed, substeps=substeps)
    cov = _select_columns(states, covariate)
    resp = _select_columns(states, response)[:, 0]
    return TimeSeriesDataset(covariates=cov, responses=resp, dt=dt)


def generate_circle(
    p: CircleParams,
    n: int,
    dt: float,
    omega0: float = 0.0,
) -> TimeSeriesDataset:
    """Sample the circle rotation: covariate cos(angle), response sin(angle)."""
    if n < 1:
        raise ValidationError(f"need n >= 1, got {n}")
    j = np.arange(n, dtype=np.float64)
    angles = np.mod(omega0 + p.alpha * j * dt, TWO_PI)
    return TimeSeriesDataset(
        covariates=np.cos(angles)[:, None],
        responses=np.sin(angles),
        dt=dt,
    )


def circle_oracle(p: CircleParams, x, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form regression function and intrinsic error for the circle.

    Returns (z, sigma) with z = x*sin(alpha*tau), the conditional mean of the
    future response given covariate x, and sigma = cos^2(alpha*tau)/2, the
    irreducible mean-square error of that prediction.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValidationError("circle covariate must lie in [-1, 1]")
    z = x * np.sin(p.alpha * tau)
    sigma = 0.5 * np.cos(p.alpha * tau) ** 2 * np.ones_like(x)
    return z, sigma
