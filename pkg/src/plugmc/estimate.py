"""Parameter estimation from discretely observed small-noise diffusions.

The contrast is the Gaussian quasi-likelihood built from one-step
increments,

    M_n(theta) = sum_k [ (DX_k - a(X_{k-1}, theta) dt)^2
                         / (eps^2 dt btilde^2(X_{k-1}, theta))
                         + log btilde^2(X_{k-1}, theta) ],

where btilde is the diffusion coefficient with the known structural noise
scale eps divided out, and dt = T/n.  Under eps -> 0, n -> infinity the
minimizer converges at rate eps for drift parameters and 1/sqrt(n) for
diffusion parameters, with the information matrix computed along the
noise-free limit path.

For geometric Brownian dynamics the minimizer has a closed form
(`bs_closed_form`), which the generic Newton solver must match to
1e-10 — that equivalence is the main oracle for this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import JumpDiffusionModel
from .simulate import Path, TimeGrid

Array = np.ndarray

__all__ = [
    "Observations",
    "EstimatorResult",
    "contrast",
    "contrast_gradient",
    "minimize_contrast",
    "bs_closed_form",
    "fisher_info",
    "deterministic_path",
]

GRAD_TOL = 1e-8
MAX_SWEEPS = 100


@dataclass(frozen=True)
class Observations:
    """Discrete samples X_{t_k}, k = 0..n, with known noise scale eps."""

    grid: TimeGrid
    samples: Array
    eps: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.steps + 1,):
            raise ValueError(
                f"expected {self.grid.steps + 1} samples, got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValueError("observations contain non-finite values")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class EstimatorResult:
    theta: Array
    rates: Array  # diagonal of Gamma_n, e.g. (eps, 1/sqrt(n))
    info: Array | None  # estimated information matrix, PSD
    converged: bool
    contrast_value: float
    n_iter: int = 0


def _prepare(obs: Observations, theta, model: JumpDiffusionModel):
    theta = np.asarray(theta, dtype=float)
    x_prev = obs.samples[:-1]
    dx = np.diff(obs.samples)
    btilde = np.asarray(model.unit_diffusion(x_prev, theta), dtype=float)
    if np.any(btilde == 0) or not np.all(np.isfinite(btilde)):
        raise ValueError("diffusion coefficient vanishes at an observed state")
    return theta, x_prev, dx, btilde


def contrast(obs: Observations, theta, model: JumpDiffusionModel) -> float:
    theta, x_prev, dx, btilde = _prepare(obs, theta, model)
    dt = obs.grid.dt
    resid = dx - np.asarray(model.drift(x_prev, theta)) * dt
    quad = resid**2 / (obs.eps**2 * dt * btilde**2)
    return float(np.sum(quad + np.log(btilde**2)))


def contrast_gradient(obs: Observations, theta, model: JumpDiffusionModel) -> Array:
    """Analytic gradient of the contrast (closed-form coefficient derivatives)."""
    theta, x_prev, dx, btilde = _prepare(obs, theta, model)
    dt = obs.grid.dt
    resid = dx - np.asarray(model.drift(x_prev, theta)) * dt
    a_dot = np.asarray(model.drift_dtheta(x_prev, theta))  # (p, n)
    b_dot = np.asarray(model.unit_diffusion_dtheta(x_prev, theta))
    w = obs.eps**2 * dt
    term_drift = -2.0 * (resid / (w * btilde**2)) * a_dot * dt
    term_diff = (-2.0 * resid**2 / (w * btilde**3) + 2.0 / btilde) * b_dot
    return np.sum(term_drift + term_diff, axis=1)


def minimize_contrast(
    obs: Observations, model: JumpDiffusionModel, init
) -> EstimatorResult:
    """Coordinate-wise Newton descent of the contrast with box projection.

    Curvatures come from central differences of the analytic gradient; a
    coordinate with non-positive curvature keeps its incumbent value.
    Convergence means gradient norm below 1e-8; the converged flag is left
    False after 100 sweeps and the caller decides.
    """
    theta = model.require_theta(init).copy()
    box = model.param_box
    converged = False
    sweeps = 0
    for sweeps in range(1, MAX_SWEEPS + 1):
        moved = 0.0
        for j in range(model.p):
            # minimize the j-th coordinate with inner Newton steps; a
            # non-positive curvature keeps the incumbent value
            for _ in range(30):
                g = contrast_gradient(obs, theta, model)[j]
                if abs(g) < 0.1 * GRAD_TOL:
                    break
                h = max(1e-6, 1e-6 * abs(theta[j]))
                tp = theta.copy()
                tp[j] += h
                tm = theta.copy()
                tm[j] -= h
                curv = (
                    contrast_gradient(obs, tp, model)[j]
                    - contrast_gradient(obs, tm, model)[j]
                ) / (2.0 * h)
                if not np.isfinite(curv) or curv <= 0:
                    break
                new = np.clip(theta[j] - g / curv, box[j, 0], box[j, 1])
                step = abs(new - theta[j])
                theta[j] = new
                moved = max(moved, step)
                if step < 1e-14 * max(1.0, abs(new)):
                    break
        grad_norm = float(np.linalg.norm(contrast_gradient(obs, theta, model)))
        if grad_norm < GRAD_TOL:
            converged = True
            break
        if moved == 0.0:
            break
    info = None
    try:
        info = fisher_info(model, theta, deterministic_path(model, theta, obs.grid))
    except ValueError:
        pass
    return EstimatorResult(
        theta=theta,
        rates=np.array([obs.eps, 1.0 / np.sqrt(obs.grid.steps)]),
        info=info,
        converged=converged,
        contrast_value=contrast(obs, theta, model),
        n_iter=sweeps,
    )


def bs_closed_form(obs: Observations) -> EstimatorResult:
    """Explicit contrast minimizer for geometric Brownian dynamics.

        mu_hat       = (1/T) sum_k DX_k / X_{t_{k-1}}
        sigma_hat^2  = sum_k (DX_k - mu_hat dt X_{t_{k-1}})^2 / X_{t_{k-1}}^2
                       / (eps^2 T)

    Requires strictly positive samples.  The returned theta is
    (mu_hat, sigma_hat); the information matrix is evaluated at theta via
    the limit-path integral (None when sigma_hat = 0).
    """
    x = obs.samples
    if np.any(x <= 0):
        raise ValueError("closed-form estimator requires strictly positive samples")
    n = obs.grid.steps
    dt = obs.grid.dt
    horizon = obs.grid.horizon
    x_prev = x[:-1]
    dx = np.diff(x)
    ratio = dx / x_prev
    mu_hat = float(np.sum(ratio)) / horizon
    resid = dx - mu_hat * dt * x_prev
    sigma_sq = float(np.sum(resid**2 / x_prev**2)) / (obs.eps**2 * horizon)
    sigma_hat = float(np.sqrt(sigma_sq))
    info = None
    if sigma_hat > 0:
        info = np.diag([sigma_hat**-2, 2.0 * sigma_hat**-2])
    theta = np.array([mu_hat, sigma_hat])
    value = np.inf
    if sigma_hat > 0:
        value = float(
            np.sum(
                resid**2 / (obs.eps**2 * dt * sigma_sq * x_prev**2)
                + np.log(sigma_sq * x_prev**2)
            )
        )
    return EstimatorResult(
        theta=theta,
        rates=np.array([obs.eps, 1.0 / np.sqrt(n)]),
        info=info,
        converged=True,
        contrast_value=value,
    )


def deterministic_path(model: JumpDiffusionModel, theta, grid: TimeGrid) -> Path:
    """Noise-free limit path: Euler iterates of dX = a(X, theta) dt."""
    theta = np.asarray(theta, dtype=float)
    x = np.empty(grid.steps + 1)
    x[0] = model.initial(theta)
    dt = grid.dt
    for k in range(grid.steps):
        x[k + 1] = x[k] + float(model.drift(x[k], theta)) * dt
    if not np.all(np.isfinite(x)):
        raise ValueError("limit ODE path is non-finite")
    return Path(grid=grid, values=x)


def fisher_info(model: JumpDiffusionModel, theta, driver: Path) -> Array:
    """Information matrix of the contrast along the noise-free limit path.

    Diagonal with entries (per parameter k)

        I_kk = int (da/dtheta_k / btilde)^2 ds
               + 1/2 int (d btilde^2/dtheta_k / btilde^2)^2 ds,

    integrated by the trapezoid rule over the driver path; a parameter
    entering only the drift or only the diffusion picks up one term.
    """
    theta = np.asarray(theta, dtype=float)
    x = driver.values
    t = driver.grid.times()
    btilde = np.asarray(model.unit_diffusion(x, theta), dtype=float)
    if np.any(btilde == 0):
        raise ValueError("diffusion coefficient vanishes along the driver path")
    a_dot = np.asarray(model.drift_dtheta(x, theta))
    b_dot = np.asarray(model.unit_diffusion_dtheta(x, theta))
    entries = np.empty(model.p)
    for k in range(model.p):
        drift_part = np.trapezoid((a_dot[k] / btilde) ** 2, t)
        diff_part = 0.5 * np.trapezoid((2.0 * b_dot[k] / btilde) ** 2, t)
        entries[k] = drift_part + diff_part
    return np.diag(entries)
