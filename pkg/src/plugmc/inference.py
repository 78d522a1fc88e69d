"""Plug-in Monte Carlo estimation of expected functionals with error bars.

Given an estimated parameter, the expected functional H is estimated by
averaging the functional over seeded simulated paths.  The statistical
error of that plug-in estimate is driven by the estimator's fluctuation
through the correction vector

    C(theta) = E[ payoff'(X_*) Ytilde ],

estimated here by averaging pathwise gradients over coupled (X, Y)
simulations.  With estimator information I and slowest rate gamma, the
plug-in error is asymptotically normal with variance C' I^{-1} C, which
yields the confidence interval

    H_hat -+ z_{alpha/2} * gamma * sqrt(C' I^{-1} C).

When a parameter coordinate converges strictly faster than the slowest
rate, its contribution degenerates to zero and is masked out of the
quadratic form.  For explicitly known H the classical delta method
(gradient by central differences) provides the independent second route
used to cross-validate the derivative-process route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import Functional
from .models import JumpDiffusionModel
from .normal import norm_cdf, z_quantile
from .simulate import TimeGrid, simulate_batch

Array = np.ndarray

__all__ = [
    "InferenceReport",
    "plugin_H",
    "estimate_C",
    "bs_call_closed_form",
    "ou_discounted_value",
    "asymptotic_variance",
    "confidence_interval",
    "delta_method_variance",
    "build_report",
]


def _check_grid(functional: Functional, grid: TimeGrid) -> None:
    if abs(grid.horizon - functional.horizon) > 1e-9:
        raise ValueError(
            f"batch grid horizon {grid.horizon} must equal functional horizon "
            f"{functional.horizon}"
        )


def plugin_H(
    model: JumpDiffusionModel,
    functional: Functional,
    theta,
    n_paths: int,
    root_seed: int,
    grid: TimeGrid,
    *,
    start_index: int = 0,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the functional at theta."""
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    _check_grid(functional, grid)
    needs = functional.needs()
    res = simulate_batch(
        model,
        theta,
        grid,
        root_seed,
        n_paths,
        start_index=start_index,
        disc=needs["disc"],
        want_trap=needs["want_trap"],
    )
    h = functional.values_from_batch(res)
    se = float(np.std(h, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return float(np.mean(h)), se


def estimate_C(
    model: JumpDiffusionModel,
    system,
    functional: Functional,
    theta,
    n_paths: int,
    root_seed: int,
    grid: TimeGrid,
    *,
    start_index: int = 0,
    return_h: bool = False,
):
    """Monte Carlo estimate of the correction vector C(theta).

    Averages pathwise gradients over n_paths coupled (X, Y) paths; returns
    (C, stderr) with shape (p,) each, plus the matching plug-in (H, se)
    from the same paths when return_h is set (common random numbers).
    """
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    _check_grid(functional, grid)
    needs = functional.needs()
    res = simulate_batch(
        model,
        theta,
        grid,
        root_seed,
        n_paths,
        start_index=start_index,
        system=system,
        disc=needs["disc"],
        want_trap=needs["want_trap"],
    )
    g = functional.gradients_from_batch(res)  # (B, p)
    c_hat = g.mean(axis=0)
    c_se = g.std(axis=0, ddof=1) / np.sqrt(n_paths)
    if not return_h:
        return c_hat, c_se
    h = functional.values_from_batch(res)
    return c_hat, c_se, float(np.mean(h)), float(np.std(h, ddof=1) / np.sqrt(n_paths))


def bs_call_closed_form(
    theta, eps: float, x: float, strike: float, rate: float, horizon: float
) -> float:
    """European call price under geometric Brownian dynamics with drift mu.

    The expectation is taken under the model's own law (no change of
    measure), so the growth rate mu — not the discount rate — drives the
    log-normal mean:

        price = e^{-(r - mu) T} [ x Phi(d1) - K e^{-mu T} Phi(d2) ],
        d1 = (log(x / K) + (mu + eps^2 sigma^2 / 2) T) / (eps sigma sqrt(T)),
        d2 = d1 - eps sigma sqrt(T).

    Degenerate noise (eps sigma sqrt(T) = 0) gives the discounted
    deterministic payoff; K = 0 gives x e^{(mu - r) T}.
    """
    theta = np.asarray(theta, dtype=float)
    mu, sigma = float(theta[0]), float(theta[1])
    if strike < 0:
        raise ValueError(f"strike must be >= 0, got {strike}")
    if x <= 0 or horizon <= 0:
        raise ValueError("x and horizon must be positive")
    disc = np.exp(-rate * horizon)
    if strike == 0.0:
        return float(x * np.exp((mu - rate) * horizon))
    s = eps * sigma * np.sqrt(horizon)
    if s == 0.0:
        return float(disc * max(x * np.exp(mu * horizon) - strike, 0.0))
    d1 = (np.log(x / strike) + (mu + 0.5 * eps**2 * sigma**2) * horizon) / s
    d2 = d1 - s
    return float(
        np.exp(-(rate - mu) * horizon)
        * (x * norm_cdf(d1) - strike * np.exp(-mu * horizon) * norm_cdf(d2))
    )


def ou_discounted_value(
    mu: float, eta: float, lam: float, discount: float, horizon: float, x0: float
) -> float:
    """Closed-form discounted integral E int_0^T e^{-delta t} X_t dt for the
    mean-reverting jump model.

    From E[X_t] = x0 e^{-mu t} + (lam eta / mu)(1 - e^{-mu t}):

        H = x0 (1 - e^{-(mu+d)T}) / (mu+d)
            + (lam eta / mu) [ (1 - e^{-dT}) / d - (1 - e^{-(mu+d)T}) / (mu+d) ]

    Validated in the test suite against quadrature of the mean ODE.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if discount <= 0:
        raise ValueError(f"discount must be > 0, got {discount}")
    md = mu + discount
    first = x0 * (1.0 - np.exp(-md * horizon)) / md
    bracket = (1.0 - np.exp(-discount * horizon)) / discount - (
        1.0 - np.exp(-md * horizon)
    ) / md
    return float(first + (lam * eta / mu) * bracket)


def asymptotic_variance(c_hat, sigma, rates=None) -> float:
    """Quadratic form C' Sigma C with degenerate-rate masking.

    When per-coordinate convergence rates are supplied, only coordinates
    at the slowest rate (the largest entry) contribute; faster coordinates
    degenerate to zero in the limit and are masked out.
    """
    c = np.asarray(c_hat, dtype=float)
    s = np.asarray(sigma, dtype=float)
    if s.shape != (c.size, c.size):
        raise ValueError(f"covariance shape {s.shape} does not match C {c.shape}")
    if not np.allclose(s, s.T, atol=1e-10):
        raise ValueError("covariance must be symmetric")
    if np.any(np.linalg.eigvalsh(s) < -1e-10):
        raise ValueError("covariance must be positive semi-definite")
    if rates is not None:
        rates = np.asarray(rates, dtype=float)
        if rates.shape != c.shape:
            raise ValueError("rates shape does not match C")
        mask = rates >= np.max(rates) * (1.0 - 1e-12)
        c = np.where(mask, c, 0.0)
    return float(max(c @ s @ c, 0.0))


def confidence_interval(
    h_hat: float, asy_var: float, gamma_star: float, alpha: float
) -> tuple[float, float]:
    """Two-sided plug-in interval H_hat -+ z_{alpha/2} gamma sqrt(var)."""
    if asy_var < 0:
        raise ValueError("asy_var must be >= 0")
    half = z_quantile(alpha) * gamma_star * np.sqrt(asy_var)
    return (float(h_hat - half), float(h_hat + half))


def delta_method_variance(h_fn, theta, sigma) -> float:
    """grad H' Sigma grad H with a central-difference gradient.

    Step per coordinate is max(1e-6, 1e-6 |theta_i|).  Available whenever
    H is an explicit function of theta; serves as the independent check of
    the derivative-process route.
    """
    theta = np.asarray(theta, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    grad = np.empty(theta.size)
    for i in range(theta.size):
        h = max(1e-6, 1e-6 * abs(theta[i]))
        tp = theta.copy()
        tp[i] += h
        tm = theta.copy()
        tm[i] -= h
        fp, fm = h_fn(tp), h_fn(tm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"H is non-finite near theta (coordinate {i})")
        grad[i] = (fp - fm) / (2.0 * h)
    return float(max(grad @ sigma @ grad, 0.0))


@dataclass(frozen=True)
class InferenceReport:
    """Plug-in estimate with its asymptotic error decomposition."""

    theta: Array
    h_hat: float
    h_se_mc: float
    c_hat: Array
    c_se: Array
    asy_var: float
    gamma_star: float
    alpha: float
    ci: tuple[float, float]
    z_hat: float | None = None

    def __post_init__(self):
        lo, hi = self.ci
        if not (lo <= self.h_hat <= hi):
            raise ValueError("confidence interval must contain the point estimate")
        if self.asy_var < 0:
            raise ValueError("asy_var must be >= 0")

    def to_dict(self) -> dict:
        return {
            "theta": [float(v) for v in self.theta],
            "H_hat": self.h_hat,
            "H_se_mc": self.h_se_mc,
            "C_hat": [float(v) for v in self.c_hat],
            "C_se": [float(v) for v in self.c_se],
            "asy_var": self.asy_var,
            "gamma_star": self.gamma_star,
            "alpha": self.alpha,
            "ci_low": self.ci[0],
            "ci_high": self.ci[1],
            "z_hat": self.z_hat,
        }


def build_report(
    model: JumpDiffusionModel,
    system,
    functional: Functional,
    theta,
    rates,
    info,
    n_paths: int,
    root_seed: int,
    grid: TimeGrid,
    *,
    alpha: float = 0.05,
    h_true: float | None = None,
    true_denominator: float | None = None,
) -> InferenceReport:
    """Assemble the plug-in report at theta.

    The correction vector is estimated from the same seeded paths as the
    plug-in mean (common random numbers).  z_hat is filled when the true
    functional value is supplied; its denominator defaults to the
    theta-based variance unless a fixed true-parameter one is given.
    """
    theta = np.asarray(theta, dtype=float)
    rates = np.asarray(rates, dtype=float)
    c_hat, c_se, h_hat, h_se = estimate_C(
        model, system, functional, theta, n_paths, root_seed, grid, return_h=True
    )
    info_inv = np.linalg.inv(np.asarray(info, dtype=float))
    asy_var = asymptotic_variance(c_hat, info_inv, rates=rates)
    gamma_star = float(np.max(rates))
    ci = confidence_interval(h_hat, asy_var, gamma_star, alpha)
    z_hat = None
    if h_true is not None:
        denom = true_denominator if true_denominator is not None else np.sqrt(asy_var)
        z_hat = float((h_hat - h_true) / (gamma_star * denom))
    return InferenceReport(
        theta=theta,
        h_hat=h_hat,
        h_se_mc=h_se,
        c_hat=c_hat,
        c_se=c_se,
        asy_var=asy_var,
        gamma_star=gamma_star,
        alpha=alpha,
        ci=ci,
        z_hat=z_hat,
    )
