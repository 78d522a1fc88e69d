"""Path functionals and their pathwise gradient rules.

A functional maps a path to the scalar h = payoff(reducer(path)), where
the reducer is one of: terminal value, time average, or discounted
integral of V along the path.  Its pathwise gradient combines the payoff
derivative with the matching reduction of the sensitivity path:

    G = payoff'(X_*) * Ytilde,
    Ytilde = Y_T | time-average of Y | int e^{-delta t} V'(X) Y dt.

Averaging G over simulated (X, Y) pairs estimates the correction vector
C(theta) that drives the plug-in error variance.

The European call payoff is handled through a smooth approximation

    phi(x) = e^{-rT}/2 * (sqrt((x-K)^2 + d^2) + x - K),

which sandwiches the discounted hockey stick within e^{-rT} d / 2
uniformly in x, so the smoothing width d trades bias against the kink
at a known rate.  All grid integrals use the trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import BatchResult, Path

Array = np.ndarray

KINDS = (
    "terminal",
    "time_average",
    "discounted_integral",
    "smoothed_call_terminal",
    "smoothed_call_average",
)

V_FUNCTIONS = {
    "identity": (lambda x: x, lambda x: np.ones_like(np.asarray(x, dtype=float))),
}

__all__ = [
    "Functional",
    "KINDS",
    "smoothed_call",
    "smoothed_call_deriv",
    "eval_functional",
    "pathwise_gradient",
]


def smoothed_call(x, strike: float, eps_smooth: float, rate: float, horizon: float):
    """Smooth discounted call payoff; exact as eps_smooth -> 0."""
    x = np.asarray(x, dtype=float)
    d = x - strike
    return 0.5 * np.exp(-rate * horizon) * (np.sqrt(d * d + eps_smooth**2) + d)


def smoothed_call_deriv(x, strike: float, eps_smooth: float, rate: float, horizon: float):
    x = np.asarray(x, dtype=float)
    d = x - strike
    if eps_smooth == 0.0:
        # sgn convention: 0 exactly at the kink, fixed for determinism
        return 0.5 * np.exp(-rate * horizon) * (np.sign(d) + 1.0)
    return 0.5 * np.exp(-rate * horizon) * (d / np.sqrt(d * d + eps_smooth**2) + 1.0)


@dataclass(frozen=True)
class Functional:
    """A payoff/evaluation rule h on paths plus its pathwise gradient rule.

    kind       : one of KINDS
    horizon    : T, the time span the rule needs the path to cover
    strike, rate, eps_smooth : call-payoff constants (smoothed kinds)
    discount   : delta in the discounted-integral kind
    v_name     : integrand V for discounted_integral ("identity")
    """

    kind: str
    horizon: float
    strike: float = 0.0
    rate: float = 0.0
    eps_smooth: float = 0.0
    discount: float = 0.0
    v_name: str = "identity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown functional kind {self.kind!r}")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.kind.startswith("smoothed_call") and self.eps_smooth < 0:
            raise ValueError("eps_smooth must be >= 0")
        if self.v_name not in V_FUNCTIONS:
            raise ValueError(f"unknown integrand {self.v_name!r}")

    # -- payoff phi and its derivative on the reduced scalar ---------------

    def payoff(self, x_star):
        if self.kind in ("terminal", "time_average", "discounted_integral"):
            return np.asarray(x_star, dtype=float)
        return smoothed_call(x_star, self.strike, self.eps_smooth, self.rate, self.horizon)

    def payoff_deriv(self, x_star):
        if self.kind in ("terminal", "time_average", "discounted_integral"):
            return np.ones_like(np.asarray(x_star, dtype=float))
        return smoothed_call_deriv(
            x_star, self.strike, self.eps_smooth, self.rate, self.horizon
        )

    # -- reductions on recorded paths (single-path route) ------------------

    def _check_grid(self, grid):
        if grid.horizon < self.horizon - 1e-9:
            raise ValueError(
                f"path grid covers [0, {grid.horizon}], functional needs [0, {self.horizon}]"
            )
        k = self.horizon / grid.dt
        if abs(k - round(k)) > 1e-6:
            raise ValueError("functional horizon must land on a grid node")
        return int(round(k))

    def reduce(self, path: Path) -> float:
        """X_*: the scalar the payoff is applied to."""
        k = self._check_grid(path.grid)
        x = path.values[: k + 1]
        t = path.grid.times()[: k + 1]
        if self.kind in ("terminal", "smoothed_call_terminal"):
            return float(x[-1])
        if self.kind in ("time_average", "smoothed_call_average"):
            return float(np.trapezoid(x, t) / self.horizon)
        v_fn, _ = V_FUNCTIONS[self.v_name]
        return float(np.trapezoid(np.exp(-self.discount * t) * v_fn(x), t))

    def reduce_gradient(self, x_path: Path, y_values: Array) -> Array:
        """Ytilde: the matching reduction of the sensitivity path, shape (p,)."""
        k = self._check_grid(x_path.grid)
        y = y_values[: k + 1]
        t = x_path.grid.times()[: k + 1]
        if self.kind in ("terminal", "smoothed_call_terminal"):
            return np.asarray(y[-1], dtype=float)
        if self.kind in ("time_average", "smoothed_call_average"):
            return np.trapezoid(y, t, axis=0) / self.horizon
        _, vp_fn = V_FUNCTIONS[self.v_name]
        w = np.exp(-self.discount * t) * vp_fn(x_path.values[: k + 1])
        return np.trapezoid(w[:, None] * y, t, axis=0)

    # -- batch variants on streaming reductions ----------------------------

    def needs(self) -> dict:
        """Accumulators the batch engine must track for this functional."""
        if self.kind == "discounted_integral":
            v_fn, vp_fn = V_FUNCTIONS[self.v_name]
            return {"disc": (self.discount, v_fn, vp_fn), "want_trap": False}
        if self.kind in ("time_average", "smoothed_call_average"):
            return {"disc": None, "want_trap": True}
        return {"disc": None, "want_trap": False}

    def values_from_batch(self, res: BatchResult) -> Array:
        return self.payoff(self._x_star_from_batch(res))

    def gradients_from_batch(self, res: BatchResult) -> Array:
        """Per-path pathwise gradients, shape (B, p)."""
        phi_prime = self.payoff_deriv(self._x_star_from_batch(res))
        if self.kind in ("terminal", "smoothed_call_terminal"):
            ytilde = res.y_terminal
        elif self.kind in ("time_average", "smoothed_call_average"):
            ytilde = res.trap_y / self.horizon
        else:
            ytilde = res.disc_vy
        return phi_prime[:, None] * ytilde

    def _x_star_from_batch(self, res: BatchResult) -> Array:
        if self.kind in ("terminal", "smoothed_call_terminal"):
            return res.x_terminal
        if self.kind in ("time_average", "smoothed_call_average"):
            return res.trap_x / self.horizon
        return res.disc_v


def eval_functional(functional: Functional, path: Path) -> float:
    """h(x) for one recorded path."""
    return float(functional.payoff(functional.reduce(path)))


def pathwise_gradient(functional: Functional, x_path: Path, y_values: Array) -> Array:
    """One Monte Carlo draw of the gradient G; averaging estimates C(theta)."""
    y_values = np.asarray(y_values, dtype=float)
    if y_values.ndim != 2 or y_values.shape[0] != x_path.values.shape[0]:
        raise ValueError(
            f"sensitivity path shape {y_values.shape} does not match "
            f"path length {x_path.values.shape[0]}"
        )
    x_star = functional.reduce(x_path)
    ytilde = functional.reduce_gradient(x_path, y_values)
    return float(functional.payoff_deriv(x_star)) * ytilde
