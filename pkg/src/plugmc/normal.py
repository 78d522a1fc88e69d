"""Standard normal CDF, density and quantile.

Thin wrappers over the Cephes rational approximations shipped with scipy
(ndtr / ndtri), which are accurate to well below 1e-12; the test suite
validates them against quadrature and bisection oracles at that level.
Confidence-interval correctness rests on these.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = ["norm_cdf", "norm_pdf", "norm_ppf", "z_quantile"]


def norm_cdf(x):
    return ndtr(x)


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)


def norm_ppf(q):
    return ndtri(q)


def z_quantile(alpha: float) -> float:
    """Two-sided critical value z_{alpha/2} with P(|Z| > z) = alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return float(ndtri(1.0 - 0.5 * alpha))
