"""Batch experiment drivers and their file outputs.

The main study repeats, R times: simulate one discretely observed path at
the true parameter, estimate the parameter from the samples, price the
functional by Monte Carlo at the estimate, and form the normalized error

    Z = (H_hat(theta_hat) - H(theta0)) / (gamma * sqrt(C' I^{-1} C)),

with C and I evaluated at the true parameter.  If the asymptotics hold, Z
is standard normal; the Kolmogorov-Smirnov statistic against the normal
CDF quantifies the fit.  In parallel, each replication builds the
plug-in confidence interval from estimate-based quantities, giving an
empirical coverage rate.

Everything is deterministic given the config's root seed: per-path seeds
are laid out in disjoint counter blocks (correction paths, observation
paths, pricing paths), so outputs are byte-for-byte reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .derivative import build_derivative_system
from .estimate import Observations, bs_closed_form, deterministic_path, fisher_info
from .functionals import Functional
from .inference import (
    asymptotic_variance,
    bs_call_closed_form,
    confidence_interval,
    estimate_C,
    ou_discounted_value,
)
from .models import NO_JUMPS, JumpDiffusionModel, bs_small_noise_model, levy_model, ou_jump_model
from .normal import norm_cdf, norm_ppf
from .simulate import TimeGrid, euler_path, path_seed, sample_noise

Array = np.ndarray

__all__ = [
    "ExperimentConfig",
    "ExperimentOutput",
    "ReplicationRow",
    "run_bs_experiment",
    "run_ou_oracle",
    "ks_statistic",
    "write_experiment_outputs",
    "model_from_config",
    "functional_from_config",
]

# Disjoint per-path seed-counter blocks (low 64 key bits).
IDX_CORRECTION = 0
IDX_OBSERVATION = 1 << 40
IDX_PRICING = 1 << 41
PRICING_STRIDE = 1 << 21  # max pricing paths per replication


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one replicated study; see from_dict for the JSON shape."""

    theta0: tuple
    x0: float = 1.0
    n_obs: int = 500
    epsilon: float | str = "1/sqrt(n)"
    n_paths_price: int = 10_000
    n_paths_correction: int = 100_000
    replications: int = 300
    alpha: float = 0.05
    strike: float = 0.75
    rate: float = 0.05
    horizon: float = 1.0
    obs_horizon: float = 1.0
    n_grid_price: int | None = None
    eps_smooth: float | None = None  # default 1e-3 * strike
    discount: float = 0.05
    jump_intensity: float = 1.0
    root_seed: int = 0

    def __post_init__(self):
        if self.replications < 30:
            raise ValueError("replications must be >= 30")
        if self.n_paths_price < 1000:
            raise ValueError("n_paths_price must be >= 1000")
        if self.n_paths_price > PRICING_STRIDE:
            raise ValueError(f"n_paths_price must be <= {PRICING_STRIDE}")
        if self.resolved_epsilon() <= 0:
            raise ValueError("epsilon must be positive")

    def resolved_epsilon(self) -> float:
        if isinstance(self.epsilon, str):
            if self.epsilon.replace(" ", "") != "1/sqrt(n)":
                raise ValueError(f"unknown epsilon rule {self.epsilon!r}")
            return 1.0 / np.sqrt(self.n_obs)
        return float(self.epsilon)

    def resolved_eps_smooth(self) -> float:
        # smoothing bias is bounded by e^{-rT} eps_smooth / 2, kept below
        # Monte Carlo noise at the default path counts
        return 1e-3 * self.strike if self.eps_smooth is None else self.eps_smooth

    def price_grid(self) -> TimeGrid:
        steps = self.n_grid_price if self.n_grid_price is not None else self.n_obs
        return TimeGrid(self.horizon, steps)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "theta0" in raw:
            raw = dict(raw)
            raw["theta0"] = tuple(raw["theta0"])
        return cls(**raw)


@dataclass(frozen=True)
class ReplicationRow:
    replication: int
    theta_hat: tuple
    h_hat: float
    h_se: float
    z_hat: float
    ci_low: float
    ci_high: float
    covered: bool


@dataclass(frozen=True)
class ExperimentOutput:
    config: ExperimentConfig
    rows: tuple
    z_values: Array
    summary: dict
    failures: tuple = field(default_factory=tuple)


def ks_statistic(samples) -> float:
    """Sup distance between the empirical CDF and the standard normal CDF."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n < 2:
        raise ValueError("need at least 2 samples")
    cdf = norm_cdf(x)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - cdf), np.max(cdf - grid_lo)))


def run_bs_experiment(config: ExperimentConfig) -> ExperimentOutput:
    """Replicated estimate-then-price study under geometric Brownian dynamics.

    Per replication: observe one Euler path of the model at theta0 on the
    observation grid, estimate (mu, sigma) in closed form, price the
    smoothed call at the estimate with fresh pricing paths, and record the
    normalized error (true-parameter C and I in the denominator) plus the
    estimate-based confidence interval.  Replication failures are recorded
    and tolerated up to 5% of R.
    """
    theta0 = np.asarray(config.theta0, dtype=float)
    eps = config.resolved_epsilon()
    root = config.root_seed
    model = bs_small_noise_model(theta0[0], theta0[1], eps, config.x0)
    system = build_derivative_system(model)
    functional = Functional(
        kind="smoothed_call_terminal",
        horizon=config.horizon,
        strike=config.strike,
        rate=config.rate,
        eps_smooth=config.resolved_eps_smooth(),
    )
    grid_price = config.price_grid()
    grid_obs = TimeGrid(config.obs_horizon, config.n_obs)
    rates = np.array([eps, 1.0 / np.sqrt(config.n_obs)])
    gamma_star = float(np.max(rates))

    # True-parameter ingredients of the normalization.
    c0, c0_se = estimate_C(
        model,
        system,
        functional,
        theta0,
        config.n_paths_correction,
        root,
        grid_price,
        start_index=IDX_CORRECTION,
    )
    info0 = fisher_info(model, theta0, deterministic_path(model, theta0, grid_obs))
    var0 = asymptotic_variance(c0, np.linalg.inv(info0), rates=rates)
    h0 = bs_call_closed_form(
        theta0, eps, config.x0, config.strike, config.rate, config.horizon
    )
    denom0 = float(np.sqrt(var0))

    rows = []
    z_values = []
    covered_count = 0
    failures = []
    for r in range(config.replications):
        try:
            bundle = sample_noise(grid_obs, NO_JUMPS, path_seed(root, IDX_OBSERVATION + r))
            obs_path = euler_path(model, theta0, bundle)
            est = bs_closed_form(
                Observations(grid=grid_obs, samples=obs_path.values, eps=eps)
            )
            theta_hat = est.theta
            if est.info is None:
                raise ValueError("degenerate estimate: sigma_hat = 0")
            c_hat, _, h_hat, h_se = estimate_C(
                model,
                system,
                functional,
                theta_hat,
                config.n_paths_price,
                root,
                grid_price,
                start_index=IDX_PRICING + r * PRICING_STRIDE,
                return_h=True,
            )
            z = float((h_hat - h0) / (gamma_star * denom0))
            var_hat = asymptotic_variance(c_hat, np.linalg.inv(est.info), rates=rates)
            ci = confidence_interval(h_hat, var_hat, gamma_star, config.alpha)
            covered = bool(ci[0] <= h0 <= ci[1])
        except (ValueError, RuntimeError) as exc:
            failures.append((r, str(exc)))
            continue
        covered_count += covered
        z_values.append(z)
        rows.append(
            ReplicationRow(
                replication=r,
                theta_hat=tuple(float(v) for v in theta_hat),
                h_hat=h_hat,
                h_se=h_se,
                z_hat=z,
                ci_low=ci[0],
                ci_high=ci[1],
                covered=covered,
            )
        )
    if len(failures) > 0.05 * config.replications:
        raise RuntimeError(
            f"{len(failures)} of {config.replications} replications failed; "
            f"first: {failures[0]}"
        )

    z_arr = np.asarray(z_values)
    summary = {
        "kind": "bs",
        "replications": config.replications,
        "failed": len(failures),
        "n_obs": config.n_obs,
        "epsilon": eps,
        "H_true": h0,
        "C_theta0": [float(v) for v in c0],
        "C_theta0_se": [float(v) for v in c0_se],
        "asy_var_theta0": var0,
        "asy_sd_theta0": denom0,
        "ks_statistic": ks_statistic(z_arr),
        "z_mean": float(np.mean(z_arr)),
        "z_sd": float(np.std(z_arr, ddof=1)),
        "coverage": covered_count / len(rows) if rows else float("nan"),
        "alpha": config.alpha,
    }
    return ExperimentOutput(
        config=config,
        rows=tuple(rows),
        z_values=z_arr,
        summary=summary,
        failures=tuple(failures),
    )


def run_ou_oracle(config: ExperimentConfig) -> dict:
    """Compare Monte Carlo pricing against the mean-reverting closed form.

    The discounted-integral value of the jump model has an explicit
    formula; the report holds the Monte Carlo estimate, the closed form,
    the correction vector against a central-difference gradient of the
    closed form, and their normalized gaps.
    """
    theta = np.asarray(config.theta0, dtype=float)
    mu, sigma, eta = theta
    if mu <= 0:
        raise ValueError("mu must be > 0")
    lam = config.jump_intensity
    model = ou_jump_model(mu, sigma, eta, lam, config.x0)
    system = build_derivative_system(model)
    functional = Functional(
        kind="discounted_integral", horizon=config.horizon, discount=config.discount
    )
    grid = config.price_grid()
    c_hat, c_se, h_mc, h_se = estimate_C(
        model,
        system,
        functional,
        theta,
        config.n_paths_correction,
        config.root_seed,
        grid,
        start_index=IDX_CORRECTION,
        return_h=True,
    )
    h_closed = ou_discounted_value(
        mu, eta, lam, config.discount, config.horizon, config.x0
    )

    def h_of(th):
        return ou_discounted_value(
            th[0], th[2], lam, config.discount, config.horizon, config.x0
        )

    grad = np.empty(3)
    for i in range(3):
        step = 1e-6 * max(1.0, abs(theta[i]))
        tp, tm = theta.copy(), theta.copy()
        tp[i] += step
        tm[i] -= step
        grad[i] = (h_of(tp) - h_of(tm)) / (2.0 * step)

    return {
        "kind": "ou_oracle",
        "theta": [float(v) for v in theta],
        "jump_intensity": lam,
        "H_closed_form": float(h_closed),
        "H_mc": h_mc,
        "H_mc_se": h_se,
        "H_abs_error": abs(h_mc - h_closed),
        "H_rel_error": abs(h_mc - h_closed) / abs(h_closed),
        "C_hat": [float(v) for v in c_hat],
        "C_se": [float(v) for v in c_se],
        "grad_H_closed_form": [float(v) for v in grad],
        "C_minus_grad": [float(a - b) for a, b in zip(c_hat, grad)],
    }


# ---------------------------------------------------------------------------
# File outputs (deterministic byte-for-byte given identical inputs)
# ---------------------------------------------------------------------------

HIST_EDGES = np.arange(-4.0, 4.0 + 0.25 / 2, 0.25)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def replications_csv(output: ExperimentOutput) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    p = len(output.rows[0].theta_hat) if output.rows else 0
    w.writerow(
        ["replication"]
        + [f"theta_hat_{i + 1}" for i in range(p)]
        + ["H_hat", "H_se", "z_hat", "ci_low", "ci_high", "covered"]
    )
    for row in output.rows:
        w.writerow(
            [row.replication]
            + [_fmt(v) for v in row.theta_hat]
            + [
                _fmt(row.h_hat),
                _fmt(row.h_se),
                _fmt(row.z_hat),
                _fmt(row.ci_low),
                _fmt(row.ci_high),
                _fmt(row.covered),
            ]
        )
    return buf.getvalue()


def qq_csv(z_values: Array) -> str:
    z = np.sort(np.asarray(z_values, dtype=float))
    n = z.size
    theo = norm_ppf((np.arange(1, n + 1) - 0.5) / n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theoretical", "empirical"])
    for t, e in zip(theo, z):
        w.writerow([_fmt(t), _fmt(e)])
    return buf.getvalue()


def histogram_csv(z_values: Array) -> str:
    counts, edges = np.histogram(z_values, bins=HIST_EDGES)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_left", "bin_right", "count"])
    for left, right, count in zip(edges[:-1], edges[1:], counts):
        w.writerow([_fmt(left), _fmt(right), str(int(count))])
    return buf.getvalue()


def write_experiment_outputs(output: ExperimentOutput, out_dir) -> dict:
    """Write replications.csv, summary.json, qq.csv, histogram.csv."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "replications.csv": replications_csv(output),
        "summary.json": json.dumps(output.summary, sort_keys=True, indent=2) + "\n",
        "qq.csv": qq_csv(output.z_values),
        "histogram.csv": histogram_csv(output.z_values),
    }
    for name, content in files.items():
        (out / name).write_text(content)
    return files


# ---------------------------------------------------------------------------
# JSON config -> model / functional
# ---------------------------------------------------------------------------


def model_from_config(raw: dict) -> JumpDiffusionModel:
    """Build a model from {model, params, epsilon, x0, jump:{intensity, mean}}."""
    name = raw.get("model")
    params = [float(v) for v in raw.get("params", ())]
    x0 = float(raw.get("x0", 1.0))
    jump = raw.get("jump", {})
    if name == "bs":
        mu, sigma = params
        return bs_small_noise_model(mu, sigma, float(raw["epsilon"]), x0)
    if name == "ou":
        mu, sigma, eta = params
        mean = jump.get("mean")
        if mean is not None and float(mean) != eta:
            raise ValueError("jump.mean must equal the eta parameter for the ou model")
        return ou_jump_model(mu, sigma, eta, float(jump.get("intensity", 1.0)), x0)
    if name == "levy":
        mu, sigma, eta = params
        return levy_model(mu, sigma, eta, x0)
    raise ValueError(f"unknown model {name!r} (expected bs, ou or levy)")


def functional_from_config(raw: dict) -> Functional:
    """Build a functional from {kind, K, r, T, delta, epsilon_smooth, V}."""
    return Functional(
        kind=raw["kind"],
        horizon=float(raw["T"]),
        strike=float(raw.get("K", 0.0)),
        rate=float(raw.get("r", 0.0)),
        eps_smooth=float(raw.get("epsilon_smooth", 0.0)),
        discount=float(raw.get("delta", 0.0)),
        v_name=raw.get("V", "identity"),
    )
