"""Parametric one-dimensional jump-diffusion models.

A model bundles the coefficient functions of

    dX_t = a(X_t, theta) dt + b(X_t, theta) dW_t
           + integral of c(X_{t-}, z, theta) against the compensated
             Poisson random measure of a compound-Poisson jump process,

together with their x- and theta-derivatives (needed to build the coupled
sensitivity system) and the jump law.  Coefficient derivatives are supplied
as closed-form callables, not produced by automatic differentiation; every
built-in model has them in closed form, and finite differences exist only
as test oracles.

Jump kernels are interpreted against the *compensated* measure, so the
drift `a` must already include any compensator contribution.  The exact
compensator integrals (``jump_comp`` and friends) are stored as functions
so the simulator never has to integrate the jump law at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Array = np.ndarray
Coef = Callable[..., Array]

__all__ = [
    "JumpSpec",
    "NO_JUMPS",
    "JumpDiffusionModel",
    "ValidationReport",
    "bs_small_noise_model",
    "ou_jump_model",
    "levy_model",
    "validate_model",
    "default_probe_grid",
    "grad_stack",
]


def grad_stack(x, *components) -> Array:
    """Stack per-parameter coefficient values into shape (p,) + broadcast shape.

    Components may be scalars or arrays broadcastable against x; this is
    how built-in models return theta-gradients that work for both scalar
    states and vectorized path batches.
    """
    shape = np.broadcast_shapes(np.shape(x), *(np.shape(c) for c in components))
    out = np.empty((len(components),) + shape, dtype=float)
    for i, comp in enumerate(components):
        out[i] = comp
    return out


@dataclass(frozen=True)
class JumpSpec:
    """Compound-Poisson jump specification with a known law.

    intensity : jumps per unit time (lambda >= 0)
    mean      : mean of the jump-size law, E[z]
    sampler   : draws `count` jump sizes from a numpy Generator; None only
                for the no-jump spec
    """

    intensity: float
    mean: float
    sampler: Callable[[np.random.Generator, int], Array] | None = None

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError(f"jump intensity must be >= 0, got {self.intensity}")
        if self.intensity > 0 and self.sampler is None:
            raise ValueError("positive jump intensity requires a size sampler")

    @property
    def kind(self) -> str:
        return "none" if self.intensity == 0.0 else "compound_poisson"

    @property
    def compensator_mean(self) -> float:
        """Integral of z against the Levy measure: intensity * E[z]."""
        return self.intensity * self.mean


NO_JUMPS = JumpSpec(intensity=0.0, mean=0.0, sampler=None)


@dataclass(frozen=True)
class JumpDiffusionModel:
    """Coefficients, derivatives and jump law of a parametric jump diffusion.

    All coefficient callables take (x, theta) — or (x, z, theta) for jump
    kernels — with x scalar or ndarray and theta a length-p vector.
    Theta-gradients return shape (p,) + shape(x).  ``epsilon`` is a
    structural noise scale (it is *not* a component of theta); models
    without a small-noise structure leave it at 1.
    """

    name: str
    p: int
    param_names: tuple[str, ...]
    initial: Callable[[Array], float]
    initial_grad: Callable[[Array], Array]
    drift: Coef
    diffusion: Coef
    drift_dx: Coef
    diffusion_dx: Coef
    drift_dtheta: Coef
    diffusion_dtheta: Coef
    param_box: Array
    growth_const: float
    theta0: Array
    epsilon: float = 1.0
    jump: JumpSpec = NO_JUMPS
    jump_kernel: Coef | None = None
    jump_dx: Coef | None = None
    jump_dtheta: Coef | None = None
    jump_comp: Coef | None = None
    jump_dx_comp: Coef | None = None
    jump_dtheta_comp: Coef | None = None

    def __post_init__(self):
        box = np.asarray(self.param_box, dtype=float)
        if box.shape != (self.p, 2):
            raise ValueError(f"param_box must have shape ({self.p}, 2)")
        object.__setattr__(self, "param_box", box)
        object.__setattr__(self, "theta0", np.asarray(self.theta0, dtype=float))
        if self.jump.intensity > 0 and self.jump_kernel is None:
            raise ValueError("model has jumps but no jump kernel")

    @property
    def has_jumps(self) -> bool:
        return self.jump.intensity > 0

    def in_box(self, theta: Array) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(
            theta.shape == (self.p,)
            and np.all(np.isfinite(theta))
            and np.all(theta >= self.param_box[:, 0])
            and np.all(theta <= self.param_box[:, 1])
        )

    def require_theta(self, theta) -> Array:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.p,):
            raise ValueError(f"{self.name}: theta must have dimension {self.p}")
        if not self.in_box(theta):
            raise ValueError(f"{self.name}: theta {theta} outside parameter box")
        return theta

    def unit_diffusion(self, x, theta) -> Array:
        """Diffusion coefficient with the structural noise scale divided out."""
        return self.diffusion(x, theta) / self.epsilon

    def unit_diffusion_dtheta(self, x, theta) -> Array:
        return self.diffusion_dtheta(x, theta) / self.epsilon


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    n_probes: int
    violations: tuple[str, ...] = field(default_factory=tuple)


def _check_finite(name: str, value, probe) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"non-finite {name} at probe {probe}: {value}")


def validate_model(model: JumpDiffusionModel, probe_points) -> ValidationReport:
    """Spot-check linear-growth bounds and finiteness on probe points.

    Each probe is a tuple (x, z, theta).  Checks, with the model's declared
    growth constant kappa:

        |a| + |b| <= kappa * (1 + |x|)
        |c|       <= kappa * |z| * (1 + |x|)

    and that every coefficient (and derivative) is finite.  Passing is
    necessary, not sufficient.  A non-finite coefficient raises; growth
    violations are collected into the report.
    """
    kappa = model.growth_const
    violations: list[str] = []
    n = 0
    for probe in probe_points:
        x, z, theta = probe
        theta = model.require_theta(theta)
        if not (np.isfinite(x) and np.isfinite(z)):
            raise ValueError(f"non-finite probe point {probe}")
        n += 1
        a = model.drift(x, theta)
        b = model.diffusion(x, theta)
        _check_finite("drift", a, probe)
        _check_finite("diffusion", b, probe)
        _check_finite("drift_dx", model.drift_dx(x, theta), probe)
        _check_finite("diffusion_dx", model.diffusion_dx(x, theta), probe)
        _check_finite("drift_dtheta", model.drift_dtheta(x, theta), probe)
        _check_finite("diffusion_dtheta", model.diffusion_dtheta(x, theta), probe)
        if abs(a) + abs(b) > kappa * (1.0 + abs(x)) + 1e-12:
            violations.append(
                f"|a|+|b| = {abs(a) + abs(b):.6g} exceeds "
                f"kappa*(1+|x|) = {kappa * (1 + abs(x)):.6g} at {probe}"
            )
        if model.jump_kernel is not None:
            c = model.jump_kernel(x, z, theta)
            _check_finite("jump_kernel", c, probe)
            _check_finite("jump_dx", model.jump_dx(x, z, theta), probe)
            _check_finite("jump_dtheta", model.jump_dtheta(x, z, theta), probe)
            if abs(c) > kappa * abs(z) * (1.0 + abs(x)) + 1e-12:
                violations.append(
                    f"|c| = {abs(c):.6g} exceeds kappa*|z|*(1+|x|) = "
                    f"{kappa * abs(z) * (1 + abs(x)):.6g} at {probe}"
                )
    return ValidationReport(ok=not violations, n_probes=n, violations=tuple(violations))


def default_probe_grid(model: JumpDiffusionModel, n_x: int = 25):
    """Probe grid at the model's reference parameter.

    x ranges over a symmetric grid around the initial value; z stays away
    from the origin, where kernels with an additive shift cannot satisfy a
    |z|-proportional bound.
    """
    x0 = model.initial(model.theta0)
    xs = np.linspace(-4.0 * abs(x0) - 1.0, 4.0 * abs(x0) + 1.0, n_x)
    zs = (0.5, -0.5, 1.0, -2.0)
    return [(float(x), float(z), model.theta0) for x in xs for z in zs]


# ---------------------------------------------------------------------------
# Built-in models
# ---------------------------------------------------------------------------


def bs_small_noise_model(
    mu: float, sigma: float, eps: float, x0: float
) -> JumpDiffusionModel:
    """Black-Scholes dynamics with a small structural noise scale.

        dX = mu X dt + eps * sigma X dW,   X_0 = x0,  theta = (mu, sigma)

    eps is a known constant (typically 1/sqrt(n) for n observations), not a
    parameter.  eps = 0 degenerates to the exponential-growth ODE.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if eps < 0:
        raise ValueError(f"eps must be >= 0, got {eps}")
    if x0 <= 0:
        raise ValueError(f"x0 must be > 0, got {x0}")

    theta0 = np.array([mu, sigma], dtype=float)
    box = np.array([[-5.0, 5.0], [1e-8, 10.0]])
    if not (box[0, 0] <= mu <= box[0, 1]):
        raise ValueError(f"mu {mu} outside supported range {box[0]}")

    return JumpDiffusionModel(
        name="bs_small_noise",
        p=2,
        param_names=("mu", "sigma"),
        initial=lambda th: x0,
        initial_grad=lambda th: np.zeros(2),
        drift=lambda x, th: th[0] * np.asarray(x, dtype=float),
        diffusion=lambda x, th: eps * th[1] * np.asarray(x, dtype=float),
        drift_dx=lambda x, th: th[0] + 0.0 * np.asarray(x, dtype=float),
        diffusion_dx=lambda x, th: eps * th[1] + 0.0 * np.asarray(x, dtype=float),
        drift_dtheta=lambda x, th: grad_stack(x, x, 0.0),
        diffusion_dtheta=lambda x, th: grad_stack(x, 0.0, eps * np.asarray(x, dtype=float)),
        param_box=box,
        growth_const=abs(mu) + eps * sigma,
        theta0=theta0,
        epsilon=eps,
    )


def ou_jump_model(
    mu: float,
    sigma: float,
    eta: float,
    lam: float,
    x0: float,
    jump_sd: float = 0.25,
) -> JumpDiffusionModel:
    """Mean-reverting diffusion with compound-Poisson jumps of mean eta.

        dX = -mu X dt + sigma dW + dZ_t,   theta = (mu, sigma, eta)

    where Z is compound Poisson with intensity lam and jump sizes of mean
    eta.  Written against the centred jump measure (sizes z with E[z] = 0,
    actual jumps z + eta), the compensated form has drift
    -mu x + lam * eta and kernel c(x, z, theta) = z + eta.  The centred
    size law is Normal(0, jump_sd^2).
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0 (closed forms divide by mu), got {mu}")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")

    theta0 = np.array([mu, sigma, eta], dtype=float)
    box = np.array([[1e-8, 20.0], [0.0, 10.0], [-10.0, 10.0]])

    if lam > 0:
        spec = JumpSpec(
            intensity=lam,
            mean=0.0,
            sampler=lambda rng, count: rng.normal(0.0, jump_sd, count),
        )
    else:
        spec = NO_JUMPS

    # kappa covers |a|+|b| <= max(mu, lam|eta|+sigma)(1+|x|) and, away from
    # z = 0 (probes use |z| >= 0.5), |z + eta| <= (1 + 2|eta|)|z|.
    kappa = max(mu, lam * abs(eta) + sigma, 1.0 + 2.0 * abs(eta))

    def jump_kernel(x, z, th):
        return np.asarray(z, dtype=float) + th[2] + 0.0 * np.asarray(x, dtype=float)

    return JumpDiffusionModel(
        name="ou_jump",
        p=3,
        param_names=("mu", "sigma", "eta"),
        initial=lambda th: x0,
        initial_grad=lambda th: np.zeros(3),
        drift=lambda x, th: -th[0] * np.asarray(x, dtype=float) + lam * th[2],
        diffusion=lambda x, th: th[1] + 0.0 * np.asarray(x, dtype=float),
        drift_dx=lambda x, th: -th[0] + 0.0 * np.asarray(x, dtype=float),
        diffusion_dx=lambda x, th: 0.0 * np.asarray(x, dtype=float),
        drift_dtheta=lambda x, th: grad_stack(x, -np.asarray(x, dtype=float), 0.0, lam),
        diffusion_dtheta=lambda x, th: grad_stack(x, 0.0, 1.0, 0.0),
        param_box=box,
        growth_const=kappa,
        theta0=theta0,
        jump=spec,
        jump_kernel=jump_kernel if lam > 0 else None,
        jump_dx=(
            lambda x, z, th: 0.0 * np.asarray(x, dtype=float) * np.asarray(z, dtype=float)
        )
        if lam > 0
        else None,
        jump_dtheta=(
            lambda x, z, th: grad_stack(
                0.0 * np.asarray(x, dtype=float) * np.asarray(z, dtype=float),
                0.0,
                0.0,
                1.0,
            )
        )
        if lam > 0
        else None,
        jump_comp=(lambda x, th: lam * th[2] + 0.0 * np.asarray(x, dtype=float))
        if lam > 0
        else None,
        jump_dx_comp=(lambda x, th: 0.0 * np.asarray(x, dtype=float)) if lam > 0 else None,
        jump_dtheta_comp=(lambda x, th: grad_stack(x, 0.0, 0.0, lam)) if lam > 0 else None,
    )


def levy_model(mu: float, sigma: float, eta: float, x0: float) -> JumpDiffusionModel:
    """Levy process X_t = x0 + mu t + sigma W_t + eta S_t, theta = (mu, sigma, eta).

    S is a fixed unit-mean compound Poisson process (intensity 1,
    Exponential(1) jump sizes), so all coefficients are affine in theta and
    independent of x: compensated drift mu + eta, kernel eta z.  The
    sensitivity process is exactly (t, W_t, S_t) and the parameter coupling
    is exact path by path.
    """
    if eta == 0:
        raise ValueError("eta must be nonzero")
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")

    theta0 = np.array([mu, sigma, eta], dtype=float)
    box = np.array([[-10.0, 10.0], [0.0, 10.0], [-10.0, 10.0]])

    spec = JumpSpec(
        intensity=1.0,
        mean=1.0,
        sampler=lambda rng, count: rng.exponential(1.0, count),
    )

    return JumpDiffusionModel(
        name="levy",
        p=3,
        param_names=("mu", "sigma", "eta"),
        initial=lambda th: x0,
        initial_grad=lambda th: np.zeros(3),
        drift=lambda x, th: th[0] + th[2] + 0.0 * np.asarray(x, dtype=float),
        diffusion=lambda x, th: th[1] + 0.0 * np.asarray(x, dtype=float),
        drift_dx=lambda x, th: 0.0 * np.asarray(x, dtype=float),
        diffusion_dx=lambda x, th: 0.0 * np.asarray(x, dtype=float),
        drift_dtheta=lambda x, th: grad_stack(x, 1.0, 0.0, 1.0),
        diffusion_dtheta=lambda x, th: grad_stack(x, 0.0, 1.0, 0.0),
        param_box=box,
        growth_const=abs(mu + eta) + sigma + abs(eta),
        theta0=theta0,
        jump=spec,
        jump_kernel=lambda x, z, th: th[2] * np.asarray(z, dtype=float)
        + 0.0 * np.asarray(x, dtype=float),
        jump_dx=lambda x, z, th: 0.0
        * np.asarray(x, dtype=float)
        * np.asarray(z, dtype=float),
        jump_dtheta=lambda x, z, th: grad_stack(x, 0.0, 0.0, np.asarray(z, dtype=float)),
        jump_comp=lambda x, th: th[2] + 0.0 * np.asarray(x, dtype=float),
        jump_dx_comp=lambda x, th: 0.0 * np.asarray(x, dtype=float),
        jump_dtheta_comp=lambda x, th: grad_stack(x, 0.0, 0.0, 1.0),
    )
