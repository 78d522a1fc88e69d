"""Seeded path generation for jump diffusions.

Everything here is deterministic given a seed.  A root seed expands to
per-path seeds through a counter-based scheme (the 128-bit Philox key is
root in the high 64 bits, path counter in the low 64), so Monte Carlo
batches are reproducible regardless of chunking or evaluation order, and
a single path's driving noise can be regenerated in isolation.

The Euler step applied everywhere (single paths and vectorized batches
share one stepper) is

    X_{k+1} = X_k + a(X_k) dt + b(X_k) dW_k
              + sum of c(X_k, z_j) over jumps in (t_k, t_{k+1}]
              - dt * integral of c(X_k, z) against the jump measure,

i.e. jumps enter with the left-limit state and the compensator drift is
evaluated in closed form from the model.  The coupled sensitivity system
is advanced jointly on the same grid from the same noise; its Euler
iterates are the exact theta-derivatives of the Euler iterates of X.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import JumpDiffusionModel, JumpSpec

Array = np.ndarray

__all__ = [
    "TimeGrid",
    "NoiseBundle",
    "Path",
    "CoupledPaths",
    "SimulationBlowup",
    "path_seed",
    "sample_noise",
    "euler_path",
    "coupled_paths",
    "simulate_batch",
    "BatchResult",
    "coupling_residual_supnorms",
    "sup_norm_moment",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * horizon / steps on [0, horizon]."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not (self.horizon > 0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> Array:
        return np.linspace(0.0, self.horizon, self.steps + 1)


@dataclass(frozen=True)
class NoiseBundle:
    """One path's driving randomness, reusable across parameter values.

    brownian_increments has one N(0, dt) draw per step; jump_times are
    sorted in (0, horizon]; jump_sizes pair with them one to one.
    Regenerating from the same seed reproduces the bundle bit for bit.
    """

    seed: int
    grid: TimeGrid
    brownian_increments: Array
    jump_times: Array
    jump_sizes: Array

    def jump_step_indices(self) -> Array:
        """Step k such that the jump time lies in (t_k, t_{k+1}]."""
        if self.jump_times.size == 0:
            return np.empty(0, dtype=np.int64)
        k = np.ceil(self.jump_times / self.grid.dt).astype(np.int64) - 1
        return np.clip(k, 0, self.grid.steps - 1)


@dataclass(frozen=True)
class Path:
    grid: TimeGrid
    values: Array

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class CoupledPaths:
    """(X at theta, X at theta + u, sensitivity Y at theta) on one grid."""

    grid: TimeGrid
    x: Array
    x_shift: Array
    y: Array  # shape (steps + 1, p)

    def residual(self, u: Array) -> Array:
        return self.x_shift - self.x - self.y @ np.asarray(u, dtype=float)

    def residual_sup_norm(self, u: Array) -> float:
        return float(np.max(np.abs(self.residual(u))))


class SimulationBlowup(RuntimeError):
    """Path state became non-finite (coefficient blow-up)."""

    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"non-finite state at step {step}{detail}")


def path_seed(root_seed: int, index: int) -> int:
    """Counter-based per-path seed: root in high 64 bits, counter in low."""
    if root_seed < 0 or index < 0:
        raise ValueError("root_seed and index must be non-negative")
    return ((root_seed & _MASK64) << 64) | (index & _MASK64)


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


def _draw_noise(gen: np.random.Generator, grid: TimeGrid, jump: JumpSpec):
    """Fixed draw order shared by single-bundle and batch generation."""
    increments = gen.normal(0.0, np.sqrt(grid.dt), grid.steps)
    if jump.intensity > 0:
        count = int(gen.poisson(jump.intensity * grid.horizon))
        times = np.sort(gen.uniform(0.0, grid.horizon, count))
        sizes = jump.sampler(gen, count)
    else:
        times = np.empty(0)
        sizes = np.empty(0)
    return increments, times, sizes


def sample_noise(grid: TimeGrid, jump: JumpSpec, seed: int) -> NoiseBundle:
    """Realize Brownian increments and compound-Poisson jumps for one path."""
    increments, times, sizes = _draw_noise(_generator(seed), grid, jump)
    return NoiseBundle(
        seed=seed,
        grid=grid,
        brownian_increments=increments,
        jump_times=times,
        jump_sizes=sizes,
    )


# ---------------------------------------------------------------------------
# Core stepper (shared by single-path and batch simulation)
# ---------------------------------------------------------------------------


@dataclass
class BatchResult:
    """Streaming per-path reductions over a batch of simulated paths.

    Arrays are per path; Y-blocks have shape (B, p).  Fields are None when
    the corresponding quantity was not requested.
    """

    x_terminal: Array
    trap_x: Array | None = None
    disc_v: Array | None = None
    y_terminal: Array | None = None
    trap_y: Array | None = None
    disc_vy: Array | None = None
    x_shift_terminal: Array | None = None
    residual_sup: Array | None = None


def _flat_jumps(times_list, sizes_list, dt, n_steps):
    """Flatten per-path jump lists into step-sorted parallel arrays."""
    counts = np.array([t.size for t in times_list], dtype=np.int64)
    total = int(counts.sum())
    if total == 0:
        return None
    paths = np.repeat(np.arange(len(times_list), dtype=np.int64), counts)
    times = np.concatenate(times_list)
    sizes = np.concatenate(sizes_list)
    steps = np.clip(np.ceil(times / dt).astype(np.int64) - 1, 0, n_steps - 1)
    order = np.argsort(steps, kind="stable")
    steps = steps[order]
    return steps, paths[order], sizes[order], np.searchsorted(steps, np.arange(n_steps + 1))


def _step_block(
    model: JumpDiffusionModel,
    theta: Array,
    grid: TimeGrid,
    increments: Array,  # (steps, m), one column per step after transpose
    jumps,  # output of _flat_jumps or None
    *,
    system=None,
    theta_shift: Array | None = None,
    disc: tuple | None = None,  # (delta, V, V_prime)
    want_trap: bool = False,
    record: bool = False,
    path_offset: int = 0,
):
    """Advance a block of m paths over the full grid.

    Returns (BatchResult, recorded) where recorded is (x, x_shift, y) full
    path arrays when record=True (small blocks only).
    """
    n, m = increments.shape
    dt = grid.dt
    x0 = model.initial(theta)
    x = np.full(m, float(x0))
    has_jumps = model.has_jumps

    y = None
    if system is not None:
        y = np.tile(np.asarray(system.initial(theta), dtype=float), (m, 1))  # (m, p)
    xs = None
    if theta_shift is not None:
        xs = np.full(m, float(model.initial(theta_shift)))

    if want_trap:
        trap_x = x * (0.5 * dt)
        trap_y = y * (0.5 * dt) if y is not None else None
    if disc is not None:
        delta, v_fn, vp_fn = disc
        disc_w = np.exp(-delta * grid.times())  # e^{-delta t_k}, k = 0..n
        disc_v = disc_w[0] * v_fn(x) * (0.5 * dt)
        disc_vy = disc_w[0] * (vp_fn(x) * y.T).T * (0.5 * dt) if y is not None else None

    res_sup = None
    if xs is not None and y is not None:
        u = np.asarray(theta_shift, dtype=float) - np.asarray(theta, dtype=float)
        res_sup = np.abs(xs - x - y @ u)

    if record:
        rec_x = np.empty((n + 1, m))
        rec_x[0] = x
        rec_y = None
        if y is not None:
            rec_y = np.empty((n + 1, m, y.shape[1]))
            rec_y[0] = y
        rec_xs = None
        if xs is not None:
            rec_xs = np.empty((n + 1, m))
            rec_xs[0] = xs

    for k in range(n):
        dw = increments[k]
        x_prev = x

        x = x_prev + model.drift(x_prev, theta) * dt + model.diffusion(x_prev, theta) * dw
        if has_jumps:
            x = x - model.jump_comp(x_prev, theta) * dt

        if y is not None:
            yp = y
            y = (
                yp
                + system.A(x_prev, yp.T, theta).T * dt
                + system.B(x_prev, yp.T, theta).T * dw[:, None]
            )
            if has_jumps:
                y = y - system.C_comp(x_prev, yp.T, theta).T * dt

        if xs is not None:
            xs_prev = xs
            xs = (
                xs_prev
                + model.drift(xs_prev, theta_shift) * dt
                + model.diffusion(xs_prev, theta_shift) * dw
            )
            if has_jumps:
                xs = xs - model.jump_comp(xs_prev, theta_shift) * dt

        if jumps is not None:
            steps_j, paths_j, sizes_j, bounds = jumps
            lo, hi = bounds[k], bounds[k + 1]
            if hi > lo:
                pj = paths_j[lo:hi]
                zj = sizes_j[lo:hi]
                xj = x_prev[pj]
                np.add.at(x, pj, model.jump_kernel(xj, zj, theta))
                if y is not None:
                    np.add.at(y, pj, system.C(xj, yp[pj].T, zj, theta).T)
                if xs is not None:
                    np.add.at(xs, pj, model.jump_kernel(xs_prev[pj], zj, theta_shift))

        if not np.all(np.isfinite(x)):
            bad = int(np.flatnonzero(~np.isfinite(x))[0])
            raise SimulationBlowup(k + 1, detail=f" (path index {path_offset + bad})")

        last = k == n - 1
        if want_trap:
            trap_x = trap_x + x * (0.5 * dt if last else dt)
            if trap_y is not None:
                trap_y = trap_y + y * (0.5 * dt if last else dt)
        if disc is not None:
            w = disc_w[k + 1] * (0.5 * dt if last else dt)
            disc_v = disc_v + w * v_fn(x)
            if disc_vy is not None:
                disc_vy = disc_vy + w * (vp_fn(x) * y.T).T
        if res_sup is not None:
            np.maximum(res_sup, np.abs(xs - x - y @ u), out=res_sup)

        if record:
            rec_x[k + 1] = x
            if rec_y is not None:
                rec_y[k + 1] = y
            if rec_xs is not None:
                rec_xs[k + 1] = xs

    result = BatchResult(
        x_terminal=x,
        trap_x=trap_x if want_trap else None,
        trap_y=trap_y if (want_trap and y is not None) else None,
        disc_v=disc_v if disc is not None else None,
        disc_vy=disc_vy if (disc is not None and y is not None) else None,
        y_terminal=y,
        x_shift_terminal=xs,
        residual_sup=res_sup,
    )
    recorded = None
    if record:
        recorded = (rec_x, rec_xs, rec_y)
    return result, recorded


def _bundle_jumps(bundle: NoiseBundle):
    if bundle.jump_times.size == 0:
        return None
    return _flat_jumps(
        [bundle.jump_times], [bundle.jump_sizes], bundle.grid.dt, bundle.grid.steps
    )


def euler_path(model: JumpDiffusionModel, theta, noise: NoiseBundle) -> Path:
    """Euler-Maruyama path of X under theta on the bundle's grid."""
    theta = model.require_theta(theta)
    inc = noise.brownian_increments[:, None]
    _, recorded = _step_block(
        model, theta, noise.grid, inc, _bundle_jumps(noise), record=True
    )
    return Path(grid=noise.grid, values=recorded[0][:, 0])


def coupled_paths(
    model: JumpDiffusionModel, system, theta, u, noise: NoiseBundle
) -> CoupledPaths:
    """Advance (X at theta, X at theta + u, Y at theta) from one noise bundle."""
    theta = model.require_theta(theta)
    u = np.asarray(u, dtype=float)
    theta_shift = model.require_theta(theta + u)
    inc = noise.brownian_increments[:, None]
    _, recorded = _step_block(
        model,
        theta,
        noise.grid,
        inc,
        _bundle_jumps(noise),
        system=system,
        theta_shift=theta_shift,
        record=True,
    )
    rec_x, rec_xs, rec_y = recorded
    return CoupledPaths(
        grid=noise.grid, x=rec_x[:, 0], x_shift=rec_xs[:, 0], y=rec_y[:, 0, :]
    )


def simulate_batch(
    model: JumpDiffusionModel,
    theta,
    grid: TimeGrid,
    root_seed: int,
    n_paths: int,
    *,
    start_index: int = 0,
    system=None,
    theta_shift=None,
    disc: tuple | None = None,
    want_trap: bool = False,
    chunk_size: int = 4096,
) -> BatchResult:
    """Simulate n_paths seeded paths and return streaming reductions.

    Path i uses seed path_seed(root_seed, start_index + i); results are
    identical for any chunk_size.  See _step_block for what is tracked.
    """
    theta = model.require_theta(theta)
    if theta_shift is not None:
        theta_shift = model.require_theta(theta_shift)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")

    pieces: list[BatchResult] = []
    done = 0
    while done < n_paths:
        m = min(chunk_size, n_paths - done)
        increments = np.empty((m, grid.steps))
        times_list = []
        sizes_list = []
        for i in range(m):
            gen = _generator(path_seed(root_seed, start_index + done + i))
            inc, times, sizes = _draw_noise(gen, grid, model.jump)
            increments[i] = inc
            times_list.append(times)
            sizes_list.append(sizes)
        jumps = (
            _flat_jumps(times_list, sizes_list, grid.dt, grid.steps)
            if model.has_jumps
            else None
        )
        res, _ = _step_block(
            model,
            theta,
            grid,
            np.ascontiguousarray(increments.T),
            jumps,
            system=system,
            theta_shift=theta_shift,
            disc=disc,
            want_trap=want_trap,
            path_offset=done,
        )
        pieces.append(res)
        done += m

    def cat(attr):
        vals = [getattr(p, attr) for p in pieces]
        return None if vals[0] is None else np.concatenate(vals)

    return BatchResult(
        x_terminal=cat("x_terminal"),
        trap_x=cat("trap_x"),
        disc_v=cat("disc_v"),
        y_terminal=cat("y_terminal"),
        trap_y=cat("trap_y"),
        disc_vy=cat("disc_vy"),
        x_shift_terminal=cat("x_shift_terminal"),
        residual_sup=cat("residual_sup"),
    )


def coupling_residual_supnorms(
    model: JumpDiffusionModel, system, theta, u, grid: TimeGrid, root_seed: int, n_paths: int
) -> Array:
    """Sup-norm over grid nodes of X^{theta+u} - X^theta - u.Y per path."""
    if n_paths < 100:
        raise ValueError("need at least 100 paths for a usable moment estimate")
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u, dtype=float)
    res = simulate_batch(
        model,
        theta,
        grid,
        root_seed,
        n_paths,
        system=system,
        theta_shift=theta + u,
    )
    return res.residual_sup


def sup_norm_moment(residual_sup_norms: Array, p: float) -> tuple[float, float]:
    """Sample mean and standard error of the p-th power of sup-norm residuals."""
    if p not in (1, 2, 4):
        raise ValueError(f"p must be one of 1, 2, 4; got {p}")
    v = np.asarray(residual_sup_norms, dtype=float) ** p
    est = float(np.mean(v))
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return est, se
