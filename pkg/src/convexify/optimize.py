"""Projected gradient descent over the ball ``||w||_H4 < R`` with fixed lateral data."""
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, InfeasibleDataError
from .functional import clamped_mask, evaluate_J, gradient_J

PRECONDITIONERS = ("none", "riesz")


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient-descent settings.

    ``preconditioner='riesz'`` replaces the nodal gradient by its ``H^4``
    Riesz representer on the free nodes.
    """

    max_iter: int = 500
    grad_tol: float = 1e-10
    step0: float = 1.0
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4
    growth: float = 2.0
    min_step: float = 1e-30
    restarts: int = 5
    start: str = "zero"
    preconditioner: str = "riesz"
    smoothing_passes: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.step0 <= 0:
            raise ConfigurationError("step0 must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigurationError("backtrack must lie in (0, 1)")
        if not 0 < self.sufficient_decrease <= 0.5:
            raise ConfigurationError("sufficient_decrease must lie in (0, 0.5]")
        if self.start not in ("zero", "random", "given"):
            raise ConfigurationError(f"unknown start mode {self.start!r}")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigurationError(f"unknown preconditioner {self.preconditioner!r}")


def smooth_cutoff(x1, cutoff):
    """C^2 quintic cutoff: 1 on ``[0, cutoff/2]``, 0 on ``[cutoff, inf)``."""
    s = np.clip((np.asarray(x1) - 0.5 * cutoff) / (0.5 * cutoff), 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def build_boundary_lift(tt, grid, cutoff=None):
    """``(g1~ + x1 g2~) chi(x1)`` broadcast over the box."""
    if cutoff is None:
        cutoff = 0.5 * (grid.spec.d - grid.spec.a)
    if tt.g1.shape != grid.shape[1:]:
        raise ConfigurationError(
            f"transformed traces have shape {tt.g1.shape}, face needs {grid.shape[1:]}")
    x1 = grid.axes[0].reshape((-1,) + (1,) * (len(grid.shape) - 1))
    return (tt.g1[None] + x1 * tt.g2[None]) * smooth_cutoff(x1, cutoff)


def project_to_ball(z, W_bc, R, h4):
    """Scale ``z`` along its ray so that ``||W_bc + theta z||_H4 <= R``.

    Returns ``(z_projected, theta)``.
    """
    ww = h4.inner(W_bc, W_bc)
    if ww > R * R:
        raise InfeasibleDataError(
            f"boundary lift has H4 norm {np.sqrt(ww):.6g} > R = {R:g}; enlarge R")
    wz = h4.inner(W_bc, z)
    zz = h4.inner(z, z)
    if ww + 2.0 * wz + zz <= R * R:
        return z, 1.0
    # positive root of zz th^2 + 2 wz th + (ww - R^2) = 0, cancellation-free form
    c = ww - R * R
    disc = np.sqrt(wz * wz - zz * c)
    theta = -c / (wz + disc) if wz >= 0 else (disc - wz) / zz
    return theta * z, float(theta)


def neighbor_average(z, passes):
    for _ in range(passes):
        acc = z.copy()
        count = np.ones_like(z)
        for ax in range(z.ndim):
            lo = [slice(None)] * z.ndim
            hi = [slice(None)] * z.ndim
            lo[ax] = slice(None, -1)
            hi[ax] = slice(1, None)
            acc[tuple(hi)] += z[tuple(lo)]
            count[tuple(hi)] += 1
            acc[tuple(lo)] += z[tuple(hi)]
            count[tuple(lo)] += 1
        z = acc / count
    return z


def random_start(W_bc, R, h4, rng, passes=3, fraction=0.9):
    """Smoothed uniform noise on the free nodes with ``||W_bc + z||_H4 = fraction R``."""
    grid = h4.grid
    free = ~clamped_mask(grid)
    z = neighbor_average(rng.uniform(-1.0, 1.0, grid.shape), passes)
    z = np.where(free, z, 0.0)
    target = fraction * R
    ww, wz, zz = h4.inner(W_bc, W_bc), h4.inner(W_bc, z), h4.inner(z, z)
    if ww >= target**2:
        raise InfeasibleDataError("boundary lift already exceeds the start radius")
    c = ww - target**2
    theta = (-wz + np.sqrt(wz * wz - zz * c)) / zz
    return theta * z


@dataclass
class OptimizationResult:
    w: np.ndarray
    z: np.ndarray
    history: list = field(default_factory=list)
    timings_ms: list = field(default_factory=list)
    converged: bool = False
    message: str = ""

    @property
    def final_J(self):
        return self.history[-1]["J"]

    @property
    def iterations(self):
        return self.history[-1]["iter"]


def minimize_gradient_descent(ctx, W_bc, z0=None, config=None):
    """Projected (optionally Riesz-preconditioned) gradient descent with Armijo backtracking.

    The first two x1-layers of ``z`` stay zero so ``w = W_bc + z`` keeps the
    Dirichlet and first-order Neumann data. The trial step starts from the
    previous accepted step times ``config.growth``.
    """
    config = config or OptimizerConfig()
    grid = ctx.grid
    free = ~clamped_mask(grid)
    R = ctx.tikhonov.R
    if z0 is None:
        z = np.zeros(grid.shape)
    elif np.any(z0[~free] != 0):
        raise ConfigurationError("z0 must vanish on the clamped layers")
    else:
        z = np.array(z0, dtype=float)
    z, _ = project_to_ball(z, W_bc, R, ctx.h4)

    clock = time.perf_counter()
    w = W_bc + z
    J = evaluate_J(w, ctx)
    result = OptimizationResult(w=w, z=z)
    step = config.step0
    for it in range(config.max_iter + 1):
        g = gradient_J(w, ctx, free)
        gnorm = float(np.linalg.norm(g))
        result.history.append({"iter": it, "J": J, "grad_norm": gnorm,
                               "step": step if it else 0.0})
        result.timings_ms.append(1e3 * (time.perf_counter() - clock))
        if gnorm <= config.grad_tol:
            result.converged = True
            result.message = "gradient tolerance reached"
            break
        if it == config.max_iter:
            result.message = "maximum iterations reached"
            break
        d = ctx.riesz_solve(g, free) if config.preconditioner == "riesz" else g
        step = min(step * config.growth, 1e300)
        while True:
            z_try, _ = project_to_ball(z - step * d, W_bc, R, ctx.h4)
            w_try = W_bc + z_try
            J_try = evaluate_J(w_try, ctx)
            if J_try <= J - config.sufficient_decrease * float(np.sum(g * (z - z_try))):
                break
            step *= config.backtrack
            if step < config.min_step:
                result.message = "line search failed: step underflow"
                result.w, result.z = w, z
                return result
        z, w, J = z_try, w_try, J_try
        result.w, result.z = w, z
    result.w, result.z = w, z
    return result
