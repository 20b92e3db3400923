"""End-to-end runs: oracle data, inversion from several starts, sweeps."""
from dataclasses import dataclass, field

import numpy as np

from .config import build_optimizer, build_spec
from .exceptions import ConfigurationError
from .forward import add_noise, evolve_two_sided, extract_traces
from .functional import FunctionalContext
from .geometry import CarlemanParams, build_domain
from .model import CoefficientSet, TikhonovParams, oracle_eigenmode, oracle_separable, restrict
from .optimize import build_boundary_lift, minimize_gradient_descent, random_start
from .recover import error_metrics, recover_coefficient
from .transform import derive_transformed_traces


def separable_profile(x1, *xbar):
    return 2.0 + np.sin(x1) + 0.1 * sum(x * x for x in xbar)


def eigenmode_profile(x1, *xbar):
    return 1.0 + 0.5 * np.sin(2.0 * np.pi * x1) + 0.0 * sum(xbar)


@dataclass
class Problem:
    """Grid, exact solution and the coefficients the inverter is allowed to see."""

    cfg: dict
    grid: object
    oracle: object
    coeffs: CoefficientSet

    @property
    def c_true(self):
        return self.coeffs.c_true

    def w_true(self):
        w = self.oracle.w(self.grid.t)
        return restrict(w, self.oracle.space_axes + (self.grid.t,), self.grid.axes)


def build_problem(cfg):
    spec = build_spec(cfg)
    grid = build_domain(spec)
    if cfg["forward.generator"] == "separable":
        oracle = oracle_separable(spec, separable_profile, mu=cfg["forward.mu"],
                                  b_lower=cfg["forward.b_lower"])
    elif cfg["forward.generator"] == "eigenmode":
        oracle = oracle_eigenmode(spec, eigenmode_profile, num_modes=cfg["forward.num_modes"],
                                  gamma=cfg["forward.gamma"],
                                  exponent_cap=cfg["forward.exponent_cap"],
                                  pad=cfg["forward.pad"], b_lower=cfg["forward.b_lower"])
    else:
        raise ConfigurationError(f"unknown generator {cfg['forward.generator']!r}")
    fine, coarse = oracle.space_axes, grid.space_axes
    n = spec.n_space
    a = np.array([[restrict(oracle.a[i, j], fine, coarse) for j in range(n)] for i in range(n)])
    b = np.array([restrict(oracle.b[j], fine, coarse) for j in range(n)])
    coeffs = CoefficientSet(space_axes=coarse, a=a, b=b, f=restrict(oracle.f, fine, coarse),
                            c_true=restrict(oracle.c_true, fine, coarse),
                            b_lower=cfg["forward.b_lower"])
    return Problem(cfg=cfg, grid=grid, oracle=oracle, coeffs=coeffs)


def simulate(problem, delta=None, seed=None):
    """Lateral Cauchy data on the inversion face, with multiplicative noise."""
    cfg = problem.cfg
    solution = evolve_two_sided(problem.oracle, problem.grid.spec)
    traces = extract_traces(solution, problem.grid)
    delta = cfg["noise.delta"] if delta is None else delta
    seed = cfg["noise.seed"] if seed is None else seed
    return add_noise(traces, delta, seed)


def make_context(problem, lam=None, alpha=None, R=None, h4=None):
    cfg = problem.cfg
    carleman = CarlemanParams(cfg["carleman.lambda"] if lam is None else lam,
                              cfg["carleman.nu"], cfg["carleman.normalization"])
    tikhonov = TikhonovParams(cfg["tikhonov.alpha"] if alpha is None else alpha,
                              cfg["tikhonov.R"] if R is None else R)
    return FunctionalContext(problem.grid, problem.coeffs, carleman, tikhonov, h4=h4)


def relative_l2(u, v, weights, floor=0.0):
    """``||u - v|| / max(||v||, floor)`` with quadrature ``weights``.

    Falls back to the absolute difference when the denominator is 0.
    """
    num = float(np.sqrt(np.sum(weights * (u - v) ** 2)))
    den = max(float(np.sqrt(np.sum(weights * v * v))), floor)
    return num / den if den > 0 else num


@dataclass
class Inversion:
    runs: list
    c_runs: list
    c_rec: np.ndarray
    metrics: object
    metrics_full: object
    lift_norm: float
    c_agreement: float
    w_agreement: float
    w_difference: float
    starts: list = field(default_factory=list)

    @property
    def best(self):
        return self.runs[0]

    def summary(self):
        best = self.best
        out = {
            "final_J": best.final_J,
            "iterations": best.iterations,
            "converged": best.converged,
            "message": best.message,
            "grad_norm": best.history[-1]["grad_norm"],
            "lift_norm_H4": self.lift_norm,
            "starts": self.starts,
            "c_pairwise_max_rel_L2": self.c_agreement,
            "w_pairwise_max_rel_L2": self.w_agreement,
            "w_pairwise_max_abs_L2": self.w_difference,
            "J_monotone": all(monotone(r.history) for r in self.runs),
            "runs": [{"start": s, "final_J": r.final_J, "iterations": r.iterations,
                      "converged": r.converged, "message": r.message}
                     for s, r in zip(self.starts, self.runs)],
        }
        if self.metrics is not None:
            out.update(rel_L2_c=self.metrics.rel_L2, rel_Linf_c=self.metrics.rel_Linf,
                       metrics_absolute=self.metrics.absolute,
                       rel_L2_c_full_slice=self.metrics_full.rel_L2,
                       rel_Linf_c_full_slice=self.metrics_full.rel_Linf)
        return out


def monotone(history):
    J = [h["J"] for h in history]
    return all(b <= a for a, b in zip(J, J[1:]))


def invert(problem, traces, lam=None, restarts=None, ctx=None, optimizer=None, seed=None):
    """Transform the traces, minimize from the zero start and ``restarts`` random
    starts, and recover ``c`` from the zero-start minimizer."""
    cfg = problem.cfg
    grid = problem.grid
    tt = derive_transformed_traces(traces, smooth=cfg["noise.smooth"],
                                   degree=cfg["noise.degree"], window=cfg["noise.window"])
    ctx = ctx or make_context(problem, lam=lam)
    optimizer = optimizer or build_optimizer(cfg, seed)
    W_bc = build_boundary_lift(tt, grid)
    restarts = cfg["optimize.restarts"] if restarts is None else restarts
    R = ctx.tikhonov.R

    runs, starts = [minimize_gradient_descent(ctx, W_bc, None, optimizer)], ["zero"]
    for k in range(restarts):
        rng = np.random.default_rng([optimizer.seed, k])
        z0 = random_start(W_bc, R, ctx.h4, rng, passes=optimizer.smoothing_passes)
        runs.append(minimize_gradient_descent(ctx, W_bc, z0, optimizer))
        starts.append(f"random{k}")

    c_runs = [recover_coefficient(r.w, problem.coeffs, grid) for r in runs]
    slice_w = grid.slice_weights(True)
    box_eps = np.where(grid.inside_G_eps, grid.box_weights, 0.0)
    # w_true can vanish identically; the floor keeps the ratio away from 0/0
    floor = 1e-12 * max(1.0, float(np.max(np.abs(W_bc))))
    c_agree = w_agree = w_diff = 0.0
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            c_agree = max(c_agree, relative_l2(c_runs[j], c_runs[i], slice_w))
            w_agree = max(w_agree, relative_l2(runs[j].w, runs[i].w, box_eps, floor))
            w_diff = max(w_diff, float(np.sqrt(np.sum(box_eps * (runs[j].w - runs[i].w) ** 2))))
    metrics = metrics_full = None
    if problem.c_true is not None:
        metrics = error_metrics(c_runs[0], problem.c_true, grid, True)
        metrics_full = error_metrics(c_runs[0], problem.c_true, grid, False)
    return Inversion(runs=runs, c_runs=c_runs, c_rec=c_runs[0], metrics=metrics,
                     metrics_full=metrics_full, lift_norm=ctx.h4.norm(W_bc),
                     c_agreement=c_agree, w_agreement=w_agree, w_difference=w_diff,
                     starts=starts)


def sweep(problem, traces, lambdas=None):
    """One zero-start inversion per ``lambda``; rows ``(lambda, final_J, rel_L2_c, iters)``."""
    lambdas = problem.cfg["sweep.lambdas"] if lambdas is None else lambdas
    rows = []
    h4 = None
    for lam in lambdas:
        ctx = make_context(problem, lam=lam, h4=h4)
        h4 = ctx.h4
        inv = invert(problem, traces, restarts=0, ctx=ctx)
        err = inv.metrics.rel_L2 if inv.metrics is not None else float("nan")
        rows.append((float(lam), inv.best.final_J, err, inv.best.iterations))
    return rows
