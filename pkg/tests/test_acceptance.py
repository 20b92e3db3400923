"""The nine acceptance criteria, one test each.

Every test records a ``C<n> PASS|FAIL`` line, printed in the terminal summary
(and to stdout, visible with ``-s``).
"""
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from convexify import pipeline, verify
from convexify.cli import main
from convexify.config import resolve
from convexify.recover import error_metrics
from convexify.transform import apply_Ltilde

from conftest import ACCEPTANCE_LINES

BASELINES = json.loads((Path(__file__).parent / "baselines" / "diagnostics.json").read_text())


def record(n, ok, detail):
    line = f"C{n} {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - start


def test_c1_expansion_identity():
    rep, secs = timed(verify.check_expansion_identity, 20, 0)
    err = rep.stats["max_rel_residual"]
    record(1, rep.params["shape"] == [41, 41] and err <= 1e-12 and secs < 5,
           f"expansion identity max rel {err:.2e} (tol 1e-12), {secs:.2f}s (< 5s)")


def test_c2_gradient_exactness():
    rep, secs = timed(verify.check_gradient_consistency, 20, 0, verify.default_context(),
                      step=1e-4, fd_tol=1e-6, fit_tol=1e-9)
    s = rep.stats
    ok = s["max_fd_rel"] <= 1e-6 and s["max_fit_resid"] <= 1e-9 and secs < 30
    record(2, ok, f"fd rel {s['max_fd_rel']:.2e} (tol 1e-6), quartic fit {s['max_fit_resid']:.2e} "
                  f"(tol 1e-9), {secs:.2f}s (< 30s)")


def test_c3_bregman_identity():
    rep = verify.check_bregman_identity(20, 0, verify.default_context(), tol=1e-10)
    err = rep.stats["max_rel_diff"]
    record(3, err <= 1e-10, f"gap vs closed form max rel {err:.2e} (tol 1e-10)")


def test_c4_convexity():
    ctx = verify.default_context(alpha=1e-4, R=1e9)
    rep, secs = timed(verify.check_convexity, (0.0, 1.0, 2.0, 4.0, 8.0, 16.0), 100, ctx)
    s = rep.stats
    scan = ", ".join(f"{r['lambda']:g}:{r['min_margin']:.2e}" for r in s["scan"])
    ok = s["lambda_star"] is not None and s["zero_alpha_negative_found"] and secs < 300
    record(4, ok, f"lambda* = {s['lambda_star']}, min margins [{scan}], "
                  f"lambda=0 alpha=0 gap {s['zero_alpha_min_gap']:.2e}, {secs:.1f}s (< 300s)")


def _noiseless_61():
    return resolve({"grid.n_x1": "61", "grid.n_t": "61", "tikhonov.R": "1e8",
                    "optimize.max_iter": "1000"})


def test_c5_noiseless_recovery():
    problem = pipeline.build_problem(_noiseless_61())
    x = problem.grid.space_axes[0]
    oracle_err = np.max(np.abs(problem.c_true - np.sin(x) / (2 + np.sin(x))))
    inv = pipeline.invert(problem, pipeline.simulate(problem), restarts=5)
    slowest = max(r.timings_ms[-1] for r in inv.runs) / 1e3
    errs = [error_metrics(c, problem.c_true, problem.grid).rel_L2 for c in inv.c_runs]
    ok = (oracle_err < 1e-5 and len(inv.runs) == 6 and inv.c_agreement <= 0.01
          and max(errs) <= 0.05 and slowest < 120)
    record(5, ok, f"6 starts agree within {inv.c_agreement:.2e} (tol 0.01), worst rel L2 "
                  f"{max(errs):.2e} (tol 0.05), slowest run {slowest:.1f}s (< 120s)")


def test_c6_noise_robustness():
    errs = []
    for delta in ("0", "0.01", "0.05"):
        cfg = resolve({"grid.n_x1": "61", "grid.n_t": "61", "noise.delta": delta,
                       "noise.smooth": "on", "noise.degree": "2", "noise.window": "61",
                       "noise.seed": "1", "optimize.max_iter": "1000"})
        problem = pipeline.build_problem(cfg)
        errs.append(pipeline.invert(problem, pipeline.simulate(problem)).metrics.rel_L2)
    ok = errs[-1] <= 0.25 and errs[0] <= errs[1] <= errs[2]
    record(6, ok, "rel L2 at delta 0/0.01/0.05: " + "/".join(f"{e:.3e}" for e in errs)
                  + " (last <= 0.25, non-decreasing)")


def test_c7_carleman_volterra():
    car = verify.check_carleman_estimate((2.0, 4.0, 8.0), bank_size=16)
    vol = verify.check_volterra_inequality(baseline=BASELINES["volterra_overall_max"] * (1 + 1e-9))
    chat = car.baselines["C_hat"]
    positive = car.passed and all(v > 0 for v in chat.values())
    regress = all(np.isclose(chat[k], v, rtol=1e-6) for k, v in BASELINES["carleman_C_hat"].items())
    ok = positive and regress and vol.passed
    record(7, ok, "C_hat " + ", ".join(f"{k}:{v:.3e}" for k, v in chat.items())
                  + f" (positive, matches baseline {regress}); Volterra max "
                  f"{vol.stats['overall_max']:.6e} <= baseline {BASELINES['volterra_overall_max']:.6e}")


def _residual_norm(n):
    cfg = resolve({"grid.n_x1": str(n), "grid.n_t": str(n), "domain.T": "0.5",
                   "forward.generator": "eigenmode", "forward.gamma": "1, 0.02"})
    problem = pipeline.build_problem(cfg)
    grid = problem.grid
    r = apply_Ltilde(problem.w_true(), problem.coeffs, grid)
    return float(np.sqrt(np.sum(grid.quad_weights * r * r))), grid.spacings[0]


def _recovery_error(n):
    cfg = resolve({"grid.n_x1": str(n), "grid.n_t": str(n), "optimize.max_iter": "2000",
                   "optimize.grad_tol": "1e-12"})
    problem = pipeline.build_problem(cfg)
    inv = pipeline.invert(problem, pipeline.simulate(problem))
    return inv.metrics.rel_L2, problem.grid.spacings[0]


def _slopes(pairs):
    err, h = np.array(pairs).T
    return np.diff(np.log(err)) / np.diff(np.log(h))


def test_c8_grid_convergence():
    res = _slopes([_residual_norm(n) for n in (21, 41, 81)])
    rec = _slopes([_recovery_error(n) for n in (21, 41, 81)])
    ok = bool(np.all((res >= 1.5) & (res <= 2.5)) and np.all((rec >= 1.5) & (rec <= 2.5)))
    record(8, ok, "slopes over 21/41/81: residual of w_true " + ", ".join(f"{s:.2f}" for s in res)
                  + "; recovery error " + ", ".join(f"{s:.2f}" for s in rec) + " (in [1.5, 2.5])")


SMALL = ["--set", "grid.n_x1=21", "--set", "grid.n_t=21", "--set", "optimize.max_iter=50",
         "--set", "optimize.restarts=1", "--set", "verify.trials=3", "--set", "verify.num_pairs=10",
         "--set", "sweep.lambdas=0,1", "--set", "landscape.directions=2", "--seed", "3"]


def _artifacts(folder):
    return {name: (folder / name).read_bytes() for name in sorted(os.listdir(folder))
            if name != "run_log.jsonl"}


def test_c9_determinism(tmp_path):
    same, names = [], []
    for command in ("forward", "invert", "sweep", "landscape", "verify"):
        outs = []
        for run in ("a", "b"):
            folder = tmp_path / f"{command}_{run}"
            assert main([command, "--out", str(folder)] + SMALL) == 0
            outs.append(_artifacts(folder))
        same.append(outs[0] == outs[1] and len(outs[0]) > 1)
        names.append(f"{command}:{len(outs[0])} files")
    record(9, all(same), "byte-identical reruns: " + ", ".join(
        f"{n} {'same' if s else 'DIFFER'}" for n, s in zip(names, same)))
