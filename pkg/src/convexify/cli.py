"""Command-line entry point: ``convexify {forward,invert,verify,sweep,landscape}``."""
import argparse
import json
import os
import sys
import time

from . import files, pipeline, verify
from .config import build_spec, config_hash, dump_config, load_config
from .exceptions import ConvexifyError
from .geometry import CarlemanParams


def _overrides(args):
    out = {}
    if args.seed is not None:
        out["noise.seed"] = str(args.seed)
    if args.lam is not None:
        out["carleman.lambda"] = str(args.lam)
    if args.out is not None:
        out["output.dir"] = args.out
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConvexifyError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _meta(cfg, grid):
    return {"config_hash": config_hash(cfg), "grid_hash": files.grid_hash(grid)}


def _log(outdir, name, started, extra=None):
    """Timings go to a separate run log, never into data files."""
    entry = {"command": name, "started_unix": started,
             "wall_ms": 1e3 * (time.time() - started)}
    entry.update(extra or {})
    with open(os.path.join(outdir, "run_log.jsonl"), "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, sort_keys=True) + "\n")


def cmd_forward(cfg, outdir, args):
    problem = pipeline.build_problem(cfg)
    traces = pipeline.simulate(problem)
    meta = _meta(cfg, problem.grid)
    files.write_traces(os.path.join(outdir, "traces.csv"), traces, meta)
    files.write_grid(os.path.join(outdir, "grid.csv"), problem.grid,
                     CarlemanParams(cfg["carleman.lambda"], cfg["carleman.nu"],
                                    cfg["carleman.normalization"]), meta)
    files.write_field(os.path.join(outdir, "f.csv"), problem.grid.space_axes,
                      problem.coeffs.f, "f", meta)
    files.write_field(os.path.join(outdir, "c_true.csv"), problem.grid.space_axes,
                      problem.c_true, "c_true", meta)
    return {}


def _load_or_simulate(problem, cfg, args):
    if args.traces:
        traces, _ = files.read_traces(args.traces, cfg["domain.n_space"])
        return traces
    return pipeline.simulate(problem)


def cmd_invert(cfg, outdir, args):
    problem = pipeline.build_problem(cfg)
    traces = _load_or_simulate(problem, cfg, args)
    inv = pipeline.invert(problem, traces)
    meta = _meta(cfg, problem.grid)
    files.write_history(os.path.join(outdir, "history.csv"), inv.best.history, meta)
    files.write_recovery(os.path.join(outdir, "c_rec.csv"), problem.grid.space_axes,
                         inv.c_rec, problem.c_true, meta)
    report = {"name": "invert", **meta, "lambda": cfg["carleman.lambda"],
              "alpha": cfg["tikhonov.alpha"], "R": cfg["tikhonov.R"],
              "delta": traces.noise_level, **inv.summary()}
    files.write_json(os.path.join(outdir, "report.json"), report)
    return {"timings_ms": [r.timings_ms[-1] for r in inv.runs]}


def cmd_sweep(cfg, outdir, args):
    problem = pipeline.build_problem(cfg)
    traces = _load_or_simulate(problem, cfg, args)
    rows = pipeline.sweep(problem, traces)
    files.write_csv(os.path.join(outdir, "sweep.csv"), ["lambda", "final_J", "rel_L2_c", "iters"],
                    rows, _meta(cfg, problem.grid))
    return {}


def cmd_landscape(cfg, outdir, args):
    problem = pipeline.build_problem(cfg)
    ctx = pipeline.make_context(problem)
    rows, flags = verify.scan_landscape(ctx, cfg["landscape.lambda_star"], w_ref=problem.w_true(),
                                        directions=cfg["landscape.directions"],
                                        num_points=cfg["landscape.num_points"],
                                        seed=cfg["noise.seed"])
    meta = _meta(cfg, problem.grid)
    meta["flags_lambda0"] = flags["lambda0"]
    meta["flags_lambdastar"] = flags["lambdastar"]
    files.write_csv(os.path.join(outdir, "landscape.csv"),
                    ["direction_id", "s", "J_lambda0", "J_lambdastar"], rows, meta)
    return {}


def cmd_verify(cfg, outdir, args):
    spec = build_spec(cfg)
    seed = cfg["noise.seed"]
    ctx = verify.default_context(spec, lam=cfg["carleman.lambda"], alpha=cfg["tikhonov.alpha"],
                                 R=cfg["verify.R"], normalization=cfg["carleman.normalization"])
    trials = cfg["verify.trials"]
    reports = [
        verify.check_expansion_identity(trials, seed, ctx.grid, ctx.coeffs),
        verify.check_gradient_consistency(trials, seed, ctx),
        verify.check_bregman_identity(trials, seed, ctx),
        verify.check_convexity(num_pairs=cfg["verify.num_pairs"], ctx=ctx, seed=seed),
        verify.check_carleman_estimate(spec=spec, seed=seed, nu=cfg["carleman.nu"]),
        verify.check_volterra_inequality(trials=trials, seed=seed, nu=cfg["carleman.nu"]),
    ]
    meta = _meta(cfg, ctx.grid)
    for rep in reports:
        files.write_json(os.path.join(outdir, f"verify_{rep.name}.json"), {**meta, **rep.to_dict()})
    exact = [r for r in reports if r.name in ("expansion_identity", "gradient_consistency",
                                              "bregman_identity")]
    summary = {**meta, "exact_algebra_pass": all(r.passed for r in exact),
               "checks": {r.name: bool(r.passed) for r in reports}}
    files.write_json(os.path.join(outdir, "verify_summary.json"), summary)
    return {}


COMMANDS = {"forward": cmd_forward, "invert": cmd_invert, "verify": cmd_verify,
            "sweep": cmd_sweep, "landscape": cmd_landscape}


def build_parser():
    parser = argparse.ArgumentParser(prog="convexify",
                                     description="Convexification solver for a parabolic CIP.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="dotted-key config file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="overrides noise.seed")
    parser.add_argument("--lambda", dest="lam", type=float, help="overrides carleman.lambda")
    parser.add_argument("--traces", help="trace CSV to invert instead of simulating")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key; repeatable")
    return parser


def _limit_threads():
    raw = os.environ.get("CONVEXIFY_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConvexifyError(f"CONVEXIFY_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConvexifyError("CONVEXIFY_THREADS must be >= 1")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        limiter = _limit_threads()
        cfg = load_config(args.config, _overrides(args))
        outdir = files.ensure_dir(cfg["output.dir"])
        with open(os.path.join(outdir, "config.resolved"), "w", encoding="utf-8") as fh:
            fh.write(dump_config({k: v for k, v in cfg.items() if not k.startswith("output.")}))
        started = time.time()
        extra = COMMANDS[args.command](cfg, outdir, args)
        _log(outdir, args.command, started, extra)
        if limiter is not None:
            limiter.restore_original_limits()
    except ConvexifyError as exc:
        json.dump(exc.to_dict(), sys.stderr)
        sys.stderr.write("\n")
        return 2
    except OverflowError as exc:
        json.dump({"error": "overflow", "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
