"""CSV and JSON artifacts.

Numbers are written with 17 significant digits so they round-trip exactly.
Metadata goes into leading ``#`` lines; data files never hold timestamps.
"""
import csv
import hashlib
import json
import os

import numpy as np

from .exceptions import ConfigurationError


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def grid_hash(grid):
    h = hashlib.sha256()
    for ax in grid.axes:
        h.update(np.ascontiguousarray(ax, dtype=np.float64).tobytes())
    h.update(repr((grid.spec.a, grid.spec.d, grid.spec.T, grid.spec.epsilon)).encode())
    return h.hexdigest()[:16]


def write_csv(path, header, rows, meta=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def read_csv(path):
    """Returns ``(meta, header, float array)``."""
    meta, lines = {}, []
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                else:
                    lines.append(line)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None
    reader = csv.reader(lines)
    header = next(reader)
    data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
    return meta, header, data.reshape(-1, len(header))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if np.isfinite(value) else None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create output directory {path}: {exc}") from None
    return path


def space_columns(n_space):
    return [f"x{k + 1}" for k in range(n_space)]


def write_grid(path, grid, params, meta=None):
    mesh = grid.mesh()
    weight = grid.weight_sq(params)
    cols = [m.ravel() for m in mesh] + [grid.psi.ravel(), weight.ravel()]
    flags = [grid.inside_G.ravel(), grid.inside_G_eps.ravel(), grid.on_gamma.ravel()]
    header = space_columns(grid.n_space) + ["t", "psi", "weight", "in_G", "in_G_eps", "on_gamma"]
    rows = zip(*cols, *flags)
    write_csv(path, header, rows, meta)


def write_traces(path, traces, meta=None):
    n = len(traces.xbar_axes) + 1
    header = space_columns(n)[1:] + ["t", "g1", "g2"]
    meta = dict(meta or {})
    meta.setdefault("delta", fmt(traces.noise_level))
    meta.setdefault("seed", "none" if traces.seed is None else traces.seed)
    write_csv(path, header, traces.to_table(), meta)


def read_traces(path, n_space):
    from .forward import CauchyTraces

    meta, header, data = read_csv(path)
    delta = float(meta.get("delta", 0.0))
    seed = meta.get("seed")
    seed = None if seed in (None, "none") else int(seed)
    return CauchyTraces.from_table(data, n_space, noise_level=delta, seed=seed), meta


def write_field(path, space_axes, values, name="value", meta=None):
    """Node CSV of a spatial field: x columns then the value."""
    mesh = np.meshgrid(*space_axes, indexing="ij")
    header = space_columns(len(space_axes)) + [name]
    write_csv(path, header, zip(*[m.ravel() for m in mesh], np.ravel(values)), meta)


def read_field(path):
    """Inverse of :func:`write_field`: ``(space_axes, values)``."""
    _, header, data = read_csv(path)
    n = len(header) - 1
    axes = tuple(np.unique(data[:, k]) for k in range(n))
    shape = tuple(len(ax) for ax in axes)
    if np.prod(shape) != len(data):
        raise ConfigurationError(f"{path} is not a full tensor grid")
    order = np.lexsort(tuple(data[:, k] for k in reversed(range(n))))
    return axes, data[order, -1].reshape(shape)


def write_recovery(path, space_axes, c_rec, c_true, meta=None):
    mesh = np.meshgrid(*space_axes, indexing="ij")
    header = space_columns(len(space_axes)) + ["c_rec", "c_true", "abs_err"]
    ct = np.full(np.shape(c_rec), np.nan) if c_true is None else c_true
    rows = zip(*[m.ravel() for m in mesh], np.ravel(c_rec), np.ravel(ct),
               np.abs(np.ravel(c_rec) - np.ravel(ct)))
    write_csv(path, header, rows, meta)


def write_history(path, history, meta=None):
    rows = [(h["iter"], h["J"], h["grad_norm"], h["step"]) for h in history]
    write_csv(path, ["iter", "J", "grad_norm", "step"], rows, meta)
