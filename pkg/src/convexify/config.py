"""Run configuration: flat ``section.key = value`` text with ``#`` comments."""
import hashlib
import json

from .exceptions import ConfigurationError

# key -> (default, kind). Kinds: int, float, str, bool, floats (list), float? (optional)
SCHEMA = {
    "domain.n_space": (1, "int"),
    "domain.a": (0.2, "float"),
    "domain.d": (0.5, "float"),
    "domain.T": (1.0, "float"),
    "domain.epsilon": (None, "float?"),
    "grid.n_x1": (41, "int"),
    "grid.n_xbar": (11, "int"),
    "grid.n_t": (41, "int"),
    "grid.fine_factor": (2, "int"),
    "carleman.lambda": (1.0, "float"),
    "carleman.nu": (2.0, "float"),
    "carleman.normalization": ("max", "str"),
    "tikhonov.alpha": (1e-4, "float"),
    "tikhonov.R": (1e8, "float"),
    "forward.generator": ("separable", "str"),
    "forward.mu": (0.0, "float"),
    "forward.num_modes": (2, "int"),
    "forward.gamma": (None, "floats?"),
    "forward.exponent_cap": (20.0, "float"),
    "forward.pad": (1.0, "float"),
    "forward.b_lower": (None, "float?"),
    "noise.delta": (0.0, "float"),
    "noise.seed": (0, "int"),
    "noise.smooth": (False, "bool"),
    "noise.degree": (4, "int"),
    "noise.window": (9, "int"),
    "optimize.max_iter": (500, "int"),
    "optimize.grad_tol": (1e-10, "float"),
    "optimize.step0": (1.0, "float"),
    "optimize.backtrack": (0.5, "float"),
    "optimize.sufficient_decrease": (1e-4, "float"),
    "optimize.restarts": (0, "int"),
    "optimize.preconditioner": ("riesz", "str"),
    "sweep.lambdas": ((0.0, 1.0, 2.0, 4.0, 8.0), "floats"),
    "landscape.directions": (8, "int"),
    "landscape.num_points": (21, "int"),
    "landscape.lambda_star": (1.0, "float"),
    "verify.trials": (20, "int"),
    "verify.num_pairs": (100, "int"),
    "verify.R": (1e9, "float"),
    "output.dir": ("out", "str"),
}

_TRUE = {"on", "true", "yes", "1"}
_FALSE = {"off", "false", "no", "0"}


def _convert(key, raw, kind):
    if isinstance(raw, str):
        text = raw.strip()
    else:
        text = raw
    optional = kind.endswith("?")
    kind = kind.rstrip("?")
    if optional and (text is None or (isinstance(text, str) and text.lower() in ("", "none"))):
        return None
    try:
        if kind == "int":
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if isinstance(text, bool):
                return text
            low = str(text).lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError
        if kind == "floats":
            items = text.split(",") if isinstance(text, str) else list(text)
            return tuple(float(x) for x in items if str(x).strip() != "")
        return str(text)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: cannot read {raw!r} as {kind}") from None


def parse_config_text(text):
    """Parse dotted-key lines into a dict of raw strings, rejecting unknown keys."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def resolve(overrides=None):
    """Defaults updated by ``overrides`` (raw strings or values), type-checked."""
    overrides = overrides or {}
    cfg = {}
    for key, (default, kind) in SCHEMA.items():
        cfg[key] = _convert(key, overrides[key], kind) if key in overrides else default
    for key in overrides:
        if key not in SCHEMA:
            raise ConfigurationError(f"unknown key {key!r}")
    validate(cfg)
    return cfg


def load_config(path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    raw.update(overrides or {})
    return resolve(raw)


def validate(cfg):
    """Re-run the module invariants so violations are reported by key."""
    from .geometry import CarlemanParams
    from .model import TikhonovParams

    checks = [
        ("domain", lambda: build_spec(cfg)),
        ("carleman", lambda: CarlemanParams(cfg["carleman.lambda"], cfg["carleman.nu"],
                                            cfg["carleman.normalization"])),
        ("tikhonov", lambda: TikhonovParams(cfg["tikhonov.alpha"], cfg["tikhonov.R"])),
        ("optimize", lambda: build_optimizer(cfg)),
    ]
    for section, make in checks:
        try:
            make()
        except ConfigurationError as exc:
            raise ConfigurationError(f"[{section}] {exc}") from None
    if cfg["forward.generator"] not in ("separable", "eigenmode"):
        raise ConfigurationError(
            f"forward.generator must be separable or eigenmode, got {cfg['forward.generator']!r}")
    if cfg["noise.delta"] < 0:
        raise ConfigurationError("noise.delta must be >= 0")
    if cfg["optimize.restarts"] < 0:
        raise ConfigurationError("optimize.restarts must be >= 0")


def build_spec(cfg):
    from .geometry import GridSpec

    return GridSpec(n_space=cfg["domain.n_space"], a=cfg["domain.a"], d=cfg["domain.d"],
                    T=cfg["domain.T"], epsilon=cfg["domain.epsilon"], n_x1=cfg["grid.n_x1"],
                    n_xbar=cfg["grid.n_xbar"], n_t=cfg["grid.n_t"],
                    fine_factor=cfg["grid.fine_factor"])


def build_optimizer(cfg, seed=None):
    from .optimize import OptimizerConfig

    return OptimizerConfig(max_iter=cfg["optimize.max_iter"], grad_tol=cfg["optimize.grad_tol"],
                           step0=cfg["optimize.step0"], backtrack=cfg["optimize.backtrack"],
                           sufficient_decrease=cfg["optimize.sufficient_decrease"],
                           restarts=cfg["optimize.restarts"],
                           preconditioner=cfg["optimize.preconditioner"],
                           seed=cfg["noise.seed"] if seed is None else seed)


def config_hash(cfg):
    """SHA-256 of the resolved config, ignoring where outputs go."""
    body = {k: v for k, v in cfg.items() if not k.startswith("output.")}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


def dump_config(cfg):
    lines = []
    for key, value in cfg.items():
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        elif isinstance(value, bool):
            value = "on" if value else "off"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
