import json
import os
import subprocess
import sys

import numpy as np
import pytest

from convexify import files
from convexify.cli import main
from convexify.config import config_hash, dump_config, load_config, parse_config_text, resolve
from convexify.exceptions import ConfigurationError
from convexify.geometry import GridSpec, build_domain

SMALL = ["--set", "grid.n_x1=21", "--set", "grid.n_t=21", "--set", "optimize.max_iter=30"]


def test_defaults_and_types():
    cfg = resolve()
    assert cfg["tikhonov.R"] == 1e8 and cfg["carleman.normalization"] == "max"
    cfg = resolve({"noise.smooth": "on", "sweep.lambdas": "0, 2", "domain.epsilon": "none"})
    assert cfg["noise.smooth"] is True and cfg["sweep.lambdas"] == (0.0, 2.0)
    assert cfg["domain.epsilon"] is None


def test_unknown_duplicate_and_bad_values():
    with pytest.raises(ConfigurationError, match="unknown key"):
        parse_config_text("grid.n_x1 = 21\ngrid.nx = 3\n")
    with pytest.raises(ConfigurationError, match="duplicate"):
        parse_config_text("grid.n_x1 = 21\ngrid.n_x1 = 31\n")
    with pytest.raises(ConfigurationError, match="grid.n_t"):
        resolve({"grid.n_t": "4.5"})
    with pytest.raises(ConfigurationError, match=r"\[tikhonov\]"):
        resolve({"tikhonov.alpha": "-1"})


def test_comments_and_roundtrip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# demo\ngrid.n_x1 = 21   # coarse\nnoise.delta = 0.01\n")
    cfg = load_config(path)
    assert cfg["grid.n_x1"] == 21 and cfg["noise.delta"] == 0.01
    again = tmp_path / "again.cfg"
    again.write_text(dump_config(cfg))
    assert load_config(again) == cfg
    assert config_hash(cfg) == config_hash({**cfg, "output.dir": "elsewhere"})


def test_csv_roundtrip(tmp_path):
    path = tmp_path / "x.csv"
    files.write_csv(path, ["a", "b"], [(0.1, 1), (1 / 3, 2)], {"k": "v"})
    meta, header, data = files.read_csv(path)
    assert meta == {"k": "v"} and header == ["a", "b"] and data[1, 0] == 1 / 3


def test_traces_file_roundtrip(tmp_path):
    from convexify.forward import CauchyTraces

    grid = build_domain(GridSpec(n_space=2, n_x1=9, n_xbar=7, n_t=9))
    rng = np.random.default_rng(0)
    tr = CauchyTraces(xbar_axes=(grid.axes[1],), t=grid.t, g1=rng.uniform(1, 2, grid.shape[1:]),
                      g2=rng.normal(size=grid.shape[1:]))
    files.write_traces(tmp_path / "t.csv", tr)
    back, _ = files.read_traces(tmp_path / "t.csv", 2)
    assert np.array_equal(back.g1, tr.g1) and np.array_equal(back.g2, tr.g2)


def _outputs(folder):
    return {name: (folder / name).read_bytes() for name in sorted(os.listdir(folder))
            if name != "run_log.jsonl"}


def test_forward_invert_deterministic(tmp_path):
    for run in ("a", "b"):
        assert main(["forward", "--out", str(tmp_path / run)] + SMALL) == 0
        assert main(["invert", "--out", str(tmp_path / run)] + SMALL) == 0
    assert _outputs(tmp_path / "a") == _outputs(tmp_path / "b")
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["J_monotone"]
    _, header, _ = files.read_csv(tmp_path / "a" / "history.csv")
    assert header == ["iter", "J", "grad_norm", "step"]
    log = [json.loads(x) for x in (tmp_path / "a" / "run_log.jsonl").read_text().splitlines()]
    assert [e["command"] for e in log] == ["forward", "invert"]


def test_invert_from_trace_file(tmp_path):
    assert main(["forward", "--out", str(tmp_path / "f")] + SMALL) == 0
    assert main(["invert", "--out", str(tmp_path / "g"), "--traces",
                 str(tmp_path / "f" / "traces.csv")] + SMALL) == 0
    assert main(["invert", "--out", str(tmp_path / "h")] + SMALL) == 0
    assert (tmp_path / "g" / "c_rec.csv").read_bytes() == (tmp_path / "h" / "c_rec.csv").read_bytes()


def test_error_json_and_exit_code(tmp_path, capsys):
    code = main(["invert", "--out", str(tmp_path), "--set", "grid.bogus=1"])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "configuration" and "grid.bogus" in err["message"]


def test_threads_env(tmp_path):
    env = dict(os.environ, CONVEXIFY_THREADS="1")
    out = subprocess.run([sys.executable, "-m", "convexify", "forward", "--out", str(tmp_path)]
                         + SMALL, env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    env["CONVEXIFY_THREADS"] = "zero"
    out = subprocess.run([sys.executable, "-m", "convexify", "forward", "--out", str(tmp_path)],
                         env=env, capture_output=True, text=True)
    assert out.returncode == 2 and "CONVEXIFY_THREADS" in out.stderr
