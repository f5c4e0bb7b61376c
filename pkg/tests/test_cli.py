import json
import hashlib
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from plapeig.cli import main
from plapeig.config import ConfigError, parse_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _base(sub, **extra):
    cfg = {"schema": 1, "subcommand": sub,
           "mesh": {"dimension": 1, "extents": [0, 1], "resolution": 64},
           "problem": {"p": 2, "g": 1, "V": 0}}
    cfg.update(extra)
    return cfg


def test_solve_benchmark(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", str(CONFIGS / "solve_1d_p2.json"), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["lambda"] == pytest.approx(np.pi**2, rel=1e-2)
    assert {"lambda", "residual", "iterations", "epsilon_final"} <= set(res)
    assert (out / "u.csv").read_text().startswith("node,x,u\n")


def test_invalid_p_names_h1(tmp_path, capsys):
    code = main(["solve", "--config", str(CONFIGS / "solve_invalid_p.json"), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "H1 violated" in capsys.readouterr().err


def test_derivative_zero_field(tmp_path):
    cfg = _base("derivative", field={"name": "zero"})
    cfg["problem"]["g"] = {"kind": "trig", "base": 1, "amplitude": 0.5, "frequency": [1]}
    out = tmp_path / "o"
    assert main(["derivative", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    for key in ("value_general", "value_divfree", "value_hadamard", "fd_value"):
        assert res[key] == 0
    rows = (out / "lambda_t.csv").read_text().splitlines()
    assert rows[0] == "t,lambda" and len(rows) == 4


def test_outputs_deterministic_and_hashed(tmp_path):
    cfg = _write(tmp_path, _base("solve", problem={"p": 1.5, "g": {"kind": "random", "low": 0.5, "high": 2}, "V": 0}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", str(cfg), "--out", str(a), "--seed", "4"]) == 0
    assert main(["solve", "--config", str(cfg), "--out", str(b), "--seed", "4"]) == 0
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        if name != "metadata.json":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    manifest = json.loads((a / "manifest.json").read_text())
    listed = {e["file"]: e["sha256"] for e in manifest["files"]}
    assert set(listed) == set(names) - {"manifest.json", "metadata.json"}
    for name, digest in listed.items():
        assert hashlib.sha256((a / name).read_bytes()).hexdigest() == digest
    assert "started" in json.loads((a / "metadata.json").read_text())


def test_seed_changes_random_fields(tmp_path):
    cfg = _write(tmp_path, _base("solve", problem={"p": 2, "g": {"kind": "random", "low": 0.5, "high": 2}, "V": 0}))
    main(["solve", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "1"])
    main(["solve", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "2"])
    assert (tmp_path / "a" / "g.csv").read_bytes() != (tmp_path / "b" / "g.csv").read_bytes()


def test_nonconvergence_exit_code(tmp_path):
    cfg = _base("solve", solver={"max_iter": 1})
    cfg["problem"]["p"] = 3
    out = tmp_path / "o"
    assert main(["solve", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 2
    assert json.loads((out / "result.json").read_text())["converged"] is False
    assert json.loads((out / "manifest.json").read_text())["status"] == "not-converged"


@pytest.mark.parametrize("argv", [
    ["fly", "--config", "x.json"],
    ["solve", "--config", "/nonexistent/cfg.json"],
    ["solve"],
])
def test_bad_invocations_exit_1(argv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 1


@pytest.mark.parametrize("mutate, message", [
    (lambda c: c.update(schema=2), "schema"),
    (lambda c: c.update(colour="red"), "unknown top-level"),
    (lambda c: c.update(solver={"gtol": -1}), "gtol"),
    (lambda c: c["problem"].update(g={"kind": "spiral"}), None),
])
def test_config_validation(mutate, message, tmp_path):
    cfg = _base("solve")
    mutate(cfg)
    if message:
        with pytest.raises(ConfigError, match=message):
            parse_config(cfg)
    else:
        assert main(["solve", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1


def test_unknown_field_name(tmp_path):
    cfg = _base("derivative", field={"name": "vortex"})
    assert main(["derivative", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1


def test_check_and_sobolev(tmp_path):
    assert main(["check", "--config", str(CONFIGS / "check_2d.json"), "--out", str(tmp_path / "c")]) == 0
    rep = json.loads((tmp_path / "c" / "result.json").read_text())
    assert rep["ok"] and rep["h2_branch"] == "norm-bound"
    cfg = _base("sobolev", sobolev={"r": 2})
    assert main(["sobolev", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "s")]) == 0
    S = json.loads((tmp_path / "s" / "result.json").read_text())["S"]
    assert S == pytest.approx(np.pi**2, rel=1e-2)


def test_optimize_writes_iteration_plot(tmp_path):
    cfg = _base("optimize")
    cfg["mesh"]["resolution"] = 4
    cfg["problem"] = {"p": 2, "g": [1, 2, 1, 2], "V": [0, 1, 1, 0]}
    out = tmp_path / "o"
    assert main(["optimize", "--config", str(_write(tmp_path, cfg)), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    assert res["converged"] and res["lambda"] == pytest.approx(5.465669197649626, rel=1e-10)
    assert (out / "iterations.csv").read_text().startswith("k,lambda,swaps_g,swaps_V\n")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "plapeig", "solve", "--config", str(CONFIGS / "solve_1d_p2.json"),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
