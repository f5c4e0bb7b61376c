"""Command-line front end.

    plapeig <solve|optimize|derivative|sobolev|check> --config run.json [--out DIR] [--seed N]

Each run writes ``result.json``, CSV field and plot-data files, a
``manifest.json`` with SHA-256 hashes of every output, and
``metadata.json`` (timestamps, versions).  Only ``metadata.json`` varies
between identical runs.

Exit codes: 0 success, 1 invalid input, 2 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import platform
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, cell_field, load_config
from .derivative import DerivativeError, derivative_report, transported_problem
from .eigensolver import (
    ProblemData,
    ProblemError,
    SolverError,
    check_hypotheses,
    default_q,
    estimate_sobolev_constant,
    solve_principal,
)
from .flow import FlowError, random_stream_probes
from .mesh import Mesh, MeshError, write_cell_csv, write_node_csv
from .optimizer import OptimizationError, alternate_minimize, verify_optimality
from .rearrangement import RearrangementError, class_of

log = logging.getLogger("plapeig")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class NotConverged(RuntimeError):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
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
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


class _Writer:
    def __init__(self, out: Path):
        self.out = out
        self.files: list[Path] = []
        out.mkdir(parents=True, exist_ok=True)

    def json(self, name: str, data) -> None:
        path = self.out / name
        path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
        self.files.append(path)

    def rows(self, name: str, header: Sequence[str], rows) -> None:
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(path)

    def cells(self, name: str, mesh: Mesh, values, label: str) -> None:
        self.files.append(write_cell_csv(self.out / name, mesh, values, label))

    def nodes(self, name: str, mesh: Mesh, values, label: str) -> None:
        self.files.append(write_node_csv(self.out / name, mesh, values, label))

    def finish(self, cfg: RunConfig, status: str, started: _dt.datetime) -> None:
        meta = {
            "started": started.isoformat(),
            "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        }
        (self.out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        entries = [{"file": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
                   for p in sorted(set(self.files))]
        manifest = {
            "schema": 1,
            "subcommand": cfg.subcommand,
            "status": status,
            "seed": cfg.seed,
            "files": entries,
            "volatile": ["metadata.json"],
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _problem(cfg: RunConfig, mesh: Mesh) -> ProblemData:
    block = cfg.problem
    if "p" not in block:
        raise ConfigError("problem block needs 'p'")
    p = float(block["p"])
    q = block.get("q")
    q = None if q is None else float(q)
    g, g_func = cell_field(block.get("g", 1.0), mesh, cfg.seed)
    V, V_func = cell_field(block.get("V", 0.0), mesh, cfg.seed + 1)
    problem = ProblemData.on_mesh(mesh, p, g, V, q=q)  # raises on H1 violations
    return problem.replace(g_func=g_func, V_func=V_func)


def _run_solve(cfg: RunConfig, mesh: Mesh, w: _Writer) -> str:
    problem = _problem(cfg, mesh)
    res = solve_principal(mesh, problem, cfg.solver)
    w.json("result.json", {"p": problem.p, "q": problem.q, **res.summary()})
    w.nodes("u.csv", mesh, res.u, "u")
    w.cells("g.csv", mesh, problem.g, "g")
    w.cells("V.csv", mesh, problem.V, "V")
    w.rows("history.csv", ["iteration", "lambda"], [(k, lam) for k, lam in enumerate(res.history)])
    if not res.converged:
        raise NotConverged("eigen-solve did not converge")
    return "ok"


def _run_optimize(cfg: RunConfig, mesh: Mesh, w: _Writer) -> str:
    problem = _problem(cfg, mesh)
    try:
        g_cls, V_cls = class_of(problem.g, mesh), class_of(problem.V, mesh)
    except RearrangementError as exc:
        raise ConfigError(str(exc)) from None
    res = alternate_minimize(mesh, g_cls, V_cls, problem.p, problem.q, cfg.solver, cfg.opt,
                             g_init=problem.g, V_init=problem.V)
    out = {"p": problem.p, "q": problem.q, **res.summary()}
    n_probes = int(cfg.probes.get("count", 0))
    if n_probes and mesh.dimension == 2:
        probes = random_stream_probes(mesh, n_probes, int(cfg.probes.get("seed", cfg.seed)))
        report = verify_optimality(mesh, res, probes, problem.p, float(cfg.probes.get("threshold", 0.05)),
                                   problem.q)
        out["optimality"] = report.to_dict()
    w.json("result.json", out)
    s = res.state
    w.rows("iterations.csv", ["k", "lambda", "swaps_g", "swaps_V"],
           [(k + 1, lam, *sw) for k, (lam, sw) in enumerate(zip(s.history, s.swaps))])
    w.cells("g_final.csv", mesh, s.g, "g")
    w.cells("V_final.csv", mesh, s.V, "V")
    w.nodes("u_final.csv", mesh, s.u, "u")
    if not res.converged:
        raise NotConverged("alternating minimization hit its iteration cap")
    return "ok"


def _run_derivative(cfg: RunConfig, mesh: Mesh, w: _Writer) -> str:
    problem = _problem(cfg, mesh)
    field = cfg.build_field(mesh)
    t = float(cfg.derivative.get("t", 1e-3))
    eig = solve_principal(mesh, problem, cfg.solver)
    if not eig.converged:
        w.json("result.json", {"converged": False, **eig.summary()})
        raise NotConverged("base eigen-solve did not converge")
    report = derivative_report(mesh, problem, eig, field, t, cfg.solver, cfg.flow,
                               richardson_extrapolate=bool(cfg.derivative.get("richardson", False)))
    w.json("result.json", {"lambda": eig.lam, "field": field.params(), **report.to_dict()})
    sweep = cfg.derivative.get("sweep", [-t, 0.0, t])
    rows = []
    for s in sorted(float(x) for x in sweep):
        if s == 0:
            rows.append((s, eig.lam))
            continue
        res = solve_principal(mesh, transported_problem(mesh, problem, field, s, cfg.flow), cfg.solver, u0=eig.u)
        if not res.converged:
            raise NotConverged(f"solve at t={s:g} did not converge")
        rows.append((s, res.lam))
    w.rows("lambda_t.csv", ["t", "lambda"], rows)
    w.nodes("u.csv", mesh, eig.u, "u")
    return "ok"


def _run_sobolev(cfg: RunConfig, mesh: Mesh, w: _Writer) -> str:
    p = float(cfg.problem.get("p", cfg.sobolev.get("p", 2.0)))
    if not p > 1:
        raise ConfigError(f"H1 violated: p must be > 1, got p={p:g}")
    r = cfg.sobolev.get("r", p)
    r = math.inf if r in ("inf", "infinity", math.inf) else float(r)
    S = estimate_sobolev_constant(mesh, p, r, cfg.solver)
    w.json("result.json", {"p": p, "r": r, "S": S})
    return "ok"


def _run_check(cfg: RunConfig, mesh: Mesh, w: _Writer) -> str:
    block = cfg.problem
    p = float(block.get("p", 2.0))
    q = block.get("q")
    q = default_q(p, mesh.dimension) if q is None and p > 1 else float(q if q is not None else 1.0)
    g, _ = cell_field(block.get("g", 1.0), mesh, cfg.seed)
    V, _ = cell_field(block.get("V", 0.0), mesh, cfg.seed + 1)
    report = check_hypotheses(mesh, p=p, g=g, V=V, q=q, config=cfg.solver)
    w.json("result.json", {"ok": report.ok, **report.to_dict()})
    return "ok" if report.ok else "hypotheses-failed"


RUNNERS = {
    "solve": _run_solve,
    "optimize": _run_optimize,
    "derivative": _run_derivative,
    "sobolev": _run_sobolev,
    "check": _run_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are validation errors, not exit 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="plapeig", description="Principal p-Laplacian eigenvalues and their optimization.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("subcommand", help=" | ".join(RUNNERS))
    ap.add_argument("--config", required=True, help="JSON run configuration (schema 1)")
    ap.add_argument("--out", default=None, help="output directory (overrides the config)")
    ap.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def run(subcommand: str, config_path, out: Optional[str] = None, seed: Optional[int] = None) -> int:
    started = _dt.datetime.now(_dt.timezone.utc)
    try:
        cfg = load_config(config_path, subcommand, seed, out)
        mesh = cfg.build_mesh()
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        writer = _Writer(Path(cfg.output))
    except OSError as exc:
        print(f"error: output directory {cfg.output!r} is not writable: {exc}", file=sys.stderr)
        return EXIT_INVALID
    code, status = EXIT_OK, "ok"
    try:
        status = RUNNERS[cfg.subcommand](cfg, mesh, writer)
    except (ConfigError, ProblemError, MeshError, FlowError, DerivativeError, RearrangementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_INVALID, "invalid"
    except (NotConverged, SolverError, OptimizationError) as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        code, status = EXIT_NONCONVERGED, "not-converged"
    writer.finish(cfg, status, started)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    return run(args.subcommand, args.config, args.out, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
