"""Run configuration: JSON schema 1 and the named cell-field generators.

Example::

    {
      "schema": 1,
      "mesh": {"dimension": 2, "extents": [[0, 1], [0, 1]], "resolution": 32},
      "problem": {"p": 2, "g": {"kind": "constant", "value": 1},
                  "V": {"kind": "step", "axis": 0, "threshold": 0.5, "low": 0, "high": 1}},
      "solver": {"gtol": 1e-8},
      "seed": 0
    }

``g``/``V`` are either explicit per-cell value lists or generator objects
with ``kind`` in ``constant``, ``step``, ``radial``, ``trig``, ``random``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .eigensolver import SolverConfig
from .flow import FlowConfig, FlowError, make_field, DeformationField, ZeroField
from .mesh import Mesh, build_mesh
from .optimizer import OptConfig

SCHEMA_VERSION = 1
SUBCOMMANDS = ("solve", "optimize", "derivative", "sobolev", "check")


class ConfigError(ValueError):
    pass


def _constant(value: float):
    return lambda x: np.full(len(x), float(value))


def _step(axis: int = 0, threshold: float = 0.5, low: float = 0.0, high: float = 1.0):
    return lambda x: np.where(np.asarray(x)[:, axis] > threshold, float(high), float(low))


def _radial(center=(0.5, 0.5), radius: float = 0.25, inside: float = 1.0, outside: float = 0.0):
    c = np.asarray(center, dtype=float)
    return lambda x: np.where(np.linalg.norm(np.asarray(x) - c, axis=1) < radius, float(inside), float(outside))


def _trig(base: float = 1.0, amplitude: float = 0.5, frequency=(1.0, 1.0)):
    """``base + amplitude * prod_k sin(pi f_k x_k)`` (uses as many axes as the points have)."""
    freq = np.atleast_1d(np.asarray(frequency, dtype=float))

    def f(x):
        x = np.asarray(x)
        out = np.ones(len(x))
        for k in range(x.shape[1]):
            out *= np.sin(np.pi * freq[k % len(freq)] * x[:, k])
        return base + amplitude * out

    return f


GENERATORS: dict[str, Callable[..., Callable]] = {
    "constant": _constant,
    "step": _step,
    "radial": _radial,
    "trig": _trig,
}


def cell_field(spec: Any, mesh: Mesh, seed: int) -> tuple[np.ndarray, Optional[Callable]]:
    """Cell values and, for analytic generators, the generating function."""
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "value": spec}
    if isinstance(spec, list):
        arr = np.asarray(spec, dtype=float)
        if arr.shape != (mesh.n_cells,):
            raise ConfigError(f"explicit field has {arr.size} values, mesh has {mesh.n_cells} cells")
        return arr, None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"field spec must be a number, a list, or an object with 'kind': {spec!r}")
    params = {k: v for k, v in spec.items() if k != "kind"}
    kind = spec["kind"]
    if kind == "random":
        rng = np.random.default_rng(params.get("seed", seed))
        return rng.uniform(params.get("low", 0.0), params.get("high", 1.0), mesh.n_cells), None
    try:
        func = GENERATORS[kind](**params)
    except KeyError:
        raise ConfigError(f"unknown field generator {kind!r}; choose from "
                          f"{sorted([*GENERATORS, 'random'])}") from None
    except TypeError as exc:
        raise ConfigError(f"bad parameters for generator {kind!r}: {exc}") from None
    return mesh.sample(func), func


def _dataclass_from(cls, block: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{name}' block: {sorted(unknown)}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{name}' block: {exc}") from None


@dataclass
class RunConfig:
    subcommand: str
    mesh: dict
    problem: dict = field(default_factory=dict)
    field_spec: Optional[dict] = None  # the config's 'field' block
    solver: SolverConfig = SolverConfig()
    opt: OptConfig = OptConfig()
    flow: FlowConfig = FlowConfig()
    derivative: dict = field(default_factory=dict)
    sobolev: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    output: str = "out"
    seed: int = 0

    def build_mesh(self) -> Mesh:
        m = self.mesh
        try:
            return build_mesh(int(m["dimension"]), m["extents"], m["resolution"])
        except KeyError as exc:
            raise ConfigError(f"mesh block is missing {exc}") from None

    def build_field(self, mesh: Mesh) -> DeformationField:
        if self.field_spec is None:
            raise ConfigError("the derivative subcommand needs a 'field' block")
        name = self.field_spec.get("name")
        params = dict(self.field_spec.get("params", {}))
        try:
            W = ZeroField(mesh.dimension) if name == "zero" else make_field(name, **params)
            W.validate(mesh)
        except (FlowError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid field block: {exc}") from None
        return W


def load_config(path, subcommand: Optional[str] = None, seed: Optional[int] = None,
                output: Optional[str] = None) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(raw, subcommand, seed, output)


def parse_config(raw: dict, subcommand: Optional[str] = None, seed: Optional[int] = None,
                 output: Optional[str] = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if raw.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported config schema {raw.get('schema')!r}; expected {SCHEMA_VERSION}")
    sub = subcommand or raw.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {sub!r}; choose from {list(SUBCOMMANDS)}")
    if subcommand and raw.get("subcommand") not in (None, subcommand):
        raise ConfigError(f"config is for {raw['subcommand']!r}, not {subcommand!r}")
    known = {"schema", "subcommand", "mesh", "problem", "field", "solver", "opt", "flow",
             "derivative", "sobolev", "probes", "output", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    if "mesh" not in raw:
        raise ConfigError("config needs a 'mesh' block")
    run_seed = int(raw.get("seed", 0) if seed is None else seed)
    solver_block = dict(raw.get("solver", {}))
    if seed is not None or "seed" in raw:
        solver_block.setdefault("seed", run_seed)
    cfg = RunConfig(
        subcommand=sub,
        mesh=raw["mesh"],
        problem=raw.get("problem", {}),
        field_spec=raw.get("field"),
        solver=_dataclass_from(SolverConfig, solver_block, "solver"),
        opt=_dataclass_from(OptConfig, raw.get("opt", {}), "opt"),
        flow=_dataclass_from(FlowConfig, raw.get("flow", {}), "flow"),
        derivative=raw.get("derivative", {}),
        sobolev=raw.get("sobolev", {}),
        probes=raw.get("probes", {}),
        output=output or raw.get("output", "out"),
        seed=run_seed,
    )
    for name in ("gtol", "lambda_tol", "norm_tol", "residual_tol"):
        if not getattr(cfg.solver, name) > 0:
            raise ConfigError(f"solver.{name} must be positive")
    t = cfg.derivative.get("t", 1e-3)
    if not (isinstance(t, (int, float)) and t > 0 and math.isfinite(t)):
        raise ConfigError("derivative.t must be a positive number")
    return cfg
