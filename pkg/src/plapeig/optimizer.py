"""Minimization of the principal eigenvalue over rearrangement classes.

Alternates an eigen-solve with the two sorting steps that extremize the
linear functionals ``int V u^p`` (minimized) and ``int g u^p`` (maximized)
over the classes.  Each round cannot increase the eigenvalue: after the sort
the previous eigenfunction has a smaller energy and a larger weight, and the
next solve minimizes over all fields.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .derivative import hadamard_terms
from .eigensolver import (
    EigenResult,
    ProblemData,
    SolverConfig,
    check_hypotheses,
    default_q,
    solve_principal,
)
from .flow import DeformationField
from .mesh import Mesh
from .rearrangement import (
    RearrangementClass,
    comonotonicity_defect,
    extremal_rearrangement,
    is_rearrangement_of,
    swap_count,
)

log = logging.getLogger(__name__)


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptConfig:
    max_iter: int = 200
    monotone_tol: float = 1e-10
    check_hypotheses: bool = True
    warm_start: bool = True


@dataclass
class OptState:
    k: int
    g: np.ndarray
    V: np.ndarray
    lam: float
    u: np.ndarray
    history: list = field(default_factory=list)
    swaps: list = field(default_factory=list)  # (g swaps, V swaps) per iteration


@dataclass
class OptResult:
    state: OptState
    converged: bool
    monotone: bool
    defect_g: float
    defect_V: float
    stationarity: Optional[float] = None

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "monotone": self.monotone,
            "iterations": self.state.k,
            "lambda": self.state.lam,
            "lambda_history": list(self.state.history),
            "defect_g": self.defect_g,
            "defect_V": self.defect_V,
            "stationarity": self.stationarity,
        }


def weight_reference(mesh: Mesh, u, p: float) -> np.ndarray:
    """Cell averages of ``|u|^p``: the quantity both sorting steps act on."""
    return mesh.cell_average(np.abs(np.asarray(u, dtype=float)) ** p)


def alternate_minimize(
    mesh: Mesh,
    g_class: RearrangementClass,
    V_class: RearrangementClass,
    p: float,
    q: Optional[float] = None,
    solver_config: SolverConfig = SolverConfig(),
    opt_config: OptConfig = OptConfig(),
    g_init=None,
    V_init=None,
) -> OptResult:
    """Alternating solve-and-sort descent from ``(g_init, V_init)``.

    The defaults start from the class values laid out in ascending cell
    order.  Stops at the first round in which neither sort moves a value.
    """
    q = default_q(p, mesh.dimension) if q is None else q
    g = g_class.default_member() if g_init is None else np.asarray(g_init, dtype=float).copy()
    V = V_class.default_member() if V_init is None else np.asarray(V_init, dtype=float).copy()
    if not (is_rearrangement_of(g, g_class) and is_rearrangement_of(V, V_class)):
        raise OptimizationError("initial assignment is not in the given classes")
    if opt_config.check_hypotheses:
        report = check_hypotheses(mesh, p=p, g=g, V=V, q=q, config=solver_config)
        if not report.ok:
            raise OptimizationError(f"initial assignment fails the hypotheses: {report.messages}")

    history: list = []
    swaps: list = []
    monotone = True
    u_prev = None
    eig: Optional[EigenResult] = None
    converged = False
    k = 0
    for k in range(1, opt_config.max_iter + 1):
        if not (is_rearrangement_of(g, g_class) and is_rearrangement_of(V, V_class)):
            raise OptimizationError("internal error: iterate left its rearrangement class")
        problem = ProblemData(p, q, g, V)
        eig = solve_principal(mesh, problem, solver_config, u0=u_prev if opt_config.warm_start else None)
        if not eig.converged:
            raise OptimizationError(f"eigen-solve did not converge at iteration {k}")
        if history and eig.lam > history[-1] + opt_config.monotone_tol:
            monotone = False
            log.warning("lambda increased at iteration %d: %.17g -> %.17g", k, history[-1], eig.lam)
        history.append(eig.lam)
        u_prev = eig.u
        w = weight_reference(mesh, eig.u, p)
        g_next = extremal_rearrangement(g_class, w, "max")
        V_next = extremal_rearrangement(V_class, w, "min")
        sg, sv = swap_count(g, g_next), swap_count(V, V_next)
        swaps.append((sg, sv))
        log.debug("iteration %d: lambda=%.15g swaps=(%d, %d)", k, eig.lam, sg, sv)
        if sg == 0 and sv == 0:
            converged = True
            break
        g, V = g_next, V_next

    if not converged:
        log.warning("alternating minimization hit the iteration cap (%d)", opt_config.max_iter)
    w = weight_reference(mesh, eig.u, p)
    state = OptState(k, g, V, eig.lam, eig.u, history, swaps)
    return OptResult(
        state,
        converged,
        monotone,
        comonotonicity_defect(g, w, +1),
        comonotonicity_defect(V, w, -1),
    )


@dataclass
class OptimalityReport:
    defect_g: float
    defect_V: float
    stationarity: float  # max |lambda'(0)| over the probes
    relative_stationarity: float  # stationarity / max absolute integrand mass
    threshold: float
    probe_values: list
    passed: bool

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def stationarity(mesh: Mesh, problem: ProblemData, lam: float, u, probes: Sequence[DeformationField]):
    """Hadamard derivative for each probe and the relative stationarity residual.

    The residual divides ``max |lambda'|`` by ``max int |integrand|`` over the
    probes, i.e. it measures how completely the integrand cancels.
    """
    values, masses = [], []
    for W in probes:
        if not W.divergence_free:
            raise OptimizationError(f"probe {W.name} is not divergence-free")
        terms = hadamard_terms(mesh, problem, lam, u, W)
        values.append(float(np.sum(terms)))
        masses.append(float(np.sum(np.abs(terms))))
    worst = max(abs(v) for v in values)
    mass = max(masses)
    return values, worst, (worst / mass if mass > 0 else 0.0)


def verify_optimality(mesh: Mesh, result: OptResult, probes: Sequence[DeformationField], p: float,
                      threshold: float, q: Optional[float] = None) -> OptimalityReport:
    """Certificates at a fixed point: exact monotone coupling and vanishing
    Hadamard derivative (relative residual below ``threshold``) on the probes."""
    s = result.state
    q = default_q(p, mesh.dimension) if q is None else q
    w = weight_reference(mesh, s.u, p)
    dg = comonotonicity_defect(s.g, w, +1)
    dv = comonotonicity_defect(s.V, w, -1)
    problem = ProblemData(p, q, s.g, s.V)
    values, worst, rel = stationarity(mesh, problem, s.lam, s.u, probes)
    result.stationarity = worst
    passed = result.converged and dg == 0 and dv == 0 and rel <= threshold
    return OptimalityReport(dg, dv, worst, rel, threshold, values, passed)


def distinct_permutations(values: Sequence[float]) -> Iterator[tuple]:
    """All distinct orderings of a multiset, each once."""
    items = sorted(values)
    counts: dict = {}
    for v in items:
        counts[v] = counts.get(v, 0) + 1
    keys = sorted(counts)
    n = len(items)
    out = [0.0] * n

    def rec(pos):
        if pos == n:
            yield tuple(out)
            return
        for key in keys:
            if counts[key]:
                counts[key] -= 1
                out[pos] = key
                yield from rec(pos + 1)
                counts[key] += 1

    yield from rec(0)


@dataclass
class BruteForceResult:
    lam: float
    g: np.ndarray
    V: np.ndarray
    n_assignments: int
    values: list


def brute_force_minimum(mesh: Mesh, g_class: RearrangementClass, V_class: RearrangementClass, p: float,
                        q: Optional[float] = None, solver_config: SolverConfig = SolverConfig(),
                        workers: int = 1) -> BruteForceResult:
    """Exhaustive minimum of the eigenvalue over every pair of class members."""
    q = default_q(p, mesh.dimension) if q is None else q
    pairs = [(np.array(g), np.array(V)) for g in distinct_permutations(g_class.values)
             for V in distinct_permutations(V_class.values)]

    def lam(pair):
        res = solve_principal(mesh, ProblemData(p, q, pair[0], pair[1]), solver_config)
        if not res.converged:
            raise OptimizationError("brute-force solve did not converge")
        return res.lam

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(lam, pairs))
    else:
        values = [lam(pair) for pair in pairs]
    best = int(np.argmin(values))
    return BruteForceResult(values[best], pairs[best][0], pairs[best][1], len(pairs), values)


def initial_independence(mesh: Mesh, g_class: RearrangementClass, V_class: RearrangementClass, p: float,
                         q: Optional[float] = None, solver_config: SolverConfig = SolverConfig(),
                         opt_config: OptConfig = OptConfig(), rtol: float = 1e-6) -> dict:
    """Run the descent from every initial pair; report the spread of final eigenvalues."""
    finals = []
    for g in distinct_permutations(g_class.values):
        for V in distinct_permutations(V_class.values):
            res = alternate_minimize(mesh, g_class, V_class, p, q, solver_config, opt_config,
                                     g_init=np.array(g), V_init=np.array(V))
            finals.append(res.state.lam)
    lo, hi = min(finals), max(finals)
    agree = (hi - lo) <= rtol * max(1.0, abs(lo))
    if not agree:
        log.warning("final eigenvalue depends on the initial assignment: spread %.3g", hi - lo)
    return {"min": lo, "max": hi, "agree": agree, "runs": len(finals)}


__all__ = [
    "OptConfig",
    "OptState",
    "OptResult",
    "OptimalityReport",
    "alternate_minimize",
    "verify_optimality",
    "stationarity",
    "brute_force_minimum",
    "initial_independence",
    "distinct_permutations",
    "weight_reference",
]
