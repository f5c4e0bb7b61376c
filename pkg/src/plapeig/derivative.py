"""Derivative of the principal eigenvalue along a deformation flow.

For ``g_t = g o phi_t^{-1}`` and ``V_t = V o phi_t^{-1}`` three expressions
for ``lambda'(0)`` are assembled from a converged eigenpair, with cellwise
gradients of ``u`` and the field (and its Jacobian) evaluated at centroids:

* general:     int (|grad u|^p + V u^p - lam g u^p) div W
               - p int |grad u|^{p-2} <grad u, W' grad u>
* div-free:    - p int |grad u|^{p-2} <grad u, W' grad u>
* hadamard:    p int (V - lam g) u^{p-1} <grad u, W>

and compared with central differences of fresh solves on transported data.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .eigensolver import EigenResult, ProblemData, SolverConfig, solve_principal
from .flow import DeformationField, FlowConfig, transport_field
from .mesh import Mesh, p1_gradient


class DerivativeError(ValueError):
    pass


def _require(eig: EigenResult):
    if not eig.converged:
        raise DerivativeError("eigenpair is not converged")


def _require_divfree(field: DeformationField):
    if not field.divergence_free:
        raise DerivativeError(f"{field.name}: formula requires a divergence-free field")


def _gradient_form(mesh: Mesh, p: float, u, field: DeformationField):
    """Per-cell ``|grad u|^{p-2} <grad u, W' grad u>``, ``|grad u|^p`` and ``div W``."""
    grad = p1_gradient(mesh, u)
    gn = np.sqrt(np.sum(grad**2, axis=1))
    cents = mesh.centroids
    J = field.jacobian(cents)
    quad = np.einsum("ki,kij,kj->k", grad, J, grad)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.where(gn > 0, gn ** (p - 2), 0.0)
    return weight * quad, gn**p, field.divergence(cents)


def derivative_divfree(mesh: Mesh, problem: ProblemData, eig: EigenResult, field: DeformationField) -> float:
    _require_divfree(field)
    _require(eig)
    form, _, _ = _gradient_form(mesh, problem.p, eig.u, field)
    return _divfree_sum(mesh, problem.p, form)


def _divfree_sum(mesh, p, form):
    return float(-p * (mesh.measures @ form))


def derivative_general(mesh: Mesh, problem: ProblemData, eig: EigenResult, field: DeformationField) -> float:
    _require(eig)
    p = problem.p
    form, gp, div = _gradient_form(mesh, p, eig.u, field)
    up = mesh.cell_average(np.abs(eig.u) ** p)
    density = gp + (problem.V - eig.lam * problem.g) * up
    return float(mesh.measures @ (density * div)) + _divfree_sum(mesh, p, form)


def derivative_hadamard(mesh: Mesh, problem: ProblemData, eig: EigenResult, field: DeformationField) -> float:
    _require_divfree(field)
    _require(eig)
    return hadamard_value(mesh, problem, eig.lam, eig.u, field)


def hadamard_terms(mesh: Mesh, problem: ProblemData, lam: float, u, field: DeformationField) -> np.ndarray:
    """Per-cell integrand ``p (V - lam g) avg(|u|^{p-2} u) <grad u, W>`` times ``|T|``."""
    p = problem.p
    grad = p1_gradient(mesh, u)
    w = field(mesh.centroids)
    flux = np.sum(grad * w, axis=1)
    u = np.asarray(u, dtype=float)
    up1 = mesh.cell_average(np.sign(u) * np.abs(u) ** (p - 1))
    return p * (problem.V - lam * problem.g) * up1 * flux * mesh.measures


def hadamard_value(mesh: Mesh, problem: ProblemData, lam: float, u, field: DeformationField) -> float:
    return float(np.sum(hadamard_terms(mesh, problem, lam, u, field)))


def transported_problem(mesh: Mesh, problem: ProblemData, field: DeformationField, t: float,
                        flow: FlowConfig = FlowConfig()) -> ProblemData:
    """``(g o phi_t^{-1}, V o phi_t^{-1})``, exact when analytic sources are attached."""
    g = transport_field(problem.g_func or problem.g, field, t, mesh, flow)
    V = transport_field(problem.V_func or problem.V, field, t, mesh, flow)
    return problem.replace(g=g, V=V, g_func=problem.g_func, V_func=problem.V_func)


def fd_lambda(mesh: Mesh, problem: ProblemData, field: DeformationField, t: float,
              config: SolverConfig = SolverConfig(), flow: FlowConfig = FlowConfig(),
              u0: Optional[np.ndarray] = None) -> float:
    """``lambda(g_t, V_t)`` from a fresh solve (warm-started by ``u0`` if given)."""
    res = solve_principal(mesh, transported_problem(mesh, problem, field, t, flow), config, u0=u0)
    if not res.converged:
        raise DerivativeError(f"solver did not converge on the problem transported to t={t:g}")
    return res.lam


def fd_derivative_oracle(mesh: Mesh, problem: ProblemData, field: DeformationField, t: float = 1e-3,
                         config: SolverConfig = SolverConfig(), flow: FlowConfig = FlowConfig(),
                         u0: Optional[np.ndarray] = None, lam0: Optional[float] = None,
                         parallel: bool = False) -> "FDEstimate":
    """Central difference ``(lambda(t) - lambda(-t)) / 2t``.

    With ``lam0`` the two one-sided quotients are reported too, so callers can
    see when left and right derivatives disagree.
    """
    if not t > 0:
        raise DerivativeError("finite-difference step must be positive")
    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            lp, lm = pool.map(lambda s: fd_lambda(mesh, problem, field, s, config, flow, u0), (t, -t))
    else:
        lp = fd_lambda(mesh, problem, field, t, config, flow, u0)
        lm = fd_lambda(mesh, problem, field, -t, config, flow, u0)
    central = (lp - lm) / (2 * t)
    right = left = math.nan
    if lam0 is not None:
        right = (lp - lam0) / t
        left = (lam0 - lm) / t
    return FDEstimate(t, central, lp, lm, right, left)


@dataclass
class FDEstimate:
    t: float
    value: float
    lam_plus: float
    lam_minus: float
    right: float = math.nan
    left: float = math.nan


def richardson(fd_t: float, fd_half: float) -> float:
    """Extrapolate two central differences at ``t`` and ``t/2`` (error O(t^2))."""
    return (4 * fd_half - fd_t) / 3


@dataclass
class DerivativeReport:
    value_general: float
    value_divfree: Optional[float]
    value_hadamard: Optional[float]
    fd_value: float
    t_used: float
    cross_defects: dict = field(default_factory=dict)
    one_sided: dict = field(default_factory=dict)
    class_drift: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value_general": self.value_general,
            "value_divfree": self.value_divfree,
            "value_hadamard": self.value_hadamard,
            "fd_value": self.fd_value,
            "t_used": self.t_used,
            "cross_defects": dict(self.cross_defects),
            "one_sided": dict(self.one_sided),
            "class_drift": dict(self.class_drift),
        }


def class_drift(mesh: Mesh, problem: ProblemData, field: DeformationField, t: float,
                flow: FlowConfig = FlowConfig()) -> dict:
    """``max |sort(f_t) - sort(f)|`` for g and V: how far transport leaves the rearrangement class.

    Zero drift is not expected: the transported cell values are point samples
    of the moved field, not a permutation of the original ones.
    """
    moved = transported_problem(mesh, problem, field, t, flow)
    return {name: float(np.max(np.abs(np.sort(getattr(moved, name)) - np.sort(getattr(problem, name)))))
            for name in ("g", "V")}


def derivative_report(mesh: Mesh, problem: ProblemData, eig: EigenResult, field: DeformationField,
                      t: float = 1e-3, config: SolverConfig = SolverConfig(),
                      flow: FlowConfig = FlowConfig(), richardson_extrapolate: bool = False) -> DerivativeReport:
    """All applicable formulas plus the finite-difference value, with pairwise gaps."""
    general = derivative_general(mesh, problem, eig, field)
    divfree = hadamard = None
    if field.divergence_free:
        divfree = derivative_divfree(mesh, problem, eig, field)
        hadamard = derivative_hadamard(mesh, problem, eig, field)
    fd = fd_derivative_oracle(mesh, problem, field, t, config, flow, u0=eig.u, lam0=eig.lam)
    fd_value = fd.value
    if richardson_extrapolate:
        half = fd_derivative_oracle(mesh, problem, field, t / 2, config, flow, u0=eig.u)
        fd_value = richardson(fd.value, half.value)
    values = {"general": general, "divfree": divfree, "hadamard": hadamard, "fd": fd_value}
    names = [k for k, v in values.items() if v is not None]
    cross = {f"{a}-{b}": abs(values[a] - values[b]) for i, a in enumerate(names) for b in names[i + 1:]}
    one_sided = {"right": fd.right, "left": fd.left}
    drift = class_drift(mesh, problem, field, t, flow)
    return DerivativeReport(general, divfree, hadamard, fd_value, t, cross, one_sided, drift)
