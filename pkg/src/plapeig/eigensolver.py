"""Principal eigenpair of the weighted Dirichlet p-Laplacian with a potential.

The discrete problem is

    lambda(g, V) = min { E(u) : G(u) = 1 },
    E(u) = sum_T |T| |grad u_T|^p + sum_T |T| V_T avg_T |u|^p,
    G(u) = sum_T |T| g_T avg_T |u|^p,

over P1 fields vanishing on the boundary.  For p != 2 the gradient term is
replaced by ``(|grad u|^2 + eps^2)^((p-2)/2) |grad u|^2`` and eps is driven to
a small floor by continuation.  Each level is solved by a descent method on
the constraint surface: a Newton direction for the bordered (KKT) system,
accepted through an Armijo line search on the renormalized energy, with
renormalization ``G(u) = 1`` and ``u <- |u|`` after every accepted step.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh, MeshError, p1_gradient

log = logging.getLogger(__name__)


class ProblemError(ValueError):
    """Invalid problem data (e.g. p <= 1, q violating H1, no positive weight)."""


class SolverError(RuntimeError):
    pass


def default_q(p: float, dimension: int) -> float:
    """An integrability exponent satisfying H1: ``q = 1`` if p > N, else ``q = N/p + 1``."""
    if p > dimension:
        return 1.0
    return max(1.0, dimension / p) + 1.0


def h1_violation(p: float, q: float, dimension: int) -> Optional[str]:
    if not p > 1:
        return f"H1 violated: p must be > 1, got p={p}"
    if p > dimension:
        if q != 1:
            return f"H1 violated: p={p} > N={dimension} requires q=1, got q={q}"
    elif not q > dimension / p:
        return f"H1 violated: p={p} <= N={dimension} requires q > N/p={dimension / p:g}, got q={q}"
    return None


def holder_exponent(p: float, q: float, dimension: int) -> float:
    """``p q'``, or ``inf`` on the p > N branch where q = 1."""
    if p > dimension:
        return math.inf
    return p * q / (q - 1.0)


@dataclass(frozen=True, eq=False)
class ProblemData:
    """One eigenproblem instance.

    ``g_func`` / ``V_func`` optionally keep the analytic sources the cell
    fields were sampled from; transported problems evaluate them exactly.
    """

    p: float
    q: float
    g: np.ndarray
    V: np.ndarray
    g_func: Optional[Callable] = field(default=None, repr=False)
    V_func: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ProblemError(f"H1 violated: p must be > 1, got p={self.p}")
        g = np.asarray(self.g, dtype=float)
        V = np.asarray(self.V, dtype=float)
        if g.shape != V.shape or g.ndim != 1:
            raise ProblemError("g and V must be cell fields of the same length")
        if not np.any(g > 0):
            raise ProblemError("H2 violated: the weight g has no positive part")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "V", V)

    @classmethod
    def on_mesh(cls, mesh: Mesh, p, g, V, q=None) -> "ProblemData":
        """Build and validate against ``mesh``; ``g`` and ``V`` may be arrays,
        scalars, or callables of centroid coordinates."""
        q = default_q(p, mesh.dimension) if q is None else float(q)
        msg = h1_violation(p, q, mesh.dimension)
        if msg:
            raise ProblemError(msg)
        g_func = g if callable(g) else None
        V_func = V if callable(V) else None
        gv = _as_cell_field(mesh, g)
        Vv = _as_cell_field(mesh, V)
        return cls(float(p), q, gv, Vv, g_func, V_func)

    def replace(self, **changes) -> "ProblemData":
        kw = dict(p=self.p, q=self.q, g=self.g, V=self.V, g_func=self.g_func, V_func=self.V_func)
        if "g" in changes and "g_func" not in changes:
            kw["g_func"] = None
        if "V" in changes and "V_func" not in changes:
            kw["V_func"] = None
        kw.update(changes)
        return ProblemData(**kw)


def _as_cell_field(mesh: Mesh, f) -> np.ndarray:
    if callable(f):
        return mesh.sample(f)
    arr = np.asarray(f, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.n_cells, float(arr))
    if arr.shape != (mesh.n_cells,):
        raise MeshError(f"cell field has length {arr.shape}, mesh has {mesh.n_cells} cells")
    return arr


@dataclass(frozen=True)
class SolverConfig:
    eps0: Optional[float] = None  # None: 0.1 * mesh diameter
    eps_decay: float = 0.1
    eps_min: float = 1e-8
    gtol: float = 1e-8
    lambda_tol: float = 1e-10
    norm_tol: float = 1e-10
    residual_tol: float = 1e-6
    max_iter: int = 400
    level_gtol: float = 1e-5
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    seed: Optional[int] = None

    def __post_init__(self):
        if self.eps_min < 0 or (self.eps0 is not None and self.eps0 < self.eps_min):
            raise ValueError("need eps0 >= eps_min >= 0")
        if not 0 < self.eps_decay < 1:
            raise ValueError("eps_decay must lie in (0, 1)")
        for name in ("gtol", "lambda_tol", "norm_tol", "residual_tol", "level_gtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def eps_levels(self, mesh: Mesh, p: float) -> list[float]:
        if p == 2:
            return [0.0]
        if self.eps_min == 0 and p < 2:
            raise ValueError("eps_min = 0 is only allowed for p >= 2")
        eps = 0.1 * mesh.diameter if self.eps0 is None else self.eps0
        levels = []
        while eps > self.eps_min:
            levels.append(eps)
            eps *= self.eps_decay
        levels.append(self.eps_min)
        return levels

    def fixed(self, eps: float) -> "SolverConfig":
        """Same settings with a single regularization level ``eps``."""
        return SolverConfig(**{**self.__dict__, "eps0": eps, "eps_min": eps})


@dataclass
class EigenResult:
    lam: float
    u: np.ndarray
    residual: float
    normalization_defect: float
    iterations: int
    epsilon_final: float
    converged: bool
    lambda_eps: float
    history: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "epsilon_final": self.epsilon_final,
            "converged": self.converged,
            "lambda_eps": self.lambda_eps,
            "normalization_defect": self.normalization_defect,
        }


# ---------------------------------------------------------------------------
# energy on interior unknowns


class _Energy:
    """``E(x) = sum_T |T| Phi_eps(grad x) + sum_i a_i |x_i|^p`` and
    ``G(x) = sum_i b_i |x_i|^r`` over the interior nodal values ``x``."""

    def __init__(self, mesh: Mesh, p: float, r: float, a: np.ndarray, b: np.ndarray, eps: float = 0.0):
        self.mesh = mesh
        self.p, self.r, self.eps = float(p), float(r), float(eps)
        idx = mesh.interior
        self.idx = idx
        self.D = [op[:, idx].tocsr() for op in mesh.gradient_operators]
        self.DT = [d.T.tocsr() for d in self.D]
        self.meas = mesh.measures
        self.a = a[idx]
        self.b = b[idx]

    def full(self, x):
        u = np.zeros(self.mesh.n_nodes)
        u[self.idx] = x
        return u

    def grads(self, x):
        return [d @ x for d in self.D]

    def _phi(self, r2):
        p, e2 = self.p, self.eps**2
        if p == 2:
            return r2
        if e2 == 0:
            return r2 ** (p / 2)
        return (r2 + e2) ** ((p - 2) / 2) * r2

    def _c(self, r2):
        """``c`` with ``grad Phi = c xi`` and its derivative ``dc/d|xi|^2``."""
        p, e2 = self.p, self.eps**2
        if p == 2:
            return np.full_like(r2, 2.0), np.zeros_like(r2)
        m = (p - 2) / 2
        s = r2 + e2
        with np.errstate(divide="ignore", invalid="ignore"):
            c = 2 * s ** (m - 1) * (s + m * r2)
            dc = 2 * ((m - 1) * s ** (m - 2) * (s + m * r2) + (1 + m) * s ** (m - 1))
        if e2 == 0:
            c = np.where(r2 > 0, c, 0.0)
            dc = np.where(r2 > 0, dc, 0.0)
        return c, dc

    @staticmethod
    def _pow(x, e):
        ax = np.abs(x)
        return ax**e

    def value(self, x):
        xi = self.grads(x)
        r2 = sum(z * z for z in xi)
        return float(self.meas @ self._phi(r2) + self.a @ self._pow(x, self.p))

    def constraint(self, x):
        return float(self.b @ self._pow(x, self.r))

    def gradient(self, x):
        xi = self.grads(x)
        r2 = sum(z * z for z in xi)
        c, _ = self._c(r2)
        w = self.meas * c
        out = sum(dt @ (w * z) for dt, z in zip(self.DT, xi))
        return out + self.p * self.a * _signed_pow(x, self.p - 1)

    def constraint_gradient(self, x):
        return self.r * self.b * _signed_pow(x, self.r - 1)

    def hessian(self, x):
        xi = self.grads(x)
        r2 = sum(z * z for z in xi)
        c, dc = self._c(r2)
        n = len(x)
        H = sp.csr_matrix((n, n))
        dim = len(xi)
        for i in range(dim):
            for j in range(dim):
                w = self.meas * (2 * dc * xi[i] * xi[j] + (c if i == j else 0.0))
                H = H + self.DT[i] @ sp.diags(w) @ self.D[j]
        diag = self.p * (self.p - 1) * self.a * _abs_pow_safe(x, self.p - 2)
        return H + sp.diags(diag)

    def constraint_hessian_diag(self, x):
        return self.r * (self.r - 1) * self.b * _abs_pow_safe(x, self.r - 2)


def _signed_pow(x, e):
    return np.sign(x) * np.abs(x) ** e


def _abs_pow_safe(x, e):
    ax = np.abs(x)
    if e >= 0:
        return ax**e
    tiny = np.finfo(float).tiny ** (1 / 4)
    return np.maximum(ax, tiny) ** e


@functools.lru_cache(maxsize=32)
def _laplacian_preconditioner(mesh: Mesh):
    idx = mesh.interior
    K = sum(d[:, idx].T @ sp.diags(mesh.measures) @ d[:, idx] for d in mesh.gradient_operators)
    M = sp.diags(mesh.node_weights()[idx])
    return spla.factorized((K + M).tocsc())


@dataclass
class _Run:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool
    history: list


def _normalize(en: _Energy, x):
    x = np.abs(x)
    G = en.constraint(x)
    if not G > 0:
        return None
    return x / G ** (1 / en.r)


def _merit_gradient(en: _Energy, x, gE):
    """Gradient of ``x -> E(x G(x)^{-1/r})`` at a point with ``G(x) = 1``."""
    gG = en.constraint_gradient(x)
    return gE - (x @ gE / en.r) * gG, gG


def _descend(en: _Energy, x, gtol, config: SolverConfig, max_iter: int, history: list) -> _Run:
    """Minimize ``E`` on ``{G = 1, x >= 0}`` from a normalized start ``x``."""
    F = en.value(x)
    last_dF = math.inf
    precond = None
    for it in range(1, max_iter + 1):
        gE = en.gradient(x)
        gF, gG = _merit_gradient(en, x, gE)
        mu = (gE @ gG) / (gG @ gG)
        res = gE - mu * gG
        scale = 1.0 + abs(F)
        if np.linalg.norm(res) <= gtol * scale and last_dF <= config.lambda_tol * max(1.0, abs(F)):
            return _Run(x, F, it - 1, True, history)

        d = _newton_direction(en, x, mu, res, gG)
        accepted = d is not None and _try_step(en, x, d, F, gF, config)
        if not accepted:
            if precond is None:
                precond = _laplacian_preconditioner(en.mesh)
            d = -precond(gF)
            accepted = _try_step(en, x, d, F, gF, config)
        if not accepted:
            # no representable decrease left along either direction
            ok = np.linalg.norm(res) <= max(gtol, 1e-6) * scale
            return _Run(x, F, it, ok, history)
        x_new, F_new = accepted
        last_dF = abs(F - F_new)
        x, F = x_new, F_new
        history.append(F)
    return _Run(x, F, max_iter, False, history)


def _newton_direction(en: _Energy, x, mu, res, gG):
    n = len(x)
    A = en.hessian(x) - sp.diags(mu * en.constraint_hessian_diag(x))
    col = sp.csr_matrix(-gG.reshape(-1, 1))
    K = sp.bmat([[A, col], [col.T, None]], format="csc")
    rhs = np.concatenate([-res, [0.0]])
    try:
        sol = spla.spsolve(K, rhs, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError:
        return None
    d = sol[:n]
    if not np.all(np.isfinite(d)):
        return None
    return d


def _try_step(en: _Energy, x, d, F, gF, config: SolverConfig):
    slope = gF @ d
    flat = abs(slope) <= 1e-13 * (1.0 + abs(F))
    if slope >= 0 and not flat:
        return None
    alpha = 1.0
    for _ in range(60):
        trial = _normalize(en, x + alpha * d)
        if trial is not None:
            Ft = en.value(trial)
            if flat:
                if Ft <= F + 1e-13 * (1.0 + abs(F)):
                    return trial, Ft
            elif Ft <= F + config.armijo_c * alpha * slope:
                return trial, Ft
        alpha *= config.backtrack
    return None


def _continuation(en_factory, x0, levels, config: SolverConfig):
    """Run the descent through the regularization levels; returns the last run."""
    history: list = []
    total = 0
    run = None
    x = x0
    for k, eps in enumerate(levels):
        en = en_factory(eps)
        xn = _normalize(en, x)
        if xn is None:
            raise SolverError("iterate lost positivity of the constraint functional")
        last = k == len(levels) - 1
        gtol = config.gtol if last else max(config.gtol, config.level_gtol)
        budget = max(1, config.max_iter - total)
        run = _descend(en, xn, gtol, config, budget, history)
        total += run.iterations
        x = run.x
        log.debug("eps=%g: value=%.15g after %d iterations", eps, run.value, run.iterations)
    run.iterations = total
    return run, en


# ---------------------------------------------------------------------------
# public operations


def energy_terms(mesh: Mesh, problem: ProblemData, u) -> tuple[float, float, float]:
    """``(int |grad u|^p, int V |u|^p, int g |u|^p)`` with cell-averaged ``|u|^p``."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise MeshError(f"node field has length {u.shape}, mesh has {mesh.n_nodes} nodes")
    grad = p1_gradient(mesh, u)
    gn = np.sqrt(np.sum(grad**2, axis=1))
    up = mesh.cell_average(np.abs(u) ** problem.p)
    m = mesh.measures
    return float(m @ gn**problem.p), float(m @ (problem.V * up)), float(m @ (problem.g * up))


def rayleigh_quotient(mesh: Mesh, problem: ProblemData, u) -> float:
    grad_term, pot_term, den = energy_terms(mesh, problem, u)
    if not den > 0:
        raise SolverError(f"inadmissible test function: int g|u|^p = {den:g} <= 0")
    return (grad_term + pot_term) / den


def pde_residual(mesh: Mesh, problem: ProblemData, lam: float, u) -> float:
    """Euclidean norm of the discrete weak residual at interior nodes.

    Entry i is ``int |grad u|^{p-2} grad u . grad phi_i + (V - lam g) |u|^{p-2} u phi_i``
    with the same lumped quadrature the solver uses.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise MeshError(f"node field has length {u.shape}, mesh has {mesh.n_nodes} nodes")
    p = problem.p
    grad = p1_gradient(mesh, u)
    gn = np.sqrt(np.sum(grad**2, axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(gn > 0, gn ** (p - 2), 0.0) * mesh.measures
    res = sum(op.T @ (w * grad[:, k]) for k, op in enumerate(mesh.gradient_operators))
    lumped = mesh.node_weights(problem.V - lam * problem.g)
    res = res + lumped * _signed_pow(u, p - 1)
    return float(np.linalg.norm(res[mesh.interior]))


def initial_guess(mesh: Mesh, problem: ProblemData, seed: Optional[int] = None) -> np.ndarray:
    """Smooth bump restricted to interior nodes touching cells with ``g > 0``."""
    pos = problem.g > 0
    touched = np.zeros(mesh.n_nodes, dtype=bool)
    touched[mesh.cells[pos].ravel()] = True
    bump = np.ones(mesh.n_nodes)
    for k, (a, b) in enumerate(mesh.extents):
        bump *= np.sin(np.pi * (mesh.nodes[:, k] - a) / (b - a))
    bump = np.abs(bump) + 1e-3
    if seed is not None:
        rng = np.random.default_rng(seed)
        bump *= rng.uniform(0.5, 1.5, mesh.n_nodes)
    u = np.where(touched & ~mesh.boundary, bump, 0.0)
    if energy_terms(mesh, problem, u)[2] > 0:
        return u
    # drop nodes that also touch negative-weight cells
    neg = np.zeros(mesh.n_nodes, dtype=bool)
    neg[mesh.cells[problem.g < 0].ravel()] = True
    u = np.where(touched & ~neg & ~mesh.boundary, bump, 0.0)
    if energy_terms(mesh, problem, u)[2] > 0:
        return u
    raise SolverError("no initial field with int g u^p > 0: positive-weight cells have no interior nodes")


def solve_principal(
    mesh: Mesh,
    problem: ProblemData,
    config: SolverConfig = SolverConfig(),
    u0: Optional[np.ndarray] = None,
) -> EigenResult:
    """Principal eigenpair by regularized constrained descent.

    ``u0`` warm-starts the descent (e.g. from a nearby problem); its levels
    of the eps schedule above the floor are then skipped.
    """
    if not mesh.is_equal_measure():
        raise MeshError("solver requires an equal-measure mesh")
    if problem.g.shape != (mesh.n_cells,):
        raise MeshError("problem fields do not match the mesh")
    p = problem.p
    a = mesh.node_weights(problem.V)
    b = mesh.node_weights(problem.g)
    levels = config.eps_levels(mesh, p)
    if u0 is None:
        x0 = initial_guess(mesh, problem, config.seed)[mesh.interior]
    else:
        x0 = np.abs(np.asarray(u0, dtype=float))[mesh.interior]
        levels = levels[-1:]
        if not b[mesh.interior] @ x0**p > 0:
            x0 = initial_guess(mesh, problem, config.seed)[mesh.interior]
            levels = config.eps_levels(mesh, p)

    def factory(eps):
        return _Energy(mesh, p, p, a, b, eps)

    run, en = _continuation(factory, x0, levels, config)
    u = en.full(run.x)
    lam = rayleigh_quotient(mesh, problem, u)
    resid = pde_residual(mesh, problem, lam, u)
    ndef = abs(energy_terms(mesh, problem, u)[2] - 1.0)
    converged = run.converged and ndef <= config.norm_tol
    if not converged:
        log.warning("solve_principal did not converge (iterations=%d)", run.iterations)
    return EigenResult(
        lam=lam,
        u=u,
        residual=resid,
        normalization_defect=ndef,
        iterations=run.iterations,
        epsilon_final=levels[-1],
        converged=converged,
        lambda_eps=run.value,
        history=list(run.history),
    )


# ---------------------------------------------------------------------------
# Sobolev constants and hypotheses


@functools.lru_cache(maxsize=64)
def estimate_sobolev_constant(mesh: Mesh, p: float, r: float, config: SolverConfig = SolverConfig()) -> float:
    """Discrete ``S_r = inf { int |grad u|^p : ||u||_{L^r} = 1 }``.

    ``r = inf`` (only for p > N) uses the sup norm: the minimum over a lattice
    of candidate nodes x0 of ``inf { int |grad u|^p : u(x0) = 1 }``.
    """
    N = mesh.dimension
    if not p > 1:
        raise ProblemError(f"p must be > 1, got {p}")
    if math.isinf(r):
        if not p > N:
            raise ProblemError(f"r = inf requires p > N, got p={p}, N={N}")
        return _sup_norm_constant(mesh, p, config)
    if r < 1:
        raise ProblemError(f"inadmissible exponent r={r}")
    if p < N and r >= N * p / (N - p):
        raise ProblemError(f"r={r} is not below the critical exponent {N * p / (N - p):g}")
    zero = np.zeros(mesh.n_nodes)
    b = mesh.node_weights()

    def factory(eps):
        return _Energy(mesh, p, r, zero, b, eps)

    ones = ProblemData(p, default_q(p, N), np.ones(mesh.n_cells), np.zeros(mesh.n_cells))
    x0 = initial_guess(mesh, ones)[mesh.interior]
    run, en = _continuation(factory, x0, config.eps_levels(mesh, p), config)
    u = en.full(run.x)
    grad = p1_gradient(mesh, u)
    dirichlet_energy = float(mesh.measures @ np.sqrt(np.sum(grad**2, axis=1)) ** p)
    norm = float(mesh.measures @ mesh.cell_average(np.abs(u) ** r)) ** (1 / r)
    return dirichlet_energy / norm**p


def _sup_norm_constant(mesh: Mesh, p: float, config: SolverConfig) -> float:
    fractions = np.arange(1, 8) / 8
    pts = []
    for k, (a, b) in enumerate(mesh.extents):
        pts.append(a + fractions * (b - a))
    grid = np.stack(np.meshgrid(*pts, indexing="ij"), axis=-1).reshape(-1, mesh.dimension)
    interior = mesh.interior
    cand = set()
    for x in grid:
        dist = np.linalg.norm(mesh.nodes[interior] - x, axis=1)
        cand.add(int(interior[np.argmin(dist)]))
    return min(_point_capacity(mesh, p, node, config) for node in sorted(cand))


def _point_capacity(mesh: Mesh, p: float, node: int, config: SolverConfig) -> float:
    """``min int |grad u|^p`` over Dirichlet fields with ``u(node) = 1`` (convex problem)."""
    free = np.setdiff1d(mesh.interior, [node])
    D = [op.tocsc() for op in mesh.gradient_operators]
    Df = [d[:, free].tocsr() for d in D]
    base = [d[:, [node]].toarray().ravel() for d in D]
    meas = mesh.measures
    levels = config.eps_levels(mesh, p)
    x = np.zeros(len(free))
    helper = _Energy.__new__(_Energy)
    for eps in levels:
        helper.p, helper.eps = float(p), eps

        def parts(x):
            xi = [df @ x + b0 for df, b0 in zip(Df, base)]
            r2 = sum(z * z for z in xi)
            return xi, r2

        for _ in range(200):
            xi, r2 = parts(x)
            E = float(meas @ helper._phi(r2))
            c, dc = helper._c(r2)
            grad = sum(df.T @ (meas * c * z) for df, z in zip(Df, xi))
            gtol = config.gtol if eps == levels[-1] else config.level_gtol
            if np.linalg.norm(grad) <= gtol * (1 + E):
                break
            H = sp.csr_matrix((len(x), len(x)))
            for i in range(len(xi)):
                for j in range(len(xi)):
                    w = meas * (2 * dc * xi[i] * xi[j] + (c if i == j else 0.0))
                    H = H + Df[i].T @ sp.diags(w) @ Df[j]
            d = spla.spsolve(H.tocsc(), -grad)
            slope = grad @ d
            alpha = 1.0
            while alpha > 1e-12:
                xt = x + alpha * d
                Et = float(meas @ helper._phi(parts(xt)[1]))
                if Et <= E + config.armijo_c * alpha * slope or abs(slope) < 1e-14 * (1 + E):
                    break
                alpha *= config.backtrack
            x = x + alpha * d
    u = np.zeros(mesh.n_nodes)
    u[free] = x
    u[node] = 1.0
    grad = p1_gradient(mesh, u)
    return float(meas @ np.sqrt(np.sum(grad**2, axis=1)) ** p)


@dataclass
class HypothesisReport:
    h1_ok: bool
    h2_branch: str  # "norm-bound" | "lower-bound" | "fail"
    S_p: float
    S_pq: float
    V_minus_norm: float
    delta0: float
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.h1_ok and self.h2_branch != "fail"

    def to_dict(self) -> dict:
        return {
            "h1_ok": self.h1_ok,
            "h2_branch": self.h2_branch,
            "S_p": self.S_p,
            "S_pq": self.S_pq,
            "V_minus_norm": self.V_minus_norm,
            "delta0": self.delta0,
            "messages": list(self.messages),
        }


def lq_norm(mesh: Mesh, f, q: float) -> float:
    f = np.abs(np.asarray(f, dtype=float))
    if math.isinf(q):
        return float(f.max())
    return float(mesh.measures @ f**q) ** (1 / q)


def check_hypotheses(mesh: Mesh, problem: Optional[ProblemData] = None, *, p=None, g=None, V=None,
                     q=None, config: SolverConfig = SolverConfig()) -> HypothesisReport:
    """Evaluate H1, the two H2 branches, and the coercivity margin delta0.

    Pass either a :class:`ProblemData` or raw ``p, g, V[, q]`` (raw data may
    violate the hypotheses; failures are reported, never raised).
    """
    if problem is not None:
        p, g, V, q = problem.p, problem.g, problem.V, problem.q
    N = mesh.dimension
    q = default_q(p, N) if q is None else float(q)
    g = np.asarray(g, dtype=float)
    V = np.asarray(V, dtype=float)
    msgs = []
    h1 = h1_violation(p, q, N)
    if h1:
        msgs.append(h1)
        return HypothesisReport(False, "fail", math.nan, math.nan, math.nan, 0.0, msgs)
    r = holder_exponent(p, q, N)
    vminus = lq_norm(mesh, np.minimum(V, 0.0), q)
    S_pq = estimate_sobolev_constant(mesh, float(p), float(r), config)
    S_p = estimate_sobolev_constant(mesh, float(p), float(p), config)
    norm_margin = 1.0 - vminus / S_pq
    lower_margin = (float(V.min()) + S_p) / S_p
    if not np.any(g > 0):
        msgs.append("H2 violated: g has no positive part")
        branch, delta0 = "fail", min(0.0, max(norm_margin, lower_margin))
    elif norm_margin > 0:
        branch, delta0 = "norm-bound", norm_margin
    elif lower_margin > 0:
        branch, delta0 = "lower-bound", lower_margin
    else:
        msgs.append("H2 violated: ||V^-||_q >= S_pq' and min V <= -S_p")
        branch, delta0 = "fail", max(norm_margin, lower_margin)
    return HypothesisReport(True, branch, S_p, S_pq, vminus, delta0, msgs)
