"""Analytic deformation fields, their flows, and transport of cell fields.

Every field carries a hand-coded Jacobian and divergence; the library
fields are compactly supported inside a box that callers keep away from the
domain boundary.  Stream-function fields and cut-off rotations are exactly
divergence-free: their divergence is assembled from the same floating-point
products with opposite signs and evaluates to 0.0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .mesh import Mesh, MeshError


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowConfig:
    """``steps`` is the number of RK4 substeps used for one flow of duration t."""

    steps: int = 64

    def __post_init__(self):
        if self.steps < 16:
            raise ValueError(f"need at least 16 integrator steps, got {self.steps}")


class DeformationField:
    """Vector field ``W`` with analytic Jacobian ``W'`` and divergence.

    Subclasses implement ``_eval(x) -> (W, J)`` for points ``x`` of shape
    ``(n, dim)`` returning ``W`` of shape ``(n, dim)`` and ``J[k, i, j] =
    dW_i/dx_j``.
    """

    dimension: int = 2
    divergence_free: bool = False
    name: str = "field"
    support: Optional[tuple] = None  # ((lo, hi), ...) bounding box, None if W == 0

    def _eval(self, x):
        raise NotImplementedError

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        return np.atleast_2d(x) if self.dimension > 1 or x.ndim == 2 else x.reshape(-1, 1)

    def __call__(self, x) -> np.ndarray:
        return self._eval(self._points(x))[0]

    def jacobian(self, x) -> np.ndarray:
        return self._eval(self._points(x))[1]

    def divergence(self, x) -> np.ndarray:
        return self._divergence(self._points(x))

    def _divergence(self, x):
        J = self._eval(x)[1]
        return np.trace(J, axis1=1, axis2=2)

    def __add__(self, other: "DeformationField") -> "DeformationField":
        return SumField([self, other])

    def __neg__(self) -> "DeformationField":
        return ScaledField(self, -1.0)

    def __mul__(self, c: float) -> "DeformationField":
        return ScaledField(self, float(c))

    __rmul__ = __mul__

    def params(self) -> dict:
        return {"name": self.name}

    def validate(self, mesh: Mesh, samples: int = 1000, seed: int = 0) -> None:
        """Check support, sampled divergence and a finite Lipschitz bound on ``mesh``."""
        if self.dimension != mesh.dimension:
            raise FlowError(f"{self.name}: field dimension {self.dimension} != mesh dimension {mesh.dimension}")
        if self.support is not None:
            for (lo, hi), (a, b), h in zip(self.support, mesh.extents, mesh.spacing):
                if lo < a + h or hi > b - h:
                    raise FlowError(f"{self.name}: support {self.support} not inside the domain by one cell")
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in mesh.extents])
        hi = np.array([b for _, b in mesh.extents])
        pts = lo + (hi - lo) * rng.random((samples, mesh.dimension))
        J = self.jacobian(pts)
        if not np.all(np.isfinite(J)):
            raise FlowError(f"{self.name}: non-finite Jacobian")
        if self.divergence_free and np.max(np.abs(self.divergence(pts))) > 1e-12:
            raise FlowError(f"{self.name}: flagged divergence-free but div W != 0")

    def lipschitz_estimate(self, mesh: Mesh, samples: int = 1000, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in mesh.extents])
        hi = np.array([b for _, b in mesh.extents])
        pts = lo + (hi - lo) * rng.random((samples, mesh.dimension))
        return float(np.max(np.linalg.norm(self.jacobian(pts), ord=2, axis=(1, 2))))


class ZeroField(DeformationField):
    divergence_free = True
    name = "zero"

    def __init__(self, dimension: int = 2):
        self.dimension = dimension
        self.support = None

    def _eval(self, x):
        n, d = x.shape
        return np.zeros((n, d)), np.zeros((n, d, d))

    def _divergence(self, x):
        return np.zeros(len(x))

    def params(self):
        return {"name": self.name, "dimension": self.dimension}


class SumField(DeformationField):
    name = "sum"

    def __init__(self, parts: Sequence[DeformationField]):
        dims = {f.dimension for f in parts}
        if len(dims) != 1:
            raise FlowError("cannot add fields of different dimensions")
        self.parts = list(parts)
        self.dimension = dims.pop()
        self.divergence_free = all(f.divergence_free for f in parts)
        boxes = [f.support for f in parts if f.support is not None]
        self.support = None if not boxes else tuple(
            (min(b[k][0] for b in boxes), max(b[k][1] for b in boxes)) for k in range(self.dimension)
        )

    def _eval(self, x):
        out = [f._eval(x) for f in self.parts]
        return sum(w for w, _ in out), sum(j for _, j in out)

    def _divergence(self, x):
        return sum(f._divergence(x) for f in self.parts)

    def params(self):
        return {"name": "sum", "parts": [f.params() for f in self.parts]}


class ScaledField(DeformationField):
    name = "scaled"

    def __init__(self, base: DeformationField, c: float):
        self.base, self.c = base, c
        self.dimension = base.dimension
        self.divergence_free = base.divergence_free
        self.support = base.support

    def _eval(self, x):
        w, j = self.base._eval(x)
        return self.c * w, self.c * j

    def _divergence(self, x):
        return self.c * self.base._divergence(x)

    def params(self):
        return {"name": "scaled", "factor": self.c, "base": self.base.params()}


def _poly_bump(s, k):
    """``(1 - s^2)^k`` on ``|s| < 1`` and its first two derivatives in ``s``."""
    inside = np.abs(s) < 1
    t = np.where(inside, 1 - s * s, 0.0)
    f = t**k
    f1 = -2 * k * s * t ** (k - 1)
    f2 = -2 * k * t ** (k - 1) + 4 * k * (k - 1) * s * s * t ** (k - 2)
    return np.where(inside, f, 0.0), np.where(inside, f1, 0.0), np.where(inside, f2, 0.0)


def _cutoff(r, r_in, r_out):
    """C^2 radial cutoff: 1 on ``r <= r_in``, 0 on ``r >= r_out``; returns value and d/dr."""
    tau = np.clip((r - r_in) / (r_out - r_in), 0.0, 1.0)
    smooth = tau**3 * (10 - 15 * tau + 6 * tau**2)
    dsmooth = 30 * tau**2 * (1 - tau) ** 2 / (r_out - r_in)
    return 1.0 - smooth, -dsmooth


class StreamBumpField(DeformationField):
    """``W = (d psi/dy, -d psi/dx)`` for ``psi = s * B(x) * B(y)`` with a polynomial bump B.

    ``B(x) = (1 - ((x - cx)/ax)^2)^k`` on its support; the field is
    divergence-free and vanishes outside ``[cx-ax, cx+ax] x [cy-ay, cy+ay]``.
    """

    divergence_free = True
    name = "stream_bump"
    dimension = 2

    def __init__(self, center=(0.5, 0.5), half_widths=(0.3, 0.3), strength=1.0, power=4):
        self.center = tuple(float(c) for c in center)
        self.half_widths = tuple(float(a) for a in half_widths)
        self.strength = float(strength)
        self.power = int(power)
        if self.power < 3:
            raise ValueError("stream bump needs power >= 3 for a C^2 field")
        (cx, cy), (ax, ay) = self.center, self.half_widths
        self.support = ((cx - ax, cx + ax), (cy - ay, cy + ay))

    def stream_function(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        (cx, cy), (ax, ay) = self.center, self.half_widths
        return self.strength * _poly_bump((x[:, 0] - cx) / ax, self.power)[0] * _poly_bump(
            (x[:, 1] - cy) / ay, self.power
        )[0]

    def _eval(self, x):
        (cx, cy), (ax, ay) = self.center, self.half_widths
        f, f1, f2 = _poly_bump((x[:, 0] - cx) / ax, self.power)
        h, h1, h2 = _poly_bump((x[:, 1] - cy) / ay, self.power)
        f1, f2 = f1 / ax, f2 / ax**2
        h1, h2 = h1 / ay, h2 / ay**2
        s = self.strength
        W = np.column_stack([s * f * h1, -s * f1 * h])
        cross = s * f1 * h1
        J = np.empty((len(x), 2, 2))
        J[:, 0, 0] = cross
        J[:, 0, 1] = s * f * h2
        J[:, 1, 0] = -s * f2 * h
        J[:, 1, 1] = -cross
        return W, J

    def params(self):
        return {"name": self.name, "center": list(self.center), "half_widths": list(self.half_widths),
                "strength": self.strength, "power": self.power}


class RotationField(DeformationField):
    """``W = omega * chi(r) * (y - y0, -(x - x0))`` with a C^2 radial cutoff chi.

    Inside ``r <= r_inner`` the flow is the exact rotation by angle ``-omega t``.
    """

    divergence_free = True
    name = "rotation"
    dimension = 2

    def __init__(self, center=(0.5, 0.5), r_inner=0.2, r_outer=0.35, omega=1.0):
        if not 0 <= r_inner < r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")
        self.center = tuple(float(c) for c in center)
        self.r_inner, self.r_outer, self.omega = float(r_inner), float(r_outer), float(omega)
        cx, cy = self.center
        self.support = ((cx - r_outer, cx + r_outer), (cy - r_outer, cy + r_outer))

    def _eval(self, x):
        dx = x[:, 0] - self.center[0]
        dy = x[:, 1] - self.center[1]
        r = np.hypot(dx, dy)
        chi, dchi = _cutoff(r, self.r_inner, self.r_outer)
        w = self.omega
        W = np.column_stack([w * chi * dy, -w * chi * dx])
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, w * dchi / r, 0.0)  # d(w chi)/dr / r
        cross = g * dx * dy
        J = np.empty((len(x), 2, 2))
        J[:, 0, 0] = cross
        J[:, 0, 1] = g * dy * dy + w * chi
        J[:, 1, 0] = -(g * dx * dx + w * chi)
        J[:, 1, 1] = -cross
        return W, J

    def params(self):
        return {"name": self.name, "center": list(self.center), "r_inner": self.r_inner,
                "r_outer": self.r_outer, "omega": self.omega}


class TranslationField(DeformationField):
    """``W = chi(|x - c|) * v``: a constant translation on a plateau, cut off smoothly.

    Not divergence-free; available in 1D and 2D.
    """

    name = "translation"

    def __init__(self, center, direction, r_inner=0.1, r_outer=0.3):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.direction = np.atleast_1d(np.asarray(direction, dtype=float))
        if self.center.shape != self.direction.shape:
            raise ValueError("center and direction must have the same dimension")
        if not 0 <= r_inner < r_outer:
            raise ValueError("need 0 <= r_inner < r_outer")
        self.dimension = len(self.center)
        self.r_inner, self.r_outer = float(r_inner), float(r_outer)
        self.support = tuple((c - r_outer, c + r_outer) for c in self.center)

    def _eval(self, x):
        d = x - self.center
        r = np.linalg.norm(d, axis=1)
        chi, dchi = _cutoff(r, self.r_inner, self.r_outer)
        with np.errstate(divide="ignore", invalid="ignore"):
            grad_chi = np.where(r[:, None] > 0, dchi[:, None] * d / r[:, None], 0.0)
        W = chi[:, None] * self.direction
        J = self.direction[None, :, None] * grad_chi[:, None, :]
        return W, J

    def params(self):
        return {"name": self.name, "center": self.center.tolist(), "direction": self.direction.tolist(),
                "r_inner": self.r_inner, "r_outer": self.r_outer}


class DilationField(DeformationField):
    """``W = s * B(|x - c| / R) * (x - c)`` with the polynomial bump B; not divergence-free."""

    name = "dilation"

    def __init__(self, center, radius=0.3, strength=1.0, power=4):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.dimension = len(self.center)
        self.radius, self.strength, self.power = float(radius), float(strength), int(power)
        self.support = tuple((c - radius, c + radius) for c in self.center)

    def _eval(self, x):
        d = x - self.center
        R = self.radius
        rho2 = np.sum(d * d, axis=1) / R**2
        inside = rho2 < 1
        t = np.where(inside, 1 - rho2, 0.0)
        k = self.power
        B = np.where(inside, t**k, 0.0)
        # dB/dx = -2k t^{k-1} (x - c) / R^2
        dB = np.where(inside, -2 * k * t ** (k - 1) / R**2, 0.0)[:, None] * d
        s = self.strength
        W = s * B[:, None] * d
        eye = np.eye(self.dimension)[None]
        J = s * (B[:, None, None] * eye + d[:, :, None] * dB[:, None, :])
        return W, J

    def params(self):
        return {"name": self.name, "center": self.center.tolist(), "radius": self.radius,
                "strength": self.strength, "power": self.power}


LIBRARY: dict[str, Callable[..., DeformationField]] = {
    "zero": ZeroField,
    "stream_bump": StreamBumpField,
    "rotation": RotationField,
    "translation": TranslationField,
    "dilation": DilationField,
}


def random_stream_probes(mesh: Mesh, count: int, seed: int = 0, power: int = 4) -> list[StreamBumpField]:
    """Random divergence-free stream bumps supported at least one cell inside ``mesh``."""
    if mesh.dimension != 2:
        raise FlowError("divergence-free probes need a 2D mesh")
    rng = np.random.default_rng(seed)
    (x0, x1), (y0, y1) = mesh.extents
    # margins independent of the resolution keep probes identical across refinements
    mx = max(mesh.spacing[0], 0.07 * (x1 - x0))
    my = max(mesh.spacing[1], 0.07 * (y1 - y0))
    # half widths capped so the support fits inside the margins on coarse meshes
    ax_max = min(0.4 * (x1 - x0), 0.5 * (x1 - x0) - mx)
    ay_max = min(0.4 * (y1 - y0), 0.5 * (y1 - y0) - my)
    if ax_max <= 0.05 * (x1 - x0) or ay_max <= 0.05 * (y1 - y0):
        raise FlowError("mesh too coarse for stream probes")
    probes = []
    for _ in range(count):
        ax = rng.uniform(0.15 * (x1 - x0), max(ax_max, 0.15 * (x1 - x0)))
        ay = rng.uniform(0.15 * (y1 - y0), max(ay_max, 0.15 * (y1 - y0)))
        cx = rng.uniform(x0 + mx + ax, x1 - mx - ax)
        cy = rng.uniform(y0 + my + ay, y1 - my - ay)
        s = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        probes.append(StreamBumpField((cx, cy), (ax, ay), s, power))
    return probes


def make_field(name: str, **params) -> DeformationField:
    try:
        factory = LIBRARY[name]
    except KeyError:
        raise FlowError(f"unknown field {name!r}; choose from {sorted(LIBRARY)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# flows


def _rk4(field: DeformationField, t: float, x: np.ndarray, steps: int) -> np.ndarray:
    h = t / steps
    for _ in range(steps):
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def flow_map(field: DeformationField, t: float, x, config: FlowConfig = FlowConfig(),
             bounds: Optional[Sequence] = None) -> np.ndarray:
    """``phi_t(x)`` by classical RK4; negative ``t`` integrates the reversed field.

    ``x`` is one point or an array of points; the result has the same shape.
    With ``bounds`` (mesh extents), trajectories leaving the closed box raise.
    """
    x = np.asarray(x, dtype=float)
    shape = x.shape
    pts = x.reshape(-1, field.dimension)
    out = pts.copy() if t == 0 else _rk4(field, float(t), pts, config.steps)
    if bounds is not None:
        lo = np.array([a for a, _ in bounds])
        hi = np.array([b for _, b in bounds])
        tol = 1e-9 * float(np.max(hi - lo))
        if np.any(out < lo - tol) or np.any(out > hi + tol):
            raise FlowError(f"{field.name}: trajectory left the domain")
    return out.reshape(shape)


def inverse_flow_map(field: DeformationField, t: float, x, config: FlowConfig = FlowConfig(),
                     bounds: Optional[Sequence] = None) -> np.ndarray:
    return flow_map(field, -t, x, config, bounds)


def transport_field(f, field: DeformationField, t: float, mesh: Mesh,
                    config: FlowConfig = FlowConfig()) -> np.ndarray:
    """``f o phi_t^{-1}`` sampled at cell centroids.

    ``f`` is either a cell field (evaluated by locating the cell that contains
    each preimage) or a callable of points (evaluated exactly there).
    """
    cents = mesh.centroids
    if t == 0:
        return np.asarray(f(cents) if callable(f) else f, dtype=float).reshape(mesh.n_cells).copy()
    pre = inverse_flow_map(field, t, cents, config)
    if callable(f):
        return np.asarray(f(pre), dtype=float).reshape(mesh.n_cells)
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.n_cells,):
        raise MeshError(f"cell field has length {f.shape}, mesh has {mesh.n_cells} cells")
    try:
        cells = mesh.locate(pre)
    except MeshError as exc:
        raise FlowError(f"{field.name}: preimage left the domain") from exc
    return f[cells]


def flow_jacobian(field: DeformationField, t: float, x, config: FlowConfig = FlowConfig()) -> np.ndarray:
    """``D phi_t(x)`` from the variational equation ``dJ/dt = W'(phi) J``, RK4 alongside the flow."""
    d = field.dimension
    pts = np.asarray(x, dtype=float).reshape(-1, d)
    J = np.broadcast_to(np.eye(d), (len(pts), d, d)).copy()
    if t == 0:
        return J
    h = float(t) / config.steps

    def rhs(y, M):
        W, dW = field._eval(y)
        return W, dW @ M

    y = pts.copy()
    for _ in range(config.steps):
        k1, m1 = rhs(y, J)
        k2, m2 = rhs(y + 0.5 * h * k1, J + 0.5 * h * m1)
        k3, m3 = rhs(y + 0.5 * h * k2, J + 0.5 * h * m2)
        k4, m4 = rhs(y + h * k3, J + h * m3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        J = J + (h / 6.0) * (m1 + 2 * m2 + 2 * m3 + m4)
    return J


def jacobian_defect(field: DeformationField, t: float, config: FlowConfig = FlowConfig(),
                    points=None, samples: int = 200, seed: int = 0) -> float:
    """``max |det D phi_t - 1|`` over sample points (random in the support box by default)."""
    if not field.divergence_free:
        raise FlowError(f"{field.name}: jacobian_defect requires a divergence-free field")
    d = field.dimension
    if points is None:
        if field.support is None:
            return 0.0
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in field.support])
        hi = np.array([b for _, b in field.support])
        points = lo + (hi - lo) * rng.random((samples, d))
    J = flow_jacobian(field, t, points, config)
    return float(np.max(np.abs(np.linalg.det(J) - 1.0)))


def rotation_exact(center, angle: float, x) -> np.ndarray:
    """Rotate points about ``center`` by ``angle`` (counterclockwise positive)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    c = np.asarray(center, dtype=float)
    ca, sa = math.cos(angle), math.sin(angle)
    d = x - c
    return c + np.column_stack([ca * d[:, 0] - sa * d[:, 1], sa * d[:, 0] + ca * d[:, 1]])
