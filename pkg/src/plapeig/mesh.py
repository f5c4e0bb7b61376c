"""Structured equal-measure meshes with P1 node fields and P0 cell fields.

A 1D mesh is a uniform partition of an interval.  A 2D mesh is a uniform
grid of rectangles, each split along its (i, j) -> (i+1, j+1) diagonal into a
lower triangle ``(v00, v10, v11)`` and an upper triangle ``(v00, v11, v01)``.
All cells therefore have the same measure, which is what makes discrete
rearrangements exact permutations of cell values.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    dimension: int
    extents: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    nodes: np.ndarray  # (n_nodes, dimension)
    cells: np.ndarray  # (n_cells, dimension + 1)
    measures: np.ndarray  # (n_cells,)
    boundary: np.ndarray  # bool mask over nodes
    _grad: tuple = field(repr=False, default=())

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def cell_measure(self) -> float:
        return float(self.measures[0])

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.extents]))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / n for (a, b), n in zip(self.extents, self.resolution))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(sum((b - a) ** 2 for a, b in self.extents)))

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.cells].mean(axis=1)

    def is_equal_measure(self) -> bool:
        return bool(np.all(self.measures == self.measures[0]) and self.measures[0] > 0)

    @property
    def gradient_operators(self) -> tuple[sp.csr_matrix, ...]:
        """Sparse (n_cells, n_nodes) matrices mapping nodal values to cell gradients."""
        return self._grad

    def node_weights(self, cell_values=None) -> np.ndarray:
        """Lumped nodal weights ``sum_{T ni i} |T| c_T / (d + 1)``.

        With these, ``sum_i w_i f(u_i)`` equals the quadrature
        ``sum_T |T| c_T avg_T f(u)`` used for every nonlinear integrand of u.
        """
        c = np.ones(self.n_cells) if cell_values is None else np.asarray(cell_values, float)
        if c.shape != (self.n_cells,):
            raise MeshError(f"cell field has length {c.shape}, mesh has {self.n_cells} cells")
        contrib = np.repeat(c * self.measures / (self.dimension + 1), self.dimension + 1)
        return np.bincount(self.cells.ravel(), weights=contrib, minlength=self.n_nodes)

    def cell_average(self, nodal: np.ndarray) -> np.ndarray:
        """Average of vertex values per cell."""
        nodal = np.asarray(nodal, float)
        if nodal.shape != (self.n_nodes,):
            raise MeshError(f"node field has length {nodal.shape}, mesh has {self.n_nodes} nodes")
        return nodal[self.cells].mean(axis=1)

    def locate(self, points: np.ndarray) -> np.ndarray:
        """Index of the cell containing each point, via the structured grid index.

        Points on shared edges go to the cell with the larger grid index; points
        outside the closed domain raise :class:`MeshError`.
        """
        pts = np.atleast_2d(np.asarray(points, float))
        if self.dimension == 1 and pts.shape[1] != 1:
            pts = pts.reshape(-1, 1)
        tol = 1e-12 * self.diameter
        local = []
        for k, ((a, b), n) in enumerate(zip(self.extents, self.resolution)):
            x = pts[:, k]
            if np.any(x < a - tol) or np.any(x > b + tol):
                raise MeshError("point outside the mesh domain")
            s = (x - a) / (b - a) * n
            i = np.clip(np.floor(s).astype(int), 0, n - 1)
            local.append((i, s - i))
        if self.dimension == 1:
            return local[0][0]
        (i, fx), (j, fy) = local
        nx = self.resolution[0]
        upper = fy > fx
        return 2 * (j * nx + i) + upper.astype(int)

    def sample(self, func) -> np.ndarray:
        """Cell field from a function of centroid coordinates ``func(points)``."""
        return np.asarray(func(self.centroids), dtype=float).reshape(self.n_cells)

    def interpolate(self, func) -> np.ndarray:
        """Node field from a function of node coordinates ``func(points)``."""
        return np.asarray(func(self.nodes), dtype=float).reshape(self.n_nodes)


def build_mesh(dimension: int, extents: Sequence, resolution) -> Mesh:
    """Uniform interval (``dimension=1``) or triangulated rectangle (``dimension=2``).

    ``extents`` is ``[a, b]`` in 1D or ``[[x0, x1], [y0, y1]]`` in 2D;
    ``resolution`` is the number of cells (1D) or rectangles per axis (2D).
    """
    if dimension not in (1, 2):
        raise MeshError(f"dimension must be 1 or 2, got {dimension}")
    ext = np.asarray(extents, dtype=float)
    if dimension == 1:
        ext = ext.reshape(1, 2)
    if ext.shape != (dimension, 2):
        raise MeshError(f"extents {extents!r} do not match dimension {dimension}")
    if not np.all(np.isfinite(ext)) or np.any(ext[:, 1] <= ext[:, 0]):
        raise MeshError(f"degenerate extents {extents!r}")
    res = np.broadcast_to(np.asarray(resolution, dtype=int), (dimension,))
    if np.any(res < 2):
        raise MeshError(f"resolution must be >= 2 per axis, got {resolution!r}")
    extents_t = tuple((float(a), float(b)) for a, b in ext)
    res_t = tuple(int(n) for n in res)
    if dimension == 1:
        return _interval(extents_t, res_t)
    return _rectangle(extents_t, res_t)


def _interval(extents, res) -> Mesh:
    (a, b), (n,) = extents[0], res
    x = np.linspace(a, b, n + 1)
    cells = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    h = (b - a) / n
    measures = np.full(n, h)
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, n]] = True
    rows = np.repeat(np.arange(n), 2)
    vals = np.tile([-1.0 / h, 1.0 / h], n)
    dx = sp.csr_matrix((vals, (rows, cells.ravel())), shape=(n, n + 1))
    return Mesh(1, extents, res, x[:, None], cells, measures, boundary, (dx,))


def _rectangle(extents, res) -> Mesh:
    (x0, x1), (y0, y1) = extents
    nx, ny = res
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + nx + 1, v00 + nx + 2
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    cells = np.empty((2 * nx * ny, 3), dtype=int)
    cells[0::2] = lower
    cells[1::2] = upper
    measures = np.full(len(cells), 0.5 * hx * hy)

    ix = np.rint((nodes[:, 0] - x0) / hx).astype(int)
    iy = np.rint((nodes[:, 1] - y0) / hy).astype(int)
    boundary = (ix == 0) | (ix == nx) | (iy == 0) | (iy == ny)

    # lower: grad = ((u10-u00)/hx, (u11-u10)/hy); upper: ((u11-u01)/hx, (u01-u00)/hy)
    m = len(cells)
    rows = np.repeat(np.arange(m), 2)
    cx = np.empty((m, 2), dtype=int)
    cy = np.empty((m, 2), dtype=int)
    cx[0::2] = np.column_stack([v00, v10])
    cx[1::2] = np.column_stack([v01, v11])
    cy[0::2] = np.column_stack([v10, v11])
    cy[1::2] = np.column_stack([v00, v01])
    dx = sp.csr_matrix((np.tile([-1 / hx, 1 / hx], m), (rows, cx.ravel())), shape=(m, len(nodes)))
    dy = sp.csr_matrix((np.tile([-1 / hy, 1 / hy], m), (rows, cy.ravel())), shape=(m, len(nodes)))
    return Mesh(2, extents, res, nodes, cells, measures, boundary, (dx, dy))


def p1_gradient(mesh: Mesh, u) -> np.ndarray:
    """Constant gradient of the P1 interpolant on each cell, shape (n_cells, dimension)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,):
        raise MeshError(f"node field has length {u.shape}, mesh has {mesh.n_nodes} nodes")
    return np.column_stack([D @ u for D in mesh.gradient_operators])


def integrate(mesh: Mesh, c, w=None) -> float:
    """Quadrature ``sum_T c_T w_T |T|`` of a product of cellwise constants."""
    c = np.asarray(c, dtype=float)
    w = np.ones(mesh.n_cells) if w is None else np.asarray(w, dtype=float)
    if c.shape != (mesh.n_cells,) or w.shape != (mesh.n_cells,):
        raise MeshError("cell field sizes do not match the mesh")
    return float(np.sum(c * w * mesh.measures))


def dirichlet(mesh: Mesh, u) -> np.ndarray:
    """Copy of ``u`` with boundary entries pinned to exactly zero."""
    v = np.array(u, dtype=float)
    v[mesh.boundary] = 0.0
    return v


def write_cell_csv(path, mesh: Mesh, values, name: str = "value") -> Path:
    path = Path(path)
    axes = ["x", "y"][: mesh.dimension]
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["cell", *axes, name])
        for k, (c, v) in enumerate(zip(mesh.centroids, values)):
            out.writerow([k, *(repr(float(z)) for z in c), repr(float(v))])
    return path


def write_node_csv(path, mesh: Mesh, values, name: str = "value") -> Path:
    path = Path(path)
    axes = ["x", "y"][: mesh.dimension]
    with path.open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["node", *axes, name])
        for k, (c, v) in enumerate(zip(mesh.nodes, values)):
            out.writerow([k, *(repr(float(z)) for z in c), repr(float(v))])
    return path
