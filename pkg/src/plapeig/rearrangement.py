"""Rearrangement classes of cell fields on equal-measure meshes.

On a mesh whose cells all have the same measure, two piecewise-constant
fields are rearrangements of each other exactly when their value multisets
coincide, so every extremal problem over a class reduces to sorting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshError


class RearrangementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RearrangementClass:
    values: np.ndarray  # sorted ascending
    cell_measure: float

    @property
    def n_cells(self) -> int:
        return len(self.values)

    @property
    def measure(self) -> float:
        return self.n_cells * self.cell_measure

    @property
    def is_singleton(self) -> bool:
        return bool(self.values[0] == self.values[-1])

    def default_member(self) -> np.ndarray:
        """The class values laid out in ascending order of cell index."""
        return self.values.copy()


def class_of(f0, mesh: Mesh) -> RearrangementClass:
    f0 = np.asarray(f0, dtype=float)
    if f0.shape != (mesh.n_cells,):
        raise MeshError(f"cell field has length {f0.shape}, mesh has {mesh.n_cells} cells")
    if not mesh.is_equal_measure():
        raise RearrangementError("rearrangement classes need an equal-measure mesh")
    values = np.sort(f0, kind="stable")
    values.setflags(write=False)
    return RearrangementClass(values, mesh.cell_measure)


def is_rearrangement_of(f, cls: RearrangementClass) -> bool:
    f = np.asarray(f, dtype=float)
    if f.shape != cls.values.shape:
        raise RearrangementError(f"field has length {f.shape}, class has {cls.n_cells} cells")
    return bool(np.array_equal(np.sort(f), cls.values))


def extremal_rearrangement(cls: RearrangementClass, reference, sense: str = "max") -> np.ndarray:
    """Member of ``cls`` extremizing ``sum f * reference``.

    ``sense="max"`` couples large class values with large reference values,
    ``sense="min"`` with small ones.  Ties in the reference are broken by
    ascending cell index, so the result is deterministic.
    """
    ref = np.asarray(reference, dtype=float)
    if ref.shape != cls.values.shape:
        raise RearrangementError(f"reference has length {ref.shape}, class has {cls.n_cells} cells")
    if sense not in ("max", "min"):
        raise RearrangementError(f"sense must be 'max' or 'min', got {sense!r}")
    order = np.argsort(ref, kind="stable")
    out = np.empty_like(cls.values)
    out[order] = cls.values if sense == "max" else cls.values[::-1]
    return out


def comonotonicity_defect(f, u_cell, sign: int = 1) -> float:
    """Mean over cell pairs of ``max(0, -sign (u_i - u_j)(f_i - f_j))``.

    Zero exactly when ``f`` is a nondecreasing (``sign=+1``) or nonincreasing
    (``sign=-1``) function of ``u_cell`` up to ties.
    """
    f = np.asarray(f, dtype=float)
    u = np.asarray(u_cell, dtype=float)
    if f.shape != u.shape or f.ndim != 1:
        raise RearrangementError("field sizes do not match")
    if sign not in (1, -1):
        raise RearrangementError("sign must be +1 or -1")
    n = len(f)
    if n < 2:
        return 0.0
    us, fs = u, f
    total = 0.0
    # blocked pairwise sum keeps memory at O(n * block)
    block = max(1, 4_000_000 // n)
    for start in range(0, n, block):
        stop = min(n, start + block)
        du = us[None, :] - us[start:stop, None]
        df = fs[None, :] - fs[start:stop, None]
        prod = -sign * du * df
        mask = np.arange(n)[None, :] > np.arange(start, stop)[:, None]
        total += float(np.sum(np.where(mask & (prod > 0), prod, 0.0)))
    return total / (n * (n - 1) / 2)


def swap_count(a, b) -> int:
    """Number of cells whose value differs between two members of a class."""
    return int(np.count_nonzero(np.asarray(a) != np.asarray(b)))
