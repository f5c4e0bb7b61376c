import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plapeig.eigensolver import ProblemData, solve_principal
from plapeig.flow import random_stream_probes
from plapeig.mesh import build_mesh
from plapeig.optimizer import (
    OptConfig,
    OptimizationError,
    alternate_minimize,
    brute_force_minimum,
    distinct_permutations,
    initial_independence,
    verify_optimality,
    weight_reference,
)
from plapeig.rearrangement import class_of, comonotonicity_defect

# exhaustive minimum over the 36 assignments, computed once with brute_force_minimum
FOUR_CELL_MIN = 5.465669197649626


@pytest.fixture(scope="module")
def four_cells():
    mesh = build_mesh(1, [0, 1], 4)
    return mesh, class_of([1, 1, 2, 2], mesh), class_of([0, 0, 1, 1], mesh)


def test_distinct_permutations():
    perms = list(distinct_permutations([1, 1, 2, 2]))
    assert len(perms) == 6 == len(set(perms))


def test_four_cell_instance_matches_enumeration(four_cells):
    mesh, gc, vc = four_cells
    brute = brute_force_minimum(mesh, gc, vc, 2.0)
    assert brute.n_assignments == 36
    assert brute.lam == pytest.approx(FOUR_CELL_MIN, rel=1e-10)
    res = alternate_minimize(mesh, gc, vc, 2.0)
    assert res.converged and res.monotone
    assert res.state.lam == pytest.approx(brute.lam, rel=1e-10)
    assert res.defect_g == 0 and res.defect_V == 0
    # the large weight sits in the middle, the potential at the ends
    assert res.state.g.tolist() == [1, 2, 2, 1] and res.state.V.tolist() == [1, 0, 0, 1]


def test_four_cell_independent_of_start(four_cells):
    mesh, gc, vc = four_cells
    out = initial_independence(mesh, gc, vc, 2.0)
    assert out["agree"] and out["runs"] == 36
    assert out["min"] == pytest.approx(FOUR_CELL_MIN, rel=1e-10)


def test_singleton_classes():
    mesh = build_mesh(2, [[0, 1], [0, 1]], 16)
    gc = class_of(np.full(mesh.n_cells, 2.0), mesh)
    vc = class_of(np.full(mesh.n_cells, 0.5), mesh)
    res = alternate_minimize(mesh, gc, vc, 2.0)
    assert res.state.k == 1 and res.converged
    direct = solve_principal(mesh, ProblemData.on_mesh(mesh, 2.0, 2.0, 0.5)).lam
    assert res.state.lam == pytest.approx(direct, rel=1e-12)
    # constant data: the Hadamard integrand cancels up to O(h^2) quadrature error
    rep = verify_optimality(mesh, res, random_stream_probes(mesh, 5, seed=1), 2.0, threshold=1e-3)
    assert rep.passed


def test_rejects_foreign_start(four_cells):
    mesh, gc, vc = four_cells
    with pytest.raises(OptimizationError):
        alternate_minimize(mesh, gc, vc, 2.0, g_init=np.array([1.0, 2.0, 2.0, 2.0]))


@given(seed=st.integers(0, 10_000), p=st.sampled_from([1.5, 2.0, 3.0]), n=st.integers(4, 24))
@settings(max_examples=15, deadline=None)
def test_descent_is_monotone_and_ends_comonotone(seed, p, n):
    rng = np.random.default_rng(seed)
    mesh = build_mesh(1, [0, 1], n)
    gc = class_of(rng.integers(1, 4, n).astype(float), mesh)
    vc = class_of(rng.integers(0, 3, n).astype(float), mesh)
    res = alternate_minimize(mesh, gc, vc, p, g_init=rng.permutation(gc.values), V_init=rng.permutation(vc.values))
    hist = np.array(res.state.history)
    assert np.all(np.diff(hist) <= 1e-10)
    assert res.converged and res.monotone and res.state.k <= 200
    assert res.defect_g == 0 and res.defect_V == 0


def test_hand_swapped_assignment_fails_verification():
    mesh = build_mesh(2, [[0, 1], [0, 1]], 12)
    g0 = mesh.sample(lambda x: np.where(np.hypot(x[:, 0] - 0.3, x[:, 1] - 0.3) < 0.25, 2.0, 0.5))
    V0 = mesh.sample(lambda x: np.where(x[:, 0] > 0.7, 3.0, 0.0))
    res = alternate_minimize(mesh, class_of(g0, mesh), class_of(V0, mesh), 2.0, g_init=g0, V_init=V0)
    assert res.converged
    w = weight_reference(mesh, res.state.u, 2.0)
    i, j = int(np.argmax(w)), int(np.argmin(w))
    assert res.state.g[i] > res.state.g[j]
    g = res.state.g.copy()
    g[[i, j]] = g[[j, i]]
    assert comonotonicity_defect(g, w, +1) > 0
    res.state.g = g
    rep = verify_optimality(mesh, res, random_stream_probes(mesh, 3, seed=0), 2.0, threshold=1.0)
    assert rep.defect_g > 0 and not rep.passed


def test_cap_reports_nonconvergence():
    mesh = build_mesh(2, [[0, 1], [0, 1]], 8)
    g0 = mesh.sample(lambda x: np.where(x[:, 0] < 0.3, 2.0, 0.5))
    res = alternate_minimize(mesh, class_of(g0, mesh), class_of(np.zeros(mesh.n_cells), mesh), 2.0,
                             opt_config=OptConfig(max_iter=1), g_init=g0)
    assert not res.converged and res.state.k == 1
