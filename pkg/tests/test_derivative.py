import numpy as np
import pytest

from conftest import smooth_g, smooth_V
from plapeig.derivative import (
    DerivativeError,
    derivative_divfree,
    derivative_general,
    derivative_hadamard,
    derivative_report,
    fd_derivative_oracle,
    hadamard_terms,
    richardson,
    transported_problem,
)
from plapeig.eigensolver import ProblemData, SolverConfig, solve_principal
from plapeig.flow import DilationField, RotationField, StreamBumpField, TranslationField, ZeroField
from plapeig.mesh import build_mesh

STREAM = StreamBumpField((0.4, 0.55), (0.25, 0.3), 1.0)
ROT = RotationField((0.45, 0.55), 0.15, 0.3, 1.0)
TRANS = TranslationField((0.5, 0.5), (1.0, 0.5), 0.1, 0.35)


@pytest.fixture(scope="module")
def square32():
    return build_mesh(2, [[0, 1], [0, 1]], 32)


@pytest.fixture(scope="module", params=[1.5, 2.0, 3.0])
def solved(request, square32):
    pr = ProblemData.on_mesh(square32, request.param, smooth_g, smooth_V)
    return square32, pr, solve_principal(square32, pr)


def test_zero_field(solved):
    mesh, pr, eig = solved
    Z = ZeroField(2)
    assert derivative_general(mesh, pr, eig, Z) == 0
    assert derivative_divfree(mesh, pr, eig, Z) == 0
    assert derivative_hadamard(mesh, pr, eig, Z) == 0
    t = 1e-3
    assert abs(fd_derivative_oracle(mesh, pr, Z, t, u0=eig.u).value) <= 2 * SolverConfig().lambda_tol / t


@pytest.mark.parametrize("field", [STREAM, ROT, STREAM + ROT * 0.5], ids=["stream", "rotation", "sum"])
def test_general_equals_divfree_exactly(solved, field):
    mesh, pr, eig = solved
    assert derivative_general(mesh, pr, eig, field) == derivative_divfree(mesh, pr, eig, field)


def test_divfree_formulas_refuse_general_fields(solved):
    mesh, pr, eig = solved
    with pytest.raises(DerivativeError):
        derivative_divfree(mesh, pr, eig, TRANS)
    with pytest.raises(DerivativeError):
        derivative_hadamard(mesh, pr, eig, TRANS)


def test_hadamard_vanishes_for_constant_data(square32):
    pr = ProblemData.on_mesh(square32, 2, 2.0, 1.0)
    eig = solve_principal(square32, pr)
    terms = hadamard_terms(square32, pr, eig.lam, eig.u, STREAM)
    # the continuous integral is exactly zero; the discrete one cancels to O(h^2)
    assert abs(terms.sum()) <= 1e-4 * np.abs(terms).sum()


def test_rotation_with_radial_data_is_stationary(square32):
    radial = lambda x: 1 + np.hypot(x[:, 0] - 0.5, x[:, 1] - 0.5) ** 2
    pr = ProblemData.on_mesh(square32, 2, radial, lambda x: 3 * radial(x))
    eig = solve_principal(square32, pr)
    fd = fd_derivative_oracle(square32, pr, RotationField((0.5, 0.5), 0.2, 0.35), 1e-3, u0=eig.u)
    assert abs(fd.value) <= 1e-6


def test_formulas_close_to_fd_on_coarse_mesh(solved):
    mesh, pr, eig = solved
    for field in (STREAM, TRANS):
        rep = derivative_report(mesh, pr, eig, field, t=1e-3)
        assert abs(rep.value_general - rep.fd_value) <= 0.1 * abs(rep.fd_value)
        assert np.isfinite(rep.one_sided["right"]) and np.isfinite(rep.one_sided["left"])


def test_1d_constant_data_derivative_vanishes():
    mesh = build_mesh(1, [0, 1], 256)
    pr = ProblemData.on_mesh(mesh, 2, 1.0, 0.0)
    eig = solve_principal(mesh, pr)
    field = DilationField((0.4,), 0.3, 1.0)
    fd = fd_derivative_oracle(mesh, pr, field, 1e-3, u0=eig.u)
    scale = eig.lam * np.abs(field.jacobian(mesh.centroids)).max()
    # transported constants are constants, so lambda(t) is flat
    assert fd.value == 0.0
    assert abs(derivative_general(mesh, pr, eig, field) - fd.value) <= 1e-3 * scale


def test_transport_keeps_analytic_sources(square32):
    pr = ProblemData.on_mesh(square32, 2, smooth_g, smooth_V)
    moved = transported_problem(square32, pr, STREAM, 1e-3)
    assert moved.g_func is smooth_g and moved.V_func is smooth_V
    assert not np.array_equal(moved.g, pr.g)
    assert np.array_equal(transported_problem(square32, pr, STREAM, 0.0).g, pr.g)


def test_fd_rejects_bad_step(solved):
    mesh, pr, _ = solved
    with pytest.raises(DerivativeError):
        fd_derivative_oracle(mesh, pr, STREAM, 0.0)


def test_richardson_cancels_quadratic_error():
    f = lambda t: 2.0 + 0.7 * t**2
    assert richardson(f(1e-2), f(5e-3)) == pytest.approx(2.0, abs=1e-14)
