"""Independent reference computations used by the tests.

None of these touch the finite element code: they are direct
discretizations or closed forms, so agreement is a genuine cross-check.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import minimize


def pi_p(p: float) -> float:
    return 2 * math.pi / (p * math.sin(math.pi / p))


def plap_1d_closed_form(p: float) -> float:
    """First Dirichlet eigenvalue of the 1D p-Laplacian on [0, 1]."""
    return (p - 1) * pi_p(p) ** p


def plap_1d_dense(p: float, n: int = 400) -> float:
    """Minimize the finite-difference Rayleigh quotient on ``n`` interior points.

    Forward differences for ``|u'|^p`` and the rectangle rule for ``|u|^p``;
    positive ``u`` is parametrized as ``exp(z)`` so the quotient stays smooth.
    """
    h = 1.0 / (n + 1)
    x = np.linspace(h, 1 - h, n)

    def f(z):
        u = np.exp(z)
        du = np.diff(np.concatenate(([0.0], u, [0.0]))) / h
        a = np.abs(du)
        num = h * np.sum(a**p)
        den = h * np.sum(u**p)
        # gradients through u then through z
        gnum_du = p * a ** (p - 1) * np.sign(du)
        gnum = (gnum_du[:-1] - gnum_du[1:])  # d/du_i of sum |du|^p * h, times 1/h * h
        gden = h * p * u ** (p - 1)
        q = num / den
        gq = (gnum - q * gden) / den
        return q, gq * u

    z0 = np.log(np.sin(np.pi * x))
    res = minimize(f, z0, jac=True, method="L-BFGS-B", options={"maxiter": 20000, "gtol": 1e-12, "ftol": 1e-15})
    return float(res.fun)


def brute_force_extremum(values, reference, sense: str = "max"):
    """Best ``sum f * ref`` over all orderings of ``values`` (measure factor omitted)."""
    vals = np.asarray(values)
    perms = np.array(list(itertools.permutations(range(len(vals)))))
    scores = vals[perms] @ np.asarray(reference)
    return scores.max() if sense == "max" else scores.min()
