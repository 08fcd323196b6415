"""Three-dimensional smoke tests: the machinery is dimension generic."""

import math

import numpy as np
import pytest

from nctorus.core import (
    NCElement,
    ThetaMatrix,
    TruncationSpec,
    monomial,
    mul,
    random_element,
)
from nctorus.psido import PsiDO, apply_op, build_matrix, exact_sharp_at, sharp_expansion
from nctorus.spectral import lattice_ball_count, spectrum, weyl_constant, weyl_ratio
from nctorus.symbols import constant_symbol, lambda_symbol, laplacian_symbol
from nctorus.traces import build_meyer_phi, trace_lattice, trace_matrix_diag


@pytest.fixture(scope="module")
def th3():
    return ThetaMatrix([[0.0, 0.3, 0.15], [-0.3, 0.0, -0.45], [-0.15, 0.45, 0.0]])


def test_laplacian_action_3d(th3):
    P = PsiDO(laplacian_symbol(th3))
    out = apply_op(P, monomial((1, -2, 3), 1.0, th3))
    assert abs(out[(1, -2, 3)] - 14.0) < 1e-13


def test_sharp_oracle_3d(th3):
    rho1 = lambda_symbol(-2.0, th3)
    a = NCElement(th3, {(0, 1, 0): 1.0, (0, -1, 0): 1.0})
    rho2 = constant_symbol(a)
    for k in [(2, -1, 1), (4, 0, -3)]:
        exact = exact_sharp_at(rho1, rho2, k)
        approx = sharp_expansion(rho1, rho2, 4, k)
        assert (exact - approx).l2_norm() < 5e-3
        assert (exact - sharp_expansion(rho1, rho2, 1, k)).l2_norm() > \
            (exact - approx).l2_norm()


def test_matrix_composition_3d(th3):
    from nctorus.psido import OperatorMatrix
    from nctorus.symbols import CallableSymbol, PolynomialSymbol

    rho1 = PolynomialSymbol(th3, {(1, 0, 0): NCElement.one(th3)})
    rho2 = constant_symbol(monomial((0, 0, 1), 1.0, th3))
    trunc = TruncationSpec(3, 1)
    M1 = build_matrix(PsiDO(rho1), trunc)
    M2 = build_matrix(PsiDO(rho2), trunc)
    comp = CallableSymbol(
        th3, 1.0, 1,
        lambda xi: exact_sharp_at(rho1, rho2, tuple(int(round(x)) for x in xi)),
    )
    Mc = build_matrix(PsiDO(comp), trunc)
    prod = OperatorMatrix(M1.entries @ M2.entries, trunc, th3)
    assert np.max(np.abs(prod.trusted() - Mc.trusted())) < 1e-12


def test_weyl_3d():
    # counting constant (4/3) pi for n = 3; exact lattice count oracle
    spec = spectrum(
        PsiDO(laplacian_symbol(ThetaMatrix.zero(3))), TruncationSpec(8, 0),
        hermitian=True,
    )
    assert abs(weyl_constant(3) - 4.0 * math.pi / 3.0) < 1e-14
    rep = weyl_ratio(spec, 3, 36.0)
    assert rep.count == lattice_ball_count(3, 36.0)
    assert abs(rep.ratio - 1.0) < 0.1


def test_trace_two_routes_3d(th3):
    rho = lambda_symbol(-8.0, th3)  # order below -3
    lat = trace_lattice(rho, 4)
    mat = trace_matrix_diag(PsiDO(rho), TruncationSpec(5, 1))
    assert abs(lat.value - mat.value) <= 1e-13 * abs(lat.value)


def test_meyer_window_3d():
    win = build_meyer_phi(3)
    xi = np.array([0.3, -0.7, 1.2])
    want = win.phi1(0.3) * win.phi1(-0.7) * win.phi1(1.2)
    assert abs(win.phi(xi) - want) < 1e-14


def test_algebra_random_3d(th3):
    rng = np.random.default_rng(33)
    u = random_element(th3, 3, 6, rng)
    v = random_element(th3, 3, 6, rng)
    w = random_element(th3, 3, 6, rng)
    defect = (mul(mul(u, v), w) - mul(u, mul(v, w))).l2_norm()
    assert defect < 1e-12 * max(u.l2_norm() * v.l2_norm() * w.l2_norm(), 1.0)
