"""Sobolev norms, duality, spectra, Weyl counting, Schatten slopes, decay."""

import math

import numpy as np
import pytest

from nctorus.core import (
    NCElement,
    ThetaMatrix,
    TruncationSpec,
    involution,
    monomial,
    random_element,
)
from nctorus.psido import PsiDO
from nctorus.spectral import (
    SobolevIndex,
    duality_gap,
    lambda_apply,
    lattice_ball_count,
    schatten_slope,
    smoothness_decay,
    sobolev_norm,
    spectrum,
    weyl_constant,
    weyl_ratio,
)
from nctorus.symbols import (
    CallableSymbol,
    PolynomialSymbol,
    lambda_symbol,
    laplacian_symbol,
)


@pytest.fixture(scope="module")
def th():
    return ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])


def test_sobolev_index_validation():
    with pytest.raises(ValueError):
        SobolevIndex(float("inf"))


def test_sobolev_norm_single_mode(th):
    for k, s in [((3, 4), 2.0), ((1, 0), -1.5)]:
        got = sobolev_norm(monomial(k, 1.0, th), s)
        want = (1.0 + k[0] ** 2 + k[1] ** 2) ** (s / 2.0)
        assert abs(got - want) < 1e-14
    u = random_element(th, 4, 8, np.random.default_rng(0))
    assert abs(sobolev_norm(u, 0.0) - u.l2_norm()) < 1e-14


def test_sobolev_monotone_in_s(th):
    u = random_element(th, 5, 10, np.random.default_rng(1))
    values = [sobolev_norm(u, s) for s in (-2.0, -1.0, 0.0, 1.5, 3.0)]
    assert all(a <= b + 1e-14 for a, b in zip(values, values[1:]))


def test_lambda_apply_isometry_and_group(th):
    u = random_element(th, 5, 10, np.random.default_rng(2))
    assert (lambda_apply(0.0, u) - u).l2_norm() == 0
    for s in (-2.5, 1.0, 3.5):
        lhs = lambda_apply(s, u).l2_norm()
        rhs = sobolev_norm(u, s)
        assert abs(lhs - rhs) <= 1e-13 * max(rhs, 1.0)
    two_step = lambda_apply(1.5, lambda_apply(-0.5, u))
    one_step = lambda_apply(1.0, u)
    assert (two_step - one_step).l2_norm() <= 1e-13 * one_step.l2_norm()


def test_duality_single_mode(th):
    k = (2, -1)
    s = 1.5
    u = monomial(k, 1.0, th)
    rep = duality_gap(u, s, 50, seed=5)
    want = (1.0 + 5) ** (-s / 2.0)
    assert abs(rep.exact_norm - want) < 1e-14
    assert abs(rep.achieved - want) < 1e-12
    # maximizer is a unit multiple of (U^k)^{-1} scaled to unit s-norm
    vmax = rep.maximizer
    assert set(vmax.coeffs) == {(-2, 1)}
    inv = involution(u)
    ratio = vmax[(-2, 1)] / inv[(-2, 1)]
    assert abs(abs(ratio) - sobolev_norm(inv, s) ** -1) < 1e-12


def test_duality_random(th):
    rng = np.random.default_rng(3)
    for s in (0.5, 2.0):
        u = random_element(th, 4, 9, rng)
        rep = duality_gap(u, s, 200, seed=7)
        assert rep.holder_violations == 0
        assert rep.sup_estimate <= rep.exact_norm + 1e-12 * rep.exact_norm
        assert abs(rep.achieved - rep.exact_norm) <= 1e-10 * rep.exact_norm


def test_holder_bound_many_trials(th):
    u = random_element(th, 3, 6, np.random.default_rng(4))
    rep = duality_gap(u, 1.0, 1000, seed=11)
    assert rep.trials == 1000
    assert rep.holder_violations == 0


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------


def test_flat_spectrum_exact(th):
    spec = spectrum(PsiDO(laplacian_symbol(th)), TruncationSpec(10, 0), hermitian=True)
    from nctorus.core import box_coords

    want = np.sort(np.sum(box_coords(10, 2).astype(float) ** 2, axis=1))
    assert np.array_equal(spec.values, want)
    assert spec.trusted_cut == (10 / 2.0) ** 2


def test_shifted_spectrum(th):
    one = NCElement.one(th)
    shifted = PolynomialSymbol(th, {(0, 0): one, (2, 0): one, (0, 2): one})
    spec = spectrum(PsiDO(shifted), TruncationSpec(6, 0), hermitian=True)
    base = spectrum(PsiDO(laplacian_symbol(th)), TruncationSpec(6, 0), hermitian=True)
    assert np.allclose(spec.values, base.values + 1.0, atol=1e-13)


def test_flat_spectrum_theta_independent():
    t1 = spectrum(
        PsiDO(laplacian_symbol(ThetaMatrix.zero(2))), TruncationSpec(8, 0), hermitian=True
    )
    t2 = spectrum(
        PsiDO(laplacian_symbol(ThetaMatrix([[0.0, 0.77], [-0.77, 0.0]]))),
        TruncationSpec(8, 0),
        hermitian=True,
    )
    assert np.array_equal(t1.values, t2.values)


def test_hermitian_flag_validates(th):
    skew = PolynomialSymbol(th, {(0, 0): monomial((1, 0), 1.0, th)})
    with pytest.raises(ValueError):
        spectrum(PsiDO(skew), TruncationSpec(4, 1), hermitian=True)


def test_hermitian_eigenpairs_residual(th):
    # residual || M v - lambda v || <= 1e-9 ||M|| for every returned pair
    a = random_element(th, 1, 3, np.random.default_rng(6), hermitian=True)
    sym = PolynomialSymbol(th, {(2, 0): NCElement.one(th), (0, 2): NCElement.one(th),
                                (0, 0): a})
    trunc = TruncationSpec(6, 1)
    from nctorus.psido import build_matrix
    from nctorus.core import element_to_vector

    spec = spectrum(PsiDO(sym), trunc, hermitian=True, with_vectors=True)
    T = build_matrix(PsiDO(sym), trunc).trusted()
    scale = np.linalg.norm(T, 2)
    for lam, vec in zip(spec.values, spec.vectors):
        x = element_to_vector(vec, spec.window)
        assert np.linalg.norm(T @ x - lam * x) <= 1e-9 * scale


# ---------------------------------------------------------------------------
# Weyl law and Schatten slopes
# ---------------------------------------------------------------------------


def test_weyl_constant():
    assert abs(weyl_constant(2) - math.pi) < 1e-14


def test_weyl_flat_counts(th):
    spec = spectrum(PsiDO(laplacian_symbol(th)), TruncationSpec(25, 0), hermitian=True)
    devs = []
    for lam in (100.0, 200.0, 400.0):
        rep = weyl_ratio(spec, 2, lam)
        assert rep.count == lattice_ball_count(2, lam)
        devs.append(abs(rep.ratio - 1.0))
    assert devs[0] > devs[1] > devs[2]
    assert devs[-1] < 0.05
    edge = weyl_ratio(spec, 2, 0.0)
    assert edge.edge_case and edge.count == 1
    with pytest.raises(ValueError):
        weyl_ratio(spec, 2, 1e5)


def test_schatten_negative_order_required(th):
    with pytest.raises(ValueError):
        schatten_slope(PsiDO(laplacian_symbol(th)), TruncationSpec(6, 0), (1, 10))


def test_schatten_lambda_slope_small(th):
    res, fit = schatten_slope(PsiDO(lambda_symbol(-2.0, th)), TruncationSpec(16, 0),
                              (20, 120))
    from nctorus.core import box_coords

    oracle = np.sort(
        (1.0 + np.sum(box_coords(16, 2).astype(float) ** 2, axis=1)) ** -1.0
    )[::-1]
    assert np.allclose(res.values, oracle, rtol=1e-12)
    assert abs(fit.exponent - (-1.0)) < 0.12


def test_schatten_scaling_invariance(th):
    base = lambda_symbol(-2.0, th)
    scaled = CallableSymbol(th, -2.0, 0, lambda xi: base.at(xi).scale(7.5))
    _, f1 = schatten_slope(PsiDO(base), TruncationSpec(10, 0), (5, 40))
    _, f2 = schatten_slope(PsiDO(scaled), TruncationSpec(10, 0), (5, 40))
    assert abs(f1.exponent - f2.exponent) < 1e-10


def test_schatten_smoothing_is_steeper(th):
    gauss = CallableSymbol(
        th, -6.0, 0,
        lambda xi: NCElement.one(th).scale(math.exp(-float(xi @ xi)))
    )
    _, fit = schatten_slope(PsiDO(gauss), TruncationSpec(10, 0), (5, 60))
    assert fit.exponent < -3.0  # steeper than any tested m/n


# ---------------------------------------------------------------------------
# smoothness diagnostics
# ---------------------------------------------------------------------------


def test_smoothness_single_mode_degenerate(th):
    fit = smoothness_decay(monomial((3, 1), 1.0, th))
    assert fit.degenerate


def test_smoothness_power_law(th):
    u = NCElement(th, {
        (k1, k2): (1.0 + k1 * k1 + k2 * k2) ** -4.0
        for k1 in range(-24, 25) for k2 in range(-24, 25)
    })
    fit = smoothness_decay(u, fit_range=(4, 24))
    assert abs(fit.exponent - (-8.0)) < 0.8
