"""Ellipticity reports, parametrix recursion, metric Laplacians, probes."""

import numpy as np
import pytest

from nctorus.core import (
    GapViolation,
    NCElement,
    ThetaMatrix,
    TruncationSpec,
    monomial,
    mul,
)
from nctorus.elliptic import (
    RiemannianMetric,
    elliptic_estimate_probe,
    is_elliptic,
    laplace_beltrami,
    parametrix_jet,
    parametrix_preconditioner,
    parametrix_residual_fit,
    sphere_directions,
    truncated_solve,
)
from nctorus.psido import PsiDO
from nctorus.spectral import smoothness_decay
from nctorus.symbols import (
    HomogeneousComponent,
    PolynomialSymbol,
    classical_from_polynomial,
    laplacian_symbol,
    lambda_symbol,
)


@pytest.fixture(scope="module")
def th():
    return ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])


@pytest.fixture(scope="module")
def perturbed_metric(th):
    one = NCElement.one(th)
    zero = NCElement.zero(th)
    g11 = NCElement(th, {(0, 0): 1.0, (1, 0): 0.2, (-1, 0): 0.2})
    return RiemannianMetric([[g11, zero], [zero, one]], TruncationSpec(17, 1))


@pytest.fixture(scope="module")
def perturbed_symbol(perturbed_metric):
    return laplace_beltrami(perturbed_metric, prune_tol=1e-8)


def test_sphere_directions():
    for n in (2, 3, 4):
        d = sphere_directions(n, 32)
        assert d.shape == (32, n)
        assert np.allclose(np.linalg.norm(d, axis=1), 1.0)


def test_flat_metric_gives_flat_laplacian(th):
    one = NCElement.one(th)
    zero = NCElement.zero(th)
    metric = RiemannianMetric([[one, zero], [zero, one]], TruncationSpec(8, 1))
    got = laplace_beltrami(metric)
    want = laplacian_symbol(th)
    assert set(got.coeffs) == set(want.coeffs)
    for alpha in want.coeffs:
        assert got.coeffs[alpha].coeffs == want.coeffs[alpha].coeffs


def test_conformal_metric_matches_fft_oracle():
    # theta = 0, g = f I: the operator is f^{-1} Delta in two dimensions
    th0 = ThetaMatrix.zero(2)
    f = NCElement(th0, {(0, 0): 1.0, (1, 0): 0.15, (-1, 0): 0.15})
    zero = NCElement.zero(th0)
    metric = RiemannianMetric([[f, zero], [zero, f]], TruncationSpec(17, 1))
    sym = laplace_beltrami(metric, prune_tol=1e-12)
    assert set(sym.coeffs) == {(2, 0), (0, 2)}
    # commutative reciprocal through a plain Fourier oracle
    grid = 4096
    t = 2 * np.pi * np.arange(grid) / grid
    recip = 1.0 / (1.0 + 0.3 * np.cos(t))
    coeffs = np.fft.ifft(recip)
    got = sym.coeffs[(2, 0)]
    for m in range(-10, 11):
        want = coeffs[m % grid]
        assert abs(got[(m, 0)] - want) < 1e-9


def test_metric_validation(th):
    one = NCElement.one(th)
    zero = NCElement.zero(th)
    skew = NCElement(th, {(1, 0): 1.0})  # not self-adjoint
    with pytest.raises(ValueError):
        RiemannianMetric([[skew, zero], [zero, one]], TruncationSpec(8, 1))
    dipped = NCElement(th, {(0, 0): 0.5, (1, 0): 0.5, (-1, 0): 0.5})
    with pytest.raises(GapViolation):
        RiemannianMetric([[dipped, zero], [zero, one]], TruncationSpec(10, 1))


def test_is_elliptic_flat(th):
    jet = classical_from_polynomial(laplacian_symbol(th))
    rep = is_elliptic(jet.components[0], 64, TruncationSpec(4, 1))
    assert rep.verdict
    assert abs(rep.positivity_constant - 1.0) < 1e-12


def test_is_elliptic_degenerate_direction(th):
    sym = PolynomialSymbol(th, {(1, 0): NCElement.one(th)})
    jet = classical_from_polynomial(sym)
    rep = is_elliptic(jet.components[0], 64, TruncationSpec(4, 1), gap=1e-6)
    assert not rep.verdict
    assert rep.min_singular < 1e-8


def test_is_elliptic_perturbed(perturbed_symbol):
    jet = classical_from_polynomial(perturbed_symbol)
    rep = is_elliptic(jet.components[0], 64, TruncationSpec(10, 6), clip_tol=1e-3)
    assert rep.verdict
    assert rep.positivity_constant is not None and rep.positivity_constant > 0.5


def test_parametrix_flat_terminates(th):
    jet = parametrix_jet(
        classical_from_polynomial(laplacian_symbol(th)).components,
        3,
        TruncationSpec(8, 1),
    )
    for xi in [(3.0, 0.0), (1.0, 2.0), (-4.0, 5.0)]:
        s0 = jet._sigma(0, np.array(xi))
        r2 = xi[0] ** 2 + xi[1] ** 2
        assert set(s0.coeffs) == {(0, 0)}
        assert abs(s0[(0, 0)] - 1.0 / r2) < 1e-15
        assert len(jet._sigma(1, np.array(xi))) == 0
        assert len(jet._sigma(2, np.array(xi))) == 0


def test_parametrix_order_zero_perturbation_hand_unrolled(th):
    # P with components (|xi|^2, 0, a): the recursion gives sigma_{-3} = 0 and
    # sigma_{-4} = -|xi|^{-2} a |xi|^{-2}
    a = NCElement(th, {(1, 0): 0.5, (-1, 0): 0.5})
    comps = [
        classical_from_polynomial(laplacian_symbol(th)).components[0],
        HomogeneousComponent.zero(th, 1.0),
        HomogeneousComponent(th, 0.0, 1, lambda xi: a,
                             deriv=lambda alpha: HomogeneousComponent.zero(
                                 th, -float(sum(alpha))),
                             origin_value=a),
    ]
    jet = parametrix_jet(comps, 3, TruncationSpec(8, 1))
    for xi in [(2.0, 0.0), (1.0, 3.0)]:
        r2 = xi[0] ** 2 + xi[1] ** 2
        assert len(jet._sigma(1, np.array(xi))) == 0
        s2 = jet._sigma(2, np.array(xi))
        assert (s2 - a.scale(-1.0 / r2**2)).l2_norm() < 1e-13


def test_parametrix_principal_inverts_principal(perturbed_metric):
    # sharper caches than the shared fixture: the 1e-9 inversion target needs
    # the full accuracy of the metric window
    sym = laplace_beltrami(perturbed_metric, prune_tol=1e-12)
    jet_input = classical_from_polynomial(sym)
    jet = parametrix_jet(
        jet_input.components, 1, TruncationSpec(32, 16),
        clip_tol=1e-6, post_tol=1e-6,
    )
    one = NCElement.one(sym.theta)
    for xi in sphere_directions(2, 16):
        sigma0 = jet._sigma(0, xi)
        rho2 = jet_input.components[0].at(xi)
        assert (mul(sigma0, rho2) - one).l2_norm() <= 1e-9


def test_parametrix_left_right_residuals(perturbed_symbol):
    jet = parametrix_jet(
        classical_from_polynomial(perturbed_symbol).components,
        2,
        TruncationSpec(20, 10),
        clip_tol=1e-4,
        post_tol=1e-5,
    )
    for side in ("left", "right"):
        pairs, fit = parametrix_residual_fit(
            jet.symbol(2), perturbed_symbol, [4, 8, 16], side=side,
            points_per_shell=8,
        )
        assert fit.exponent <= -2 + 0.5
        assert pairs[0][1] > pairs[-1][1]


def test_principal_symbol_value_at_axis(perturbed_symbol):
    # principal part at e_1 is the (2,0) coefficient nu^{-1/2} g^{11} nu^{1/2}
    jet = classical_from_polynomial(perturbed_symbol)
    got = jet.components[0].at(np.array([1.0, 0.0]))
    want = perturbed_symbol.coeffs[(2, 0)]
    assert (got - want).l2_norm() < 1e-13


def test_metric_laplacian_selfadjointness(th, perturbed_metric, perturbed_symbol):
    from nctorus.elliptic import divergence_form_symbol
    from nctorus.psido import build_matrix

    # flat metric: the operator matrix equals its conjugate transpose exactly
    one = NCElement.one(th)
    zero = NCElement.zero(th)
    flat = RiemannianMetric([[one, zero], [zero, one]], TruncationSpec(8, 1))
    Mf = build_matrix(PsiDO(laplace_beltrami(flat)), TruncationSpec(6, 1))
    assert np.array_equal(Mf.trusted(), Mf.dagger().trusted())
    # non-flat metric: self-adjointness holds with the volume weight, i.e. the
    # divergence form nu * Delta_g has a hermitian matrix; the unweighted
    # matrix is far from hermitian
    r = perturbed_symbol.support_radius
    M = build_matrix(PsiDO(perturbed_symbol), TruncationSpec(8 + r, r))
    flat_defect = np.max(np.abs(M.trusted() - M.dagger().trusted()))
    assert flat_defect > 0.1
    wsym = divergence_form_symbol(perturbed_metric, prune_tol=1e-10)
    W = build_matrix(PsiDO(wsym), TruncationSpec(8 + wsym.support_radius,
                                                 wsym.support_radius))
    scale = np.max(np.abs(W.trusted()))
    weighted_defect = np.max(np.abs(W.trusted() - W.dagger().trusted()))
    assert weighted_defect <= 1e-9 * scale


def test_perturbed_spectrum_real_nonneg_and_smooth(perturbed_symbol):
    from nctorus.spectral import spectrum

    r = perturbed_symbol.support_radius
    spec = spectrum(
        PsiDO(perturbed_symbol), TruncationSpec(16 + r, r),
        hermitian=False, with_vectors=True,
    )
    assert np.max(np.abs(np.imag(spec.values))) < 1e-9
    assert np.min(np.real(spec.values)) > -1e-9
    slopes = []
    for vec in spec.vectors[:10]:
        fit = smoothness_decay(vec)
        if not fit.degenerate:
            slopes.append(fit.exponent)
    assert slopes and all(s <= -6.0 for s in slopes)


def test_probe_lambda_is_tight(th):
    # P = Lambda^m: || Lambda^m u ||_s = || u ||_{s+m} exactly, ratio <= 1
    P = PsiDO(lambda_symbol(2.0, th))
    rep = elliptic_estimate_probe(P, 0.0, -1.0, 16, TruncationSpec(10, 0), seed=3)
    assert rep.max_ratio <= 1.0 + 1e-12
    assert rep.max_ratio > 0.9


def test_probe_laplacian_stable_under_doubling(th):
    P = PsiDO(laplacian_symbol(th))
    r12 = elliptic_estimate_probe(P, 0.0, -2.0, 32, TruncationSpec(12, 0))
    r24 = elliptic_estimate_probe(P, 0.0, -2.0, 32, TruncationSpec(24, 0))
    assert np.isfinite(r12.max_ratio) and np.isfinite(r24.max_ratio)
    assert r24.max_ratio < 2.0 * r12.max_ratio
    assert r12.seed == 1234  # recorded


def test_probe_requires_t_below_s_plus_m(th):
    with pytest.raises(ValueError):
        elliptic_estimate_probe(
            PsiDO(laplacian_symbol(th)), 0.0, 2.0, 4, TruncationSpec(8, 0)
        )


def test_truncated_solve_diagonal(th):
    one = NCElement.one(th)
    shifted = PolynomialSymbol(th, {(0, 0): one, (2, 0): one, (0, 2): one})
    for k in [(0, 0), (2, 1), (-3, 3)]:
        res = truncated_solve(PsiDO(shifted), monomial(k, 1.0, th), TruncationSpec(8, 0))
        want = 1.0 / (1.0 + k[0] ** 2 + k[1] ** 2)
        assert abs(res.u[k] - want) < 1e-12
        assert res.residual_window < 1e-10


def test_truncated_solve_hypoelliptic_decay(th):
    one = NCElement.one(th)
    shifted = PolynomialSymbol(th, {(0, 0): one, (2, 0): one, (0, 2): one})
    f = NCElement(th, {
        (k1, k2): (1.0 + k1 * k1 + k2 * k2) ** -4.0
        for k1 in range(-8, 9) for k2 in range(-8, 9)
    })
    res = truncated_solve(PsiDO(shifted), f, TruncationSpec(9, 0))
    sf = smoothness_decay(f, fit_range=(3, 8)).exponent
    su = smoothness_decay(res.u, fit_range=(3, 8)).exponent
    assert su < sf - 1.0  # gains roughly the order of the operator


def test_parametrix_preconditioner_helps(th, perturbed_symbol):
    one = NCElement.one(th)
    shifted = PolynomialSymbol(
        th, dict(perturbed_symbol.coeffs) | {(0, 0): one}
    )
    jet = parametrix_jet(
        classical_from_polynomial(perturbed_symbol).components,
        2,
        TruncationSpec(20, 10),
        clip_tol=1e-4,
        post_tol=1e-5,
    )
    trunc = TruncationSpec(6 + shifted.support_radius, shifted.support_radius)
    pre = parametrix_preconditioner(jet, trunc)
    f = NCElement(th, {(0, 0): 1.0, (1, 1): 0.5, (3, -2): 0.25})
    budget = dict(method="gmres", rtol=1e-14, maxiter=1, restart=6)
    plain = truncated_solve(PsiDO(shifted), f, trunc, **budget)
    prec = truncated_solve(PsiDO(shifted), f, trunc, precond=pre, **budget)
    assert prec.residual_window < 0.5 * plain.residual_window
