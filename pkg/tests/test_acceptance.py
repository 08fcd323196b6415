"""Acceptance criteria: one test per criterion, printing one pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines with the measured values.  Every tolerance is pinned here; nothing is
deferred to calibration elsewhere.
"""

import time

import numpy as np
from nctorus.core import (
    NCElement,
    ThetaMatrix,
    TruncationSpec,
    delta,
    involution,
    monomial,
    mul,
    random_element,
    tau,
)
from nctorus.elliptic import (
    RiemannianMetric,
    elliptic_estimate_probe,
    laplace_beltrami,
    parametrix_jet,
    parametrix_residual_fit,
)
from nctorus.psido import (
    OperatorMatrix,
    PsiDO,
    build_matrix,
    exact_sharp_at,
    remainder_shell_norms,
    star_expansion,
)
from nctorus.spectral import (
    duality_gap,
    lambda_apply,
    schatten_slope,
    sobolev_norm,
    spectrum,
    weyl_ratio,
)
from nctorus.symbols import (
    CallableSymbol,
    PolynomialSymbol,
    classical_from_polynomial,
    constant_symbol,
    lambda_symbol,
    laplacian_symbol,
)
from nctorus.traces import (
    QuadratureSpec,
    build_meyer_phi,
    integral_trace,
    integral_trace_unnormalized,
    normalize_symbol,
    trace_lattice,
    trace_matrix_diag,
)


def report(number, ok, detail):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{status}] criterion {number}: {detail}")
    assert ok, f"criterion {number}: {detail}"


def theta_for(n, flavor):
    if flavor == "zero":
        return ThetaMatrix.zero(n)
    entries = np.zeros((n, n))
    vals = [0.3, 0.15, -0.45]
    idx = 0
    for i in range(n):
        for j in range(i + 1, n):
            entries[i, j] = vals[idx % len(vals)]
            entries[j, i] = -entries[i, j]
            idx += 1
    return ThetaMatrix(entries)


def hopping(theta):
    k = (1,) + (0,) * (theta.n - 1)
    mk = (-1,) + (0,) * (theta.n - 1)
    return NCElement(theta, {k: 1.0, mk: 1.0})


def test_criterion_1_algebra_axioms():
    t0 = time.time()
    worst = 0.0
    for n in (2, 3):
        for flavor in ("zero", "generic"):
            theta = theta_for(n, flavor)
            rng = np.random.default_rng(100 + n)
            one = NCElement.one(theta)
            for _ in range(4):
                u = random_element(theta, 5, 5, rng)
                v = random_element(theta, 5, 5, rng)
                w = random_element(theta, 5, 5, rng)
                scale = max(u.l2_norm() * v.l2_norm() * w.l2_norm(), 1.0)
                worst = max(
                    worst,
                    (mul(mul(u, v), w) - mul(u, mul(v, w))).l2_norm() / scale,
                    (mul(one, u) - u).l2_norm(),
                    (mul(u, one) - u).l2_norm(),
                    (involution(mul(u, v)) - mul(involution(v), involution(u))).l2_norm()
                    / max(u.l2_norm() * v.l2_norm(), 1.0),
                    abs(tau(mul(u, v)) - tau(mul(v, u)))
                    / max(u.l2_norm() * v.l2_norm(), 1.0),
                )
                for j in range(n):
                    ej = tuple(1 if i == j else 0 for i in range(n))
                    worst = max(
                        worst,
                        abs(tau(delta(ej, u))),
                        abs(tau(mul(u, delta(ej, v))) + tau(mul(delta(ej, u), v)))
                        / max(u.l2_norm() * v.l2_norm(), 1.0),
                    )
    elapsed = time.time() - t0
    report(
        1,
        worst <= 1e-12 and elapsed < 10.0,
        f"algebra axioms: max relative defect {worst:.2e} (<= 1e-12), "
        f"runtime {elapsed:.2f}s (< 10s)",
    )


def test_criterion_2_exact_composition_oracle():
    theta = theta_for(2, "generic")
    one = NCElement.one(theta)
    pairs = [
        (PolynomialSymbol(theta, {(1, 0): one}), constant_symbol(hopping(theta))),
        (laplacian_symbol(theta),
         PolynomialSymbol(theta, {(0, 1): monomial((0, 1), 1.0, theta)})),
        (lambda_symbol(-2.0, theta), constant_symbol(hopping(theta))),
    ]
    worst = 0.0
    for rho1, rho2 in pairs:
        r1, r2 = rho1.support_radius, rho2.support_radius
        margin = max(r1 + r2, 1)
        trunc = TruncationSpec(6, margin)
        M1 = build_matrix(PsiDO(rho1), TruncationSpec(6, max(r1, 1)))
        M2 = build_matrix(PsiDO(rho2), TruncationSpec(6, max(r2, 1)))
        comp = CallableSymbol(
            theta, rho1.order.q + rho2.order.q, r1 + r2,
            lambda xi, a=rho1, b=rho2: exact_sharp_at(
                a, b, tuple(int(round(x)) for x in xi)
            ),
        )
        Mc = build_matrix(PsiDO(comp), trunc)
        prod = OperatorMatrix(M1.entries @ M2.entries, trunc, theta)
        worst = max(worst, float(np.max(np.abs(prod.trusted() - Mc.trusted()))))
    report(
        2,
        worst <= 1e-11,
        f"matrix composition vs exact sharp oracle: max defect {worst:.2e} (<= 1e-11) "
        f"over 3 symbol pairs",
    )


def test_criterion_3_composition_expansion_decay():
    t0 = time.time()
    theta = theta_for(2, "generic")
    rho1 = lambda_symbol(-2.0, theta)  # order m1 = -2
    rho2 = constant_symbol(hopping(theta))  # order m2 = 0
    assert rho2.support_radius <= 40  # K = 40 box accommodates every value
    radii = [4, 8, 16, 32]
    slopes = {}
    at16 = {}
    ok = True
    detail = []
    for N in (1, 2, 3):
        pairs, fit = remainder_shell_norms(rho1, rho2, N, radii)
        slopes[N] = fit.exponent
        at16[N] = dict(pairs)[16]
        bound = -2.0 + 0.0 - N + 0.5
        ok = ok and fit.exponent <= bound
        detail.append(f"N={N}: slope {fit.exponent:.2f} <= {bound}")
    ok = ok and at16[1] > at16[2] > at16[3]
    elapsed = time.time() - t0
    ok = ok and elapsed < 120.0
    report(
        3,
        ok,
        "; ".join(detail)
        + f"; E(16) strictly decreasing ({at16[1]:.1e} > {at16[2]:.1e} > {at16[3]:.1e});"
        f" runtime {elapsed:.1f}s (< 120s)",
    )


def test_criterion_4_adjoint_expansion():
    # one fixed test symbol across N = 1, 2, 3: a noncentral degree-2
    # polynomial, for which the adjoint expansion terminates at N = 3
    theta = theta_for(2, "generic")
    rho = PolynomialSymbol(theta, {
        (2, 0): monomial((1, 0), 1.0, theta),
        (0, 1): monomial((0, 1), 0.5 - 0.25j, theta),
        (0, 0): monomial((1, 1), 1.0j, theta),
    })
    trunc = TruncationSpec(6, 2)
    M = build_matrix(PsiDO(rho), trunc)
    defects = []
    for N in (1, 2, 3):
        approx = CallableSymbol(
            theta, np.conj(rho.order.q), rho.support_radius,
            lambda xi, N=N: star_expansion(rho, N, xi),
        )
        Ma = build_matrix(PsiDO(approx), trunc)
        defects.append(float(np.linalg.norm(Ma.trusted() - M.dagger().trusted())))
    ok = defects[0] > defects[1] > defects[2] and defects[2] <= 1e-3 * defects[0]
    report(
        4,
        ok,
        f"adjoint expansion defects N=1,2,3: {defects[0]:.2e} > {defects[1]:.2e} > "
        f"{defects[2]:.2e}, final <= 1e-3 of first",
    )


def test_criterion_5_parametrix():
    theta = theta_for(2, "generic")
    # flat jet terminates exactly
    flat = parametrix_jet(
        classical_from_polynomial(laplacian_symbol(theta)).components,
        3, TruncationSpec(8, 1),
    )
    flat_exact = True
    for xi in [(2.0, 0.0), (3.0, -4.0), (1.0, 1.0)]:
        s0 = flat._sigma(0, np.array(xi))
        r2 = xi[0] ** 2 + xi[1] ** 2
        flat_exact = flat_exact and set(s0.coeffs) == {(0, 0)}
        flat_exact = flat_exact and s0[(0, 0)] == 1.0 / r2
        flat_exact = flat_exact and len(flat._sigma(1, np.array(xi))) == 0
        flat_exact = flat_exact and len(flat._sigma(2, np.array(xi))) == 0
    # perturbed metric g = I + 0.2 (U_1 + U_1^*) E_11
    one = NCElement.one(theta)
    zero = NCElement.zero(theta)
    g11 = NCElement(theta, {(0, 0): 1.0, (1, 0): 0.2, (-1, 0): 0.2})
    metric = RiemannianMetric([[g11, zero], [zero, one]], TruncationSpec(17, 1))
    sym = laplace_beltrami(metric, prune_tol=1e-10)
    jet = parametrix_jet(
        classical_from_polynomial(sym).components, 3,
        TruncationSpec(20, 10), clip_tol=1e-4, post_tol=1e-5,
    )
    slopes = {}
    ok = flat_exact
    for N in (1, 2, 3):
        _, fit = parametrix_residual_fit(
            jet.symbol(N), sym, [4, 8, 16, 32], side="left", points_per_shell=16
        )
        slopes[N] = fit.exponent
        ok = ok and fit.exponent <= -N + 0.5
    report(
        5,
        ok,
        f"flat jet exact: {flat_exact}; perturbed-metric residual slopes "
        + ", ".join(f"N={N}: {slopes[N]:.2f} <= {-N + 0.5}" for N in (1, 2, 3)),
    )


def test_criterion_6_weyl_law():
    spec_a = spectrum(
        PsiDO(laplacian_symbol(ThetaMatrix.zero(2))), TruncationSpec(25, 0),
        hermitian=True,
    )
    spec_b = spectrum(
        PsiDO(laplacian_symbol(theta_for(2, "generic"))), TruncationSpec(25, 0),
        hermitian=True,
    )
    rep = weyl_ratio(spec_a, 2, 400.0)
    identical = np.array_equal(spec_a.values, spec_b.values)
    ok = abs(rep.ratio - 1.0) <= 0.05 and identical
    report(
        6,
        ok,
        f"Weyl ratio N(400)/(pi*400) = {rep.ratio:.5f} (within 5%); "
        f"eigenvalue multiset theta-independent: {identical}",
    )


def test_criterion_7_schatten_slope():
    theta = theta_for(2, "generic")
    _, fit = schatten_slope(
        PsiDO(lambda_symbol(-2.0, theta)), TruncationSpec(30, 0), (20, 200)
    )
    want = -1.0
    ok = abs(fit.exponent - want) <= 0.1 * abs(want)
    report(
        7,
        ok,
        f"singular-value slope {fit.exponent:.4f} within 10% of m/n = {want}",
    )


def test_criterion_8_trace_formulas():
    theta = theta_for(2, "generic")
    rho = lambda_symbol(-6.0, theta)
    mat = trace_matrix_diag(PsiDO(rho), TruncationSpec(13, 1))
    lat_small = trace_lattice(rho, 12)
    exact_ok = abs(mat.value - lat_small.value) <= 1e-13 * abs(lat_small.value)
    window = build_meyer_phi(2)
    meyer_ok = (
        window.checks["phi0_error"] <= 1e-10
        and window.checks["lattice_error"] <= 1e-8
        and window.checks["integral_error"] <= 1e-6
    )
    lat = trace_lattice(rho, 40)
    norm = normalize_symbol(rho, window, 40)
    quad = QuadratureSpec(0.5, 52.0)
    integral = integral_trace(norm, quad)
    rel = abs(integral.value - lat.value) / abs(lat.value)
    raw = integral_trace_unnormalized(rho, quad)
    raw_rel = abs(raw.value - lat.value) / abs(lat.value)
    ok = exact_ok and meyer_ok and rel <= 1e-4 and raw_rel > 1e-3
    report(
        8,
        ok,
        f"matrix=lattice to {abs(mat.value - lat_small.value):.1e}; Meyer checks "
        f"{window.checks['phi0_error']:.1e}/{window.checks['lattice_error']:.1e}/"
        f"{window.checks['integral_error']:.1e}; normalized integral rel err "
        f"{rel:.1e} (<= 1e-4); unnormalized rel diff {raw_rel:.1e} (> 1e-3)",
    )


def test_criterion_9_sobolev_suite():
    theta = theta_for(2, "generic")
    rng = np.random.default_rng(900)
    iso_defect = 0.0
    for s in (-1.5, 0.5, 2.0):
        u = random_element(theta, 4, 9, rng)
        iso_defect = max(
            iso_defect,
            abs(lambda_apply(s, u).l2_norm() - sobolev_norm(u, s))
            / max(sobolev_norm(u, s), 1.0),
        )
    u = random_element(theta, 4, 9, rng)
    rep = duality_gap(u, 1.5, 1000, seed=901)
    max_defect = abs(rep.achieved - rep.exact_norm) / rep.exact_norm
    ok = (
        iso_defect <= 1e-13
        and max_defect <= 1e-10
        and rep.holder_violations == 0
    )
    report(
        9,
        ok,
        f"Lambda^s isometry defect {iso_defect:.1e} (<= 1e-13); duality maximizer "
        f"defect {max_defect:.1e} (<= 1e-10); Hoelder violations "
        f"{rep.holder_violations}/1000",
    )


def test_criterion_10_elliptic_estimate_probe():
    theta = theta_for(2, "generic")
    P = PsiDO(laplacian_symbol(theta))
    r12 = elliptic_estimate_probe(P, 0.0, -2.0, 32, TruncationSpec(12, 0))
    r24 = elliptic_estimate_probe(P, 0.0, -2.0, 32, TruncationSpec(24, 0))
    ok = (
        np.isfinite(r12.max_ratio)
        and np.isfinite(r24.max_ratio)
        and r24.max_ratio < 2.0 * r12.max_ratio
    )
    report(
        10,
        ok,
        f"probe constant {r12.max_ratio:.4f} at K=12 vs {r24.max_ratio:.4f} at K=24 "
        f"(growth {r24.max_ratio / r12.max_ratio:.3f}x < 2x)",
    )
