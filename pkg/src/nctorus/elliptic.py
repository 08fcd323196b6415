"""Ellipticity, the parametrix recursion, metric Laplacians, regularity probes.

An operator is elliptic when its principal symbol is invertible at every
nonzero frequency; homogeneity reduces the check to unit-sphere samples.
Given the homogeneous components rho_{q-k} of an elliptic symbol, the
parametrix jet is produced by the recursion

    sigma_{-q}   = rho_q^{-1}
    sigma_{-q-j} = - rho_q^{-1} * sum_{k+l+|alpha|=j, l<j}
                       (1/alpha!) d_xi^alpha rho_{q-k} delta^alpha sigma_{-q-l}

evaluated pointwise on the lattice with per-point caching of the inverses.
The jet inverts the operator up to a lattice-decaying residual; "smoothing"
is operationalized as super-polynomial decay measured by shell slope fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .core import (
    GapViolation,
    NCElement,
    SingularTruncation,
    TruncationSpec,
    active_axes,
    box_coords,
    box_index,
    box_size,
    delta,
    element_to_vector,
    embed_axes,
    funcalc,
    inverse_element,
    involution,
    left_mult_matrix,
    matrix_to_element,
    mul,
    restrict_axes,
    vector_to_element,
)
from .fitting import power_law_fit
from .psido import (
    PsiDO,
    apply_op,
    build_matrix,
    compositions,
    exact_sharp_at,
    multi_factorial,
    shell_points,
)
from .spectral import sobolev_norm
from .symbols import (
    CallableSymbol,
    HomogeneousComponent,
    PolynomialSymbol,
    xi_derivative,
)


def sphere_directions(n, count, seed=0):
    """Quasi-uniform unit directions: angular grid (n=2), Fibonacci (n=3),
    seeded Gaussian normalization otherwise."""
    if n == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if n == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        golden = np.pi * (1 + 5**0.5)
        th = golden * i
        return np.stack(
            [np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)], axis=1
        )
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class EllipticityReport:
    min_singular: float
    positivity_constant: float | None
    verdict: bool
    samples: int
    gap: float

    def as_dict(self):
        return {
            "min_singular": self.min_singular,
            "positivity_constant": self.positivity_constant,
            "verdict": self.verdict,
            "samples": self.samples,
            "gap": self.gap,
        }


def _reduced_left_mult(u, trunc, clip_tol):
    """Left-mult matrix of u over its active sublattice (full box if none)."""
    axes = active_axes(u)
    theta = u.theta
    if 0 < len(axes) < theta.n:
        u = restrict_axes(u, axes)
    elif not axes:
        return np.array([[u[(0,) * theta.n]]]), u.theta
    return left_mult_matrix(u, trunc, clip_tol=clip_tol), u.theta


def is_elliptic(principal, samples, trunc, *, gap=1e-8, clip_tol=1e-3):
    """Invertibility of the principal symbol over unit-sphere samples.

    Reports the smallest singular value of the truncated left-multiplication
    matrix over the samples and, when every sampled value is self-adjoint,
    the smallest eigenvalue as a positivity constant.
    """
    if isinstance(samples, int):
        samples = sphere_directions(principal.theta.n, samples)
    min_sv = math.inf
    min_eig = math.inf
    all_selfadjoint = True
    count = 0
    for xi in samples:
        value = principal.at(np.asarray(xi, dtype=float))
        count += 1
        L, _ = _reduced_left_mult(value, trunc, clip_tol)
        if np.max(np.abs(L - L.conj().T)) <= 1e-10 * max(np.max(np.abs(L)), 1e-300):
            w = scipy.linalg.eigvalsh(L)
            min_eig = min(min_eig, float(np.min(w)))
            min_sv = min(min_sv, float(np.min(np.abs(w))))
        else:
            all_selfadjoint = False
            min_sv = min(min_sv, float(np.min(scipy.linalg.svdvals(L))))
    return EllipticityReport(
        min_singular=min_sv,
        positivity_constant=min_eig if all_selfadjoint else None,
        verdict=min_sv > gap,
        samples=count,
        gap=gap,
    )


# ---------------------------------------------------------------------------
# Riemannian metrics and the Laplace-Beltrami operator
# ---------------------------------------------------------------------------


class RiemannianMetric:
    """Positive invertible matrix g = (g_ij) with self-adjoint entries.

    Derived caches (inverse entries g^{ij}, the volume element nu = sqrt(det g)
    and its powers) are computed once at the stated truncation: det(g) is
    exp of the matrix trace of log(g), with log taken by functional calculus
    on the block left-multiplication matrix.
    """

    def __init__(self, entries, trunc, *, gap=1e-8, clip_tol=1e-10,
                 prune_tol=1e-14, power_trunc=None):
        self.n = len(entries)
        self.g = [list(row) for row in entries]
        self.theta = self.g[0][0].theta
        self.trunc = trunc
        self.gap = gap
        tol = 1e-12
        for i in range(self.n):
            for j in range(self.n):
                gij = self.g[i][j]
                scale = max(gij.l2_norm(), 1.0)
                if (involution(gij) - gij).l2_norm() > tol * scale:
                    raise ValueError(f"metric entry ({i},{j}) is not self-adjoint")
                if (gij - self.g[j][i]).l2_norm() > tol * scale:
                    raise ValueError("metric matrix is not symmetric")
        axes = sorted(set().union(*[active_axes(g) for row in self.g for g in row]) or set())
        reduce = 0 < len(axes) < self.theta.n
        work = (
            [[restrict_axes(g, axes) for g in row] for row in self.g] if reduce
            else self.g
        )
        sub_theta = work[0][0].theta
        N = box_size(trunc.K, sub_theta.n)
        B = np.zeros((self.n * N, self.n * N), dtype=complex)
        for i in range(self.n):
            for j in range(self.n):
                B[i * N:(i + 1) * N, j * N:(j + 1) * N] = left_mult_matrix(
                    work[i][j], trunc, clip_tol=clip_tol
                )
        if np.max(np.abs(B - B.conj().T)) > 1e-10 * max(np.max(np.abs(B)), 1e-300):
            raise ValueError("block matrix of the metric is not hermitian")
        w, V = scipy.linalg.eigh(B)
        self.min_eigenvalue = float(np.min(w))
        if self.min_eigenvalue <= gap:
            raise GapViolation(
                f"metric block matrix has eigenvalue {self.min_eigenvalue:.3e} <= gap"
            )
        zero_idx = box_index((0,) * sub_theta.n, trunc.K)

        def solve_block_column(weights, j):
            e = np.zeros(self.n * N, dtype=complex)
            e[j * N + zero_idx] = 1.0
            return V @ (weights * (V.conj().T @ e))

        logw = np.log(w)
        trace_log = NCElement.zero(sub_theta)
        inv_entries = [[None] * self.n for _ in range(self.n)]
        for j in range(self.n):
            log_col = solve_block_column(logw, j)
            inv_col = solve_block_column(1.0 / w, j)
            for i in range(self.n):
                block_l = log_col[i * N:(i + 1) * N]
                block_i = inv_col[i * N:(i + 1) * N]
                if i == j:
                    trace_log = trace_log + matrix_to_element(
                        block_l, trunc, sub_theta, prune_tol=prune_tol
                    )
                inv_entries[i][j] = matrix_to_element(
                    block_i, trunc, sub_theta, prune_tol=prune_tol
                )
        if power_trunc is None:
            inner = trunc.inner_radius
            power_trunc = TruncationSpec(2 * inner, inner)
        # nu^s = exp((s/2) Tr log g); four powers cover the Laplacian formula
        self._nu_pow = {}
        for s in (1.0, 0.5, -0.5, -1.0):
            self._nu_pow[s] = funcalc(
                np.exp, trace_log.scale(s / 2.0), power_trunc,
                clip_tol=1e-8, prune_tol=prune_tol,
            )
        self.trace_log = trace_log
        if reduce:
            self.trace_log = embed_axes(trace_log, axes, self.theta)
            self._nu_pow = {
                s: embed_axes(v, axes, self.theta) for s, v in self._nu_pow.items()
            }
            inv_entries = [
                [embed_axes(e, axes, self.theta) for e in row] for row in inv_entries
            ]
        self.g_inv = inv_entries
        self.inverse_residual = self._inverse_residual()

    def nu(self, power=1.0):
        """nu(g)^power for power in {1, 1/2, -1/2, -1}."""
        return self._nu_pow[float(power)]

    def _inverse_residual(self):
        worst = 0.0
        one = NCElement.one(self.theta)
        for i in range(self.n):
            for k in range(self.n):
                acc = NCElement.zero(self.theta)
                for j in range(self.n):
                    acc = acc + mul(self.g_inv[i][j], self.g[j][k])
                target = one if i == k else NCElement.zero(self.theta)
                worst = max(worst, (acc - target).l2_norm())
        return worst


def divergence_form_symbol(metric, prune_tol=1e-13):
    """Symbol of sum_ij delta_i(sqrt(nu) g^{ij} sqrt(nu) delta_j .) = nu * Delta_g.

    This volume-weighted realization is formally self-adjoint in the flat
    inner product (its truncated matrix is hermitian up to cache truncation),
    which is the computable expression of the self-adjointness of Delta_g
    with respect to the volume-weighted state tau(. nu).  Delta_g itself is
    NOT flat-self-adjoint for a non-flat metric.
    """
    n = metric.n
    theta = metric.theta
    nus = metric.nu(0.5)
    coeffs = {}
    for i in range(n):
        for j in range(n):
            c = mul(mul(nus, metric.g_inv[i][j]), nus)
            alpha = tuple(
                (2 if a == i else 0) if i == j else (1 if a in (i, j) else 0)
                for a in range(n)
            )
            prev = coeffs.get(alpha)
            coeffs[alpha] = c if prev is None else prev + c
    for j in range(n):
        acc = NCElement.zero(theta)
        for i in range(n):
            ei = tuple(1 if a == i else 0 for a in range(n))
            acc = acc + delta(ei, mul(mul(nus, metric.g_inv[i][j]), nus))
        ej = tuple(1 if a == j else 0 for a in range(n))
        prev = coeffs.get(ej)
        coeffs[ej] = acc if prev is None else prev + acc
    scale = max((e.l2_norm() for e in coeffs.values()), default=1.0)
    cleaned = {}
    for alpha, elem in coeffs.items():
        elem = elem.prune(prune_tol * max(scale, 1e-300))
        if len(elem):
            cleaned[alpha] = elem
    return PolynomialSymbol(theta, cleaned)


def laplace_beltrami(metric, prune_tol=1e-13):
    """Degree-2 polynomial symbol of the Laplace-Beltrami operator.

    Second-order coefficients are nu^{-1/2} g^{ij} nu^{1/2}; first-order
    coefficients are nu^{-1} sum_i delta_i(sqrt(nu) g^{ij} sqrt(nu)).
    For the identity metric this reduces to the flat Laplacian exactly.
    """
    n = metric.n
    theta = metric.theta
    num = metric.nu(-0.5)
    nup = metric.nu(0.5)
    nui = metric.nu(-1.0)
    coeffs = {}

    def put(alpha, elem):
        if len(elem):
            prev = coeffs.get(alpha)
            coeffs[alpha] = elem if prev is None else prev + elem

    for i in range(n):
        for j in range(n):
            second = mul(mul(num, metric.g_inv[i][j]), nup)
            alpha = tuple(
                (2 if a == i else 0) if i == j else (1 if a in (i, j) else 0)
                for a in range(n)
            )
            put(alpha, second)
    for j in range(n):
        acc = NCElement.zero(theta)
        for i in range(n):
            ei = tuple(1 if a == i else 0 for a in range(n))
            acc = acc + delta(ei, mul(mul(nup, metric.g_inv[i][j]), nup))
        ej = tuple(1 if a == j else 0 for a in range(n))
        put(ej, mul(nui, acc))
    scale = max((e.l2_norm() for e in coeffs.values()), default=1.0)
    cleaned = {}
    for alpha, elem in coeffs.items():
        elem = elem.prune(prune_tol * max(scale, 1e-300))
        if len(elem):
            cleaned[alpha] = elem
    return PolynomialSymbol(theta, cleaned)


# ---------------------------------------------------------------------------
# parametrix recursion
# ---------------------------------------------------------------------------


class ParametrixJet:
    """Lazily evaluated parametrix components sigma_{-q-j}, j = 0 .. N-1."""

    def __init__(self, rho_components, N, trunc, *, gap=1e-8, clip_tol=1e-5,
                 post_tol=1e-6, deriv_kw=None):
        if len(rho_components) < N:
            raise ValueError(f"need {N} input components, got {len(rho_components)}")
        self.rho_components = list(rho_components)
        self.N = N
        self.trunc = trunc
        self.theta = rho_components[0].theta
        self.base_order = -complex(rho_components[0].degree)
        self._gap = gap
        self._clip_tol = clip_tol
        self._post_tol = post_tol
        self._deriv_kw = deriv_kw or {}
        self._inv_cache = {}
        self._sigma_cache = {}
        self.components = [
            HomogeneousComponent(
                self.theta,
                self.base_order - j,
                trunc.inner_radius,
                (lambda xi, j=j: self._sigma(j, xi)),
            )
            for j in range(N)
        ]

    def _key(self, xi):
        return tuple(round(float(x), 9) for x in xi)

    def _inverse(self, xi):
        key = self._key(xi)
        got = self._inv_cache.get(key)
        if got is None:
            value = self.rho_components[0].at(np.asarray(xi, dtype=float))
            got = inverse_element(
                value, self.trunc,
                gap=self._gap, clip_tol=self._clip_tol, post_tol=self._post_tol,
            )
            self._inv_cache[key] = got
        return got

    def _sigma(self, j, xi):
        xi = np.asarray(xi, dtype=float)
        key = (j, self._key(xi))
        got = self._sigma_cache.get(key)
        if got is not None:
            return got
        if j == 0:
            out = self._inverse(xi)
        else:
            n = self.theta.n
            acc = NCElement.zero(self.theta)
            for k in range(j + 1):
                for l in range(j - k + 1):
                    if l >= j:
                        continue
                    rem = j - k - l
                    for alpha in compositions(n, rem):
                        dval = xi_derivative(
                            self.rho_components[k], alpha, xi, **self._deriv_kw
                        )
                        sval = delta(alpha, self._sigma(l, xi))
                        if dval.coeffs and sval.coeffs:
                            acc = acc + mul(dval, sval).scale(
                                1.0 / multi_factorial(alpha)
                            )
            out = mul(self._inverse(xi), acc).scale(-1.0)
        self._sigma_cache[key] = out
        return out

    def symbol(self, terms=None):
        """Partial sum of the first `terms` components, excised at xi = 0."""
        terms = self.N if terms is None else terms
        zero = NCElement.zero(self.theta)

        def evaluator(xi):
            if not np.any(xi):
                return zero
            acc = NCElement.zero(self.theta)
            for j in range(terms):
                acc = acc + self._sigma(j, xi)
            return acc

        sym = CallableSymbol(
            self.theta, self.base_order, self.trunc.inner_radius, evaluator
        )
        sym.excised_radius = 0.0
        return sym


def parametrix_jet(rho_components, N, trunc, **kw):
    """Build the parametrix jet for the given elliptic symbol components."""
    return ParametrixJet(rho_components, N, trunc, **kw)


def parametrix_residual_fit(sigma_symbol, rho_symbol, radii, side="left",
                            points_per_shell=None):
    """Shell decay of exact#(sigma, rho) - 1 (or rho # sigma for side="right").

    Returns (pairs, fit): pairs of (R, max shell residual) and the fitted
    log-log slope; a slope <= -terms + 0.5 certifies the jet inverts the
    operator to that order.
    """
    theta = sigma_symbol.theta
    one = NCElement.one(theta)
    pairs = []
    for R in radii:
        worst = 0.0
        for k in shell_points(theta.n, R, points_per_shell):
            if side == "left":
                val = exact_sharp_at(sigma_symbol, rho_symbol, k)
            else:
                val = exact_sharp_at(rho_symbol, sigma_symbol, k)
            worst = max(worst, (val - one).l2_norm())
        pairs.append((int(R), worst))
    fit = power_law_fit([p[0] for p in pairs], [p[1] for p in pairs])
    return pairs, fit


# ---------------------------------------------------------------------------
# regularity probes and truncated solves
# ---------------------------------------------------------------------------


@dataclass
class ProbeReport:
    max_ratio: float
    seed: int
    samples: int
    s: float
    t: float
    order: float

    def as_dict(self):
        return {
            "max_ratio": self.max_ratio,
            "seed": self.seed,
            "samples": self.samples,
            "s": self.s,
            "t": self.t,
            "order": self.order,
        }


def elliptic_estimate_probe(P, s, t, sample_count, trunc, seed=1234):
    """Empirical constant in ||u||_{s+m} <= C (||Pu||_s + ||u||_t).

    Maximizes the ratio over seeded complex-Gaussian probe vectors supported
    on modes |k|_inf <= K/2; the seed is recorded in the report.  The ratio
    is invariant under rescaling of u.
    """
    m = P.order.m
    if not t < s + m:
        raise ValueError("need t < s + m")
    theta = P.theta
    rng = np.random.default_rng(seed)
    coords = box_coords(trunc.K // 2, theta.n)
    worst = 0.0
    for _ in range(sample_count):
        vals = rng.standard_normal(len(coords)) + 1j * rng.standard_normal(len(coords))
        u = NCElement(theta, {tuple(int(x) for x in k): v for k, v in zip(coords, vals)})
        ratio = sobolev_norm(u, s + m) / (
            sobolev_norm(apply_op(P, u), s) + sobolev_norm(u, t)
        )
        worst = max(worst, float(ratio))
    return ProbeReport(worst, seed, sample_count, float(s), float(t), float(m))


@dataclass
class SolveResult:
    u: NCElement
    residual_window: float
    residual_full: float
    iterations: int
    method: str


def parametrix_preconditioner(jet, trunc, terms=None):
    """Dense preconditioner on the trusted window from a parametrix jet.

    The excised zero mode gets an identity entry so the preconditioner stays
    nonsingular.
    """
    M = build_matrix(PsiDO(jet.symbol(terms)), trunc)
    P = M.trusted().copy()
    zero = box_index((0,) * jet.theta.n, trunc.inner_radius)
    P[zero, zero] += 1.0
    return P


def truncated_solve(P, f, trunc, *, method="direct", precond=None, rtol=1e-10,
                    maxiter=200, restart=40):
    """Solve P u = f on the trusted window of the truncated matrix.

    method="direct" uses a dense solve; method="gmres" runs restarted GMRES,
    optionally with a dense preconditioner matrix (see
    parametrix_preconditioner).  The reported window residual is
    ||P u - f||_l2 restricted to the solved window; the full residual keeps
    all spillover modes.
    """
    theta = P.theta
    W = trunc.inner_radius
    M = build_matrix(P, trunc)
    T = M.trusted()
    fvec = element_to_vector(f.restrict(W), W)
    iterations = 0
    if method == "direct":
        try:
            x = scipy.linalg.solve(T, fvec)
        except scipy.linalg.LinAlgError as exc:
            raise SingularTruncation(str(exc)) from exc
    elif method == "gmres":
        counter = {"n": 0}

        def cb(_):
            counter["n"] += 1

        op = None
        if precond is not None:
            pre = np.asarray(precond)
            op = scipy.sparse.linalg.LinearOperator(
                T.shape, matvec=lambda v: pre @ v
            )
        x, info = scipy.sparse.linalg.gmres(
            T, fvec, M=op, rtol=rtol, maxiter=maxiter, restart=restart,
            callback=cb, callback_type="pr_norm",
        )
        iterations = counter["n"]
        if info < 0:
            raise SingularTruncation(f"gmres failed with info={info}")
    else:
        raise ValueError(f"unknown method {method!r}")
    u = vector_to_element(x, W, theta)
    diff = apply_op(P, u) - f
    return SolveResult(
        u=u,
        residual_window=diff.restrict(W).l2_norm(),
        residual_full=diff.l2_norm(),
        iterations=iterations,
        method=method,
    )
