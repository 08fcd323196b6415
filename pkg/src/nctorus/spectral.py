"""Sobolev norms, duality, truncated spectra, Weyl and Schatten diagnostics.

Sobolev data is diagonal in the Fourier basis: ||u||_s^2 = sum (1+|k|^2)^s
|u_k|^2, realized either as the lattice sum or as ||Lambda^s u||_0 with
Lambda^s the coefficient scaling by (1+|k|^2)^(s/2); both routes must agree
to rounding.  Spectra and singular values come from the trusted window of
the truncated operator matrix: they approximate only the low part of the
true spectrum, so every result records its truncation and a validity cut.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (
    NCElement,
    box_coords,
    mul,
    tau,
    vector_to_element,
)
from .fitting import SlopeFit, power_law_fit
from .psido import build_matrix


class SobolevIndex:
    """Real Sobolev exponent."""

    __slots__ = ("s",)

    def __init__(self, s):
        s = float(s)
        if not math.isfinite(s):
            raise ValueError("Sobolev exponent must be finite")
        self.s = s


def sobolev_norm(u, s):
    """||u||_s = (sum_k (1+|k|^2)^s |u_k|^2)^(1/2)."""
    s = float(s)
    acc = 0.0
    for k, c in u.coeffs.items():
        acc += (1.0 + sum(x * x for x in k)) ** s * (abs(c) ** 2)
    return math.sqrt(acc)


def lambda_apply(s, u):
    """Bessel-potential scaling: multiplies u_k by (1+|k|^2)^(s/2)."""
    s = float(s)
    out = {
        k: c * (1.0 + sum(x * x for x in k)) ** (s / 2.0)
        for k, c in u.coeffs.items()
    }
    return NCElement(u.theta, out)


@dataclass
class DualityReport:
    sup_estimate: float
    exact_norm: float
    maximizer: NCElement
    achieved: float
    trials: int
    holder_violations: int
    seed: int


def duality_maximizer(u, s):
    """Element v with ||v||_s = 1 attaining sup |tau(u v)| = ||u||_{-s}.

    The pairing is tau(u v) = sum_m u_{-m} chi(-m, m) v_m, so the maximizer
    has v_m proportional to the conjugate of u_{-m} chi(-m, m) weighted by
    (1+|m|^2)^{-s}.
    """
    theta = u.theta
    out = {}
    for k, c in u.coeffs.items():
        m = tuple(-x for x in k)
        a = c * theta.pair_phase(k, m)
        out[m] = np.conj(a) * (1.0 + sum(x * x for x in m)) ** (-float(s))
    v = NCElement(theta, out)
    norm = sobolev_norm(v, s)
    if norm == 0:
        return v
    return v.scale(1.0 / norm)


def duality_gap(u, s, trial_count, seed=1234):
    """Duality check for ||u||_{-s} = sup_{||v||_s = 1} |tau(u v)|.

    Builds the explicit maximizer and samples `trial_count` random trial
    directions, counting any Hoelder-bound violations (there should be none
    beyond rounding).
    """
    theta = u.theta
    exact = sobolev_norm(u, -s)
    vmax = duality_maximizer(u, s)
    achieved = abs(tau(mul(u, vmax)))
    rng = np.random.default_rng(seed)
    radius = u.support_radius() + 1
    coords = box_coords(radius, theta.n)
    sup = achieved
    violations = 0
    slack = 1e-12 * max(exact, 1.0)
    for _ in range(trial_count):
        vals = rng.standard_normal(len(coords)) + 1j * rng.standard_normal(len(coords))
        v = NCElement(theta, {tuple(int(x) for x in k): c for k, c in zip(coords, vals)})
        norm = sobolev_norm(v, s)
        if norm == 0:
            continue
        v = v.scale(1.0 / norm)
        val = abs(tau(mul(u, v)))
        sup = max(sup, val)
        if val > exact + slack:
            violations += 1
    return DualityReport(
        sup_estimate=sup,
        exact_norm=exact,
        maximizer=vmax,
        achieved=achieved,
        trials=trial_count,
        holder_violations=violations,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# truncated spectra
# ---------------------------------------------------------------------------


@dataclass
class SpectrumResult:
    values: np.ndarray
    kind: str  # "eigenvalues" (ascending) or "singular" (descending)
    K: int
    window: int
    solver: str
    hermitian: bool
    trusted_cut: float | None
    theta_n: int
    order: complex
    vectors: list = field(default_factory=list)

    def count_below(self, cut):
        if self.kind != "eigenvalues":
            raise ValueError("count_below needs eigenvalues")
        return int(np.sum(np.real(self.values) <= cut))


def _normalize_phase(vec):
    idx = np.argmax(np.abs(vec) > 1e-12 * max(np.max(np.abs(vec)), 1e-300))
    pivot = vec[idx]
    if pivot == 0:
        return vec
    return vec * (np.conj(pivot) / abs(pivot))


def spectrum(P, trunc, hermitian=False, with_vectors=False):
    """Eigenvalues (and optionally eigenvectors) of the trusted window.

    With `hermitian` the window matrix is verified hermitian and a symmetric
    solver is used; eigenvectors are mapped back to elements with the first
    nonzero coefficient made real positive.
    """
    M = build_matrix(P, trunc)
    T = M.trusted()
    W = M.trusted_radius
    theta = P.theta
    if hermitian:
        scale = max(np.max(np.abs(T)), 1e-300)
        if np.max(np.abs(T - T.conj().T)) > 1e-10 * scale:
            raise ValueError("hermitian flag set but the window matrix is not")
        if with_vectors:
            w, V = scipy.linalg.eigh(T)
            solver = "eigh"
        else:
            w = scipy.linalg.eigvalsh(T)
            V = None
            solver = "eigvalsh"
        order = np.arange(len(w))
    else:
        if with_vectors:
            w, V = scipy.linalg.eig(T)
            solver = "eig"
        else:
            w = scipy.linalg.eigvals(T)
            V = None
            solver = "eigvals"
        order = np.lexsort((np.imag(w), np.real(w)))
        w = w[order]
    vectors = []
    if V is not None:
        V = V[:, order] if not hermitian else V
        for i in range(V.shape[1]):
            vec = _normalize_phase(V[:, i])
            vectors.append(vector_to_element(vec, W, theta, prune_tol=0.0))
    m = P.order.m
    cut = (W / 2.0) ** m if m > 0 else None
    return SpectrumResult(
        values=np.asarray(w),
        kind="eigenvalues",
        K=trunc.K,
        window=W,
        solver=solver,
        hermitian=hermitian,
        trusted_cut=cut,
        theta_n=theta.n,
        order=P.order.q,
        vectors=vectors,
    )


def weyl_constant(n):
    """Volume constant pi^(n/2) / Gamma(n/2 + 1) in the counting law."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass
class WeylReport:
    count: int
    expected: float
    ratio: float
    lambda_cut: float
    edge_case: bool
    near_edge: bool

    def as_dict(self):
        return {
            "count": self.count,
            "expected": self.expected,
            "ratio": self.ratio,
            "lambda_cut": self.lambda_cut,
            "edge_case": self.edge_case,
            "near_edge": self.near_edge,
        }


def weyl_ratio(spec, n, lambda_cut):
    """Counting-law ratio N(lambda) / (c_n lambda^(n/2)) at the cut.

    Raises when sqrt(lambda_cut) exceeds the trusted window (the count would
    be clipped); flags cuts in the outer 20% of the window.
    """
    lam = float(lambda_cut)
    if lam < 0:
        raise ValueError("lambda_cut must be nonnegative")
    if lam > 0 and math.sqrt(lam) > spec.window:
        raise ValueError(
            f"lambda_cut {lam} reaches past the trusted window {spec.window}"
        )
    count = spec.count_below(lam)
    expected = weyl_constant(n) * lam ** (n / 2.0)
    edge = expected == 0.0
    ratio = math.inf if edge else count / expected
    return WeylReport(
        count=count,
        expected=expected,
        ratio=ratio,
        lambda_cut=lam,
        edge_case=edge,
        near_edge=lam > 0 and math.sqrt(lam) > 0.8 * spec.window,
    )


def lattice_ball_count(n, lam):
    """Exact number of lattice points with |k|^2 <= lam (counting oracle)."""
    R = int(math.isqrt(int(lam)))
    coords = box_coords(R, n)
    return int(np.sum(np.sum(coords.astype(np.int64) ** 2, axis=1) <= lam))


def schatten_slope(P, trunc, fit_range, hermitian=None):
    """Singular values of the trusted window with a log-log power fit.

    Requires a negative-order symbol; `fit_range` is an inclusive (lo, hi)
    range of 1-based singular-value indices.  Returns (result, fit).
    """
    if not P.order.m < 0:
        raise ValueError("Schatten diagnostics need a negative-order symbol")
    M = build_matrix(P, trunc)
    T = M.trusted()
    scale = max(np.max(np.abs(T)), 1e-300)
    if hermitian is None:
        hermitian = np.max(np.abs(T - T.conj().T)) <= 1e-10 * scale
    if hermitian:
        sv = np.sort(np.abs(scipy.linalg.eigvalsh(T)))[::-1]
        solver = "eigvalsh"
    else:
        sv = scipy.linalg.svdvals(T)
        solver = "svdvals"
    idx = np.arange(1, len(sv) + 1)
    fit = power_law_fit(idx, sv, fit_range)
    res = SpectrumResult(
        values=sv,
        kind="singular",
        K=trunc.K,
        window=M.trusted_radius,
        solver=solver,
        hermitian=bool(hermitian),
        trusted_cut=None,
        theta_n=P.theta.n,
        order=P.order.q,
    )
    return res, fit


def smoothness_decay(v, max_radius=None, fit_range=None):
    """Shell-decay fit of log max_{|k|_inf = R} |v_k| against log R.

    Fewer than three populated shells give a degenerate fit (e.g. a single
    mode), reported via the `degenerate` flag.  `fit_range` restricts the
    fitted radii, which avoids the small-radius bias of bracket weights.
    """
    if not len(v):
        raise ValueError("decay fit needs a nonzero element")
    top = v.support_radius() if max_radius is None else int(max_radius)
    radii = []
    maxima = []
    for R in range(1, top + 1):
        best = 0.0
        for k, c in v.coeffs.items():
            if max(map(abs, k)) == R:
                best = max(best, abs(c))
        if best > 0:
            radii.append(R)
            maxima.append(best)
    if fit_range is not None:
        lo, hi = fit_range
        pairs = [(r, m) for r, m in zip(radii, maxima) if lo <= r <= hi]
        radii = [p[0] for p in pairs]
        maxima = [p[1] for p in pairs]
    if len(radii) < 3:
        return SlopeFit(float("nan"), float("nan"), float("nan"),
                        (None, None), degenerate=True, points=len(radii))
    return power_law_fit(radii, maxima)
