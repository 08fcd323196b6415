"""Twisted Fourier algebra of the noncommutative n-torus at finite support.

Elements are finitely supported maps k -> u_k from the integer lattice Z^n to
C, thought of as u = sum_k u_k U^k where U^k is the normal-ordered word
U_1^{k_1} ... U_n^{k_n} in the generating unitaries U_1, ..., U_n with
relations U_l U_j = exp(2*pi*i*theta_jl) U_j U_l.

Normal-ordering fixes all phases.  The product and involution use

    U^k U^l   = chi(k, l) U^{k+l},   chi(k, l) = exp(2i pi sum_{j<m} theta_jm k_m l_j)
    (U^k)^*   = chistar(k) U^{-k},   chistar(k) = exp(2i pi sum_{j<m} theta_jm k_m k_j)

which is the closed form obtained by moving each letter of U^l leftward one
transposition at a time (see tests/test_core.py for the step-by-step oracle
that validates it).  chi is bilinear in the exponents, hence an exact
2-cocycle: associativity holds to rounding error only.

Matrix representations use the orthonormal basis {U^k : |k|_inf <= K} in
lexicographic order on (k_1, ..., k_n).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.linalg


class NCError(Exception):
    """Base class for numeric/contract failures in this package."""


class ThetaMismatch(NCError):
    """Two elements over different deformation matrices were combined."""


class SupportExceedsMargin(NCError):
    """Element support does not fit in the truncation margin box."""


class GapViolation(NCError):
    """Spectrum too close to a branch cut / zero for functional calculus."""


class SingularTruncation(NCError):
    """A truncated linear system was singular or failed its residual check."""


# Debug hook for the CLI selftest: a nonzero twist injects a non-bilinear
# term into the pair phase, which breaks the cocycle identity and therefore
# associativity.  Never set outside fault-injection tests.
_PHASE_TWIST = 0.0


def set_phase_twist(eps):
    """Install the fault-injection twist (selftest debug hook)."""
    global _PHASE_TWIST
    _PHASE_TWIST = float(eps)


class ThetaMatrix:
    """Real antisymmetric n x n deformation parameter.

    Precomputes the strictly lower-triangular matrix T with T[m, j] =
    theta[j, m] (j < m) so that the pair-phase exponent is the bilinear form
    k . (T l).
    """

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError("theta must be a square matrix")
        n = entries.shape[0]
        if n < 1:
            raise ValueError("dimension must be positive")
        # n = 1 (ordinary circle) is permitted internally so that operations
        # on elements supported on a coordinate sublattice can be reduced to
        # that sublattice; tori proper have n >= 2.
        if not np.allclose(entries, -entries.T, atol=1e-14):
            raise ValueError("theta must be antisymmetric")
        self.n = n
        self.entries = 0.5 * (entries - entries.T)  # exact antisymmetry
        self.entries.setflags(write=False)
        self._T = np.tril(self.entries.T, -1).copy()

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)))

    def __eq__(self, other):
        return (
            isinstance(other, ThetaMatrix)
            and self.n == other.n
            and np.array_equal(self.entries, other.entries)
        )

    def __repr__(self):
        return f"ThetaMatrix(n={self.n})"

    def pair_exponent(self, k, l):
        """Exponent e with U^k U^l = exp(2i pi e) U^{k+l}."""
        e = float(np.dot(k, self._T @ np.asarray(l, dtype=float)))
        if _PHASE_TWIST:
            e += _PHASE_TWIST * (k[0] ** 2) * l[0]
        return e

    def pair_phase(self, k, l):
        return np.exp(2j * np.pi * self.pair_exponent(k, l))

    def pair_phases(self, k, ls):
        """Vectorized chi(k, l) over an array of lattice rows ls."""
        e = ls @ (self._T.T @ np.asarray(k, dtype=float))
        if _PHASE_TWIST:
            e = e + _PHASE_TWIST * (k[0] ** 2) * ls[:, 0]
        return np.exp(2j * np.pi * e)

    def involution_phase(self, k):
        """chistar(k) with (U^k)^* = chistar(k) U^{-k}."""
        k = np.asarray(k, dtype=float)
        return np.exp(2j * np.pi * float(k @ (self._T @ k)))


def _as_key(k):
    return tuple(int(c) for c in k)


class NCElement:
    """Finitely supported Fourier coefficient map over one ThetaMatrix.

    Treated as immutable: operations return new elements and never mutate
    the coefficient dict.
    """

    __slots__ = ("theta", "coeffs")

    def __init__(self, theta, coeffs=None):
        self.theta = theta
        clean = {}
        if coeffs:
            for k, c in coeffs.items():
                key = _as_key(k)
                if len(key) != theta.n:
                    raise ValueError(f"mode {key} has wrong dimension")
                c = complex(c)
                if c != 0:
                    clean[key] = c
        self.coeffs = clean

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, theta):
        return cls(theta)

    @classmethod
    def one(cls, theta):
        return cls(theta, {(0,) * theta.n: 1.0})

    # -- basics ------------------------------------------------------------

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs.get(_as_key(k), 0j)

    def __repr__(self):
        return f"NCElement(n={self.theta.n}, modes={len(self.coeffs)})"

    def items(self):
        return self.coeffs.items()

    def support_radius(self):
        if not self.coeffs:
            return 0
        return max(max(abs(c) for c in k) for k in self.coeffs)

    def l2_norm(self):
        return math.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values()))

    def l1_norm(self):
        return sum(abs(c) for c in self.coeffs.values())

    def prune(self, tol):
        """Drop coefficients with |c| <= tol (absolute)."""
        return NCElement(
            self.theta, {k: c for k, c in self.coeffs.items() if abs(c) > tol}
        )

    def restrict(self, radius):
        """Restrict support to the box |k|_inf <= radius."""
        return NCElement(
            self.theta,
            {k: c for k, c in self.coeffs.items() if max(map(abs, k), default=0) <= radius},
        )

    def _check_theta(self, other):
        if self.theta is not other.theta and self.theta != other.theta:
            raise ThetaMismatch("elements live over different theta matrices")

    # -- linear structure ---------------------------------------------------

    def __add__(self, other):
        self._check_theta(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0j) + c
        return NCElement(self.theta, out)

    def __sub__(self, other):
        self._check_theta(other)
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, 0j) - c
        return NCElement(self.theta, out)

    def __neg__(self):
        return NCElement(self.theta, {k: -c for k, c in self.coeffs.items()})

    def scale(self, c):
        c = complex(c)
        return NCElement(self.theta, {k: c * v for k, v in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, NCElement):
            return mul(self, other)
        return self.scale(other)

    def __rmul__(self, scalar):
        return self.scale(scalar)


def monomial(k, c, theta):
    """c * U^k as a one-term element."""
    key = _as_key(k)
    if len(key) != theta.n:
        raise ValueError("mode dimension does not match theta")
    return NCElement(theta, {key: c})


def mul(u, v):
    """Twisted convolution (uv)_m = sum_{k+l=m} u_k v_l chi(k, l)."""
    u._check_theta(v)
    theta = u.theta
    if not u.coeffs or not v.coeffs:
        return NCElement.zero(theta)
    uk = np.array(list(u.coeffs.keys()), dtype=np.int64)
    ua = np.array(list(u.coeffs.values()), dtype=complex)
    vk = np.array(list(v.coeffs.keys()), dtype=np.int64)
    va = np.array(list(v.coeffs.values()), dtype=complex)
    expo = (uk.astype(float) @ theta._T) @ vk.T.astype(float)
    if _PHASE_TWIST:
        expo = expo + _PHASE_TWIST * (uk[:, 0] ** 2)[:, None] * vk[None, :, 0]
    weights = (ua[:, None] * va[None, :]) * np.exp(2j * np.pi * expo)
    targets = (uk[:, None, :] + vk[None, :, :]).reshape(-1, theta.n)
    out = {}
    for m, w in zip(map(tuple, targets.tolist()), weights.ravel().tolist()):
        out[m] = out.get(m, 0j) + w
    return NCElement(theta, out)


def involution(u):
    """Adjoint: (u^*)_{-k} = conj(u_k) chistar(k)."""
    theta = u.theta
    out = {}
    for k, c in u.coeffs.items():
        out[tuple(-ki for ki in k)] = np.conj(c) * theta.involution_phase(k)
    return NCElement(theta, out)


def tau(u):
    """Normalized trace: the U^0 coefficient."""
    return u.coeffs.get((0,) * u.theta.n, 0j)


def inner(u, v):
    """GNS inner product <u, v> = sum_k u_k conj(v_k) = tau(u v^*)."""
    u._check_theta(v)
    small, big = (u, v) if len(u) <= len(v) else (v, u)
    acc = 0j
    for k, c in small.coeffs.items():
        other = big.coeffs.get(k)
        if other is not None:
            acc += (c * np.conj(other)) if small is u else (other * np.conj(c))
    return acc


def delta(alpha, u):
    """Derivation power: (delta^alpha u)_k = k^alpha u_k."""
    alpha = _as_key(alpha)
    if len(alpha) != u.theta.n:
        raise ValueError("multi-order dimension mismatch")
    if all(a == 0 for a in alpha):
        return u
    out = {}
    for k, c in u.coeffs.items():
        f = 1
        for ki, ai in zip(k, alpha):
            if ai:
                f *= ki**ai
        if f:
            out[k] = f * c
    return NCElement(u.theta, out)


def alpha_act(s, u):
    """Torus action: multiplies u_k by exp(i s . k)."""
    s = np.asarray(s, dtype=float)
    out = {
        k: c * np.exp(1j * float(s @ np.asarray(k, dtype=float)))
        for k, c in u.coeffs.items()
    }
    return NCElement(u.theta, out)


def commutator(u, v):
    return mul(u, v) - mul(v, u)


# ---------------------------------------------------------------------------
# truncation boxes and matrix representation
# ---------------------------------------------------------------------------


class TruncationSpec:
    """Box radius K with a margin M reserved for product spillover (K > M >= 0)."""

    def __init__(self, K, margin=0):
        K = int(K)
        margin = int(margin)
        if not K > margin >= 0:
            raise ValueError("need K > margin >= 0")
        self.K = K
        self.margin = margin

    @property
    def inner_radius(self):
        return self.K - self.margin

    def doubled(self):
        return TruncationSpec(2 * self.K, self.margin)

    def __repr__(self):
        return f"TruncationSpec(K={self.K}, margin={self.margin})"


@lru_cache(maxsize=64)
def box_coords(K, n):
    """Lattice points of [-K, K]^n in lexicographic order, shape (N, n)."""
    axes = [np.arange(-K, K + 1)] * n
    grid = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([g.ravel() for g in grid], axis=1)
    coords.setflags(write=False)
    return coords


@lru_cache(maxsize=64)
def _strides(K, n):
    side = 2 * K + 1
    return np.array([side ** (n - 1 - i) for i in range(n)], dtype=np.int64)


def box_index(k, K):
    """Position of mode k in the lexicographic basis order of the K-box."""
    k = np.asarray(k, dtype=np.int64)
    n = k.shape[-1]
    return int((k + K) @ _strides(K, n))


def box_size(K, n):
    return (2 * K + 1) ** n


def _clip_to_margin(u, trunc, clip_tol):
    """Enforce support(u) within the margin box, clipping only negligible mass."""
    M = trunc.margin
    if u.support_radius() <= M:
        return u
    clipped = u.restrict(M)
    lost = math.sqrt(max(u.l2_norm() ** 2 - clipped.l2_norm() ** 2, 0.0))
    if lost > clip_tol * max(u.l2_norm(), 1e-300):
        raise SupportExceedsMargin(
            f"support radius {u.support_radius()} exceeds margin {M} "
            f"with relative clipped mass {lost / max(u.l2_norm(), 1e-300):.3e}"
        )
    return clipped


def left_mult_matrix(u, trunc, clip_tol=0.0):
    """Matrix of left multiplication by u on the basis {U^l : |l|_inf <= K}.

    Entry (k, l) is <u U^l, U^k> = u_{k-l} chi(k-l, l); basis order is
    lexicographic on (k_1, ..., k_n).  Columns with |l|_inf <= K - margin are
    exact; spillover columns near the edge lose the targets that fall outside
    the box.
    """
    u = _clip_to_margin(u, trunc, clip_tol)
    theta = u.theta
    n = theta.n
    K = trunc.K
    N = box_size(K, n)
    coords = box_coords(K, n)
    strides = _strides(K, n)
    src_idx_all = np.arange(N)
    L = np.zeros((N, N), dtype=complex)
    for m, c in u.coeffs.items():
        m_arr = np.asarray(m, dtype=np.int64)
        target = coords + m_arr
        valid = np.all(np.abs(target) <= K, axis=1)
        tgt = (target[valid] + K) @ strides
        phases = theta.pair_phases(m, coords[valid])
        L[tgt, src_idx_all[valid]] += c * phases
    return L


def matrix_to_element(column, trunc, theta, prune_tol=0.0):
    """Read a basis-coefficient vector back into an element on the inner window."""
    K = trunc.K
    coords = box_coords(K, theta.n)
    r = trunc.inner_radius
    keep = np.all(np.abs(coords) <= r, axis=1)
    cut = prune_tol * max(np.max(np.abs(column)), 1e-300)
    out = {}
    for k, c in zip(coords[keep], column[keep]):
        if abs(c) > cut:
            out[tuple(int(x) for x in k)] = complex(c)
    return NCElement(theta, out)


def active_axes(u):
    """Axes along which the support of u actually extends."""
    axes = set()
    for k in u.coeffs:
        for i, ki in enumerate(k):
            if ki:
                axes.add(i)
    return sorted(axes)


def restrict_axes(u, axes):
    """View u as an element of the twisted algebra of a coordinate sublattice.

    Valid only when the support lies on that sublattice.  The left-regular
    matrix of such an element is block-diagonal over the transverse modes and
    its U^0 block is exactly the sublattice matrix, so truncated functional
    calculus and inversion can be carried out there and embedded back.
    """
    axes = list(axes)
    sub_theta = ThetaMatrix(u.theta.entries[np.ix_(axes, axes)])
    out = {}
    for k, c in u.coeffs.items():
        if any(ki for i, ki in enumerate(k) if i not in axes):
            raise ValueError("support leaves the requested sublattice")
        out[tuple(k[i] for i in axes)] = c
    return NCElement(sub_theta, out)


def embed_axes(u_sub, axes, theta):
    """Inverse of restrict_axes: pad sublattice modes with zeros."""
    axes = list(axes)
    out = {}
    for k, c in u_sub.coeffs.items():
        full = [0] * theta.n
        for i, ki in zip(axes, k):
            full[i] = ki
        out[tuple(full)] = c
    return NCElement(theta, out)


def element_to_vector(u, radius):
    """Coefficient vector of u over the box basis of the given radius."""
    vec = np.zeros(box_size(radius, u.theta.n), dtype=complex)
    for k, c in u.coeffs.items():
        if max(map(abs, k)) <= radius:
            vec[box_index(k, radius)] = c
    return vec


def vector_to_element(vec, radius, theta, prune_tol=0.0):
    """Element with the given coefficients over the box basis."""
    coords = box_coords(radius, theta.n)
    cut = prune_tol * max(np.max(np.abs(vec)), 1e-300) if len(vec) else 0.0
    out = {}
    for k, c in zip(coords, vec):
        if abs(c) > cut:
            out[tuple(int(x) for x in k)] = complex(c)
    return NCElement(theta, out)


def _is_hermitian(L, tol=1e-10):
    scale = max(np.max(np.abs(L)), 1e-300)
    return np.max(np.abs(L - L.conj().T)) <= tol * scale


def _is_normal(L, tol=1e-10):
    scale = max(np.max(np.abs(L)), 1e-300) ** 2
    return np.max(np.abs(L @ L.conj().T - L.conj().T @ L)) <= tol * scale


def funcalc(f, u, trunc, *, gap=1e-8, require=None, clip_tol=1e-12, prune_tol=1e-14):
    """Holomorphic functional calculus at truncation.

    Applies the scalar function f to the truncated left-multiplication matrix
    of u and reads the coefficients of f(u) off the image of the U^0 basis
    vector, restricted to the inner window.  `require` guards the spectrum:
    "positive" demands min Re(eigenvalue) > gap (log/sqrt), "nonzero" demands
    min |eigenvalue| > gap (inversion-like f).

    Only defined at truncation; control the error empirically with
    `convergence_by_doubling`.

    Elements supported on a coordinate sublattice are reduced to it first
    (the truncated matrix is block-diagonal over transverse modes, and the
    U^0 column lives in the sublattice block).
    """
    theta = u.theta
    axes = active_axes(u)
    if not axes:
        c = complex(u.coeffs.get((0,) * theta.n, 0j))
        _check_gap(np.array([c]), require, gap)
        return NCElement(theta, {(0,) * theta.n: f(c)})
    if len(axes) < theta.n:
        sub = funcalc(
            f, restrict_axes(u, axes), trunc,
            gap=gap, require=require, clip_tol=clip_tol, prune_tol=prune_tol,
        )
        return embed_axes(sub, axes, theta)
    L = left_mult_matrix(u, trunc, clip_tol=clip_tol)
    e0 = np.zeros(L.shape[0], dtype=complex)
    e0[box_index((0,) * theta.n, trunc.K)] = 1.0
    if _is_hermitian(L):
        w, V = scipy.linalg.eigh(L)
        _check_gap(w, require, gap)
        col = V @ (np.asarray([f(x) for x in w]) * (V.conj().T @ e0))
    elif _is_normal(L):
        w, V = np.linalg.eig(L)
        _check_gap(w, require, gap)
        # eigenvectors of a normal matrix are orthogonal up to rounding
        col = V @ (np.asarray([f(x) for x in w]) * np.linalg.solve(V, e0))
    else:
        raise GapViolation("functional calculus requires a normal element at truncation")
    return matrix_to_element(col, trunc, theta, prune_tol=prune_tol)


def _check_gap(w, require, gap):
    if require is None:
        return
    if require == "positive":
        worst = float(np.min(np.real(w)))
        if worst <= gap:
            raise GapViolation(f"spectrum reaches {worst:.3e}, below gap {gap:.1e}")
    elif require == "nonzero":
        worst = float(np.min(np.abs(w)))
        if worst <= gap:
            raise GapViolation(f"|spectrum| reaches {worst:.3e}, below gap {gap:.1e}")
    else:
        raise ValueError(f"unknown spectral requirement {require!r}")


def element_exp(u, trunc, **kw):
    return funcalc(np.exp, u, trunc, **kw)


def element_log(u, trunc, **kw):
    kw.setdefault("require", "positive")
    return funcalc(np.log, u, trunc, **kw)


def element_sqrt(u, trunc, **kw):
    kw.setdefault("require", "positive")
    return funcalc(np.sqrt, u, trunc, **kw)


def _min_singular_estimate(lu_piv, size, iters=8, seed=7):
    """Inverse-power estimate of the smallest singular value via the LU factor."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = scipy.linalg.lu_solve(lu_piv, x, trans=2)  # A^H y = x
        z = scipy.linalg.lu_solve(lu_piv, y, trans=0)  # A z = y
        lam = np.linalg.norm(z)
        if lam == 0 or not np.isfinite(lam):
            return 0.0
        x = z / lam
    return 1.0 / math.sqrt(lam)


def inverse_element(u, trunc, *, gap=1e-8, clip_tol=1e-12, post_tol=1e-6, prune_tol=1e-14):
    """Truncated inverse: solves L_u x = e_0 and reads u^{-1} off the inner window.

    Raises SingularTruncation when the smallest singular value of the
    truncated matrix sits at or below `gap`, or when the residual
    ||u * result - 1||_l2 on the inner window exceeds `post_tol`.

    Sublattice-supported elements are inverted on their sublattice (see
    funcalc); the scalar case divides directly.
    """
    theta = u.theta
    axes = active_axes(u)
    if not axes:
        c = complex(u.coeffs.get((0,) * theta.n, 0j))
        if abs(c) <= gap:
            raise SingularTruncation(f"scalar element {c!r} is below the gap")
        return NCElement(theta, {(0,) * theta.n: 1.0 / c})
    if len(axes) < theta.n:
        sub = inverse_element(
            restrict_axes(u, axes), trunc,
            gap=gap, clip_tol=clip_tol, post_tol=post_tol, prune_tol=prune_tol,
        )
        return embed_axes(sub, axes, theta)
    clipped = _clip_to_margin(u, trunc, clip_tol)
    L = left_mult_matrix(clipped, trunc)
    try:
        lu_piv = scipy.linalg.lu_factor(L)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - scipy raises ValueError mostly
        raise SingularTruncation(str(exc)) from exc
    smin = _min_singular_estimate(lu_piv, L.shape[0])
    if smin <= gap:
        raise SingularTruncation(
            f"estimated smallest singular value {smin:.3e} is not above gap {gap:.1e}"
        )
    e0 = np.zeros(L.shape[0], dtype=complex)
    e0[box_index((0,) * theta.n, trunc.K)] = 1.0
    x = scipy.linalg.lu_solve(lu_piv, e0)
    result = matrix_to_element(x, trunc, theta, prune_tol=prune_tol)
    residual = (mul(clipped, result) - NCElement.one(theta)).restrict(trunc.inner_radius)
    if residual.l2_norm() > post_tol:
        raise SingularTruncation(
            f"inverse residual {residual.l2_norm():.3e} exceeds {post_tol:.1e} "
            f"on the inner window (K={trunc.K}, margin={trunc.margin})"
        )
    return result


def convergence_by_doubling(builder, trunc):
    """Empirical truncation-error gauge: rerun `builder` at doubled K.

    builder(trunc) must return an NCElement.  Returns (coarse, fine, diff)
    where diff is the l2 distance on the coarse inner window.
    """
    coarse = builder(trunc)
    fine = builder(trunc.doubled())
    diff = (fine.restrict(trunc.inner_radius) - coarse.restrict(trunc.inner_radius)).l2_norm()
    return coarse, fine, diff


def random_element(theta, radius, modes, rng, hermitian=False):
    """Seeded complex-Gaussian element supported on |k|_inf <= radius."""
    coords = box_coords(radius, theta.n)
    pick = rng.choice(len(coords), size=min(modes, len(coords)), replace=False)
    out = {}
    for i in pick:
        k = tuple(int(x) for x in coords[i])
        out[k] = complex(rng.standard_normal() + 1j * rng.standard_normal())
    u = NCElement(theta, out)
    if hermitian:
        u = 0.5 * (u + involution(u))
    return u
