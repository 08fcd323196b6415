"""Symbol classes: lattice-evaluable, polynomial, homogeneous, classical.

A symbol is a map xi -> NCElement with a declared order q and a declared
bound on the Fourier support of every value.  Three concrete families carry
exact xi-derivatives:

* PolynomialSymbol        sum_{|alpha|<=m} a_alpha xi^alpha  (formal rule)
* ScalarProfileSymbol     f(xi) * a with f in the radial calculus below
* homogeneous polynomial parts of either

Everything else falls back to order-2 central differences with one Richardson
step (step h0 * max(1, |xi|)).

The radial calculus handles finite sums  c * xi^beta * (w + |xi|^2)^(p/2)
with fixed w in {0, 1}; the family is closed under partial derivatives, which
covers |xi|^q and <xi>^s = (1 + |xi|^2)^(s/2) profiles exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .core import NCElement, NCError


class DerivativeCapExceeded(NCError):
    """Requested xi-derivative order is above the configured cap."""


class OriginEvaluation(NCError):
    """Classical/homogeneous symbol evaluated at xi = 0 without a convention."""


class SymbolOrder:
    """Symbol degree q in C with its real part cached."""

    __slots__ = ("q", "m")

    def __init__(self, q):
        self.q = complex(q)
        self.m = self.q.real

    def __repr__(self):
        return f"SymbolOrder({self.q})"

    def __eq__(self, other):
        other = other if isinstance(other, SymbolOrder) else SymbolOrder(other)
        return self.q == other.q


def _as_order(q):
    return q if isinstance(q, SymbolOrder) else SymbolOrder(q)


# ---------------------------------------------------------------------------
# exact scalar calculus
# ---------------------------------------------------------------------------


class RadialProfile:
    """Finite sum of terms coeff * xi^beta * (w + |xi|^2)^(p/2), fixed w."""

    def __init__(self, n, w, terms):
        self.n = n
        self.w = float(w)
        clean = {}
        for (beta, p), c in terms.items():
            c = complex(c)
            if c != 0:
                key = (tuple(int(b) for b in beta), complex(p))
                clean[key] = clean.get(key, 0j) + c
        self.terms = {k: c for k, c in clean.items() if c != 0}

    @classmethod
    def bracket_power(cls, s, n):
        """<xi>^s = (1 + |xi|^2)^(s/2)."""
        return cls(n, 1.0, {((0,) * n, s): 1.0})

    @classmethod
    def radial_power(cls, q, n):
        """|xi|^q, homogeneous of degree q (singular at 0 for Re q < 0)."""
        return cls(n, 0.0, {((0,) * n, q): 1.0})

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        r2 = self.w + float(xi @ xi)
        acc = 0j
        for (beta, p), c in self.terms.items():
            mono = 1.0
            for x, b in zip(xi, beta):
                if b:
                    mono *= x**b
            acc += c * mono * complex(r2) ** (p / 2.0)
        return acc

    def diff(self, j):
        """Exact partial derivative in direction j."""
        out = {}
        for (beta, p), c in self.terms.items():
            if beta[j] > 0:
                b2 = list(beta)
                b2[j] -= 1
                key = (tuple(b2), p)
                out[key] = out.get(key, 0j) + c * beta[j]
            if p != 0:
                b2 = list(beta)
                b2[j] += 1
                key = (tuple(b2), p - 2)
                out[key] = out.get(key, 0j) + c * p
        return RadialProfile(self.n, self.w, out)

    def diff_multi(self, alpha):
        prof = self
        for j, a in enumerate(alpha):
            for _ in range(a):
                prof = prof.diff(j)
        return prof

    def degree(self):
        """Homogeneity degree if w = 0 and all terms agree, else None."""
        if self.w != 0.0 or not self.terms:
            return None
        degs = {sum(beta) + p for (beta, p) in self.terms}
        return degs.pop() if len(degs) == 1 else None


# ---------------------------------------------------------------------------
# symbol hierarchy
# ---------------------------------------------------------------------------


class LatticeSymbol:
    """Base: evaluator xi -> NCElement with order and support bound.

    `support_radius` is declared, not inferred, so truncation margins can be
    validated before any matrix build.
    """

    def __init__(self, theta, order, support_radius):
        self.theta = theta
        self.order = _as_order(order)
        self.support_radius = int(support_radius)

    def at(self, xi):
        raise NotImplementedError

    def d(self, alpha):
        """Exact derivative symbol, or None when only FD is available."""
        return None


class CallableSymbol(LatticeSymbol):
    def __init__(self, theta, order, support_radius, evaluator, deriv=None):
        super().__init__(theta, order, support_radius)
        self._evaluator = evaluator
        self._deriv = deriv

    def at(self, xi):
        return self._evaluator(np.asarray(xi, dtype=float))

    def d(self, alpha):
        if self._deriv is None:
            return None
        return self._deriv(tuple(alpha))


class ScalarProfileSymbol(LatticeSymbol):
    """f(xi) * a for a scalar profile f in the radial calculus."""

    def __init__(self, theta, order, profile, element):
        super().__init__(theta, order, element.support_radius())
        self.profile = profile
        self.element = element

    def at(self, xi):
        return self.element.scale(self.profile(xi))

    def d(self, alpha):
        prof = self.profile.diff_multi(alpha)
        return ScalarProfileSymbol(
            self.theta, self.order.q - sum(alpha), prof, self.element
        )


class PolynomialSymbol(LatticeSymbol):
    """sum_{|alpha| <= m} a_alpha xi^alpha with a_alpha in the algebra."""

    def __init__(self, theta, coeffs):
        clean = {}
        degree = 0
        radius = 0
        for alpha, a in coeffs.items():
            key = tuple(int(x) for x in alpha)
            if any(x < 0 for x in key):
                raise ValueError("multi-orders must be nonnegative")
            if len(a) == 0:
                continue
            clean[key] = a
            degree = max(degree, sum(key))
            radius = max(radius, a.support_radius())
        super().__init__(theta, degree, radius)
        self.coeffs = clean
        self.degree = degree

    def at(self, xi):
        xi = np.asarray(xi, dtype=float)
        acc = NCElement.zero(self.theta)
        for alpha, a in self.coeffs.items():
            mono = 1.0
            for x, b in zip(xi, alpha):
                if b:
                    mono *= x**b
            if mono:
                acc = acc + a.scale(mono)
        return acc

    def d(self, alpha):
        alpha = tuple(alpha)
        out = {}
        for beta, a in self.coeffs.items():
            if any(b < al for b, al in zip(beta, alpha)):
                continue
            fall = 1
            for b, al in zip(beta, alpha):
                for i in range(al):
                    fall *= b - i
            if fall:
                out[tuple(b - al for b, al in zip(beta, alpha))] = a.scale(fall)
        return PolynomialSymbol(self.theta, out)

    def homogeneous_part(self, degree):
        return PolynomialSymbol(
            self.theta, {a: c for a, c in self.coeffs.items() if sum(a) == degree}
        )


class HomogeneousComponent(LatticeSymbol):
    """Map homogeneous of a fixed complex degree on xi != 0."""

    def __init__(self, theta, degree, support_radius, evaluator, deriv=None,
                 origin_value=None):
        super().__init__(theta, degree, support_radius)
        self.degree = complex(degree)
        self._evaluator = evaluator
        self._deriv = deriv
        self.origin_value = origin_value

    def at(self, xi):
        xi = np.asarray(xi, dtype=float)
        if not np.any(xi):
            if self.origin_value is None:
                raise OriginEvaluation("homogeneous component evaluated at xi = 0")
            return self.origin_value
        return self._evaluator(xi)

    def d(self, alpha):
        if self._deriv is None:
            return None
        return self._deriv(tuple(alpha))

    @classmethod
    def from_profile(cls, theta, profile, element):
        deg = profile.degree()
        if deg is None:
            raise ValueError("profile is not homogeneous")

        def deriv(alpha):
            return cls.from_profile(theta, profile.diff_multi(alpha), element)

        return cls(
            theta,
            deg,
            element.support_radius(),
            lambda xi: element.scale(profile(xi)),
            deriv=deriv,
        )

    @classmethod
    def from_polynomial_part(cls, poly, degree):
        part = poly.homogeneous_part(degree)

        def deriv(alpha):
            return cls.from_polynomial_part(part.d(alpha), degree - sum(alpha))

        return cls(
            poly.theta,
            degree,
            part.support_radius,
            part.at,
            deriv=deriv,
            origin_value=part.at(np.zeros(poly.theta.n)) if degree == 0 else None,
        )

    @classmethod
    def zero(cls, theta, degree):
        z = NCElement.zero(theta)
        return cls(theta, degree, 0, lambda xi: z,
                   deriv=lambda alpha: cls.zero(theta, complex(degree) - sum(alpha)),
                   origin_value=z)


class ClassicalSymbol:
    """Finite jet of homogeneous components rho_{q-j}, j = 0 .. J-1.

    origin_convention: "excise" assigns the zero element at xi = 0 (the
    default); None makes evaluation at the origin an error.
    """

    def __init__(self, theta, order, components, origin_convention="excise"):
        self.theta = theta
        self.order = _as_order(order)
        self.components = list(components)
        self.origin_convention = origin_convention
        for j, comp in enumerate(self.components):
            want = self.order.q - j
            if abs(complex(comp.degree) - want) > 1e-12:
                raise ValueError(f"component {j} has degree {comp.degree}, want {want}")
        self.support_radius = max(
            (c.support_radius for c in self.components), default=0
        )

    def __len__(self):
        return len(self.components)

    def at(self, xi, jet=None):
        """Sum of the first `jet` components (all by default) at xi."""
        xi = np.asarray(xi, dtype=float)
        use = self.components if jet is None else self.components[:jet]
        if not np.any(xi):
            if self.origin_convention == "excise":
                return NCElement.zero(self.theta)
            raise OriginEvaluation("classical symbol evaluated at xi = 0")
        acc = NCElement.zero(self.theta)
        for comp in use:
            acc = acc + comp.at(xi)
        return acc

    def partial_sum(self, jet):
        """First `jet` components as one lattice symbol."""
        sym = CallableSymbol(
            self.theta,
            self.order,
            max((c.support_radius for c in self.components[:jet]), default=0),
            lambda xi: self.at(xi, jet=jet),
        )
        sym.excised_radius = 0.0 if self.origin_convention == "excise" else None
        return sym


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def sym_eval(sym, xi):
    """Evaluate a symbol at a frequency point."""
    return sym.at(xi)


def _fd_first(evaluate, j, xi, h0):
    """Order-2 central difference with one Richardson step."""
    xi = np.asarray(xi, dtype=float)
    h = h0 * max(1.0, float(np.linalg.norm(xi)))
    step = np.zeros_like(xi)
    step[j] = 1.0

    def central(hh):
        plus = evaluate(xi + hh * step)
        minus = evaluate(xi - hh * step)
        return (plus - minus).scale(1.0 / (2.0 * hh))

    d1 = central(h)
    d2 = central(h / 2.0)
    return d2.scale(4.0 / 3.0) - d1.scale(1.0 / 3.0)


def xi_derivative(sym, alpha, xi, *, h0=1e-3, max_order=4):
    """d^alpha/dxi^alpha of a symbol at xi.

    Exact when the symbol provides analytic derivatives (polynomials, radial
    profiles, homogeneous parts); otherwise nested Richardson-extrapolated
    central differences.
    """
    alpha = tuple(int(a) for a in alpha)
    total = sum(alpha)
    if total > max_order:
        raise DerivativeCapExceeded(f"|alpha| = {total} exceeds cap {max_order}")
    if total == 0:
        return sym.at(xi)
    exact = sym.d(alpha)
    if exact is not None:
        return exact.at(xi)

    def evaluate_deriv(order, point):
        rest = sum(order)
        if rest == 0:
            return sym.at(point)
        j = next(i for i, a in enumerate(order) if a > 0)
        reduced = tuple(a - (1 if i == j else 0) for i, a in enumerate(order))
        return _fd_first(lambda p: evaluate_deriv(reduced, p), j, point, h0)

    return evaluate_deriv(alpha, np.asarray(xi, dtype=float))


def homogeneity_check(comp, samples, lambdas):
    """Max relative deviation of rho(lam xi) from lam^q rho(xi) over samples."""
    q = complex(comp.degree)
    worst = 0.0
    for xi in samples:
        base = comp.at(xi)
        scale = base.l2_norm()
        if scale == 0:
            continue
        for lam in lambdas:
            lam = float(lam)
            scaled = comp.at(lam * np.asarray(xi, dtype=float))
            factor = np.exp(q * math.log(lam))
            dev = (scaled - base.scale(factor)).l2_norm() / scale
            worst = max(worst, dev)
    return worst


class ExcisedSymbol(CallableSymbol):
    """Component with lattice points near the origin zeroed out.

    `excised_radius` records the modification so comparisons can skip the
    excised points; operator matrices are unaffected elsewhere because only
    lattice values enter the operator.
    """

    def __init__(self, base, cutoff_radius):
        self.base = base
        self.excised_radius = float(cutoff_radius)
        zero = NCElement.zero(base.theta)

        def evaluator(xi):
            if float(np.linalg.norm(xi)) <= self.excised_radius:
                return zero
            return base.at(xi)

        super().__init__(base.theta, base.order, base.support_radius, evaluator)

    def d(self, alpha):
        inner = self.base.d(alpha)
        return None if inner is None else ExcisedSymbol(inner, self.excised_radius)


def excise_origin(comp, cutoff_radius=0.0):
    """Zero a symbol on lattice points with |xi| <= cutoff_radius (default: 0 only)."""
    return ExcisedSymbol(comp, cutoff_radius)


# ---------------------------------------------------------------------------
# stock symbols
# ---------------------------------------------------------------------------


def constant_symbol(a, order=0):
    """Symbol constant in xi with value a."""
    return PolynomialSymbol(a.theta, {(0,) * a.theta.n: a})


def one_symbol(theta):
    return constant_symbol(NCElement.one(theta))


def laplacian_symbol(theta):
    """|xi|^2 = xi_1^2 + ... + xi_n^2 (flat Laplacian)."""
    n = theta.n
    one = NCElement.one(theta)
    coeffs = {}
    for j in range(n):
        alpha = tuple(2 if i == j else 0 for i in range(n))
        coeffs[alpha] = one
    return PolynomialSymbol(theta, coeffs)


def lambda_symbol(s, theta):
    """<xi>^s * 1, the order-s Bessel-potential symbol."""
    prof = RadialProfile.bracket_power(complex(s), theta.n)
    return ScalarProfileSymbol(theta, s, prof, NCElement.one(theta))


def _binom_half(s, j):
    """Generalized binomial coefficient C(s/2, j)."""
    c = 1.0 + 0j
    for i in range(j):
        c *= (s / 2.0 - i) / (i + 1)
    return c


def lambda_jet(s, J, theta):
    """Classical jet of <xi>^s from the binomial expansion.

    The degree-(s-j) component is C(s/2, j/2) |xi|^(s-j) for even j and zero
    for odd j.
    """
    s = complex(s)
    comps = []
    for j in range(J):
        if j % 2 == 1:
            comps.append(HomogeneousComponent.zero(theta, s - j))
            continue
        c = _binom_half(s, j // 2)
        prof = RadialProfile(theta.n, 0.0, {((0,) * theta.n, s - j): c})
        comps.append(HomogeneousComponent.from_profile(theta, prof, NCElement.one(theta)))
    return ClassicalSymbol(theta, s, comps)


def classical_from_polynomial(poly):
    """Classical jet of a polynomial symbol: its homogeneous degree parts."""
    m = poly.degree
    comps = [
        HomogeneousComponent.from_polynomial_part(poly, m - j) for j in range(m + 1)
    ]
    return ClassicalSymbol(poly.theta, m, comps)


def scaled_symbol(sym, factor):
    """factor * sym as a lattice symbol (derivatives pass through)."""

    def deriv(alpha):
        inner = sym.d(alpha)
        return None if inner is None else scaled_symbol(inner, factor)

    return CallableSymbol(
        sym.theta,
        sym.order,
        sym.support_radius,
        lambda xi: sym.at(xi).scale(factor),
        deriv=deriv,
    )
