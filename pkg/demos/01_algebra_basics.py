"""Tour of the twisted Fourier algebra.

Elements of the noncommutative torus are finitely supported Fourier series
u = sum_k u_k U^k over the integer lattice.  The generators satisfy
U_l U_j = exp(2 pi i theta_jl) U_j U_l, so multiplying two series twists the
ordinary convolution by a phase.  This script shows the phase at work, the
trace picking out the zero mode, the derivations, and the truncated matrix
picture that underlies everything else in the package.

Run:  python demos/01_algebra_basics.py
"""

import numpy as np

from nctorus.core import (
    NCElement,
    ThetaMatrix,
    TruncationSpec,
    delta,
    inner,
    involution,
    left_mult_matrix,
    monomial,
    mul,
    tau,
)

theta = ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])
print("deformation parameter theta_12 = 0.3\n")

# the defining relation: U_2 U_1 = exp(2 pi i theta_12) U_1 U_2
u1 = monomial((1, 0), 1.0, theta)
u2 = monomial((0, 1), 1.0, theta)
left = mul(u2, u1)
print("U_2 U_1 has single mode (1,1) with coefficient", left[(1, 1)])
print("expected phase exp(2 pi i * 0.3)           =", np.exp(2j * np.pi * 0.3))

# the same product at theta = 0 is plain convolution
flat = ThetaMatrix.zero(2)
print("\nat theta = 0 the same product has coefficient",
      mul(monomial((0, 1), 1.0, flat), monomial((1, 0), 1.0, flat))[(1, 1)])

# trace = zero-mode coefficient; it is tracial despite noncommutativity
a = NCElement(theta, {(0, 0): 0.5, (1, 0): 1.0, (0, -2): 0.25j})
b = NCElement(theta, {(0, 0): -1.0, (-1, 0): 2.0, (1, 1): 0.5})
print("\ntau(ab) =", tau(mul(a, b)))
print("tau(ba) =", tau(mul(b, a)), "  (equal: the trace is tracial)")
print("inner product two ways:", inner(a, b), "=", tau(mul(a, involution(b))))

# derivations multiply mode k by k_j; integration by parts holds exactly
print("\ntau(a delta_1 b) =", tau(mul(a, delta((1, 0), b))))
print("-tau(delta_1 a b) =", -tau(mul(delta((1, 0), a), b)))

# left-multiplication matrix over the box basis |k|_inf <= K
trunc = TruncationSpec(3, 1)
L = left_mult_matrix(monomial((1, 0), 1.0, theta), trunc)
print("\nleft multiplication by U_1 on the K=3 box is a shift matrix:")
print("nonzero entries:", int(np.count_nonzero(L)), "of", L.size)
print("every entry has unit magnitude:",
      bool(np.allclose(np.abs(L[np.abs(L) > 0]), 1.0)))
