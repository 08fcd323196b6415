"""Operators from symbols, and two routes to their composition.

An operator acts on Fourier series through its symbol: P u = sum u_k rho(k)
U^k.  Composing two such operators again gives an operator of this type, and
its symbol can be computed two ways:

  * exactly, mode by mode, by pushing a basis vector through both operators
    (`exact_sharp_at`), and
  * asymptotically, by the expansion sum (1/alpha!) d^alpha rho1 delta^alpha
    rho2 truncated to |alpha| < N.

The expansion error dies on lattice shells like R^(m1 + m2 - N); the script
measures those slopes against the exact route.

Run:  python demos/02_operators_and_composition.py
"""

import numpy as np

from nctorus.core import NCElement, ThetaMatrix, TruncationSpec, monomial
from nctorus.psido import (
    PsiDO,
    apply_op,
    build_matrix,
    exact_sharp_at,
    remainder_shell_norms,
    sharp_expansion,
)
from nctorus.symbols import constant_symbol, lambda_symbol, laplacian_symbol

theta = ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])

# the flat Laplacian multiplies mode k by |k|^2
P = PsiDO(laplacian_symbol(theta))
print("Delta U^(3,4) =", apply_op(P, monomial((3, 4), 1.0, theta))[(3, 4)],
      "* U^(3,4)   (|k|^2 = 25)")

# its truncated matrix is diagonal
M = build_matrix(P, TruncationSpec(4, 0)).entries
print("off-diagonal mass of the Delta matrix:",
      float(np.sum(np.abs(M - np.diag(np.diag(M))))))

# a noncommutative pair: rho1 = <xi>^-2, rho2 = U_1 + U_1^*
rho1 = lambda_symbol(-2.0, theta)
rho2 = constant_symbol(NCElement(theta, {(1, 0): 1.0, (-1, 0): 1.0}))

k = (6, 2)
exact = exact_sharp_at(rho1, rho2, k)
print(f"\nexact composed symbol at k={k}: modes {sorted(exact.coeffs)}")
for N in (1, 2, 3):
    approx = sharp_expansion(rho1, rho2, N, k)
    print(f"  expansion with |alpha| < {N}: error {(exact - approx).l2_norm():.3e}")

print("\nshell sweep of the expansion error (max over |k|_inf = R):")
for N in (1, 2, 3):
    pairs, fit = remainder_shell_norms(rho1, rho2, N, [4, 8, 16, 32])
    row = "  ".join(f"E({R})={e:.1e}" for R, e in pairs)
    print(f"  N={N}: {row}   slope {fit.exponent:.2f} "
          f"(theory: {-2 - N} and change)")
