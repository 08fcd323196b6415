"""Spectral counting and singular-value decay at truncation.

Truncating to the modes |k|_inf <= K turns operators into matrices whose
low eigenvalues approximate the true spectrum.  For the flat Laplacian the
eigenvalues are exactly the lattice values |k|^2, so the counting function
follows the area law N(lambda) ~ pi lambda in two dimensions, and the
singular values of the order -2 Bessel potential decay like k^{-1}.  Sobolev
norms, their duality, and eigenvector smoothness diagnostics round out the
picture.

Run:  python demos/04_spectra_weyl_schatten.py
"""

import numpy as np

from nctorus.core import ThetaMatrix, TruncationSpec, random_element
from nctorus.psido import PsiDO
from nctorus.spectral import (
    duality_gap,
    lambda_apply,
    lattice_ball_count,
    schatten_slope,
    smoothness_decay,
    sobolev_norm,
    spectrum,
    weyl_ratio,
)
from nctorus.symbols import lambda_symbol, laplacian_symbol

theta = ThetaMatrix([[0.0, 0.3], [-0.3, 0.0]])

spec = spectrum(PsiDO(laplacian_symbol(theta)), TruncationSpec(25, 0),
                hermitian=True)
print("flat Laplacian, K = 25: lowest eigenvalues",
      np.real(spec.values[:6]).tolist())
for lam in (100.0, 200.0, 400.0):
    rep = weyl_ratio(spec, 2, lam)
    print(f"  N({lam:.0f}) = {rep.count}  (lattice oracle "
          f"{lattice_ball_count(2, lam)}),  N/(pi lambda) = {rep.ratio:.5f}")

res, fit = schatten_slope(PsiDO(lambda_symbol(-2.0, theta)),
                          TruncationSpec(30, 0), (20, 200))
print(f"\nsingular values of Lambda^-2: fitted slope {fit.exponent:.4f} "
      f"over k in [20, 200]  (order/dimension = -1)")

# Sobolev machinery: the Bessel scaling is an exact isometry
u = random_element(theta, 4, 9, np.random.default_rng(17))
s = 1.5
print(f"\n||Lambda^{s} u||_0 = {lambda_apply(s, u).l2_norm():.12f}")
print(f"||u||_{s}          = {sobolev_norm(u, s):.12f}")

rep = duality_gap(u, s, 500, seed=17)
print(f"\nduality: ||u||_-{s} = {rep.exact_norm:.10f}, maximizer attains "
      f"{rep.achieved:.10f}, Hoelder violations {rep.holder_violations}/500")

# rapidly decaying coefficients show up as steep shell slopes
from nctorus.core import NCElement

v = NCElement(theta, {(k1, k2): (1.0 + k1 * k1 + k2 * k2) ** -4.0
                      for k1 in range(-20, 21) for k2 in range(-20, 21)})
print("\nshell-decay slope of (1+|k|^2)^-4 coefficients:",
      f"{smoothness_decay(v, fit_range=(4, 20)).exponent:.2f}  (ideal -8)")
