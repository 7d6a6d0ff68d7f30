"""Two weights, one process: the eigenvalue-ratio limit three ways.

Take the Wiener problem with psi1(t) = (0.5+1.5t)^-4 and psi2 = 1.  Both
weights have unit normalization integral (the integral of sqrt(psi)), so
the eigenvalue ratio mu_k^(2)/mu_k^(1) tends to 1 and three quantities
agree in the limit:

  * the boundary-determinant ratio |theta_2 / theta_1|^(1/2)  (exact),
  * the extrapolated product of eigenvalue ratios               (spectral),
  * the small-ball probability ratio P_1(eps)/P_2(eps)          (as eps->0).

Here all three are printed, the last one along a shrinking eps grid.
"""

import numpy as np

from greenball import (BoundaryCondition, BVProblem, OperatorSpec, Weight,
                       comparison_convergence, eigenvalue_product,
                       eigenvalues_shooting, ratio_limit)

BC = BoundaryCondition
wiener = BVProblem(OperatorSpec(1, (0.0,)), (BC(0, 1, 0), BC(1, 0, 1)),
                   Weight.from_text("1"), normalized_system=True)
w1 = Weight.from_text("(0.5+1.5*t)^(-4)")
w2 = Weight.from_text("1")

limit = ratio_limit(wiener, w1, w2)
print(f"determinant route: ratio = {limit.ratio:.12f}  "
      f"(product {limit.product:.12f})")

K = 80
s1 = eigenvalues_shooting(wiener.with_weight(w1), K)
s2 = eigenvalues_shooting(wiener.with_weight(w2), K)
prod, err = eigenvalue_product(s1, s2)
print(f"eigenvalue route:  product = {prod:.6f} +- {err:.1e}  (K = {K})")

partial = np.cumprod(s1.mu / s2.mu)
print("\n  K     partial product")
for k in (1, 5, 20, 40, 80):
    print(f"  {k:>3} {partial[k - 1]:>18.10f}")

eps_grid = (0.20, 0.12, 0.08, 0.05)
table = comparison_convergence(wiener, w1, w2, eps_grid, K=K)
print("\n  eps        P1(eps)        P2(eps)      ratio")
for e, p1, p2, r in zip(table.eps, table.p1, table.p2, table.ratio):
    print(f"  {e:.2f} {p1:14.6e} {p2:14.6e} {r:10.5f}")
print(f"\nprobability ratios approach the determinant limit "
      f"{table.limit:.6f} as eps -> 0")
