"""Spectra of the catalog processes, two independent routes.

For each family we compute the first eigenvalues mu_k of the weighted
covariance operator twice: by shooting on the boundary value problem
(counting roots of the characteristic determinant) and by Nystrom
discretization of the covariance kernel.  Where a closed form exists we
print it next to the numbers.
"""

import numpy as np

from greenball import (BoundaryCondition, BVProblem, OperatorSpec, Weight,
                       base_kernel, eigenvalues_shooting, nystrom_eigenvalues)

BC = BoundaryCondition
UNIT = Weight.from_text("1")
K = 6

catalog = {
    # family -> (operator, boundary conditions, weight, closed form or None)
    "wiener": (OperatorSpec(1, (0.0,)), (BC(0, 1, 0), BC(1, 0, 1)), UNIT,
               lambda k: ((k - 0.5) * np.pi) ** 2),
    "bridge": (OperatorSpec(1, (0.0,)), (BC(0, 1, 0), BC(0, 0, 1)), UNIT,
               lambda k: (k * np.pi) ** 2),
    # e^{-|t-s|} inverts to (-D^2 + 1)/2 with Robin conditions
    "ou": (OperatorSpec(1, (1.0,)),
           (BC(1, 1, 0, alpha_lower=(-1.0,)), BC(1, 0, 1, gamma_lower=(1.0,))),
           Weight.from_text("2"), None),
    "slepian": (OperatorSpec(1, (0.0,)),
                (BC(1, 1, 1), BC(1, -1, 0, alpha_lower=(1.0,),
                                 gamma_lower=(1.0,))),
                Weight.from_text("2"), None),
}

for fam, (op, bcs, w, closed) in catalog.items():
    problem = BVProblem(op, bcs, w, normalized_system=True)
    mu_shoot = eigenvalues_shooting(problem, K).mu
    mu_nys = nystrom_eigenvalues(base_kernel(fam), None, K, grid=512).mu
    print(f"\n{fam}")
    print(f"  {'k':>2} {'shooting':>18} {'nystrom':>18} "
          f"{'closed form':>18}")
    for k in range(K):
        ref = f"{closed(k + 1):18.10f}" if closed else f"{'-':>18}"
        print(f"  {k + 1:>2} {mu_shoot[k]:18.10f} {mu_nys[k]:18.10f} {ref}")
    gap = np.max(np.abs(mu_shoot - mu_nys) / mu_shoot)
    print(f"  cross-route agreement: {gap:.2e}")

# a weight changes every eigenvalue but the two routes still agree
w = Weight.from_text("(0.5+1.5*t)^(-4)")
problem = BVProblem(OperatorSpec(1, (0.0,)), (BC(0, 1, 0), BC(1, 0, 1)), w,
                    normalized_system=True)
mu_shoot = eigenvalues_shooting(problem, K).mu
mu_nys = nystrom_eigenvalues(base_kernel("wiener"), w, K, grid=512).mu
print("\nwiener with psi(t) = (0.5+1.5t)^-4")
for k in range(K):
    print(f"  {k + 1:>2} {mu_shoot[k]:18.10f} {mu_nys[k]:18.10f}")
print(f"  cross-route agreement: "
      f"{np.max(np.abs(mu_shoot - mu_nys) / mu_shoot):.2e}")
