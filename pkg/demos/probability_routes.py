"""One distribution, three evaluation routes.

The squared weighted L2 norm of a Green Gaussian process is a weighted sum
of independent chi-square variables, sum_j lam_j xi_j^2.  We evaluate
P(||X|| <= eps) for the Brownian bridge by

  1. saddle-point inversion of the Laplace transform on the truncated
     spectrum plus a growth-model tail,
  2. plain Monte Carlo over the truncated spectrum,
  3. the closed asymptotic form,

and watch the three columns line up as eps shrinks (Monte Carlo dies
first: at eps = 0.1 the probability is ~1e-6 and a 10^6-sample run sees
a handful of hits at best).
"""

import numpy as np

from greenball import (ProcessSpec, WeylTailModel, evaluate_asymptotic,
                       monte_carlo_probability, process_asymptotic,
                       smallball_probability_exact)

K = 300
k = np.arange(1, K + 1)
lam = 1.0 / (k * np.pi) ** 2          # bridge spectrum, exact
tail = WeylTailModel.calibrated(1, 1.0, K, lam[-1])
form = process_asymptotic(ProcessSpec("bridge"))

print(f"bridge norm distribution, K = {K} eigenvalues + tail model")
print(f"{'eps':>6} {'saddlepoint':>14} {'monte carlo':>14} {'mc err':>10} "
      f"{'asymptotic':>14}")
for eps in (0.5, 0.35, 0.25, 0.18, 0.13, 0.10):
    sad = smallball_probability_exact(lam, eps, tail=tail)
    mc = monte_carlo_probability(lam, eps, 10 ** 6, seed=20260825)
    asym = evaluate_asymptotic(form, eps)
    print(f"{eps:>6.2f} {sad.p:>14.6e} {mc.p:>14.6e} {mc.err:>10.1e} "
          f"{asym:>14.6e}")

# deep in the tail only the saddle point and the closed form survive;
# their ratio tends to 1
print("\ndeep tail (log scale)")
print(f"{'eps':>6} {'log p (saddle)':>16} {'log p (asympt)':>16} "
      f"{'ratio':>8}")
for eps in (0.06, 0.04, 0.03):
    sad = smallball_probability_exact(lam, eps, tail=tail)
    la = np.log(evaluate_asymptotic(form, eps))
    print(f"{eps:>6.2f} {sad.log_p:>16.3f} {la:>16.3f} "
          f"{np.exp(sad.log_p - la):>8.4f}")
