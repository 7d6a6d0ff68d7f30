"""Closed small-deviation forms across the process catalog.

Every supported process has an asymptotic display

    P(||X||_psi <= eps)  ~  c * C * E^gamma * exp(-D / (2 E^2)),

where E is one of three rescalings of eps (plain, integration-adjusted, or
smoothness-adjusted), gamma and D depend on the family and the transform
chain, and c is an optional endpoint correction.  This demo prints the
form parameters for a spread of processes and evaluates each on a small
eps grid.
"""

from greenball import ProcessSpec, evaluate_asymptotic, process_asymptotic

specs = [
    ("wiener", ProcessSpec("wiener")),
    ("bridge", ProcessSpec("bridge")),
    ("ou", ProcessSpec("ou")),
    ("slepian", ProcessSpec("slepian")),
    ("bogolyubov omega=1", ProcessSpec("bogolyubov", omega=1.0)),
    ("matern n=2", ProcessSpec("matern", n=2)),
    ("ciw level=1", ProcessSpec("ciw", level=1)),
    ("wiener, integrated (0-limit)", ProcessSpec("wiener", m=1, betas=(0,))),
    ("wiener, integrated (1-limit)", ProcessSpec("wiener", m=1, betas=(1,))),
    ("bridge, integrated + centered",
     ProcessSpec("bridge", m=1, betas=(0,), centerings=1)),
    ("bridge, centered then centered integral",
     ProcessSpec("bridge", centerings=1, center_final=True)),
]

header = f"{'process':<38}{'order':>6}{'gamma':>8}{'D':>10}{'transform':>14}"
print(header)
print("-" * len(header))
for name, spec in specs:
    f = process_asymptotic(spec)
    print(f"{name:<38}{f.order:>6}{f.gamma:>8.1f}{f.D:>10.4f}"
          f"{f.transform:>14}")

print("\nvalues on an eps grid")
eps_grid = (0.3, 0.2, 0.1)
print(f"{'process':<38}" + "".join(f"{e:>12.2f}" for e in eps_grid))
for name, spec in specs:
    f = process_asymptotic(spec)
    vals = "".join(f"{evaluate_asymptotic(f, e):>12.2e}" for e in eps_grid)
    print(f"{name:<38}{vals}")

# higher-order processes have much heavier small-ball mass: compare the
# exponential scales at eps = 0.1
print("\nexp decay constants D (larger order => slower decay in 1/eps)")
for name, spec in (("wiener (order 1)", ProcessSpec("wiener")),
                   ("matern n=3 (order 3)", ProcessSpec("matern", n=3))):
    f = process_asymptotic(spec)
    print(f"  {name:<24} D = {f.D:.4f}, transform exponent "
          f"1/(2n-1) = 1/{2 * f.order - 1}")
