"""Covariance calculus on the quadrature grid.

Base covariances for the catalog processes, and the transforms -- iterated
integration, centering, conditioning, weighting -- that realize derived
processes as dense kernel matrices for the Nystrom eigenvalue route and for
Monte Carlo sampling of the squared weighted norm.

A kernel is stored sampled on a shared composite Gauss-Legendre grid (1024
nodes by default).  Besides the matrix itself each kernel carries the smooth
coefficient of its |t-s| component (``odd``), so quadrature across the
diagonal can treat the derivative jump exactly, and a ``recipe`` callable
that re-samples the same kernel on another grid (the Nystrom error estimate
re-solves on a doubled grid).

Transforms compose by closure: integrating or centering a kernel produces a
new recipe that re-runs the whole chain from the base formula on whatever
grid is requested.  Weighting is terminal -- every other transform refuses a
weighted kernel, which enforces the "weight applied last" rule at the API
level.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from math import comb, factorial

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import pinvh

from .errors import SingularConditioning, UnsupportedFamily
from .expr import compile_callable, parse_expression
from .quadrature import Grid, integrate_full, integrate_rows

DEFAULT_GRID = Grid.composite(1024, 8)

#: condition-number ceiling for the conditioning Gram matrix
CONDITION_LIMIT = 1e12


def _as_grid(grid):
    if grid is None:
        return DEFAULT_GRID
    if isinstance(grid, int):
        return Grid.composite(grid, 8)
    return grid


@dataclass(frozen=True, eq=False)
class Kernel:
    """Covariance G(t, s) of a mean-zero process, sampled on a grid.

    values[i, j] = G(x_i, x_j).  ``odd`` is the smooth symmetric coefficient
    O in the decomposition G = S + O(t, s)|t - s| (None when G is C^1 across
    the diagonal); the quadrature operators use it to integrate the kink with
    exact panel moments.  ``half_order`` is the n for which the associated
    differential operator has order 2n (it sets the Weyl tail rate of the
    spectrum).  ``recipe`` maps a Grid to (values, odd) for re-sampling.
    """

    grid: Grid
    values: np.ndarray
    odd: np.ndarray | None
    label: str
    half_order: int
    weighted: bool = False
    recipe: object = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        scale = float(np.abs(v).max()) or 1.0
        if float(np.abs(v - v.T).max()) > 1e-14 * scale:
            raise ValueError("kernel matrix is not symmetric to 1e-14")

    def evaluate_on(self, grid):
        """(values, odd) of this kernel sampled on `grid`."""
        if grid is self.grid:
            return self.values, self.odd
        if self.recipe is None:
            raise ValueError(
                "kernel carries no re-sampling recipe; it can only be "
                "evaluated on its own grid")
        return self.recipe(grid)

    def __repr__(self):  # the matrices are big; keep repr readable
        return (f"Kernel({self.label!r}, n={self.half_order}, "
                f"grid={self.grid.n}, weighted={self.weighted})")


# ---------------------------------------------------------------------------
# base families


def _radial_split(g, f, diag_slope):
    """Sample f(|t-s|) together with its |t-s| kink coefficient.

    f must accept signed arguments (analytic extension of the radial
    profile); the coefficient is (f(u) - f(-u)) / (2u) with the supplied
    limit on the diagonal.
    """
    u = g.x[:, None] - g.x[None, :]
    values = f(np.abs(u))
    den = np.where(u == 0.0, 1.0, 2.0 * u)
    odd = np.where(u == 0.0, diag_slope, (f(u) - f(-u)) / den)
    return values, odd


def _wiener_values(g):
    t = g.x
    return np.minimum.outer(t, t), np.full((g.n, g.n), -0.5)


def _bridge_values(g):
    t = g.x
    return np.minimum.outer(t, t) - np.outer(t, t), np.full((g.n, g.n), -0.5)


def _ou_values(g):
    u = g.x[:, None] - g.x[None, :]
    values = np.exp(-np.abs(u))
    den = np.where(u == 0.0, 1.0, u)
    odd = np.where(u == 0.0, -1.0, -np.sinh(u) / den)
    return values, odd


def _slepian_values(g):
    u = np.abs(g.x[:, None] - g.x[None, :])
    return 1.0 - u, np.full((g.n, g.n), -1.0)


def _matern_values(g, n):
    # ((n-1)!/(2n-2)!) e^{-r} sum_k (n+k-1)!/(k!(n-k-1)!) (2r)^{n-k-1}
    c = factorial(n - 1) / factorial(2 * n - 2)
    coef = np.zeros(n)
    for k in range(n):
        coef[n - k - 1] = (factorial(n + k - 1)
                           / (factorial(k) * factorial(n - k - 1))
                           * 2.0 ** (n - k - 1))

    def f(r):
        return c * np.exp(-r) * npoly.polyval(r, coef)

    slope = c * ((coef[1] if n > 1 else 0.0) - coef[0])
    return _radial_split(g, f, slope)


def _bogolyubov_values(g, omega, covariance):
    if covariance is None:
        raise UnsupportedFamily(
            "no covariance formula configured for the Bogolyubov family")
    if covariance == "default":
        # standard literature form; an external input, not derived here
        s = 2.0 * omega * np.sinh(omega / 2.0)

        def f(r):
            return np.cosh(omega * (r - 0.5)) / s

        return _radial_split(g, f, -0.5)
    if isinstance(covariance, str):
        fn = compile_callable(parse_expression(covariance))
    elif callable(covariance):
        fn = covariance
    else:
        raise UnsupportedFamily(
            "Bogolyubov covariance must be 'default', an expression in t "
            "(the signed lag), or a callable")
    h = 1e-6
    slope = (float(fn(h)) - float(fn(-h))) / (2.0 * h)
    return _radial_split(g, lambda r: np.asarray(fn(r), dtype=float), slope)


def _canonical_family(name):
    key = "".join(ch for ch in str(name).lower() if ch.isalnum())
    table = {
        "wiener": "wiener", "brownian": "wiener", "brownianmotion": "wiener",
        "bridge": "bridge", "brownianbridge": "bridge",
        "ou": "ou", "ornsteinuhlenbeck": "ou",
        "slepian": "slepian",
        "matern": "matern",
        "bogolyubov": "bogolyubov",
        "ciw": "ciw", "conditionalintegratedwiener": "ciw",
    }
    if key not in table:
        raise UnsupportedFamily(f"unknown process family {name!r}")
    return table[key]


def base_kernel(family, params=None, grid=None):
    """Covariance kernel of a base catalog process.

    family: Wiener | Bridge | OrnsteinUhlenbeck | Slepian | Matern |
    Bogolyubov (case/punctuation-insensitive).  params supplies the family
    parameters: {"n": order} for Matern, {"omega": w, "covariance": ...} for
    Bogolyubov.  The Bogolyubov covariance defaults to the literature form
    cosh(omega(|t-s|-1/2)) / (2 omega sinh(omega/2)), an external input;
    pass covariance=None to disable it (raises UnsupportedFamily) or an
    expression/callable in the signed lag to replace it.
    """
    fam = _canonical_family(family)
    params = dict(params or {})
    g = _as_grid(grid)
    if fam == "ciw":
        raise UnsupportedFamily(
            "the conditional integrated Wiener process is a derived kernel; "
            "use build_process")
    if fam == "matern":
        n = int(params.pop("n"))
        if n < 1:
            raise ValueError("Matern order n must be >= 1")
        build = lambda gg: _matern_values(gg, n)  # noqa: E731
        label, half = f"matern({n})", n
    elif fam == "bogolyubov":
        omega = float(params.pop("omega"))
        if not omega > 0:
            raise ValueError("Bogolyubov omega must be positive")
        cov = params.pop("covariance", "default")
        build = lambda gg: _bogolyubov_values(gg, omega, cov)  # noqa: E731
        label, half = f"bogolyubov({omega:g})", 1
    else:
        build = {"wiener": _wiener_values, "bridge": _bridge_values,
                 "ou": _ou_values, "slepian": _slepian_values}[fam]
        label, half = {"ou": "ornstein-uhlenbeck"}.get(fam, fam), 1
    if params:
        raise ValueError(f"unused parameters for family {fam}: "
                         f"{sorted(params)}")
    values, odd = build(g)
    return Kernel(grid=g, values=values, odd=odd, label=label,
                  half_order=half, recipe=build)


# ---------------------------------------------------------------------------
# transforms


def _require_unweighted(k, op):
    if k.weighted:
        raise ValueError(
            f"{op} cannot follow apply_weight; the weight is applied last")


def integrate_kernel(k, beta):
    """Kernel of the integrated process t -> (-1)^beta int_beta^t X.

    The sign cancels in the covariance, so the result is
    K'(t, s) = int_beta^t int_beta^s K(u, v) dv du for beta = 0 or 1.
    Iterated integrals are C^1 across the diagonal, hence odd = None.
    """
    if beta not in (0, 1):
        raise ValueError("beta must be 0 or 1")
    _require_unweighted(k, "integrate_kernel")

    def build(g):
        v, o = k.evaluate_on(g)
        A = integrate_rows(g, v, o, lower=beta)
        B = integrate_rows(g, A.T, None, lower=beta).T
        return 0.5 * (B + B.T), None

    values, odd = build(k.grid)
    return Kernel(grid=k.grid, values=values, odd=odd,
                  label=f"int[{beta}]({k.label})",
                  half_order=k.half_order + 1, recipe=build)


def center_kernel(k):
    """Kernel of the centered process X - int_0^1 X.

    K'(t,s) = K(t,s) - r(t) - r(s) + c with r(t) = int K(t,u) du and
    c = int int K; the result annihilates constants, and the |t-s| kink
    coefficient is untouched (only smooth rank-one terms are subtracted).
    """
    _require_unweighted(k, "center_kernel")

    def build(g):
        v, o = k.evaluate_on(g)
        r = integrate_full(g, v, o)
        total = g.integrate(r)
        c = v - r[None, :] - r[:, None] + total
        return 0.5 * (c + c.T), o

    values, odd = build(k.grid)
    return Kernel(grid=k.grid, values=values, odd=odd,
                  label=f"center({k.label})",
                  half_order=k.half_order, recipe=build)


def condition_kernel(k, cross, gram):
    """Condition on linear functionals Z being zero.

    cross: callable mapping a node array t (shape (N,)) to the (N, q)
    matrix of cross-covariances Cov(X(t_i), Z_j); gram: the (q, q)
    covariance matrix of Z.  Returns the kernel of (X | Z = 0),
    K'(t,s) = K(t,s) - c(t)^T Sigma^+ c(s), via a symmetric pseudo-solve.
    """
    _require_unweighted(k, "condition_kernel")
    S = np.atleast_2d(np.asarray(gram, dtype=float))
    S = 0.5 * (S + S.T)
    if S.shape[0] != S.shape[1]:
        raise ValueError("gram matrix must be square")
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularConditioning(
            f"conditioning Gram matrix has condition number {cond:.3e} "
            f"(limit {CONDITION_LIMIT:g})")
    P = pinvh(S)

    def build(g):
        v, o = k.evaluate_on(g)
        C = np.asarray(cross(g.x), dtype=float)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape != (g.n, S.shape[0]):
            raise ValueError(
                f"cross-covariance shape {C.shape} does not match "
                f"{(g.n, S.shape[0])}")
        out = v - C @ P @ C.T
        return 0.5 * (out + out.T), o

    values, odd = build(k.grid)
    return Kernel(grid=k.grid, values=values, odd=odd,
                  label=f"cond[{S.shape[0]}]({k.label})",
                  half_order=k.half_order, recipe=build)


def apply_weight(k, w):
    """Multiply by sqrt(psi(t) psi(s)); terminal transform.

    The weighted kernel is what the squared-psi-norm quadratic form and the
    Nystrom matrix are built from.  No further transform accepts it.
    """
    if k.weighted:
        raise ValueError("kernel is already weighted; apply_weight is "
                         "terminal and cannot be repeated")

    def build(g):
        v, o = k.evaluate_on(g)
        psi = np.asarray(w(g.x), dtype=float)
        if psi.ndim == 0:
            psi = np.full(g.n, float(psi))
        half = np.sqrt(psi)
        scale = np.outer(half, half)
        return v * scale, (None if o is None else o * scale)

    values, odd = build(k.grid)
    return Kernel(grid=k.grid, values=values, odd=odd,
                  label=f"weight[{w.text}]({k.label})",
                  half_order=k.half_order, weighted=True, recipe=build)


# ---------------------------------------------------------------------------
# process construction


@dataclass(frozen=True)
class ProcessSpec:
    """Recipe for a catalog process: a base family plus a transform chain.

    Applied in order: ``centerings`` repetitions of [center, integrate from
    0] -- the recursion that builds the multiply centered-integrated bridge
    -- then ``m`` integrations with lower limits ``betas`` (each 0 or 1,
    the X_m^{[beta_1..beta_m]} construction), then an optional final
    centering.  Family parameters: ``level`` for the conditional integrated
    Wiener process, ``n`` for Matern, ``omega`` for Bogolyubov.
    """

    family: str
    m: int = 0
    betas: tuple = ()
    centerings: int = 0
    center_final: bool = False
    level: int = None
    n: int = None
    omega: float = None

    def __post_init__(self):
        object.__setattr__(self, "betas",
                           tuple(int(b) for b in self.betas))
        fam = _canonical_family(self.family)
        if len(self.betas) != self.m:
            raise ValueError("betas must have length m")
        if any(b not in (0, 1) for b in self.betas):
            raise ValueError("each beta must be 0 or 1")
        if self.m < 0 or self.centerings < 0:
            raise ValueError("m and centerings must be nonnegative")
        if fam == "matern" and (self.n is None or self.n < 1):
            raise ValueError("Matern requires n >= 1")
        if fam == "bogolyubov" and (self.omega is None or not self.omega > 0):
            raise ValueError("Bogolyubov requires omega > 0")
        if fam == "ciw" and (self.level is None or self.level < 0):
            raise ValueError("conditional integrated Wiener requires "
                             "level >= 0")


def _ciw_cross(m):
    """Cross-covariances of the m-times integrated Wiener W_m(t) with the
    functionals W_j(1), j = 0..m.

    From W_m(t) = int_0^t (t-u)^m/m! dW(u):
    Cov(W_m(t), W_j(1)) = (1/(m! j!)) int_0^t (t-u)^m (1-u)^j du, expanded
    binomially in (1-u) = (1-t) + (t-u).
    """

    def cross(x):
        x = np.asarray(x, dtype=float)
        out = np.empty((x.size, m + 1))
        for j in range(m + 1):
            acc = np.zeros_like(x)
            for r in range(j + 1):
                acc += (comb(j, r) * (1.0 - x) ** (j - r)
                        * x ** (m + r + 1) / (m + r + 1))
            out[:, j] = acc / (factorial(m) * factorial(j))
        return out

    return cross


def _ciw_gram(m):
    """Gram matrix Cov(W_j(1), W_k(1)) = 1/((j+k+1) j! k!)."""
    j = np.arange(m + 1)
    return 1.0 / ((j[:, None] + j[None, :] + 1.0)
                  * np.array([factorial(v) for v in j])[:, None]
                  * np.array([factorial(v) for v in j])[None, :])


def _conditional_integrated_wiener(level, g):
    k = base_kernel("wiener", grid=g)
    for _ in range(level):
        k = integrate_kernel(k, 0)
    k = condition_kernel(k, _ciw_cross(level), _ciw_gram(level))
    return dataclasses.replace(
        k, label=f"conditional-integrated-wiener({level})")


def build_process(spec, grid=None):
    """Kernel of the process described by a ProcessSpec."""
    g = _as_grid(grid)
    fam = _canonical_family(spec.family)
    if fam == "ciw":
        k = _conditional_integrated_wiener(spec.level, g)
    elif fam == "matern":
        k = base_kernel(fam, {"n": spec.n}, g)
    elif fam == "bogolyubov":
        k = base_kernel(fam, {"omega": spec.omega}, g)
    else:
        k = base_kernel(fam, grid=g)
    for _ in range(spec.centerings):
        k = integrate_kernel(center_kernel(k), 0)
    for b in spec.betas:
        k = integrate_kernel(k, b)
    if spec.center_final:
        k = center_kernel(k)
    return k


def export_kernel_csv(k, path):
    """Write a kernel to CSV: one row of grid nodes, then the matrix rows."""
    with open(path, "w") as f:
        np.savetxt(f, k.grid.x[None, :], fmt="%.17g", delimiter=",")
        np.savetxt(f, k.values, fmt="%.17g", delimiter=",")
