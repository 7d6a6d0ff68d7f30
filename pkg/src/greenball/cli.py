"""Command-line front end.

Subcommands
    eigs      eigenvalues by shooting and by Nystrom, with cross-check column
    theta     boundary determinants and limiting comparison ratio
    compare   determinant route vs eigenvalue-product route (+ optional
              probability-ratio convergence table)
    asympt    closed small-deviation forms evaluated on an eps grid
    prob      exact-distribution probabilities (saddle point, optionally MC)
    mc        Monte Carlo probabilities
    validate  end-to-end pipeline checks with a PASS/FAIL report

Exit codes: 0 success, 2 specification/parse error, 3 numerical failure,
4 normalization mismatch, 5 validation failure.  CSV output uses '.' decimal
separator, ',' field separator, a header row, and 17 significant digits;
JSON output additionally records method, tolerances, and module version.
Identical configuration (including seed) produces byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import (ExpressionSyntaxError, GreenballError,
                     NormalizationMismatch, NotNormalized, UnsupportedFamily)
from .kernels import (ProcessSpec, _canonical_family, apply_weight,
                      base_kernel, build_process)
from .model import (BoundaryCondition, BVProblem, OperatorSpec, Weight,
                    normalization_integral)
from .quadrature import Grid
from .smallball import (WeylTailModel, comparison_convergence,
                        evaluate_asymptotic, log_evaluate_asymptotic,
                        monte_carlo_probability, process_asymptotic,
                        smallball_probability_exact)
from .spectrum import eigenvalues_shooting, nystrom_eigenvalues
from .theta import closed_form_ratio, ratio_limit

BC = BoundaryCondition


class CLIError(ValueError):
    """Configuration problem detected before any numerics ran."""


@dataclass
class RunConfig:
    command: str
    family: str = "wiener"
    m: int = 0
    betas: tuple = ()
    centerings: int = 0
    center_final: bool = False
    level: int = None
    n: int = None
    omega: float = None
    covariance: str = None
    weight: str = "1"
    weight2: str = None
    eps: tuple = (0.1,)
    K: int = 10
    N: int = 10 ** 5
    seed: int = 12345
    grid: int = None
    method: str = "saddlepoint"
    table: bool = False
    tol: float = 1e-2
    output: str = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.K < 1:
            raise CLIError("K must be >= 1")
        if self.N < 1:
            raise CLIError("N must be >= 1")
        eps = tuple(float(e) for e in self.eps)
        if any(e <= 0 for e in eps):
            raise CLIError("eps values must be positive")
        self.eps = tuple(sorted(eps, reverse=True))


# ---------------------------------------------------------------------------
# catalog boundary-value problems (classical identifications; the kernel
# route and these must agree, which `eigs` and `validate` check directly)


def catalog_problem(family, weight_text):
    """BVProblem whose eigenvalues are the reciprocals of the covariance
    eigenvalues for the plain catalog families, or None when no
    boundary-value formulation ships with the package.

    wiener      -v'' = mu psi v,        v(0) = v'(1) = 0
    bridge      -v'' = mu psi v,        v(0) = v(1) = 0
    ou          -v''+v = mu (2 psi) v,  v'(0)=v(0), v'(1)=-v(1)
    slepian     -v'' = mu (2 psi) v,    v'(0)+v'(1)=0, v(0)+v(1)-v'(0)=0

    The periodic (Bogolyubov) problem is excluded: its eigenvalues come in
    multiplicity-two pairs, where the characteristic determinant touches
    zero without a sign change, so the shooting scan cannot bracket them.
    """
    fam = _canonical_family(family)
    if fam in ("wiener", "bridge", "slepian"):
        op = OperatorSpec(1, (0.0,))
    elif fam == "ou":
        op = OperatorSpec(1, (1.0,))
    elif fam == "bogolyubov":
        return None  # built by caller (needs omega)
    else:
        return None
    if fam in ("ou", "slepian"):
        w = Weight.from_text(f"2*({weight_text})")
    else:
        w = Weight.from_text(weight_text)
    if fam == "wiener":
        bcs = (BC(0, 1, 0), BC(1, 0, 1))
    elif fam == "bridge":
        bcs = (BC(0, 1, 0), BC(0, 0, 1))
    elif fam == "ou":
        bcs = (BC(1, 1, 0, alpha_lower=(-1.0,)),
               BC(1, 0, 1, gamma_lower=(1.0,)))
    else:  # slepian
        bcs = (BC(1, 1, 1), BC(1, -1, 0, alpha_lower=(1.0,),
                                gamma_lower=(1.0,)))
    return BVProblem(op, bcs, w, normalized_system=True)


def _bogolyubov_problem(omega, weight_text):
    op = OperatorSpec(1, (omega * omega,))
    bcs = (BC(0, 1, -1), BC(1, 1, -1))
    return BVProblem(op, bcs, Weight.from_text(weight_text),
                     normalized_system=True)


def _shooting_problem(cfg):
    """Catalog BVProblem usable with the shooting solver, or None."""
    spec = _process_spec(cfg)
    plain = spec.m == 0 and spec.centerings == 0 and not spec.center_final
    if not plain or cfg.covariance is not None:
        return None
    return catalog_problem(_canonical_family(cfg.family), cfg.weight)


def _theta_problem(cfg):
    """Catalog BVProblem for boundary determinants (periodic included)."""
    spec = _process_spec(cfg)
    plain = spec.m == 0 and spec.centerings == 0 and not spec.center_final
    if not plain:
        return None
    fam = _canonical_family(cfg.family)
    if fam == "bogolyubov":
        return _bogolyubov_problem(cfg.omega, cfg.weight)
    return catalog_problem(fam, cfg.weight)


# ---------------------------------------------------------------------------
# config plumbing


def _process_spec(cfg):
    fam = _canonical_family(cfg.family)
    kwargs = dict(family=cfg.family, m=cfg.m, betas=cfg.betas,
                  centerings=cfg.centerings, center_final=cfg.center_final)
    if fam == "ciw":
        if cfg.level is None:
            raise CLIError("conditional integrated Wiener needs --level")
        kwargs["level"] = cfg.level
    if fam == "matern":
        if cfg.n is None:
            raise CLIError("the Matern family needs -n")
        kwargs["n"] = cfg.n
    if fam == "bogolyubov":
        if cfg.omega is None:
            raise CLIError("the Bogolyubov family needs --omega")
        kwargs["omega"] = cfg.omega
    return ProcessSpec(**kwargs)


def _build_kernel(cfg, weighted=True):
    spec = _process_spec(cfg)
    fam = _canonical_family(cfg.family)
    if cfg.covariance is not None:
        if fam != "bogolyubov" or spec.m or spec.centerings \
                or spec.center_final:
            raise CLIError("--covariance only applies to the plain "
                           "Bogolyubov family")
        kern = base_kernel("bogolyubov", {"omega": cfg.omega,
                                          "covariance": cfg.covariance})
    else:
        kern = build_process(spec)
    if weighted and cfg.weight != "1":
        kern = apply_weight(kern, Weight.from_text(cfg.weight))
    return kern


def _nystrom_grid(cfg, K, floor=512):
    if cfg.grid is not None:
        return cfg.grid
    return max(floor, 8 * K)


def _eigenvalue_lambdas(cfg):
    """(lam descending, tail model, route) for the configured process."""
    problem = _shooting_problem(cfg)
    if problem is not None:
        res = eigenvalues_shooting(problem, cfg.K)
        lam = 1.0 / np.asarray(res.mu)
        half = 1
        route = "shooting"
    else:
        kern = _build_kernel(cfg)
        res = nystrom_eigenvalues(kern, None, cfg.K,
                                  grid=_nystrom_grid(cfg, cfg.K))
        lam = 1.0 / np.asarray(res.mu)
        half = kern.half_order
        route = "nystrom"
    tail = WeylTailModel.fitted(half, lam)
    return lam, tail, route


def _weight_or_none(text):
    return None if text == "1" else Weight.from_text(text)


# ---------------------------------------------------------------------------
# output


def _emit(cfg, columns, rows, meta):
    if cfg.fmt == "json":
        doc = {"command": cfg.command, "version": __version__}
        doc.update(meta)
        doc["columns"] = list(columns)
        doc["rows"] = [list(r) for r in rows]
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, delimiter=",", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return "" if v is None else str(v)


# ---------------------------------------------------------------------------
# subcommands


def cmd_eigs(cfg):
    problem = _shooting_problem(cfg)
    if problem is None:
        raise CLIError(
            "eigs needs a catalog family with a boundary-value formulation "
            "(wiener, bridge, ou, slepian) and no transforms")
    shoot = eigenvalues_shooting(problem, cfg.K)
    kern = _build_kernel(cfg, weighted=False)
    w = _weight_or_none(cfg.weight)
    nys = nystrom_eigenvalues(kern, w, cfg.K,
                              grid=_nystrom_grid(cfg, cfg.K, floor=1024))
    rows = []
    for k in range(cfg.K):
        ms, mn = float(shoot.mu[k]), float(nys.mu[k])
        rows.append((k + 1, ms, mn, abs(ms - mn) / ms))
    _emit(cfg, ("k", "mu_shooting", "mu_nystrom", "rel_diff"), rows,
          {"method": "shooting+nystrom", "process": cfg.family,
           "weight": cfg.weight,
           "tolerances": {"grid_doubling": 1e-4}})
    return 0


def cmd_theta(cfg):
    from .theta import ThetaInput, theta_det
    problem = _theta_problem(cfg)
    if problem is None:
        raise CLIError("theta needs a catalog family (wiener, bridge, ou, "
                       "slepian, bogolyubov) and no transforms")
    w1 = Weight.from_text(cfg.weight)
    rows = []
    t1m = abs(theta_det(ThetaInput.from_problem(problem, w1), -1))
    t1p = abs(theta_det(ThetaInput.from_problem(problem, w1), +1))
    rows.append(("abs_theta_minus_weight1", t1m, None))
    rows.append(("abs_theta_plus_weight1", t1p, None))
    if cfg.weight2 is not None:
        w2 = Weight.from_text(cfg.weight2)
        t2m = abs(theta_det(ThetaInput.from_problem(problem, w2), -1))
        rows.append(("abs_theta_minus_weight2", t2m, None))
        res = ratio_limit(problem, w1, w2)
        rows.append(("ratio_direct", res.ratio, None))
        rows.append(("product_direct", res.product, None))
        try:
            closed = closed_form_ratio(problem, w1, w2)
            rows.append(("ratio_closed_form", closed.ratio, closed.route))
        except (GreenballError, ValueError):
            pass
    _emit(cfg, ("quantity", "value", "note"), rows,
          {"method": "boundary-determinants", "process": cfg.family,
           "weights": [cfg.weight, cfg.weight2],
           "tolerances": {}})
    return 0


def cmd_compare(cfg):
    if cfg.weight2 is None:
        raise CLIError("compare needs two weights (--weight and --weight2)")
    problem = _shooting_problem(cfg)
    if problem is None:
        raise CLIError("compare needs a catalog family (wiener, bridge, ou, "
                       "slepian) and no transforms")
    w1 = Weight.from_text(cfg.weight)
    w2 = Weight.from_text(cfg.weight2)
    limit = ratio_limit(problem, w1, w2)

    s1 = eigenvalues_shooting(problem.with_weight(w1), cfg.K)
    s2 = eigenvalues_shooting(problem.with_weight(w2), cfg.K)
    from .spectrum import eigenvalue_product
    prod, perr = eigenvalue_product(s1, s2)

    rel = abs(prod - limit.product) / limit.product
    status = "PASS" if rel <= cfg.tol else "FAIL"
    rows = [
        ("ratio_determinant", limit.ratio, None, None),
        ("product_determinant", limit.product, None, None),
        ("product_eigenvalues", prod, perr, None),
        ("agreement_rel_diff", rel, cfg.tol, status),
    ]
    if cfg.table:
        table = comparison_convergence(problem, w1, w2, cfg.eps, K=cfg.K)
        for e, p1v, p2v, r in zip(table.eps, table.p1, table.p2, table.ratio):
            rows.append((f"prob_ratio_eps={e:g}", r, None, None))
        rows.append(("prob_ratio_limit", table.limit, None, None))
    _emit(cfg, ("quantity", "value", "err", "status"), rows,
          {"method": "theta-determinant+eigenvalue-product",
           "process": cfg.family, "weights": [cfg.weight, cfg.weight2],
           "K": cfg.K, "tolerances": {"product_rel": cfg.tol}})
    return 0 if status == "PASS" else 5


def cmd_asympt(cfg):
    spec = _process_spec(cfg)
    form = process_asymptotic(spec, _weight_or_none(cfg.weight))
    rows = []
    for e in cfg.eps:
        rows.append((e, evaluate_asymptotic(form, e),
                     log_evaluate_asymptotic(form, e), form.C, form.gamma,
                     form.D, form.transform, form.order,
                     form.endpoint_correction))
    _emit(cfg, ("eps", "value", "log_value", "C", "gamma", "D", "transform",
                "order", "endpoint_correction"), rows,
          {"method": "closed-asymptotic", "process": cfg.family,
           "label": form.label, "weight": cfg.weight, "tolerances": {}})
    return 0


def cmd_prob(cfg):
    lam, tail, route = _eigenvalue_lambdas(cfg)
    rows = []
    for e in cfg.eps:
        if cfg.method in ("saddlepoint", "both"):
            est = smallball_probability_exact(lam, e, tail=tail)
            rows.append((e, est.p, est.err, est.log_p, est.method))
        if cfg.method in ("montecarlo", "both"):
            est = monte_carlo_probability(lam, e, cfg.N, cfg.seed, tail=tail)
            rows.append((e, est.p, est.err, est.log_p, est.method))
    _emit(cfg, ("eps", "p", "err", "log_p", "method"), rows,
          {"method": cfg.method, "process": cfg.family, "weight": cfg.weight,
           "K": cfg.K, "spectrum_route": route, "seed": cfg.seed,
           "tolerances": {"inversion_rel": 1e-12}})
    return 0


def cmd_mc(cfg):
    lam, tail, route = _eigenvalue_lambdas(cfg)
    rows = []
    for e in cfg.eps:
        est = monte_carlo_probability(lam, e, cfg.N, cfg.seed, tail=tail)
        rows.append((e, est.p, est.err, est.truncation_bias, cfg.N, cfg.seed))
    _emit(cfg, ("eps", "p", "err", "truncation_bias", "N", "seed"), rows,
          {"method": "montecarlo", "process": cfg.family,
           "weight": cfg.weight, "K": cfg.K, "spectrum_route": route,
           "seed": cfg.seed, "tolerances": {}})
    return 0


# --- validate -------------------------------------------------------------


def _radius_for_probability(lam, tail, target=0.02):
    """Radius where the exact distribution reaches `target` (bisection on
    the monotone map r -> p)."""
    mean = lam.sum() + (tail.mean() if tail is not None else 0.0)
    lo, hi = 1e-6 * math.sqrt(mean), 4.0 * math.sqrt(mean)
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if smallball_probability_exact(lam, mid, tail=tail).p < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _check(rows, name, ok, value, threshold):
    rows.append((name, "PASS" if ok else "FAIL", value, threshold))
    return ok


def cmd_validate(cfg):
    rows = []
    all_ok = True
    spec = _process_spec(cfg)
    kern = _build_kernel(cfg)

    # positive semidefiniteness of the discretized covariance
    g = Grid.composite(256, 8)
    vals, _ = kern.evaluate_on(g)
    sw = np.sqrt(g.w)
    min_eig = float(np.linalg.eigvalsh(vals * np.outer(sw, sw)).min())
    all_ok &= _check(rows, "kernel_psd", min_eig > -1e-10, min_eig, -1e-10)

    # spectral cross-check against the boundary-value route
    problem = _shooting_problem(cfg)
    if problem is not None:
        shoot = eigenvalues_shooting(problem, 10)
        nys = nystrom_eigenvalues(_build_kernel(cfg, weighted=False),
                                  _weight_or_none(cfg.weight), 10, grid=1024)
        rel = float(np.max(np.abs(shoot.mu - nys.mu) / shoot.mu))
        all_ok &= _check(rows, "shooting_vs_nystrom", rel < 1e-6, rel, 1e-6)

    # first-order Matern must reproduce the exponential-covariance spectrum
    if _canonical_family(cfg.family) == "matern" and cfg.n == 1:
        a = nystrom_eigenvalues(base_kernel("matern", {"n": 1}), None, 20,
                                grid=256)
        b = nystrom_eigenvalues(base_kernel("ou"), None, 20, grid=256)
        rel = float(np.max(np.abs(a.mu - b.mu) / b.mu))
        all_ok &= _check(rows, "matern1_equals_ou_spectrum", rel < 1e-6,
                         rel, 1e-6)

    # closed asymptotic form vs exact distribution on the computed spectrum
    half = kern.half_order
    try:
        form = process_asymptotic(spec, _weight_or_none(cfg.weight))
    except (UnsupportedFamily, GreenballError):
        form = None
        rows.append(("asymptotic_vs_exact", "SKIP", None, None))
    if form is not None and cfg.covariance is None and half <= 2:
        K, eps_chk, tol = (60, 0.04, 0.06) if half == 1 else (20, 0.01, 0.12)
        res = nystrom_eigenvalues(kern, None, K,
                                  grid=_nystrom_grid(cfg, K))
        lam = 1.0 / np.asarray(res.mu)
        tail = WeylTailModel.fitted(half, lam)
        sad = smallball_probability_exact(lam, eps_chk, tail=tail)
        gap = abs(math.exp(sad.log_p - log_evaluate_asymptotic(form, eps_chk))
                  - 1.0)
        all_ok &= _check(rows, "asymptotic_vs_exact", gap < tol, gap, tol)
        # Monte Carlo against the inversion at a moderate radius; both sides
        # use the same truncated spectrum so the comparison is unbiased
        r = _radius_for_probability(lam, None, target=0.02)
        sadr = smallball_probability_exact(lam, r, tail=None)
        mc = monte_carlo_probability(lam, r, cfg.N, cfg.seed)
        dev = abs(sadr.p - mc.p)
        all_ok &= _check(rows, "mc_vs_saddlepoint_3se", dev <= 3 * mc.err,
                         dev, 3 * mc.err)
    elif form is not None:
        rows.append(("asymptotic_vs_exact", "SKIP", None, None))

    _emit(cfg, ("check", "status", "value", "threshold"), rows,
          {"method": "validation-suite", "process": cfg.family,
           "weight": cfg.weight, "seed": cfg.seed,
           "tolerances": {"spectra_rel": 1e-6, "psd_min_eig": -1e-10,
                          "mc_sigmas": 3.0}})
    return 0 if all_ok else 5


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    top = argparse.ArgumentParser(
        prog="greenball",
        description="Spectra, comparison ratios, and small-deviation "
                    "probabilities of Green Gaussian processes in weighted "
                    "L2 norms.")
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--process", default="wiener",
                        help="process family (wiener, bridge, ou, slepian, "
                             "matern, bogolyubov, ciw)")
    common.add_argument("-m", type=int, default=0,
                        help="number of integrations")
    common.add_argument("--betas", default="",
                        help="comma-separated 0/1 integration-limit flags")
    common.add_argument("--centerings", type=int, default=0)
    common.add_argument("--center-final", action="store_true")
    common.add_argument("--level", type=int, default=None,
                        help="conditioning level for ciw")
    common.add_argument("-n", type=int, default=None, help="Matern order")
    common.add_argument("--omega", type=float, default=None,
                        help="Bogolyubov frequency")
    common.add_argument("--covariance", default=None,
                        help="custom Bogolyubov covariance expression")
    common.add_argument("--weight", default="1",
                        help="weight expression psi(t)")
    common.add_argument("--eps", type=float, nargs="+", default=None)
    common.add_argument("--eps-start", type=float, default=None)
    common.add_argument("--eps-stop", type=float, default=None)
    common.add_argument("--eps-count", type=int, default=None)
    common.add_argument("--eps-log", action="store_true",
                        help="log-spaced eps grid")
    common.add_argument("-K", type=int, default=None,
                        help="number of eigenvalues")
    common.add_argument("-N", type=int, default=10 ** 5,
                        help="Monte Carlo sample count")
    common.add_argument("--seed", type=int, default=12345)
    common.add_argument("--grid", type=int, default=None,
                        help="Nystrom grid size")
    common.add_argument("-o", "--output", default=None)
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("eigs", parents=[common],
                   help="eigenvalues by shooting and Nystrom")
    p_theta = sub.add_parser("theta", parents=[common],
                             help="boundary determinants")
    p_theta.add_argument("--weight2", default=None)
    p_cmp = sub.add_parser("compare", parents=[common],
                           help="comparison-ratio routes")
    p_cmp.add_argument("--weight2", default=None)
    p_cmp.add_argument("--table", action="store_true",
                       help="append the probability-ratio convergence table")
    p_cmp.add_argument("--tol", type=float, default=1e-2)
    sub.add_parser("asympt", parents=[common],
                   help="closed small-deviation forms")
    p_prob = sub.add_parser("prob", parents=[common],
                            help="exact-distribution probabilities")
    p_prob.add_argument("--method",
                        choices=("saddlepoint", "montecarlo", "both"),
                        default="saddlepoint")
    sub.add_parser("mc", parents=[common], help="Monte Carlo probabilities")
    sub.add_parser("validate", parents=[common],
                   help="end-to-end validation report")
    return top


_DEFAULT_K = {"eigs": 10, "theta": 10, "compare": 200, "asympt": 10,
              "prob": 200, "mc": 200, "validate": 60}


def config_from_args(args):
    betas = tuple(int(b) for b in args.betas.split(",") if b != "")
    if args.eps is not None:
        eps = tuple(args.eps)
    elif args.eps_start is not None:
        if args.eps_stop is None or args.eps_count is None:
            raise CLIError("eps grid needs --eps-start, --eps-stop and "
                           "--eps-count together")
        if args.eps_log:
            eps = tuple(np.geomspace(args.eps_start, args.eps_stop,
                                     args.eps_count))
        else:
            eps = tuple(np.linspace(args.eps_start, args.eps_stop,
                                    args.eps_count))
    else:
        eps = (0.1,)
    return RunConfig(
        command=args.command, family=args.process, m=args.m, betas=betas,
        centerings=args.centerings, center_final=args.center_final,
        level=args.level, n=args.n, omega=args.omega,
        covariance=args.covariance, weight=args.weight,
        weight2=getattr(args, "weight2", None), eps=eps,
        K=args.K if args.K is not None else _DEFAULT_K[args.command],
        N=args.N, seed=args.seed, grid=args.grid,
        method=getattr(args, "method", "saddlepoint"),
        table=getattr(args, "table", False),
        tol=getattr(args, "tol", 1e-2), output=args.output, fmt=args.format)


_DISPATCH = {"eigs": cmd_eigs, "theta": cmd_theta, "compare": cmd_compare,
             "asympt": cmd_asympt, "prob": cmd_prob, "mc": cmd_mc,
             "validate": cmd_validate}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except (CLIError, ExpressionSyntaxError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return _DISPATCH[cfg.command](cfg)
    except (NormalizationMismatch, NotNormalized) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (CLIError, UnsupportedFamily, ExpressionSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GreenballError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
