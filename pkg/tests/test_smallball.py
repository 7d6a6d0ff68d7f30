"""Tests for the small-deviation module.

Hand-derived reference values used below:

* single standard eigenvalue: P(xi^2 <= r^2) = erf(r/sqrt(2));
  two unit eigenvalues: P(xi1^2+xi2^2 <= r^2) = 1 - exp(-r^2/2).
* integrated-Wiener case m = 0: prefactor in plain eps is 4/sqrt(pi)
  (C * sqrt(2) with C = 2/sqrt(pi/2)), rate exp(-1/(8 eps^2)).
* centered bridge: eigenfunctions cos(2 pi k t), sin(2 pi k t), so the
  eigenvalues are (2 pi k)^{-2} each with multiplicity two; steepest
  descent on L(s) = y/sinh(y), y = sqrt(s/2), gives
  P(||.|| <= eps) ~ sqrt(2/pi) eps^{-1} exp(-1/(8 eps^2)), which the
  m = 0 multiply-centered-bridge form must reproduce.
* the default Bogolyubov kernel is a 1-periodic convolution kernel, so it
  diagonalizes in the Fourier basis with lam_k = 1/(omega^2 + 4 pi^2 k^2),
  k in Z (k = 0 simple, k >= 1 twice).
* OU/Slepian eigenvalues behave like (sqrt(2)/(pi(k+delta)))^2, so their
  tail models carry theta_eff = sqrt(2) (the tilde transform absorbs it).
"""

import math
from itertools import product

import numpy as np
import pytest

from greenball.errors import (DegenerateTheta, NotNormalized, TiltNotFound,
                              UnsupportedFamily)
from greenball.kernels import ProcessSpec, base_kernel, build_process, \
    center_kernel
from greenball.model import (BoundaryCondition, BVProblem, OperatorSpec,
                             Weight)
from greenball.smallball import (AsymptoticForm, ProbabilityEstimate,
                                 WeylTailModel, comparison_convergence,
                                 constants, epsilon_transforms,
                                 evaluate_asymptotic, K_of, K_tilde_of,
                                 log_evaluate_asymptotic,
                                 monte_carlo_probability,
                                 process_asymptotic,
                                 smallball_probability_exact)
from greenball.spectrum import nystrom_eigenvalues
from greenball.theta import separated_ratio

BC = BoundaryCondition
UNIT = Weight.from_text("1")
# normalized for n = 1: int (0.5+1.5t)^{-2} dt = 1, endpoints 16 and 1/16
RATIO2 = Weight.from_text("(0.5+1.5*t)^(-4)")


def wiener_lams(K):
    return 1.0 / (((np.arange(1, K + 1) - 0.5) * np.pi) ** 2)


def bridge_lams(K):
    return 1.0 / ((np.arange(1, K + 1) * np.pi) ** 2)


# ---------------------------------------------------------------------------
# constants, transforms, index sums


def test_constants():
    z1, d1 = constants(1)
    assert z1 == pytest.approx(-1.0)
    assert d1 == 0.5
    z2, d2 = constants(2)
    assert z2 == pytest.approx(1j)
    assert d2 == pytest.approx(3.0 / (2.0 * math.sqrt(2.0)), rel=1e-15)
    with pytest.raises(ValueError):
        constants(0)


def test_epsilon_transforms_order_one():
    e_n, e_t, e_h, c1 = epsilon_transforms(0.3, 1)
    assert e_n == pytest.approx(0.3 * math.sqrt(2.0), rel=1e-15)
    assert e_t == pytest.approx(0.3)
    assert e_h == pytest.approx(0.3)  # c_1 = 2 cancels the 2n
    assert c1 == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError):
        epsilon_transforms(0.0, 1)


def test_epsilon_transforms_order_two():
    s = math.sin(math.pi / 4.0)
    e_n, e_t, e_h, c2 = epsilon_transforms(0.1, 2)
    assert e_n == pytest.approx((0.1 * math.sqrt(4.0 * s)) ** (1 / 3),
                                rel=1e-14)
    assert e_t == pytest.approx((0.1 * math.sqrt(2.0 * s)) ** (1 / 3),
                                rel=1e-14)
    assert c2 == pytest.approx(2.0 * math.sqrt(math.pi) / (math.sqrt(math.pi)
                               / 2.0), rel=1e-13)  # Gamma(2)/Gamma(3/2)
    assert e_h == pytest.approx((0.1 * math.sqrt(4.0 / c2 * s)) ** (1 / 3),
                                rel=1e-14)


def test_index_sums():
    assert K_of(()) == 0
    assert K_of((1,)) == 3
    assert K_of((0, 1)) == 5
    assert K_of((1, 1)) == 8
    assert K_tilde_of((1,)) == 5
    assert K_tilde_of((1, 1)) == 12
    with pytest.raises(ValueError):
        K_of((2,))


# ---------------------------------------------------------------------------
# asymptotic forms: exact constants and internal consistency


def test_wiener_m0_prefactor():
    form = process_asymptotic(ProcessSpec("wiener"))
    # value = C (eps sqrt2) exp(-1/(8 eps^2)); plain-eps prefactor 4/sqrt(pi)
    assert form.C * math.sqrt(2.0) == pytest.approx(
        4.0 / math.sqrt(math.pi), abs=1e-12)
    assert form.gamma == 1.0
    assert form.D == 0.5
    v = evaluate_asymptotic(form, 0.1)
    expect = 4.0 / math.sqrt(math.pi) * 0.1 * math.exp(-12.5)
    assert v == pytest.approx(expect, rel=1e-12)
    assert v == pytest.approx(8.41e-7, rel=2e-4)


def test_weighted_wiener_ratio_two():
    f1 = process_asymptotic(ProcessSpec("wiener"), RATIO2)
    f2 = process_asymptotic(ProcessSpec("wiener"))
    v1 = evaluate_asymptotic(f1, 0.1)
    v2 = evaluate_asymptotic(f2, 0.1)
    assert v1 / v2 == pytest.approx(2.0, rel=1e-12)
    assert v1 == pytest.approx(1.682e-6, rel=2e-4)


def test_bridge_and_conditional_level0_coincide():
    fb = process_asymptotic(ProcessSpec("bridge"))
    fc = process_asymptotic(ProcessSpec("ciw", level=0))
    assert fb.C == pytest.approx(fc.C, rel=1e-12)
    assert fb.gamma == fc.gamma == 0.0
    assert fb.D == fc.D


def test_matern_one_is_ou():
    fm = process_asymptotic(ProcessSpec("matern", n=1))
    fo = process_asymptotic(ProcessSpec("ou"))
    assert fm.C == pytest.approx(fo.C, rel=1e-12)
    assert fm.gamma == fo.gamma == 2.0
    for eps in (0.2, 0.1, 0.05):
        assert evaluate_asymptotic(fm, eps) == pytest.approx(
            evaluate_asymptotic(fo, eps), rel=1e-12)


def test_slepian_is_sqrt_two_over_e_times_ou():
    fs = process_asymptotic(ProcessSpec("slepian"))
    fo = process_asymptotic(ProcessSpec("ou"))
    assert fs.C / fo.C == pytest.approx(math.sqrt(2.0 / math.e), rel=1e-12)
    assert fs.gamma == fo.gamma and fs.D == fo.D


def test_endpoint_exponents_match_comparison_closed_forms():
    """Weighted-to-unweighted ratios of the closed forms must agree with
    the boundary-determinant closed forms for the same problems (n = 1,
    separated conditions with the matching endpoint orders)."""
    pair1 = (RATIO2.psi0, RATIO2.psi1)
    pair2 = (1.0, 1.0)
    cases = [
        (ProcessSpec("wiener"), 0, 1),   # value + derivative ends
        (ProcessSpec("bridge"), 0, 0),   # value + value
        (ProcessSpec("ou"), 1, 1),       # Robin: leading order 1 both ends
        (ProcessSpec("slepian"), 1, 1),
    ]
    for spec, k0, k1 in cases:
        fw = process_asymptotic(spec, RATIO2)
        fu = process_asymptotic(spec)
        got = evaluate_asymptotic(fw, 0.07) / evaluate_asymptotic(fu, 0.07)
        want = separated_ratio(1, k0, k1, pair1, pair2).ratio
        assert got == pytest.approx(want, rel=1e-10), spec.family


def test_not_normalized_rejected():
    with pytest.raises(NotNormalized):
        process_asymptotic(ProcessSpec("wiener"), Weight.from_text("2"))
    # normalization is order-sensitive: this weight is normalized for n = 1
    # but not for the twice-integrated process (n = 3)
    with pytest.raises(NotNormalized):
        process_asymptotic(ProcessSpec("wiener", m=2, betas=(0, 0)),
                               RATIO2)


def test_unsupported_transform_chains():
    for spec in (ProcessSpec("ou", centerings=1),
                 ProcessSpec("wiener", center_final=True),
                 ProcessSpec("bridge", m=1, betas=(0,), center_final=True),
                 ProcessSpec("bridge", centerings=2),
                 ProcessSpec("matern", n=2, m=1, betas=(0,)),
                 ProcessSpec("ciw", level=1, m=1, betas=(1,))):
        with pytest.raises(UnsupportedFamily):
            process_asymptotic(spec)


def test_degenerate_centered_integrated_bridge_patterns():
    # both endpoint products vanish exactly when the last two
    # integration-limit flags are 1 (possible only for m >= 2)
    for m, betas in ((2, (1, 1)), (3, (0, 1, 1)), (3, (1, 1, 1))):
        with pytest.raises(DegenerateTheta):
            process_asymptotic(
                ProcessSpec("bridge", m=m, betas=betas, centerings=1))
    for m, betas in ((0, ()), (1, (0,)), (1, (1,)), (2, (0, 1)),
                     (2, (1, 0)), (3, (1, 0, 1))):
        form = process_asymptotic(
            ProcessSpec("bridge", m=m, betas=betas, centerings=1))
        assert np.isfinite(form.endpoint_correction)


def test_positivity_and_finiteness_sweep():
    specs = []
    for m in range(4):
        for betas in product((0, 1), repeat=m):
            specs.append(ProcessSpec("wiener", m=m, betas=betas))
            specs.append(ProcessSpec("bridge", m=m, betas=betas))
            specs.append(ProcessSpec("ou", m=m, betas=betas))
            specs.append(ProcessSpec("slepian", m=m, betas=betas))
            specs.append(ProcessSpec("bogolyubov", m=m, betas=betas,
                                     omega=0.7))
            if not (m >= 2 and betas[-2:] == (1, 1)):
                specs.append(ProcessSpec("bridge", m=m, betas=betas,
                                         centerings=1))
    for n in range(1, 5):
        specs.append(ProcessSpec("matern", n=n))
    for level in range(4):
        specs.append(ProcessSpec("ciw", level=level))
    for c in range(4):
        specs.append(ProcessSpec("bridge", centerings=c, center_final=True))
    for spec in specs:
        form = process_asymptotic(spec)
        v = evaluate_asymptotic(form, 0.2)
        assert v > 0 and np.isfinite(v), spec
        assert np.isfinite(log_evaluate_asymptotic(form, 0.2)), spec


def test_underflow_reports_log():
    form = process_asymptotic(ProcessSpec("wiener"))
    assert evaluate_asymptotic(form, 0.005) == 0.0
    logv = log_evaluate_asymptotic(form, 0.005)
    assert np.isfinite(logv) and logv < -4000


def test_asymptotic_form_validation():
    with pytest.raises(ValueError):
        AsymptoticForm(C=-1.0, gamma=0.0, D=1.0, transform="eps_n", order=1)
    with pytest.raises(ValueError):
        AsymptoticForm(C=1.0, gamma=0.0, D=0.0, transform="eps_n", order=1)
    with pytest.raises(ValueError):
        AsymptoticForm(C=1.0, gamma=0.0, D=1.0, transform="nope", order=1)


# ---------------------------------------------------------------------------
# exact distribution oracle


def test_single_eigenvalue_is_erf():
    est = smallball_probability_exact(np.array([1.0]), 1.0)
    assert est.method == "saddlepoint"
    assert abs(est.p - math.erf(1.0 / math.sqrt(2.0))) < 1e-8


def test_two_equal_eigenvalues_exponential():
    est = smallball_probability_exact(np.array([1.0, 1.0]), math.sqrt(2.0))
    assert abs(est.p - (1.0 - math.exp(-1.0))) < 1e-8


@pytest.mark.parametrize("r", [0.05, 0.3, 2.5])
def test_erf_oracle_across_radii(r):
    est = smallball_probability_exact(np.array([1.0]), r)
    ref = math.erf(r / math.sqrt(2.0))
    assert est.p == pytest.approx(ref, rel=1e-9)


def test_scaling_identity():
    lam = np.array([2.0, 0.7, 0.3, 0.1])
    c = 3.7
    a = smallball_probability_exact(c * lam, 0.8)
    b = smallball_probability_exact(lam, 0.8 / math.sqrt(c))
    assert a.p == pytest.approx(b.p, rel=1e-10)


def test_exact_oracle_input_validation():
    with pytest.raises(ValueError):
        smallball_probability_exact(np.array([1.0, 2.0]), 1.0)  # ascending
    with pytest.raises(ValueError):
        smallball_probability_exact(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ValueError):
        smallball_probability_exact(np.array([]), 1.0)
    with pytest.raises(ValueError):
        smallball_probability_exact(np.array([1.0]), 0.0)


def test_tilt_failure_reported():
    with pytest.raises(TiltNotFound):
        smallball_probability_exact(np.array([1.0]), 1e-200)


def test_estimate_invariants():
    with pytest.raises(ValueError):
        ProbabilityEstimate(p=1.5, err=0.0, method="saddlepoint")
    with pytest.raises(ValueError):
        ProbabilityEstimate(p=0.5, err=-1.0, method="saddlepoint")
    # asymptotic evaluations may legitimately exceed 1 outside their range
    ProbabilityEstimate(p=1.5, err=0.0, method="asymptotic")


def test_deep_tail_logs_are_finite():
    est = smallball_probability_exact(wiener_lams(200), 0.04)
    assert est.p >= 0.0
    assert np.isfinite(est.log_p) and est.log_p < -30


# ---------------------------------------------------------------------------
# Weyl tail model


def test_tail_model_split_invariant():
    """The explicit-block / zeta-series split must not matter: a short block
    and a long block give the same transform, and the mean matches the
    exact Hurwitz-zeta value sum_{j>50} (pi(j-1/2))^{-2}."""
    from scipy.special import zeta as hurwitz_zeta
    short = WeylTailModel(1, 1.0, -0.5, 50, jmax=200)
    long = WeylTailModel(1, 1.0, -0.5, 50, jmax=20000)
    exact_mean = hurwitz_zeta(2, 50.5) / np.pi ** 2
    assert short.mean() == pytest.approx(exact_mean, rel=1e-12)
    for s in (0.5, 30.0, 2000.0):
        a = complex(short.log_laplace(np.array([s]))[0]).real
        b = complex(long.log_laplace(np.array([s]))[0]).real
        assert a == pytest.approx(b, rel=1e-10)


def test_tail_model_derivatives_consistent():
    # step sized so the second difference stays above roundoff in f ~ 0.1
    tail = WeylTailModel(1, 1.0, -0.5, 50)
    s0, h = 40.0, 0.5
    f = lambda s: float(np.real(tail.log_laplace(np.array([s]))[0]))
    d1 = float(np.real(tail.d1(np.array([s0]))[0]))
    d2 = float(np.real(tail.d2(np.array([s0]))[0]))
    assert d1 == pytest.approx((f(s0 + h) - f(s0 - h)) / (2 * h), rel=1e-4)
    assert d2 == pytest.approx((f(s0 + h) - 2 * f(s0) + f(s0 - h)) / h ** 2,
                               rel=1e-3)


def test_tail_calibration_wiener_delta_is_minus_half():
    lam = wiener_lams(500)
    tail = WeylTailModel.calibrated(1, 1.0, 500, float(lam[-1]))
    assert tail.delta == pytest.approx(-0.5, abs=1e-10)


def test_tail_model_changes_deep_probabilities():
    """Dropping the spectral tail overstates deep small-ball decay by
    orders of magnitude; the continuation restores the asymptotic value."""
    lam = wiener_lams(500)
    tail = WeylTailModel.calibrated(1, 1.0, 500, float(lam[-1]))
    form = process_asymptotic(ProcessSpec("wiener"))
    with_tail = smallball_probability_exact(lam, 0.05, tail=tail)
    without = smallball_probability_exact(lam, 0.05)
    asym = log_evaluate_asymptotic(form, 0.05)
    assert math.exp(with_tail.log_p - asym) == pytest.approx(1.0, abs=0.05)
    # dropping the tail removes factors < 1 from the transform, inflating p
    assert without.log_p - asym > math.log(5.0)


# ---------------------------------------------------------------------------
# closed forms vs the exact oracle on real spectra


def test_centered_bridge_spectrum_and_form():
    # Nystrom route must reproduce the analytic multiplicity-two spectrum
    kern = center_kernel(base_kernel("bridge"))
    res = nystrom_eigenvalues(kern, None, 20, grid=256)
    analytic = 1.0 / (2.0 * np.pi * np.repeat(np.arange(1, 11), 2)) ** 2
    assert np.max(np.abs(1.0 / res.mu - analytic) / analytic) < 1e-10
    # and the closed form must match the exact distribution
    lam = 1.0 / (2.0 * np.pi * np.repeat(np.arange(1, 1001), 2)) ** 2
    tail = WeylTailModel(1, 1.0, 0.5, 2000)
    form = process_asymptotic(ProcessSpec("bridge", center_final=True))
    for eps in (0.05, 0.03):
        sad = smallball_probability_exact(lam, eps, tail=tail)
        ratio = math.exp(sad.log_p - log_evaluate_asymptotic(form, eps))
        assert ratio == pytest.approx(1.0, abs=5e-3), eps


def test_periodic_kernel_spectrum_and_form():
    om = 1.3
    kern = base_kernel("bogolyubov", {"omega": om})
    res = nystrom_eigenvalues(kern, None, 20, grid=256)
    ks = np.arange(1, 11)
    analytic = np.sort(np.concatenate(
        [[1.0 / om ** 2], np.repeat(1.0 / (om ** 2 + 4 * np.pi ** 2 * ks ** 2),
                                    2)]))[::-1][:20]
    assert np.max(np.abs(1.0 / res.mu - analytic) / analytic) < 1e-10
    ks = np.arange(1, 2000)
    lam = np.sort(np.concatenate(
        [[1.0 / om ** 2],
         np.repeat(1.0 / (om ** 2 + 4 * np.pi ** 2 * ks ** 2), 2)]))[::-1]
    tail = WeylTailModel(1, 1.0, 0.5, lam.size)
    form = process_asymptotic(ProcessSpec("bogolyubov", omega=om))
    ratios = []
    for eps in (0.1, 0.06, 0.04):
        sad = smallball_probability_exact(lam, eps, tail=tail)
        ratios.append(math.exp(sad.log_p - log_evaluate_asymptotic(form, eps)))
    assert abs(ratios[-1] - 1.0) < 0.02
    assert abs(ratios[2] - 1.0) < abs(ratios[1] - 1.0) < abs(ratios[0] - 1.0)


def test_bridge_form_matches_exact():
    lam = bridge_lams(2000)
    tail = WeylTailModel.calibrated(1, 1.0, 2000, float(lam[-1]))
    form = process_asymptotic(ProcessSpec("bridge"))
    sad = smallball_probability_exact(lam, 0.04, tail=tail)
    assert math.exp(sad.log_p - log_evaluate_asymptotic(form, 0.04)) == \
        pytest.approx(1.0, abs=0.01)


def test_ou_and_slepian_forms_match_exact():
    for family in ("ou", "slepian"):
        res = nystrom_eigenvalues(base_kernel(family), None, 60, grid=512)
        lam = 1.0 / np.asarray(res.mu)
        tail = WeylTailModel.calibrated(1, math.sqrt(2.0), 60, float(lam[-1]))
        form = process_asymptotic(ProcessSpec(family))
        sad = smallball_probability_exact(lam, 0.04, tail=tail)
        ratio = math.exp(sad.log_p - log_evaluate_asymptotic(form, 0.04))
        assert ratio == pytest.approx(1.0, abs=0.02), family


def test_conditional_integrated_wiener_form_matches_exact():
    kern = build_process(ProcessSpec("ciw", level=1), grid=512)
    res = nystrom_eigenvalues(kern, None, 20, grid=512)
    lam = 1.0 / np.asarray(res.mu)
    tail = WeylTailModel.calibrated(2, 1.0, 20, float(lam[-1]))
    form = process_asymptotic(ProcessSpec("ciw", level=1))
    gaps = []
    for eps in (0.02, 0.01, 0.005):
        sad = smallball_probability_exact(lam, eps, tail=tail)
        gaps.append(abs(math.exp(
            sad.log_p - log_evaluate_asymptotic(form, eps)) - 1.0))
    assert gaps[2] < gaps[1] < gaps[0]
    assert gaps[2] < 0.02


# ---------------------------------------------------------------------------
# Monte Carlo


def test_mc_single_eigenvalue():
    est = monte_carlo_probability(np.array([1.0]), 1.0, 10 ** 6,
                                  seed=20260825)
    assert est.method == "montecarlo"
    assert abs(est.p - 0.6827) < 0.0015
    assert est.err == pytest.approx(
        math.sqrt(est.p * (1 - est.p) / 10 ** 6), rel=1e-6)


def test_mc_two_eigenvalues():
    est = monte_carlo_probability(np.array([1.0, 1.0]), math.sqrt(2.0),
                                  10 ** 6, seed=7)
    assert abs(est.p - 0.6321) < 0.0015


def test_mc_reproducible():
    a = monte_carlo_probability(np.array([1.0, 0.5]), 1.0, 10 ** 5, seed=42)
    b = monte_carlo_probability(np.array([1.0, 0.5]), 1.0, 10 ** 5, seed=42)
    assert a.p == b.p
    c = monte_carlo_probability(np.array([1.0, 0.5]), 1.0, 10 ** 5, seed=43)
    assert c.p != a.p


def test_mc_agrees_with_saddlepoint():
    lam = wiener_lams(300)
    sad = smallball_probability_exact(lam, 0.26)
    mc = monte_carlo_probability(lam, 0.26, 2 * 10 ** 5, seed=1234)
    assert abs(sad.p - mc.p) < 3.0 * mc.err
    assert 1e-3 < sad.p < 0.2


def test_mc_truncation_bias_reported():
    lam = wiener_lams(100)
    tail = WeylTailModel.calibrated(1, 1.0, 100, float(lam[-1]))
    est = monte_carlo_probability(lam, 0.3, 10 ** 4, seed=0, tail=tail)
    assert est.truncation_bias == pytest.approx(tail.mean())
    assert est.truncation_bias > 0


# ---------------------------------------------------------------------------
# convergence table


def test_comparison_convergence_table():
    prob = BVProblem(OperatorSpec(1, (0.0,)), (BC(0, 1, 0), BC(1, 0, 1)),
                     UNIT, normalized_system=True)
    table = comparison_convergence(prob, RATIO2, UNIT, [0.15, 0.1], K=40)
    assert table.limit == pytest.approx(2.0, abs=1e-10)
    assert table.eps[0] > table.eps[1]
    assert np.all(table.p1 > 0) and np.all(table.p2 > 0)
    assert np.allclose(table.ratio, table.p1 / table.p2)
    # gap to the limit shrinks as eps decreases
    assert abs(table.ratio[1] - 2.0) < abs(table.ratio[0] - 2.0)
    assert abs(table.ratio[1] - 2.0) < 0.12
