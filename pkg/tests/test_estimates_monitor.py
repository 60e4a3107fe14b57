from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spheremcf import profiles
from spheremcf.estimates_monitor import (
    MonitorMisconfigured,
    acylindrical_sample,
    comparability_scan,
    cylindrical_estimate_check,
    f1_eta,
    fit_gradient_constants,
    fplus_check,
    g2_alpha,
    gradient_hessian_ratios,
    interior_constants,
    kato_slack,
    noncollapse_bound,
    noncollapse_check,
    normC2,
    poincare_gamma_search,
)
from spheremcf.geometry_core import InadmissibleParameters
from spheremcf.rotsym_flow import FlowState, mcf_step, profile_curvatures

# gamma at the two-value point (0, 0, 1, 1) in rational arithmetic: (8 + 1)/(63/20)^3
REF_RATIO = float(Fraction(9) / Fraction(63, 20) ** 3)


def raw_two_value_gamma(n, alpha, eta, lo=-6.0, hi=6.0, m=2401):
    """Independent oracle: brute force over spectra (p,...,p,q,...,q) in unscaled coordinates."""
    a = 1 / (n - 2 + alpha) - 1 / (n - 1) - eta + alpha / (2 * n * (n - 1))
    b = 2 * (2 - alpha)
    g = np.linspace(lo, hi, m)
    P, Q = np.meshgrid(g, g, indexing="ij")
    best = math.inf
    for k in range(1, n):
        H = k * P + (n - k) * Q
        S = k * P * P + (n - k) * Q * Q
        ok = (S - (1 / (n - 1) + eta) * H * H >= 0) & (S - H * H / (n - 2 + alpha) - 2 * (2 - alpha) <= 0)
        C2 = 2 * k * (n - k) * (P - Q) ** 2 * (P * Q + 1) ** 2
        r = np.where(ok, (C2 + 1) / (a * H * H + b) ** 3, np.inf)
        best = min(best, float(r.min()))
    return best


def test_normC2_reference_point():
    assert normC2(np.array([0.0, 0.0, 1.0, 1.0])) == pytest.approx(8.0)
    s = acylindrical_sample((0, 0, 1, 1), 4, 0.5, 0.05)
    assert s.admissible
    assert s.ratio == pytest.approx(REF_RATIO, rel=1e-14)
    assert REF_RATIO == pytest.approx(0.2879, abs=1e-4)


def test_near_umbilic_not_admissible():
    assert not acylindrical_sample((1, 1, 1, 1.1), 4, 0.5, 0.05).admissible


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    st.floats(0.1, 100.0),
)
def test_pinching_functions_scale_quadratically(lam, s):
    # f1 is 2-homogeneous; g2 is 2-homogeneous up to its constant term
    v = np.array(lam)
    f, g = f1_eta(v, 4, 0.05), g2_alpha(v, 4, 0.5)
    fs, gs = f1_eta(s * v, 4, 0.05), g2_alpha(s * v, 4, 0.5)
    assert fs == pytest.approx(s * s * f, rel=1e-9, abs=1e-9 * s * s)
    assert gs + 3.0 == pytest.approx(s * s * (g + 3.0), rel=1e-9, abs=1e-9 * s * s)


def test_admissible_set_is_unbounded_along_the_cone():
    # H^2 (1/3 + eta) < |A|^2 < H^2 / (2 + alpha) is a cone, so scaling never leaves it
    lam = (0.0, -1.25, -1.25, -2.75)
    assert all(acylindrical_sample(tuple(t * x for x in lam), 4, 0.5, 0.05).admissible for t in (1, 10, 1e3))
    assert not acylindrical_sample((0, 0, 0, 100.0), 4, 0.5, 0.05).admissible


@pytest.fixture(scope="module")
def gamma():
    return poincare_gamma_search(4, 0.5, 0.05, budget=200_000, seed=0)


def test_gamma_positive_and_includes_reference(gamma):
    assert gamma.gamma_hat > 0
    assert gamma.reference_included
    assert gamma.reference_ratio == pytest.approx(REF_RATIO, rel=1e-12)


def test_gamma_below_and_near_raw_oracle(gamma):
    raw = raw_two_value_gamma(4, 0.5, 0.05)
    assert gamma.gamma_hat <= raw * (1 + 1e-12)
    assert gamma.gamma_hat >= 0.99 * raw


def test_gamma_argmin_is_admissible(gamma):
    s = acylindrical_sample(gamma.argmin, 4, 0.5, 0.05)
    assert s.f1 >= -1e-8 and s.g2 <= 1e-8
    assert s.ratio == pytest.approx(gamma.gamma_hat, rel=1e-8)


def test_gamma_monotone_in_budget():
    small = poincare_gamma_search(4, 0.5, 0.05, budget=20_000, seed=3)
    large = poincare_gamma_search(4, 0.5, 0.05, budget=40_000, seed=3)
    assert large.gamma_hat <= small.gamma_hat


def test_gamma_inadmissible_window():
    with pytest.raises(InadmissibleParameters):
        poincare_gamma_search(4, 1.0, 0.01, budget=1000)


def test_era_non_growth_checks():
    t = np.linspace(0, 1, 11)
    dec = np.linspace(1.0, 0.5, 11)
    assert not cylindrical_estimate_check(t, dec).violated
    grow = dec.copy()
    grow[5:] += 1.0
    assert cylindrical_estimate_check(t, grow).violated
    # a jump at a surgery time starts a new era
    assert not cylindrical_estimate_check(t, grow, surgery_times=[t[5]]).violated
    assert not fplus_check(t, np.zeros(11)).violated


def test_noncollapse_bound_and_check():
    C, K = 1.5, 2.0
    assert noncollapse_bound(0.0, 3.0, C, K) == 3.0
    assert noncollapse_bound(1.0, 3.0, C, K) == pytest.approx(C + 1.5 * math.exp(-8.0))
    ts = np.linspace(0, 1, 20)
    ok = [(t, 0.99 * noncollapse_bound(t, 3.0, C, K), -0.5) for t in ts]
    assert not noncollapse_check(ok, C, K).violated
    bad = ok + [(1.1, 2.0 * C, -0.5)]
    assert noncollapse_check(bad, C, K).violated
    # measured mu below C is raised to C
    assert noncollapse_check([(0.0, 0.2, -0.1)], C, K).mu == C


def test_interior_constants_formula():
    Lam, lam = interior_constants(4, 0.5, 10.0)
    assert Lam == pytest.approx(2 * (100 / 2.5 + 3))
    assert math.exp(8 * lam) == pytest.approx(1 + 4 / (4 + Lam))
    Lam1, _ = interior_constants(4, 0.5, 10.0, theta_power=1)
    assert Lam1 == pytest.approx(2 * (10 / 2.5 + 3))


def test_homogeneous_gradient_ratios_zero():
    c = profile_curvatures(profiles.tube(0.3, 1.0, 200), 4)
    r = gradient_hessian_ratios(c, 4, 1.0, 1 / 12)
    assert r.grad <= 1e-20 and r.grad_over_GG <= 1e-20


def test_fitted_constants_floor_and_misconfiguration():
    c = profile_curvatures(profiles.dumbbell(1.0, 400), 4)
    Cb, C0 = fit_gradient_constants(c.H, c.normA2, 1.0, 4, 1 / 12)
    assert Cb >= 2 and C0 >= 2
    gradient_hessian_ratios(c, 4, 1.0, 1 / 12, Cb, C0)
    with pytest.raises(MonitorMisconfigured):
        gradient_hessian_ratios(c, 4, 1.0, 1 / 12, -1e6, -1e6)


def test_gradient_ratio_grid_convergence():
    r1 = gradient_hessian_ratios(profile_curvatures(profiles.dumbbell(1.0, 800), 4), 4, 1.0, 1 / 12)
    r2 = gradient_hessian_ratios(profile_curvatures(profiles.dumbbell(1.0, 1600), 4), 4, 1.0, 1 / 12)
    assert r2.grad == pytest.approx(r1.grad, rel=0.05)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.2), st.sampled_from([1, 3, 5]), st.integers(3, 6))
def test_kato_holds_on_perturbed_equators(amp, mode, n):
    c = profile_curvatures(profiles.equator(1.0, 200, amp, mode), n)
    assert np.all(kato_slack(c, n) >= -1e-12 * (1 + c.grad_H**2))


def test_comparability_on_tube_history():
    s = FlowState(profiles.tube(0.3, 1.0, 120))
    s.record(4)
    for i in range(200):
        s = mcf_step(s, 4)
        if i % 5 == 0:
            s.record(4)
    res = comparability_scan(list(s.history), 1.0, 1.0)
    assert res.points_checked > 0 and res.violations == 0
    assert res.c_sharp > 0.1
