from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spheremcf.exact_models import ProductSphereState, product_sphere_curvatures
from spheremcf.geometry_core import (
    FlowParams,
    InadmissibleParameters,
    NotPinched,
    PrincipalCurvatures,
    cylindrical_deficit,
    derive_constants,
    f_plus_HA,
    f_sigma_eta,
    mean_curvature,
    noncollapse_F,
    quadratic_margin,
    scalar_curvature,
    second_form_norm_sq,
    strict_margin,
    strict_pinching_check,
    weight_W,
)

PC = PrincipalCurvatures.of
P4 = FlowParams(4, 1.0, 0.5, 100.0, 1e4, 0.05, 0.1)

curv = st.floats(-50, 50, allow_nan=False)


def test_mean_curvature_examples():
    assert mean_curvature(PC([1, 1, 1, 1])) == 4
    lam = product_sphere_curvatures(ProductSphereState(5, 2, math.pi / 4), 1.0)
    assert np.allclose(lam.values, (-1, -1, 1, 1, 1))
    assert mean_curvature(lam) == pytest.approx(1.0, abs=1e-14)
    assert mean_curvature(PC([0, 0, 0, 0])) == 0


def test_norm_and_scalar_curvature():
    assert second_form_norm_sq(PC([-1, -1, 1, 1, 1])) == 5
    assert second_form_norm_sq(PC([-1, -1, 1, 1])) == 4
    assert scalar_curvature(PC([0, 0, 0, 0]), 1.0) == 12
    assert scalar_curvature(PC([-1, -1, 1, 1]), 1.0) == 8


def test_strict_pinching_examples():
    assert strict_margin(PC([-1, -1, 1, 1]), 1.0) == 0.0
    d = math.pi / 4
    assert strict_pinching_check(PC([1 / math.tan(d)] * 4), 1.0)
    assert not strict_pinching_check(PC([-1, -1, 1, 1]), 1.0)
    assert strict_pinching_check(PC([0, 0, 0]), 1.0)


def test_cylindrical_deficit_examples():
    assert cylindrical_deficit(PC([0, 1, 1, 1])) == pytest.approx(0.0, abs=1e-14)
    assert cylindrical_deficit(PC([1, 1, 1, 1])) == pytest.approx(4 - 16 / 3)
    # S^1 x S^3, u -> 0: deficit -> 2K
    u = 1e-4
    lam = product_sphere_curvatures(ProductSphereState(4, 1, u), 1.0)
    assert cylindrical_deficit(lam) == pytest.approx(2.0, rel=1e-6)


def test_derived_constants_rational_oracle():
    # exact values from a rational-arithmetic evaluation
    c = derive_constants(4, 0.5, 0.05)
    assert c.a == pytest.approx(3 / 80, rel=1e-14)
    assert c.b == 3.0
    assert c.delta == pytest.approx(29 / 120, rel=1e-14)
    assert c.beta == pytest.approx(1 / 12, rel=1e-14)
    assert c.C_noncollapse == pytest.approx(math.sqrt(10) / 2, rel=1e-14)
    assert c.eta_max_poincare == pytest.approx(1 / 15, rel=1e-14)
    assert c.eta_max_cylindrical == pytest.approx(7 / 80, rel=1e-14)


def test_weight_and_f_examples():
    assert weight_W(2.0, P4) == pytest.approx(63 / 20, rel=1e-14)
    assert weight_W(0.0, P4) == pytest.approx(3.0)
    f, fp = f_sigma_eta(PC([0, 0, 1, 1]), 0.0, P4)
    assert f == pytest.approx(0.16616030570370831, rel=1e-12)
    assert fp == pytest.approx(f)
    p1 = FlowParams(4, 1.0, 0.5, 100.0, 1e4, 0.05, 0.999999999)
    f1, _ = f_sigma_eta(PC([0, 0, 1, 1]), 0.0, p1)
    assert f1 == pytest.approx(7 / 15, rel=1e-8)


def test_weight_homogeneity():
    p4 = FlowParams(4, 4.0, 0.5, 100.0, 1e4, 0.05, 0.1)
    assert weight_W(4.0, p4) == pytest.approx(4 * weight_W(2.0, P4))


def test_noncollapse_F_boundary_raises():
    with pytest.raises(NotPinched):
        noncollapse_F(PC([-1, -1, 1, 1]), 1.0)


def test_empty_window_raises():
    with pytest.raises(InadmissibleParameters):
        derive_constants(4, 1.0, 0.01)


def test_flow_params_lists_all_violations():
    with pytest.raises(InadmissibleParameters) as exc:
        FlowParams(3, 1.0, 0.5, -1.0, 1e4, 0.05, 0.1)
    msg = str(exc.value)
    assert "alpha > 2/3 required when n=3" in msg
    assert "V > 0" in msg


@settings(max_examples=200, deadline=None)
@given(st.lists(curv, min_size=3, max_size=7))
def test_umbilic_bound_on_norm(lams):
    pc = PC(lams)
    H = mean_curvature(pc)
    assert second_form_norm_sq(pc) >= H * H / pc.n - 1e-9 * (1 + H * H)


@settings(max_examples=200, deadline=None)
@given(st.lists(curv, min_size=4, max_size=4), st.floats(0.1, 10))
def test_margins_scale_with_K(lams, c):
    pc = PC(lams)
    scaled = PC([math.sqrt(c) * x for x in lams])
    assert strict_margin(scaled, c) == pytest.approx(c * strict_margin(pc, 1.0), rel=1e-9, abs=1e-9 * c)
    assert quadratic_margin(scaled, c, 0.5) == pytest.approx(c * quadratic_margin(pc, 1.0, 0.5), rel=1e-9, abs=1e-9 * c)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 100), st.floats(0, 10), st.floats(0, 5))
def test_umbilic_fplus_vanishes(lam, K, t):
    H = np.array([4 * lam])
    A2 = np.array([4 * lam * lam])
    assert f_plus_HA(H, A2, t, max(K, 0.01), 4, 0.1, P4.constants)[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(curv, min_size=4, max_size=4))
def test_strict_pinching_implies_quadratic_margin_relation(lams):
    # |A|^2 - H^2/(n-2+alpha) - 2(2-alpha)K >= |A|^2 - H^2/(n-2) - 4K for alpha in (0, 1)
    pc = PC(lams)
    assert quadratic_margin(pc, 1.0, 0.5) >= strict_margin(pc, 1.0) - 1e-9 * (1 + second_form_norm_sq(pc))
