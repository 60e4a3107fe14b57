from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spheremcf.estimates_monitor import evolution_residual
from spheremcf.exact_models import (
    GeodesicSphereState,
    ProductSphereState,
    StepControl,
    flow_product_sphere,
    geodesic_sphere_closed_form,
    geodesic_sphere_extinction_time,
    geodesic_sphere_rk4,
    minimal_clifford_angle,
    product_sphere_curvatures,
    product_sphere_cylindrical_deficit,
    product_sphere_mean_curvature,
    product_sphere_ode_rhs,
    product_sphere_strict_margin,
)
from spheremcf.geometry_core import mean_curvature, quadratic_margin_HA, second_form_norm_sq


def test_product_sphere_curvature_examples():
    assert np.allclose(product_sphere_curvatures(ProductSphereState(4, 2, math.pi / 4), 1.0).values, (-1, -1, 1, 1))
    pc = product_sphere_curvatures(ProductSphereState(5, 2, math.pi / 4), 1.0)
    assert mean_curvature(pc) == pytest.approx(1.0)
    assert second_form_norm_sq(pc) == pytest.approx(5.0)
    # closed form in radii: H = ((n-2) r^2 - 2 s^2)/(r s) in the orientation of increasing u, up to sign
    r, s = ProductSphereState(5, 2, math.pi / 4).radii(1.0)
    assert abs(mean_curvature(pc)) == pytest.approx(abs((3 * r * r - 2 * s * s) / (r * s)))
    assert np.allclose(product_sphere_curvatures(ProductSphereState(4, 2, math.pi / 4), 4.0).values, (-2, -2, 2, 2))


def test_clifford_rhs_and_angles():
    assert product_sphere_ode_rhs(ProductSphereState(4, 2, math.pi / 4), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert minimal_clifford_angle(4, 2) == pytest.approx(math.pi / 4)
    assert minimal_clifford_angle(4, 1) == pytest.approx(math.pi / 3)
    assert minimal_clifford_angle(5, 2) == pytest.approx(0.88607712379261371, rel=1e-15)
    for n, k in ((4, 1), (4, 2), (5, 2), (6, 3)):
        u = minimal_clifford_angle(n, k)
        pc = product_sphere_curvatures(ProductSphereState(n, k, u), 1.0)
        assert second_form_norm_sq(pc) == pytest.approx(n, rel=1e-12)


def test_clifford_stationary():
    u = minimal_clifford_angle(4, 2)
    traj = flow_product_sphere(ProductSphereState(4, 2, u), 1.0, 1.0, StepControl(dt=1e-3))
    assert not traj.collapsed
    assert max(abs(s.u - u) for s in traj.states) <= 1e-10


def test_geodesic_closed_form_vs_rk4():
    d0, n, K = math.pi / 3, 4, 1.0
    T = 0.9 * geodesic_sphere_extinction_time(d0, n, K)
    for t in np.linspace(0.0, T, 7):
        assert geodesic_sphere_rk4(d0, t, n, K, 1e-5) == pytest.approx(geodesic_sphere_closed_form(d0, t, n, K), rel=1e-8)
    assert geodesic_sphere_closed_form(math.pi / 2, 3.0, n, K) == pytest.approx(math.pi / 2)
    assert geodesic_sphere_closed_form(d0, 0.0, n, K) == pytest.approx(d0)


def test_tube_collapse_reports_factor():
    traj = flow_product_sphere(ProductSphereState(4, 1, 0.3), 1.0, 1.0)
    assert traj.collapsed and traj.collapse_factor == "S^3"


@pytest.mark.parametrize("n,k,u", [(4, 1, 0.8), (4, 2, 0.6), (5, 2, 1.1), (6, 3, 0.9)])
def test_evolution_identity_product(n, k, u):
    traj = flow_product_sphere(ProductSphereState(n, k, u), 0.02, 1.0, StepControl(dt=1e-4))
    res = evolution_residual(traj, 1.0)
    assert res.H_relative.max() <= 1e-5
    assert res.A2_relative.max() <= 1e-5


def test_evolution_identity_geodesic_sphere():
    d0, n, K = 1.0, 4, 1.0
    states = [GeodesicSphereState(n, geodesic_sphere_closed_form(d0, t, n, K), t) for t in np.arange(0, 0.05, 1e-4)]
    res = evolution_residual(states, K)
    assert res.H_relative.max() <= 1e-5


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 1.5), st.integers(4, 8))
def test_k2_sharpness_formula(u, n):
    s = ProductSphereState(n, 2, u)
    r, sr = s.radii(1.0)
    expected = 2 * (n - 4) / (n - 2) * sr * sr / (r * r)
    assert product_sphere_strict_margin(s, 1.0) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_k1_cylindrical_deficit_limit():
    vals = [product_sphere_cylindrical_deficit(ProductSphereState(4, 1, u), 1.0) for u in (1e-2, 1e-3, 1e-4)]
    assert all(v > 2.0 for v in vals)
    assert abs(vals[-1] - 2.0) <= 1e-7


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.5), st.sampled_from([(4, 1), (5, 1), (5, 2), (6, 2)]))
def test_pinching_preserved_along_ode(u, nk):
    n, k = nk
    K, alpha = 1.0, 0.5
    s0 = ProductSphereState(n, k, u)

    def margin(s):
        pc = product_sphere_curvatures(s, K)
        return quadratic_margin_HA(mean_curvature(pc), second_form_norm_sq(pc), K, alpha, n)

    if not margin(s0) < 0:
        return
    traj = flow_product_sphere(s0, 2.0, K)
    assert all(margin(s) < 0 for s in traj.states)


def test_mean_curvature_shortcut_agrees():
    s = ProductSphereState(5, 2, 0.7)
    assert product_sphere_mean_curvature(s, 2.0) == pytest.approx(mean_curvature(product_sphere_curvatures(s, 2.0)))
