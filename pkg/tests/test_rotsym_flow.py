from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spheremcf import oracle, profiles
from spheremcf.cli import profile_oracle_check
from spheremcf.exact_models import ProductSphereState, flow_product_sphere, product_sphere_curvatures
from spheremcf.rotsym_flow import (
    CFLViolation,
    FlowState,
    ProfileCurve,
    StepControl,
    area,
    embed_profile,
    finite_diff_derivatives,
    inscribed_exscribed,
    laplacian,
    mcf_step,
    profile_curvatures,
    regrid,
    self_intersects,
    stable_dt,
)

N4 = 4
S4_AREA = 8 * math.pi**2 / 3


@pytest.fixture(scope="module")
def dumbbell():
    return profiles.dumbbell(1.0, 800)


def test_round_profile_curvatures():
    c = profile_curvatures(profiles.geodesic_sphere(math.pi / 4, 1.0, 400), N4)
    assert np.allclose(c.lambda_rot, 1.0, atol=1e-9)
    assert np.allclose(c.kappa_prof, 1.0, atol=1e-9)
    assert np.allclose(c.H, 4.0, atol=1e-9)


def test_round_profile_matches_embedding_oracle():
    d, K = 1.0, 1.0
    X = oracle.rotational_chart(oracle.geodesic_circle_profile(d, K), N4)
    p = oracle.geodesic_circle_profile(d, K)(1.0)
    T = np.array([0.0, -math.sin(1.0), math.cos(1.0)])
    nu = np.cross(T, p / np.linalg.norm(p))
    cn = oracle.curvature_norms(X, np.array([1.0, 0, 0, 0]), np.concatenate([nu, np.zeros(3)]), second_derivative=False)
    assert np.allclose(cn.principal, 1 / math.tan(d), rtol=1e-5)


def test_tube_matches_exact_model():
    c = profile_curvatures(profiles.tube(0.3, 1.0, 200), N4)
    ex = product_sphere_curvatures(ProductSphereState(4, 1, 0.3), 1.0).values
    assert np.allclose(c.kappa_prof, ex[0], rtol=1e-6)
    assert np.allclose(c.lambda_rot, ex[1], rtol=1e-6)


def test_equator_totally_geodesic_and_stationary():
    e = profiles.equator(1.0, 200)
    c = profile_curvatures(e, N4)
    assert np.abs(c.H).max() <= 1e-10 and np.abs(c.normA2).max() <= 1e-10
    s = FlowState(e)
    for _ in range(200):
        s = mcf_step(s, N4)
    assert np.abs(s.profile.nodes - e.nodes).max() / s.t <= 1e-8


def test_tube_pde_matches_ode():
    K, u0 = 1.0, 0.5
    s = FlowState(profiles.tube(u0, K, 120))
    while s.t < 0.02:
        s = mcf_step(s, N4)
    traj = flow_product_sphere(ProductSphereState(4, 1, u0), s.t, K, None)
    P = s.profile.nodes
    # the tube is the circle of geodesic radius u about the orbit point (0, 0, rho)... measured via curvature
    c = profile_curvatures(s.profile, N4)
    u_pde = math.atan(-c.kappa_prof.mean() / math.sqrt(K))
    assert u_pde == pytest.approx(traj.states[-1].u, rel=1e-3)
    assert np.allclose(np.einsum("ij,ij->i", P, P), 1 / K)


def test_homogeneous_gradients_vanish():
    for prof in (profiles.tube(0.3, 1.0, 200), profiles.geodesic_sphere(1.0, 1.0, 400)):
        c = profile_curvatures(prof, N4)
        scale = c.normA2.max()
        assert np.abs(c.grad_A).max() <= 1e-6 * scale
        assert np.abs(c.grad_H).max() <= 1e-6 * scale


def test_area_examples():
    assert area(profiles.equator(1.0, 400), N4) == pytest.approx(S4_AREA, rel=1e-4)
    d = math.pi / 4
    assert area(profiles.geodesic_sphere(d, 1.0, 400), N4) == pytest.approx(math.sin(d) ** 4 * S4_AREA, rel=1e-4)


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
def test_area_scaling(c):
    K = 1.0
    a1 = area(profiles.geodesic_sphere(0.7, K, 300), N4)
    a2 = area(profiles.geodesic_sphere(0.7 * c, K / c**2, 300), N4)
    assert a2 == pytest.approx(c**4 * a1, rel=1e-12)


def test_regrid_idempotent_and_preserves_curvature():
    p = profiles.geodesic_sphere(math.pi / 4, 1.0, 400)
    r = regrid(p, 400)
    assert np.abs(r.nodes - p.nodes).max() <= 1e-10
    q = regrid(p, 257)
    c = profile_curvatures(q, N4)
    assert np.allclose(c.H, 4.0, atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 0.1), st.integers(2, 6), st.integers(60, 300))
def test_regrid_equalizes_spacing(amp, mode, n_nodes):
    p = profiles.equator(1.0, 97, amp, mode)
    # distort the parametrization before resampling
    P = p.nodes
    w = np.linspace(0, 1, len(P)) ** 1.7
    idx = np.interp(w, np.linspace(0, 1, len(P)), np.arange(len(P)))
    Q = np.array([np.interp(idx, np.arange(len(P)), P[:, j]) for j in range(3)]).T
    Q /= np.linalg.norm(Q, axis=1)[:, None]
    q = regrid(ProfileCurve(Q, False, 1.0), n_nodes)
    assert q.spacing_ratio() <= 1.01
    assert not q.violations()


def test_dumbbell_curvatures_match_oracle(dumbbell):
    rows = profile_oracle_check(dumbbell, N4, samples=5)
    for r in rows:
        for key, tol in (("H", 1e-4), ("normA2", 1e-4), ("gradA2", 1e-2)):
            o, f = r[key]
            assert f == pytest.approx(o, rel=tol, abs=tol)


def test_area_nonincreasing_on_dumbbell(dumbbell):
    s = FlowState(dumbbell)
    a = area(s.profile, N4)
    for _ in range(100):
        s = mcf_step(s, N4)
        b = area(s.profile, N4)
        assert b <= a * (1 + 1e-8)
        a = b


def test_pde_H_evolution_identity(dumbbell):
    # dH/dt = Laplacian H + (|A|^2 + nK) H at fixed node index
    s = FlowState(dumbbell)
    s.record(N4)
    dt = 0.5 * stable_dt(s.profile, StepControl(), N4)
    for _ in range(3):
        s = mcf_step(s, N4, StepControl(dt=dt), record=True)
    d = finite_diff_derivatives(s.history)
    c = profile_curvatures(s.profile, N4)
    rhs = laplacian(s.profile, c.H, N4) + (c.normA2 + N4 * s.profile.K) * c.H
    inner = slice(50, -50)
    scale = np.abs(rhs[inner]).max()
    assert np.abs(d.dH_dt[inner] - rhs[inner]).max() <= 2e-2 * scale


def test_cfl_violation_raises():
    p = profiles.geodesic_sphere(1.0, 1.0, 200)
    h = p.segment_lengths().min()
    with pytest.raises(CFLViolation):
        mcf_step(FlowState(p), N4, StepControl(dt=h * h))


def test_embedding_axis_endpoint_is_point():
    p = profiles.geodesic_sphere(1.0, 1.0, 50)
    W = np.random.default_rng(0).normal(size=(5, N4))
    W /= np.linalg.norm(W, axis=1)[:, None]
    E = embed_profile(p, W)
    assert np.allclose(E[0], E[0, 0])
    assert np.allclose(E[-1], E[-1, 0])
    assert np.allclose(np.linalg.norm(E, axis=2), 1.0)


def test_inscribed_exscribed_on_sphere():
    p = profiles.geodesic_sphere(1.0, 1.0, 200)
    assert not self_intersects(p)
    kb, ku = inscribed_exscribed(p, N4)
    # a geodesic sphere is its own inscribed and exscribed sphere
    assert np.allclose(kb, 1 / math.tan(1.0), rtol=1e-6)
    assert np.allclose(ku, 1 / math.tan(1.0), rtol=1e-6)


def test_nodal_cubic_self_intersects():
    t = np.linspace(-1.5, 1.5, 301)
    y = 0.3 * (t * t - 1.0)
    z = 0.3 * (0.3 * t * (t * t - 1.0) + 0.5)
    P = np.column_stack([np.ones_like(t), y, z])
    P /= np.linalg.norm(P, axis=1)[:, None]
    assert self_intersects(ProfileCurve(P, False, 1.0))
    assert not self_intersects(ProfileCurve(P[t < 0.9], False, 1.0))


def _great_circle_arc(phi: np.ndarray, wobble: np.ndarray) -> np.ndarray:
    P = np.column_stack([wobble, np.cos(phi), np.sin(phi)])
    return P / np.linalg.norm(P, axis=1)[:, None]


def test_near_geodesic_profile_is_embedded():
    # deviations of order 1e-10 straddle any fixed tie tolerance
    phi = np.linspace(0.1, 3.0, 200)
    rng = np.random.default_rng(3)
    P = _great_circle_arc(phi, 1e-10 * np.cos(3 * phi) + 1e-13 * rng.standard_normal(phi.size))
    assert not self_intersects(ProfileCurve(P, False, 1.0))


def test_folded_geodesic_overlap_is_reported():
    phi = np.concatenate([np.linspace(0.2, 1.5, 40), np.linspace(1.5, 0.8, 25)[1:]])
    P = _great_circle_arc(phi, np.zeros_like(phi))
    assert self_intersects(ProfileCurve(P, False, 1.0))
