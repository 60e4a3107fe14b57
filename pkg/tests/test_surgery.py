from __future__ import annotations

import math

import numpy as np
import pytest

from spheremcf import profiles
from spheremcf.geometry_core import derive_constants
from spheremcf.rotsym_flow import FlowState, ProfileCurve, area, profile_curvatures
from spheremcf.surgery import (
    RING,
    SPHERE,
    InvalidComponent,
    SurgeryBandViolation,
    SurgeryFailed,
    SurgeryParams,
    TopologyLedger,
    _runs,
    classify_component,
    detect_necks,
    lambda0_field,
    perform_surgery,
)

N_DIM = 4
# thresholds low enough that the initial neck of the dumbbell already qualifies
LOW = SurgeryParams(h_sharp=5.0, eta_sharp=0.1)


def _necks(profile, params=LOW):
    st = FlowState(profile)
    cv = st.record(N_DIM)
    return st, cv, detect_necks(st, cv, N_DIM, profile.K, params.resolved(N_DIM, profile.K))


@pytest.fixture(scope="module")
def dumbbell_necks():
    return _necks(profiles.dumbbell(1.0, 800))


def test_classify_components():
    assert classify_component(profiles.tube(0.3, 1.0, 60)) == RING
    assert classify_component(profiles.geodesic_sphere(1.0, 1.0, 60)) == SPHERE


def test_classify_rejects_arc_off_the_axis():
    P = profiles.geodesic_sphere(1.0, 1.0, 60).nodes[5:-5]
    with pytest.raises(InvalidComponent):
        classify_component(ProfileCurve(P, False, 1.0))


def test_classify_rejects_loop_touching_axis():
    P = profiles.tube(0.3, 1.0, 60).nodes.copy()
    P[10, 2] = 0.0
    with pytest.raises(InvalidComponent):
        classify_component(ProfileCurve(P, True, 1.0))


def test_ledger_split_and_discard_reconcile():
    led = TopologyLedger()
    root = led.add_initial(SPHERE)
    a, b = led.record_surgery(root, [SPHERE, SPHERE])
    assert led.reconciles() and led.splits == 1
    led.discard(a)
    led.discard(b)
    assert led.reconciles() and not led.live
    assert led.classification() == "S^n"
    with pytest.raises(KeyError):
        led.record_surgery(root, [SPHERE])


def test_ledger_counts_loops_as_handles():
    led = TopologyLedger()
    loop = led.add_initial(RING)
    (cap,) = led.record_surgery(loop, [SPHERE])
    assert led.splits == 0 and led.loop_surgeries == 1
    assert led.classification() == "S^1xS^(n-1)"
    led.add_initial(RING)
    assert led.classification() == "#2(S^1xS^(n-1))"
    assert led.reconciles()


def test_runs_wrap_on_loops():
    m = np.array([1, 1, 0, 0, 1, 0, 1], dtype=bool)
    assert _runs(m, closed=False) == [(0, 1), (4, 4), (6, 6)]
    assert _runs(m, closed=True) == [(4, 4), (6, 8)]
    assert _runs(np.ones(5, dtype=bool), closed=True) == [(0, 4)]


def test_lambda0_vanishes_on_cylinder_spectra():
    lam = np.array([2.0, 5.0])
    assert np.allclose(lambda0_field(np.zeros(2), lam, N_DIM), 0.0)
    # umbilic: distance to the cylinder is the full curvature
    assert lambda0_field(np.array([3.0]), np.array([3.0]), N_DIM)[0] == pytest.approx(3.0)


def test_dumbbell_has_one_waist_neck(dumbbell_necks):
    st, cv, necks = dumbbell_necks
    assert len(necks) == 1
    neck = necks[0]
    N = st.profile.size
    assert neck.center == N // 2
    assert neck.start < neck.center < neck.stop
    assert not neck.covers_component
    assert neck.accepted
    assert neck.r0 == pytest.approx((N_DIM - 1) / neck.H0)


def test_tube_neck_covers_component():
    _, _, necks = _necks(profiles.tube(0.3, 1.0, 120))
    assert len(necks) == 1 and necks[0].covers_component


def test_round_sphere_has_no_neck():
    _, _, necks = _necks(profiles.geodesic_sphere(1.0, 1.0, 120))
    assert necks == []


def test_default_thresholds_find_no_neck_at_start(dumbbell_necks):
    st, cv, _ = dumbbell_necks
    assert detect_necks(st, cv, N_DIM, 1.0, SurgeryParams().resolved(N_DIM, 1.0)) == []


@pytest.fixture(scope="module")
def dumbbell_surgery(dumbbell_necks):
    st, cv, necks = dumbbell_necks
    out = perform_surgery(st, cv, necks[0], N_DIM, LOW.resolved(N_DIM, 1.0), derive_constants(N_DIM, 0.5, 0.05), 0.1)
    return st, out


def test_surgery_splits_into_two_capped_spheres(dumbbell_surgery):
    _, out = dumbbell_surgery
    assert len(out.pieces) == 2
    for p in out.pieces:
        assert not p.closed
        assert p.nodes[0, 2] == 0.0 and p.nodes[-1, 2] == 0.0
        assert np.all(p.nodes[1:-1, 2] > 0.0)
        assert classify_component(p) == SPHERE
        assert np.allclose(np.linalg.norm(p.nodes, axis=1), 1.0, atol=1e-12)


def test_surgery_postconditions(dumbbell_surgery):
    st, out = dumbbell_surgery
    e = out.event
    assert e.area_removed > 0.0
    assert e.area_after == pytest.approx(sum(area(p, N_DIM) for p in out.pieces))
    assert e.area_before == pytest.approx(area(st.profile, N_DIM))
    lo, hi = e.band
    assert all(lo <= h <= hi for h in e.H_cut)
    assert e.fplus_caps == 0.0 and e.fplus_post <= e.fplus_pre
    assert e.cap_strict_margin < 0.0


def test_surgery_pieces_are_strictly_pinched(dumbbell_surgery):
    _, out = dumbbell_surgery
    for p in out.pieces:
        cv = profile_curvatures(p, N_DIM)
        assert np.max(cv.normA2 - cv.H**2 / (N_DIM - 2) - 4.0) < 0.0


def test_surgery_band_violation(dumbbell_necks):
    st, cv, necks = dumbbell_necks
    params = SurgeryParams(h_sharp=5.0, eta_sharp=0.1, r_surg=1e-4, Theta1=1e12).resolved(N_DIM, 1.0)
    with pytest.raises(SurgeryBandViolation):
        perform_surgery(st, cv, necks[0], N_DIM, params, derive_constants(N_DIM, 0.5, 0.05), 0.1)


def test_surgery_refuses_covering_neck():
    st, cv, necks = _necks(profiles.tube(0.3, 1.0, 120))
    with pytest.raises(SurgeryFailed):
        perform_surgery(st, cv, necks[0], N_DIM, LOW.resolved(N_DIM, 1.0), derive_constants(N_DIM, 0.5, 0.05), 0.1)


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        ({"epsilon": 0.5}, "epsilon"),
        ({"L": 5.0}, "L >= 10"),
        ({"tau": 0.0}, "tau"),
        ({"B": 2.0}, "B in"),
        ({"gate_orders": 3}, "gate_orders"),
        ({"Theta1": 10.0, "Theta2": 5.0}, "Theta1 < Theta2"),
        ({"r_surg": 1e-3, "Theta1": 1.0, "Theta2": 2.0, "Theta3": 3.0}, "trigger band"),
    ],
)
def test_surgery_params_violations(kwargs, fragment):
    errs = SurgeryParams(**kwargs).violations(N_DIM, 1.0)
    assert any(fragment in e for e in errs), errs
    with pytest.raises(ValueError):
        SurgeryParams(**kwargs).resolved(N_DIM, 1.0)


def test_resolved_defaults():
    sp = SurgeryParams().resolved(N_DIM, 1.0)
    assert sp.h_sharp == 20.0 * N_DIM
    assert sp.Theta1 == 4.0 * sp.h_sharp**2
    assert sp.Theta2 == 4.0 * sp.Theta1 and sp.Theta3 == 16.0 * sp.Theta1
    assert sp.k_neck == math.floor(2.0 / sp.epsilon)
    assert SurgeryParams().violations(N_DIM, 1.0) == []
