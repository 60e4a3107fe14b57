"""Neck detection, surgery on rotationally symmetric necks, and topology bookkeeping.

A neck is a maximal run of profile nodes with large mean curvature and a
small ratio of smallest principal curvature to H.  Surgery removes the
middle third of the run and closes each remaining piece with a cap that is
built in normal coordinates about the axis point below the cut, where the
hypersurface is rotationally symmetric about a straight line.  Every cap is
checked after construction; nothing about it is assumed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry_core import DerivedConstants, f_sigma_eta_HA, strict_margin_HA
from .profiles import exp_orbit, log_orbit
from .rotsym_flow import (
    FlowState,
    NodeCurvature,
    ProfileCurve,
    area,
    profile_curvatures,
    project_to_sphere,
    regrid,
)

log = logging.getLogger(__name__)

SPHERE = "sphere"
RING = "S1xSnm1"


class InvalidComponent(ValueError):
    """A profile that is neither a closed loop nor an arc with both ends on the axis."""


class SurgeryBandViolation(ValueError):
    pass


class SurgeryFailed(RuntimeError):
    """Post-conditions still fail after all retries."""


@dataclass(frozen=True)
class SurgeryParams:
    """Neck and surgery parameters; ``None`` entries are filled by :meth:`resolved`.

    ``gate_epsilon``, ``gate_ball`` and ``gate_orders`` define the neck
    quality test actually used to accept a neck: normalized quality numbers
    up to ``gate_orders`` measured over an arclength ball of ``gate_ball``
    radii.  The literal test (orders up to 2/epsilon over a ball of radius
    r0/epsilon) is always evaluated as far as the data allow and reported.
    """

    epsilon: float = 0.01
    k_neck: int | None = None
    L: float = 10.0
    tau: float = 1.0
    B: float = 0.5
    r_surg: float | None = None
    eta_sharp: float | None = None
    h_sharp: float | None = None
    Theta1: float | None = None
    Theta2: float | None = None
    Theta3: float | None = None
    theta_nd2: float | None = None
    gate_epsilon: float = 1.0
    gate_ball: float = 2.0
    gate_orders: int = 2
    max_retries: int = 3

    def violations(self, n: int, K: float) -> list[str]:
        errs = []
        if not 0 < self.epsilon <= 0.01:
            errs.append(f"epsilon must lie in (0, 1/100], got {self.epsilon}")
        if self.L < 10:
            errs.append(f"L >= 10 required, got {self.L}")
        if not self.tau > 0:
            errs.append(f"tau > 0 required, got {self.tau}")
        if not 0 <= self.B <= 1:
            errs.append(f"B in [0, 1] required, got {self.B}")
        if self.gate_orders not in (0, 1, 2):
            errs.append(f"gate_orders must be 0, 1 or 2, got {self.gate_orders}")
        if self.r_surg is not None and not self.r_surg > 0:
            errs.append(f"r_surg > 0 required, got {self.r_surg}")
        if self.h_sharp is not None and not self.h_sharp > 0:
            errs.append(f"h_sharp > 0 required, got {self.h_sharp}")
        if self.eta_sharp is not None and not self.eta_sharp > 0:
            errs.append(f"eta_sharp > 0 required, got {self.eta_sharp}")
        r = self.resolved(n, K, check=False)
        if not r.Theta1 < r.Theta2 < r.Theta3:
            errs.append(f"Theta1 < Theta2 < Theta3 required, got {r.Theta1}, {r.Theta2}, {r.Theta3}")
        if r.r_surg is not None and (n - 1) ** 2 / (100.0 * r.r_surg**2) > r.Theta1 * K:
            errs.append(f"trigger band inconsistent: (n-1)^2/(100 r^2) = {(n - 1) ** 2 / (100.0 * r.r_surg**2):.6g} > Theta1 K")
        return errs

    def resolved(self, n: int, K: float, check: bool = True) -> "SurgeryParams":
        if check:
            errs = self.violations(n, K)
            if errs:
                raise ValueError("; ".join(errs))
        h = self.h_sharp if self.h_sharp is not None else 20.0 * n
        eta = self.eta_sharp if self.eta_sharp is not None else 0.1 / n
        T1 = self.Theta1
        if T1 is None:
            T1 = 4.0 * h * h
            if self.r_surg is not None:
                T1 = max(T1, (n - 1) ** 2 / (50.0 * self.r_surg**2 * K))
        T2 = self.Theta2 if self.Theta2 is not None else 4.0 * T1
        T3 = self.Theta3 if self.Theta3 is not None else 16.0 * T1
        theta = self.theta_nd2 if self.theta_nd2 is not None else 1e4 * (n - 1) ** 2
        k = self.k_neck if self.k_neck is not None else int(math.floor(2.0 / self.epsilon))
        return replace(self, h_sharp=h, eta_sharp=eta, Theta1=T1, Theta2=T2, Theta3=T3, theta_nd2=theta, k_neck=k)


@dataclass
class NeckQuality:
    raw: list[float]
    normalized: list[float]
    ball_radius: float
    window: float
    partial_window: bool
    literal_ok: bool
    gated_ok: bool


@dataclass
class NeckRegion:
    start: int
    stop: int
    center: int
    H0: float
    r0: float
    quality: NeckQuality
    surgery_free: bool
    covers_component: bool

    @property
    def accepted(self) -> bool:
        return self.quality.gated_ok and self.surgery_free


@dataclass
class SurgeryEvent:
    t: float
    component: int
    neck: tuple[int, int, int]
    H0: float
    r0: float
    r_surg: float
    H_cut: tuple[float, float]
    band: tuple[float, float]
    area_before: float
    area_after: float
    area_removed: float
    fplus_pre: float
    fplus_post: float
    fplus_caps: float
    cap_strict_margin: float
    created: list[int]
    retries: int
    quality: list[float]
    partial_window: bool
    literal_quality_ok: bool
    cut_points: list[list[float]]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TopologyLedger:
    """Per-component tags and the counters that must reconcile."""

    tags: dict[int, str] = field(default_factory=dict)
    live: set[int] = field(default_factory=set)
    discarded: list[int] = field(default_factory=list)
    initial: int = 0
    splits: int = 0
    loop_surgeries: int = 0
    next_id: int = 0

    def add_initial(self, tag: str) -> int:
        cid = self._new(tag)
        self.initial += 1
        return cid

    def _new(self, tag: str) -> int:
        cid = self.next_id
        self.next_id += 1
        self.tags[cid] = tag
        self.live.add(cid)
        return cid

    def record_surgery(self, parent: int, child_tags: list[str]) -> list[int]:
        if parent not in self.live:
            raise KeyError(f"component {parent} is not live")
        was_loop = self.tags[parent] == RING
        self.live.remove(parent)
        self.splits += len(child_tags) - 1
        if was_loop:
            self.loop_surgeries += 1
        return [self._new(t) for t in child_tags]

    def discard(self, cid: int) -> None:
        self.live.remove(cid)
        self.discarded.append(cid)

    def reconciles(self) -> bool:
        return self.initial + self.splits - len(self.discarded) == len(self.live)

    @property
    def connected_sum_count(self) -> int:
        rings = sum(1 for c in self.discarded if self.tags[c] == RING) + sum(1 for c in self.live if self.tags[c] == RING)
        return rings + self.loop_surgeries

    def classification(self) -> str:
        N = self.connected_sum_count
        if N == 0:
            return "S^n"
        if N == 1:
            return "S^1xS^(n-1)"
        return f"#{N}(S^1xS^(n-1))"

    def to_dict(self) -> dict:
        return {
            "tags": {str(k): v for k, v in sorted(self.tags.items())},
            "live": sorted(self.live),
            "discarded": list(self.discarded),
            "initial": self.initial,
            "splits": self.splits,
            "loop_surgeries": self.loop_surgeries,
            "connected_sum_count": self.connected_sum_count,
            "reconciles": self.reconciles(),
        }


def classify_component(profile: ProfileCurve) -> str:
    """``"sphere"`` for an arc with both ends on the axis, ``"S1xSnm1"`` for a closed loop."""
    if profile.closed:
        if np.any(profile.nodes[:, 2] <= 0.0):
            raise InvalidComponent("closed loop touches the axis")
        return RING
    ends = profile.nodes[[0, -1], 2]
    if np.any(ends != 0.0):
        raise InvalidComponent(f"open arc must have both endpoints on the axis, got z = {ends.tolist()}")
    return SPHERE


# Neck quality.


def lambda0_field(kappa: np.ndarray, lam: np.ndarray, n: int) -> np.ndarray:
    """``sqrt(l_1^2 + sum_{j >= 2} (l_n - l_j)^2)`` for spectra ``{kappa, lam x (n-1)}``."""
    low = np.abs(kappa)
    high = np.sqrt(lam * lam + (n - 2) * (kappa - lam) ** 2)
    return np.where(kappa <= lam, low, high)


def _ball(frame, p: np.ndarray, radius: float) -> np.ndarray:
    k = int(np.argmin(np.sum((frame.nodes - p) ** 2, axis=1)))
    return np.abs(frame.s - frame.s[k]) <= radius


def neck_quality(
    state: FlowState,
    p0: int,
    r0: float,
    n: int,
    params: SurgeryParams,
    since: float = 0.0,
) -> NeckQuality:
    """Quality numbers ``Lambda_k`` over an arclength ball and a backward time window.

    The literal ball has radius ``r0/epsilon`` and the window is
    ``(t - 1e4 r0^2, t]`` cut at ``since`` (start of the run or the last
    nearby surgery).  Only orders 0, 1 and 2 are measurable; the literal
    test therefore succeeds only if ``floor(2/epsilon) <= 2``.
    """
    frames = [f for f in state.history if f.t > state.t - 1e4 * r0 * r0 and f.t >= since]
    if not frames or frames[-1].t < state.t:
        raise ValueError("history does not contain the current time")
    p = state.profile.nodes[p0]
    window_start = state.t - 1e4 * r0 * r0
    partial = window_start < max(since, 0.0) or frames[0].t > window_start
    # literal ball
    literal_r = r0 / params.epsilon
    gate_r = params.gate_ball * r0
    raw_lit = [0.0, 0.0, 0.0]
    raw_gate = [0.0, 0.0, 0.0]
    for fr in frames:
        lam0 = lambda0_field(fr.kappa, fr.lam, n)
        for radius, out in ((literal_r, raw_lit), (gate_r, raw_gate)):
            m = _ball(fr, p, radius)
            out[0] = max(out[0], float(lam0[m].max()))
            out[1] = max(out[1], float(fr.grad_A[m].max()))
            out[2] = max(out[2], float(fr.hess_A[m].max()))
    norm_lit = [raw_lit[k] * r0 ** (k + 1) for k in range(3)]
    norm_gate = [raw_gate[k] * r0 ** (k + 1) for k in range(3)]
    k_needed = params.k_neck if params.k_neck is not None else int(math.floor(2.0 / params.epsilon))
    literal_ok = k_needed <= 2 and all(v <= params.epsilon for v in norm_lit[: k_needed + 1]) and not partial
    gated_ok = all(v <= params.gate_epsilon for v in norm_gate[: params.gate_orders + 1])
    return NeckQuality(
        raw=raw_lit,
        normalized=norm_gate,
        ball_radius=gate_r,
        window=1e4 * r0 * r0,
        partial_window=partial,
        literal_ok=literal_ok,
        gated_ok=gated_ok,
    )


def nd1_mask(curv: NodeCurvature, K: float, params: SurgeryParams) -> np.ndarray:
    H = curv.H
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = curv.lambda_min / np.abs(H)
    return (np.abs(H) >= params.h_sharp * math.sqrt(K)) & (ratio <= params.eta_sharp)


def _runs(mask: np.ndarray, closed: bool) -> list[tuple[int, int]]:
    """Maximal runs of True as inclusive (start, stop); runs may wrap on loops."""
    N = len(mask)
    if not mask.any():
        return []
    if mask.all():
        return [(0, N - 1)]
    idx = np.flatnonzero(np.diff(np.concatenate([[0], mask.astype(int), [0]])))
    runs = [(int(a), int(b) - 1) for a, b in zip(idx[::2], idx[1::2])]
    if closed and mask[0] and mask[-1] and len(runs) > 1:
        first = runs.pop(0)
        last = runs.pop()
        runs.append((last[0], first[1] + N))
    return runs


def detect_necks(
    state: FlowState,
    curv: NodeCurvature,
    n: int,
    K: float,
    params: SurgeryParams,
    past_events: list[SurgeryEvent] = (),
) -> list[NeckRegion]:
    """Disjoint node runs satisfying ND1, with quality numbers and the surgery-free flag."""
    mask = nd1_mask(curv, K, params)
    N = len(mask)
    out = []
    for a, b in _runs(mask, state.profile.closed):
        covers = (b - a + 1) >= N
        idx = np.arange(a, b + 1) % N
        c = int(idx[int(np.argmax(curv.H[idx]))])
        H0 = float(curv.H[c])
        r0 = (n - 1) / H0
        radius = (n - 1) * (params.L + 1.0) / H0
        duration = params.theta_nd2 / (H0 * H0)
        p = state.profile.nodes[c]
        since = 0.0
        free = True
        for ev in past_events:
            if state.t - ev.t >= duration:
                continue
            d = min(float(np.linalg.norm(np.asarray(q) - p)) for q in ev.cut_points)
            if d <= radius:
                free = False
                since = max(since, ev.t)
        q = neck_quality(state, c, r0, n, params, since=since)
        out.append(NeckRegion(start=a, stop=b, center=c, H0=H0, r0=r0, quality=q, surgery_free=free, covers_component=covers))
    return out


# Caps.


def _cap_shape(xi: np.ndarray, B: float) -> np.ndarray:
    """``sqrt(1 - q)``, ``q = (1-B) xi^4 + B xi^5``: flat to third order at 0, zero at 1."""
    q = (1.0 - B) * xi**4 + B * xi**5
    return np.sqrt(np.clip(1.0 - q, 0.0, None))


def _axis_frame(P: np.ndarray, forward: np.ndarray, K: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Axis foot ``b`` of ``P`` and the tangent directions ``e1`` (along the axis, toward ``forward``) and ``e2 = e_z``."""
    rho = 1.0 / math.sqrt(K)
    b = np.array([P[0], P[1], 0.0])
    b *= rho / np.linalg.norm(b)
    e1 = np.array([-b[1], b[0], 0.0]) / rho
    if float(e1 @ forward) < 0.0:
        e1 = -e1
    return b, e1, np.array([0.0, 0.0, 1.0])


def build_cap(seq: np.ndarray, length: float, B: float, spacing: float, K: float) -> np.ndarray:
    """Cap nodes replacing ``seq[1:]``, where ``seq[0]`` is the cut node.

    ``seq`` runs from the cut into the region being removed.  In normal
    coordinates at the axis foot of the cut the profile is a graph ``Z(X)``
    over the axis; the cap is ``Z(X) sqrt(1 - q((X - X_c)/length))``.
    Returned nodes run away from the cut and end on the axis.
    """
    b, e1, e2 = _axis_frame(seq[0], seq[1] - seq[0], K)
    X, Z = log_orbit(b, e1, e2, seq, K)
    bad = np.flatnonzero(np.diff(X) <= 0.0)
    stop = int(bad[0]) + 1 if bad.size else len(X)
    Xs, Zs = X[:stop], Z[:stop]
    Xc = Xs[0]
    if len(Xs) < 4 or Xs[-1] < Xc + length:
        raise SurgeryFailed("profile is not a graph over the axis across the cap length")
    graph = CubicSpline(Xs, Zs)
    m = max(int(math.ceil(length / spacing)), 8)
    Xn = Xc + length * np.linspace(0.0, 1.0, m + 1)[1:]
    Zn = graph(Xn) * _cap_shape((Xn - Xc) / length, B)
    Zn[-1] = 0.0
    Q = exp_orbit(b, e1, e2, Xn, Zn, K)
    Q[-1, 2] = 0.0
    return Q


@dataclass
class _Attempt:
    pieces: list[ProfileCurve]
    caps: list[tuple[int, int, int]]  # (piece index, first cap node, last cap node)


def _assemble(profile: ProfileCurve, iL: int, iR: int, length: float, B: float, spacing: float) -> _Attempt:
    """Cut at nodes ``iL < iR`` (``iR`` may exceed N on loops) and cap the pieces."""
    P = profile.nodes
    K = profile.K
    N = len(P)
    if profile.closed:
        keep = P[np.arange(iR, iL + N + 1) % N]
        # removed region, traversed from each cut inward
        fwd = P[np.arange(iL, iL + N) % N]
        bwd = P[np.arange(iR, iR - N, -1) % N]
        head = build_cap(bwd, length, B, spacing, K)[::-1]
        tail = build_cap(fwd, length, B, spacing, K)
        nodes = np.concatenate([head, keep, tail])
        piece = ProfileCurve(project_to_sphere(nodes, K, False), False, K)
        return _Attempt([piece], [(0, 0, len(head) - 1), (0, len(head) + len(keep), len(nodes) - 1)])
    left = build_cap(P[iL:], length, B, spacing, K)
    right = build_cap(P[iR::-1], length, B, spacing, K)[::-1]
    A = np.concatenate([P[: iL + 1], left])
    C = np.concatenate([right, P[iR:]])
    pA = ProfileCurve(project_to_sphere(A, K, False), False, K)
    pC = ProfileCurve(project_to_sphere(C, K, False), False, K)
    return _Attempt([pA, pC], [(0, iL + 1, len(A) - 1), (1, 0, len(right) - 1)])


@dataclass
class SurgeryOutcome:
    pieces: list[ProfileCurve]
    event: SurgeryEvent


def _fplus(curv: NodeCurvature, t: float, K: float, n: int, sigma: float, consts: DerivedConstants) -> np.ndarray:
    f = f_sigma_eta_HA(curv.H, curv.normA2, K, n, sigma, consts)
    return np.maximum(math.exp(2.0 * consts.delta * K * t) * f, 0.0)


def perform_surgery(
    state: FlowState,
    curv: NodeCurvature,
    neck: NeckRegion,
    n: int,
    params: SurgeryParams,
    consts: DerivedConstants,
    sigma: float,
    component: int = 0,
    spacing: float | None = None,
) -> SurgeryOutcome:
    """Remove the middle third of ``neck`` and cap both sides, verifying the result.

    Post-conditions: f_+ on the caps vanishes and its maximum over the
    modified region does not exceed the maximum over the removed region;
    every cap node is strictly pinched; total area strictly decreases.  On
    failure the cap length is halved and the surgery retried.

    Raises
    ------
    SurgeryBandViolation
        If H at a cut point lies outside ``[(n-1)/(10r), 10(n-1)/r]``.
    SurgeryFailed
        If the post-conditions fail on every retry.
    """
    profile = state.profile
    K = profile.K
    N = profile.size
    if neck.covers_component:
        raise SurgeryFailed("neck covers the whole component; discard it instead")
    a, b = neck.start, neck.stop
    m = b - a
    iL, iR = a + m // 3, b - m // 3
    if iR - iL < 2:
        raise SurgeryFailed("neck too short to remove a middle third")
    r = params.r_surg if params.r_surg is not None else neck.r0
    lo, hi = (n - 1) / (10.0 * r), 10.0 * (n - 1) / r
    H_cut = (float(curv.H[iL % N]), float(curv.H[iR % N]))
    for h in H_cut:
        if not lo <= h <= hi:
            raise SurgeryBandViolation(f"H={h:.6g} at cut outside band [{lo:.6g}, {hi:.6g}]")
    h = spacing if spacing is not None else float(np.median(profile.segment_lengths()))
    area_before = area(profile, n)
    fplus_all = _fplus(curv, state.t, K, n, sigma, consts)
    removed = np.arange(iL, iR + 1) % N
    fplus_pre = float(fplus_all[removed].max())
    r_cut = float(min(profile.nodes[iL % N, 2], profile.nodes[iR % N, 2]))
    base_length = params.tau * params.L * r_cut / 3.0
    failures = []
    for attempt in range(params.max_retries + 1):
        length = base_length * 0.5**attempt
        try:
            trial = _assemble(profile, iL, iR, length, params.B, h)
        except SurgeryFailed as exc:
            failures.append(str(exc))
            continue
        fp_caps = 0.0
        margin_caps = -math.inf
        pieces = []
        for piece in trial.pieces:
            pieces.append(regrid(piece, h_min=0.5 * h * (1.0 + 1e-9)))
        # evaluate the caps on the unresampled pieces, where cap nodes are known
        for (pi, c0, c1) in trial.caps:
            cc = profile_curvatures(trial.pieces[pi], n)
            sl = slice(c0, c1 + 1)
            fp_caps = max(fp_caps, float(_fplus(cc, state.t, K, n, sigma, consts)[sl].max()))
            margin_caps = max(margin_caps, float(strict_margin_HA(cc.H[sl], cc.normA2[sl], K, n).max()))
        area_after = sum(area(p, n) for p in pieces)
        problems = []
        if fp_caps > 0.0:
            problems.append(f"f_+ = {fp_caps:.3g} on caps")
        if fp_caps > fplus_pre:
            problems.append("f_+ increased on the modified region")
        if not margin_caps < 0.0:
            problems.append(f"caps not strictly pinched (margin {margin_caps:.3g})")
        if not area_after < area_before:
            problems.append("area did not decrease")
        if problems:
            failures.append("; ".join(problems))
            log.info("surgery attempt %d rejected: %s", attempt, failures[-1])
            continue
        event = SurgeryEvent(
            t=state.t,
            component=component,
            neck=(neck.start, neck.stop, neck.center),
            H0=neck.H0,
            r0=neck.r0,
            r_surg=r,
            H_cut=H_cut,
            band=(lo, hi),
            area_before=area_before,
            area_after=area_after,
            area_removed=area_before - area_after,
            fplus_pre=fplus_pre,
            fplus_post=fp_caps,
            fplus_caps=fp_caps,
            cap_strict_margin=margin_caps,
            created=[],
            retries=attempt,
            quality=list(neck.quality.normalized),
            partial_window=neck.quality.partial_window,
            literal_quality_ok=neck.quality.literal_ok,
            cut_points=[profile.nodes[iL % N].tolist(), profile.nodes[iR % N].tolist()],
        )
        return SurgeryOutcome(pieces=pieces, event=event)
    raise SurgeryFailed("all surgery attempts failed: " + " | ".join(failures))
