"""Mean curvature flow of SO(n)-invariant hypersurfaces of S^{n+1}_K.

A hypersurface invariant under rotations of the last n ambient coordinates
is determined by its profile curve in the orbit space, the closed upper
hemisphere ``{x^2 + y^2 + z^2 = 1/K, z >= 0}``.  The point ``(x, y, z)``
stands for the orbit ``{(x, y, z w) : w in S^{n-1}}``.  The axis ``z = 0``
is a great circle; a profile arc ending on it on both sides is an n-sphere,
a closed loop avoiding it is ``S^1 x S^{n-1}``.

The unit normal of the profile is ``nu = T x p/|p|`` (``T`` the unit tangent
in the direction of increasing node index).  The principal curvatures are
the geodesic curvature ``kappa`` of the profile (multiplicity 1) and the
rotational curvature ``lambda = nu_z / z`` (multiplicity n-1).
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma as gamma_fn


class DegenerateProfile(ValueError):
    """Coincident nodes or an otherwise unusable profile."""


class CFLViolation(ValueError):
    pass


class NumericalBlowup(FloatingPointError):
    pass


class NotEmbedded(ValueError):
    pass


def sphere_volume(m: int) -> float:
    """Volume of the unit m-sphere in R^{m+1}."""
    return 2.0 * math.pi ** ((m + 1) / 2.0) / gamma_fn((m + 1) / 2.0)


@dataclass
class ProfileCurve:
    """Profile of a rotational hypersurface; ``nodes`` has shape (N, 3)."""

    nodes: np.ndarray
    closed: bool
    K: float

    def __post_init__(self) -> None:
        self.nodes = np.asarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2 or self.nodes.shape[1] != 3:
            raise DegenerateProfile("nodes must have shape (N, 3)")
        if len(self.nodes) < 5:
            raise DegenerateProfile("a profile needs at least 5 nodes")

    @property
    def rho(self) -> float:
        return 1.0 / math.sqrt(self.K)

    @property
    def topology(self) -> str:
        return "closed-loop" if self.closed else "open-arc"

    @property
    def size(self) -> int:
        return len(self.nodes)

    def segment_lengths(self) -> np.ndarray:
        P = self.nodes
        if self.closed:
            return np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
        return np.linalg.norm(np.diff(P, axis=0), axis=1)

    def length(self) -> float:
        return float(self.segment_lengths().sum())

    def arclength(self) -> np.ndarray:
        seg = self.segment_lengths()
        if self.closed:
            seg = seg[:-1]
        return np.concatenate([[0.0], np.cumsum(seg)])

    def spacing_ratio(self) -> float:
        seg = self.segment_lengths()
        return float(seg.max() / seg.min())

    def violations(self, tol: float = 1e-10) -> list[str]:
        errs = []
        r2 = np.einsum("ij,ij->i", self.nodes, self.nodes)
        if np.any(np.abs(r2 - 1.0 / self.K) > tol / self.K):
            errs.append("node off the orbit sphere")
        if np.any(self.nodes[:, 2] < 0.0):
            errs.append("node below the axis")
        seg = self.segment_lengths()
        if np.any(seg <= 0.0):
            errs.append("coincident nodes")
        if not self.closed:
            if self.nodes[0, 2] != 0.0 or self.nodes[-1, 2] != 0.0:
                errs.append("open arc must end on the axis")
            if self.nodes[1, 2] <= 0.1 * seg[0] or self.nodes[-2, 2] <= 0.1 * seg[-1]:
                errs.append("open arc must leave the axis transversally")
        elif np.any(self.nodes[:, 2] <= 0.0):
            errs.append("closed loop touches the axis")
        return errs

    def copy(self) -> "ProfileCurve":
        return ProfileCurve(self.nodes.copy(), self.closed, self.K)


def _reflect(P: np.ndarray) -> np.ndarray:
    Q = P.copy()
    Q[..., 2] *= -1.0
    return Q


def _extended(P: np.ndarray, closed: bool, width: int = 1) -> np.ndarray:
    """Nodes with ``width`` ghosts on each side (periodic or axis reflection)."""
    if closed:
        return np.concatenate([P[-width:], P, P[:width]])
    left = _reflect(P[1 : width + 1][::-1])
    right = _reflect(P[-width - 1 : -1][::-1])
    return np.concatenate([left, P, right])


def _ghost_scalar(f: np.ndarray, closed: bool, parity: int) -> np.ndarray:
    if closed:
        return np.concatenate([f[-1:], f, f[:1]])
    return np.concatenate([parity * f[1:2], f, parity * f[-2:-1]])


def _d1_d2(f_ext: np.ndarray, hm: np.ndarray, hp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second order first and second derivatives on a nonuniform grid.

    ``f_ext`` carries one ghost on each side; ``hm``/``hp`` are the spacings
    to the previous/next node.  Works on trailing vector dimensions too.
    """
    fm, f0, fp = f_ext[:-2], f_ext[1:-1], f_ext[2:]
    if f_ext.ndim > 1:
        hm = hm[:, None]
        hp = hp[:, None]
    d1 = (hm * hm * (fp - f0) + hp * hp * (f0 - fm)) / (hm * hp * (hm + hp))
    d2 = 2.0 * ((fp - f0) / hp - (f0 - fm) / hm) / (hm + hp)
    return d1, d2


@dataclass
class NodeCurvature:
    """Per-node curvature data; every field is an array over the nodes."""

    s: np.ndarray
    z: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    lambda_rot: np.ndarray
    kappa_prof: np.ndarray
    H: np.ndarray
    normA2: np.ndarray
    dkappa: np.ndarray
    dlambda: np.ndarray
    grad_H: np.ndarray
    grad_A: np.ndarray
    hess_A: np.ndarray
    near_pinch: bool

    @property
    def lambda_min(self) -> np.ndarray:
        return np.minimum(self.kappa_prof, self.lambda_rot)

    @property
    def lambda_max(self) -> np.ndarray:
        return np.maximum(self.kappa_prof, self.lambda_rot)


def _spacings(P: np.ndarray, closed: bool) -> tuple[np.ndarray, np.ndarray]:
    E = _extended(P, closed)
    seg = np.linalg.norm(np.diff(E, axis=0), axis=1)
    if np.any(seg <= 0.0):
        raise DegenerateProfile("coincident nodes")
    return seg[:-1], seg[1:]


def frame(profile: ProfileCurve) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Unit tangent, unit normal, raw second derivative and spacings at every node."""
    P = profile.nodes
    hm, hp = _spacings(P, profile.closed)
    d1, d2 = _d1_d2(_extended(P, profile.closed), hm, hp)
    pos = P / np.linalg.norm(P, axis=1)[:, None]
    T = d1 - np.einsum("ij,ij->i", d1, pos)[:, None] * pos
    T /= np.linalg.norm(T, axis=1)[:, None]
    nu = _cross(T, pos)
    return T, nu, d2, hm, hp


def profile_curvatures(profile: ProfileCurve, n: int, pinch_fraction: float = 1e-6) -> NodeCurvature:
    """Principal curvatures and their derivatives along the profile."""
    P = profile.nodes
    closed = profile.closed
    T, nu, d2, hm, hp = frame(profile)
    kappa = -np.einsum("ij,ij->i", nu, d2)
    z = P[:, 2]
    lam = np.empty_like(z)
    near_pinch = False
    if closed:
        lam[:] = nu[:, 2] / z
        near_pinch = bool(z.min() < pinch_fraction * profile.rho)
    else:
        inner = slice(1, -1)
        lam[inner] = nu[inner, 2] / z[inner]
        near_pinch = bool(z[inner].min() < pinch_fraction * profile.rho)
        s = profile.arclength()
        # even extrapolation a + b s^2 from the two nearest interior nodes
        for end, i1, i2 in ((0, 1, 2), (-1, -2, -3)):
            s1 = abs(s[i1] - s[end])
            s2 = abs(s[i2] - s[end])
            lam[end] = (s2 * s2 * lam[i1] - s1 * s1 * lam[i2]) / (s2 * s2 - s1 * s1)
    H = kappa + (n - 1) * lam
    A2 = kappa * kappa + (n - 1) * lam * lam

    dk, ddk = _d1_d2(_ghost_scalar(kappa, closed, 1), hm, hp)
    dl, ddl = _d1_d2(_ghost_scalar(lam, closed, 1), hm, hp)
    dz, _ = _d1_d2(_ghost_scalar(z, closed, -1), hm, hp)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = dz / z
        mix = w * (dk - 2.0 * dl)
        rot = w * dl
    if not closed:
        for end in (0, -1):
            mix[end] = ddk[end] - 2.0 * ddl[end]
            rot[end] = ddl[end]
    gradA2 = dk * dk + 3.0 * (n - 1) * dl * dl
    gradH = dk + (n - 1) * dl
    hessA2 = ddk * ddk + 3.0 * (n - 1) * ddl * ddl + 3.0 * (n - 1) * mix * mix + 3.0 * (n - 1) * (n + 1) * rot * rot
    if closed:
        s = np.concatenate([[0.0], np.cumsum(hp[:-1])])
    return NodeCurvature(
        s=s,
        z=z,
        tangent=T,
        normal=nu,
        lambda_rot=lam,
        kappa_prof=kappa,
        H=H,
        normA2=A2,
        dkappa=dk,
        dlambda=dl,
        grad_H=np.abs(gradH),
        grad_A=np.sqrt(gradA2),
        hess_A=np.sqrt(hessA2),
        near_pinch=near_pinch,
    )


def embed_profile(profile: ProfileCurve, orbit_samples: np.ndarray) -> np.ndarray:
    """Points ``(x, y, z w)`` in R^{n+2}; ``orbit_samples`` has shape (M, n), unit rows.

    Returns an array of shape (N, M, n+2).
    """
    W = np.asarray(orbit_samples, dtype=float)
    P = profile.nodes
    N, M = len(P), len(W)
    out = np.empty((N, M, 2 + W.shape[1]))
    out[:, :, 0] = P[:, 0:1]
    out[:, :, 1] = P[:, 1:2]
    out[:, :, 2:] = P[:, 2][:, None, None] * W[None, :, :]
    return out


def area(profile: ProfileCurve, n: int) -> float:
    """``|S^{n-1}| * integral of z^{n-1} ds`` by the trapezoid rule."""
    P = profile.nodes
    zpow = np.abs(P[:, 2]) ** (n - 1)
    seg = profile.segment_lengths()
    if profile.closed:
        integral = float(np.sum(0.5 * (zpow + np.roll(zpow, -1)) * seg))
    else:
        integral = float(np.sum(0.5 * (zpow[:-1] + zpow[1:]) * seg))
    return sphere_volume(n - 1) * integral


def project_to_sphere(P: np.ndarray, K: float, closed: bool) -> np.ndarray:
    rho = 1.0 / math.sqrt(K)
    if not closed:
        P[0, 2] = 0.0
        P[-1, 2] = 0.0
    P *= (rho / np.linalg.norm(P, axis=1))[:, None]
    return P


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _velocity_nodes(P: np.ndarray, closed: bool, n: int, with_A2: bool = False):
    """Lean evaluation of ``-H nu``: same discretization as :func:`profile_curvatures`.

    With ``with_A2`` the maximum of ``|A|^2`` is returned as well.
    """
    if closed:
        E = np.concatenate([P[-1:], P, P[:1]])
    else:
        E = np.concatenate([P[1:2], P, P[-2:-1]])
        E[0, 2] = -E[0, 2]
        E[-1, 2] = -E[-1, 2]
    D = np.diff(E, axis=0)
    seg = np.sqrt(np.einsum("ij,ij->i", D, D))
    hm, hp = seg[:-1, None], seg[1:, None]
    fwd, bwd = D[1:], D[:-1]
    d1 = (hm * hm * fwd + hp * hp * bwd) / (hm * hp * (hm + hp))
    d2 = 2.0 * (fwd / hp - bwd / hm) / (hm + hp)
    pos = P / np.sqrt(np.einsum("ij,ij->i", P, P))[:, None]
    T = d1 - np.einsum("ij,ij->i", d1, pos)[:, None] * pos
    T /= np.sqrt(np.einsum("ij,ij->i", T, T))[:, None]
    nu = _cross(T, pos)
    kappa = -np.einsum("ij,ij->i", nu, d2)
    z = P[:, 2]
    if closed:
        lam = nu[:, 2] / z
    else:
        lam = np.empty_like(z)
        lam[1:-1] = nu[1:-1, 2] / z[1:-1]
        s1, s2 = seg[1], seg[1] + seg[2]
        lam[0] = (s2 * s2 * lam[1] - s1 * s1 * lam[2]) / (s2 * s2 - s1 * s1)
        s1, s2 = seg[-2], seg[-2] + seg[-3]
        lam[-1] = (s2 * s2 * lam[-2] - s1 * s1 * lam[-3]) / (s2 * s2 - s1 * s1)
    H = kappa + (n - 1) * lam
    if with_A2:
        return -H[:, None] * nu, float(np.max(kappa * kappa + (n - 1) * lam * lam))
    return -H[:, None] * nu


def velocity(profile: ProfileCurve, n: int) -> np.ndarray:
    """Normal velocity ``-H nu`` at every node."""
    return _velocity_nodes(profile.nodes, profile.closed, n)


@dataclass(frozen=True)
class StepControl:
    """``dt <= c_cfl h_min^2`` (diffusion) and ``dt <= c_react/(max|A|^2 + nK)`` (reaction)."""

    c_cfl: float = 0.2
    c_react: float = 0.02
    dt: float | None = None


def stable_dt(profile: ProfileCurve, control: StepControl, n: int | None = None) -> float:
    h = float(profile.segment_lengths().min())
    limit = control.c_cfl * h * h
    if n is not None:
        _, A2 = _velocity_nodes(profile.nodes, profile.closed, n, with_A2=True)
        limit = min(limit, control.c_react / (A2 + n * profile.K))
    if control.dt is None:
        return limit
    return min(control.dt, limit)


@dataclass
class HistoryFrame:
    t: float
    s: np.ndarray
    H: np.ndarray
    normA2: np.ndarray
    kappa: np.ndarray
    lam: np.ndarray
    grad_A: np.ndarray
    grad_H: np.ndarray
    hess_A: np.ndarray
    z: np.ndarray
    nodes: np.ndarray
    closed: bool
    generation: int = 0


@dataclass
class FlowState:
    profile: ProfileCurve
    t: float = 0.0
    history: deque = field(default_factory=lambda: deque(maxlen=64))
    generation: int = 0

    def record(self, n: int, curv: NodeCurvature | None = None) -> NodeCurvature:
        """Append a history frame; ``generation`` changes whenever nodes are resampled."""
        curv = curv if curv is not None else profile_curvatures(self.profile, n)
        if self.history and self.history[-1].t >= self.t:
            self.history.pop()
        self.history.append(
            HistoryFrame(
                t=self.t,
                s=curv.s.copy(),
                H=curv.H.copy(),
                normA2=curv.normA2.copy(),
                kappa=curv.kappa_prof.copy(),
                lam=curv.lambda_rot.copy(),
                grad_A=curv.grad_A.copy(),
                grad_H=curv.grad_H.copy(),
                hess_A=curv.hess_A.copy(),
                z=curv.z.copy(),
                nodes=self.profile.nodes.copy(),
                closed=self.profile.closed,
                generation=self.generation,
            )
        )
        return curv


def heun_update(profile: ProfileCurve, n: int, dt: float, k1: np.ndarray | None = None) -> ProfileCurve:
    K, closed = profile.K, profile.closed
    P0 = profile.nodes
    if k1 is None:
        k1 = _velocity_nodes(P0, closed, n)
    P1 = project_to_sphere(P0 + dt * k1, K, closed)
    k2 = _velocity_nodes(P1, closed, n)
    P2 = project_to_sphere(P0 + 0.5 * dt * (k1 + k2), K, closed)
    if not np.all(np.isfinite(P2)):
        raise NumericalBlowup(f"non-finite node positions after step dt={dt}")
    return ProfileCurve(P2, closed, K)


def mcf_step(state: FlowState, n: int, control: StepControl = StepControl(), record: bool = False) -> FlowState:
    """One Heun step of the normal flow ``-H nu``; returns a new state.

    Without an explicit ``control.dt`` the step is the largest one allowed
    by both the diffusive and the reaction limits.
    """
    prof = state.profile
    k1, A2 = _velocity_nodes(prof.nodes, prof.closed, n, with_A2=True)
    h = float(prof.segment_lengths().min())
    limit = control.c_cfl * h * h
    dt = control.dt if control.dt is not None else min(limit, control.c_react / (A2 + n * prof.K))
    if dt > limit * (1.0 + 1e-12):
        raise CFLViolation(f"dt={dt} exceeds c_cfl*h^2={limit}")
    new = FlowState(profile=heun_update(prof, n, dt, k1), t=state.t + dt, history=state.history, generation=state.generation)
    if record:
        new.record(n)
    return new


def laplacian(profile: ProfileCurve, f: np.ndarray, n: int) -> np.ndarray:
    """Laplace-Beltrami operator of an SO(n)-invariant function: ``f'' + (n-1)(z'/z) f'``.

    ``f`` must be even across the axis; at axis endpoints the limit ``n f''`` is used.
    """
    closed = profile.closed
    hm, hp = _spacings(profile.nodes, closed)
    d1, d2 = _d1_d2(_ghost_scalar(f, closed, 1), hm, hp)
    z = profile.nodes[:, 2]
    dz, _ = _d1_d2(_ghost_scalar(z, closed, -1), hm, hp)
    out = np.empty_like(f)
    if closed:
        return d2 + (n - 1) * dz / z * d1
    out[1:-1] = d2[1:-1] + (n - 1) * dz[1:-1] / z[1:-1] * d1[1:-1]
    out[0] = n * d2[0]
    out[-1] = n * d2[-1]
    return out


@dataclass
class FrameDerivatives:
    """Space and time derivatives at the newest history frame."""

    t: float
    dH_dt: np.ndarray
    dA2_dt: np.ndarray
    grad_A: np.ndarray
    grad_H: np.ndarray
    hess_A: np.ndarray


def finite_diff_derivatives(history, order: int = 2) -> FrameDerivatives:
    """Backward differences in time at fixed node index over the last frames.

    Nodes move with the normal velocity, so a difference at fixed index is
    the normal time derivative.  ``order`` 1 uses two frames, 2 uses three
    (second order on nonuniform steps).  All frames must share one node
    generation.
    """
    need = order + 1
    frames = list(history)[-need:]
    if len(frames) < need:
        raise ValueError(f"need {need} history frames, have {len(frames)}")
    if len({f.generation for f in frames}) != 1 or len({len(f.H) for f in frames}) != 1:
        raise ValueError("history frames straddle a resampling")
    cur = frames[-1]

    def ddt(attr: str) -> np.ndarray:
        if order == 1:
            a, b = frames
            return (getattr(b, attr) - getattr(a, attr)) / (b.t - a.t)
        f0, f1, f2 = frames
        h1 = f1.t - f0.t
        h2 = f2.t - f1.t
        y0, y1, y2 = getattr(f0, attr), getattr(f1, attr), getattr(f2, attr)
        return (y2 * (2 * h2 + h1) / (h2 * (h1 + h2)) - y1 * (h1 + h2) / (h1 * h2) + y0 * h2 / (h1 * (h1 + h2)))

    return FrameDerivatives(
        t=cur.t,
        dH_dt=ddt("H"),
        dA2_dt=ddt("normA2"),
        grad_A=cur.grad_A,
        grad_H=cur.grad_H,
        hess_A=cur.hess_A,
    )


def regrid(profile: ProfileCurve, n_nodes: int | None = None, h_min: float | None = None) -> ProfileCurve:
    """Arclength-uniform resampling through a cubic spline of the node positions."""
    P = profile.nodes
    closed = profile.closed
    L = profile.length()
    if n_nodes is None:
        if h_min is None:
            n_nodes = len(P)
        else:
            segs = max(int(math.ceil(L / (2.0 * h_min))), 4)
            n_nodes = segs if closed else segs + 1
    if closed:
        data = np.concatenate([P, P[:1]])
        seg = np.linalg.norm(np.diff(data, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        spline = CubicSpline(s, data, bc_type="periodic")
        s_new = np.linspace(0.0, s[-1], n_nodes + 1)[:-1]
    else:
        width = min(3, len(P) - 2)
        E = _extended(P, False, width)
        seg = np.linalg.norm(np.diff(E, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        s0, s1 = s[width], s[-width - 1]
        spline = CubicSpline(s, E)
        s_new = np.linspace(s0, s1, n_nodes)
    Q = spline(s_new)
    if not closed:
        Q[0] = P[0]
        Q[-1] = P[-1]
    Q = project_to_sphere(Q, profile.K, closed)
    return ProfileCurve(Q, closed, profile.K)


def _arc_intersections(
    A: np.ndarray, B: np.ndarray, C: np.ndarray, D: np.ndarray, rtol: float = 1e-13, coplanar: float = 1e-8
) -> np.ndarray:
    """Pairwise crossings of great-circle arcs AB (rows) and CD (columns).

    Side tests use the half-open rule: a signed distance to the opposite
    arc's plane within ``rtol`` times the sphere radius counts as positive,
    so a crossing through a node is seen by exactly one of its two segments.
    When the two planes agree to within the angle ``coplanar`` the side tests
    are ill-conditioned; such pairs count as crossing only if the arcs
    overlap along the common great circle.
    """
    n1 = np.cross(A, B)
    n2 = np.cross(C, D)
    n1 /= np.maximum(np.linalg.norm(n1, axis=1), 1e-300)[:, None]
    n2 /= np.maximum(np.linalg.norm(n2, axis=1), 1e-300)[:, None]
    tol = rtol * float(np.linalg.norm(A[0]))
    sc = np.einsum("ik,jk->ij", n1, C)
    sd = np.einsum("ik,jk->ij", n1, D)
    sa = np.einsum("jk,ik->ij", n2, A)
    sb = np.einsum("jk,ik->ij", n2, B)
    same_side = np.einsum("ik,jk->ij", A + B, C + D) > 0.0

    def strict(u, v):
        return (u < -tol) != (v < -tol)

    hit = strict(sc, sd) & strict(sa, sb) & same_side
    near = np.linalg.norm(np.cross(n1[:, None, :], n2[None, :, :]), axis=-1) < coplanar
    if np.any(near):
        I, J = np.nonzero(near)
        # angular positions along the great circle of arc I, measured from A
        e1 = A[I] / np.linalg.norm(A[I], axis=1)[:, None]
        e2 = np.cross(n1[I], e1)

        def ang(X):
            return np.arctan2(np.einsum("ik,ik->i", X, e2), np.einsum("ik,ik->i", X, e1))

        b, c, d = ang(B[I]), ang(C[J]), ang(D[J])
        lo, hi = np.minimum(c, d), np.maximum(c, d)
        hit[I, J] = (np.minimum(b, hi) - np.maximum(0.0, lo) > 0.0) & (np.abs(d - c) < math.pi)
    return hit


def self_intersects(profile: ProfileCurve) -> bool:
    """O(N^2) test for crossings between non-adjacent profile segments."""
    P = profile.nodes
    A = P
    B = np.roll(P, -1, axis=0)
    if not profile.closed:
        A, B = P[:-1], P[1:]
    X = _arc_intersections(A, B, A, B)
    m = len(A)
    idx = np.arange(m)
    near = np.abs(idx[:, None] - idx[None, :]) <= 1
    if profile.closed:
        near |= np.abs(idx[:, None] - idx[None, :]) == m - 1
    return bool(np.any(X & ~near))


def inscribed_exscribed(profile: ProfileCurve, n: int, curv: NodeCurvature | None = None, check_embedded: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Inscribed and exscribed curvature at every node.

    For a node p and a node q at relative orbit angle chi the chord quotient
    ``2<p - q, nu>/|p - q|^2`` is a linear fractional function of cos(chi),
    hence monotone, so only chi = 0 and chi = pi need to be examined.  The
    limit q -> p contributes the extreme principal curvatures.
    """
    if check_embedded and self_intersects(profile):
        raise NotEmbedded("profile crosses itself")
    curv = curv if curv is not None else profile_curvatures(profile, n)
    P = profile.nodes
    nu = curv.normal
    dx = P[:, None, 0] - P[None, :, 0]
    dy = P[:, None, 1] - P[None, :, 1]
    zi = P[:, 2][:, None]
    zj = P[:, 2][None, :]
    base = nu[:, 0][:, None] * dx + nu[:, 1][:, None] * dy
    plane = dx * dx + dy * dy
    kbar = curv.lambda_max.copy()
    kund = curv.lambda_min.copy()
    for sgn in (1.0, -1.0):
        num = 2.0 * (base + nu[:, 2][:, None] * (zi - sgn * zj))
        den = plane + (zi - sgn * zj) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            q = num / den
        bad = den <= 1e-30 * (1.0 / profile.K)
        if sgn > 0:
            bad |= np.eye(len(P), dtype=bool)
        q = np.where(bad, np.nan, q)
        kbar = np.fmax(kbar, np.nanmax(q, axis=1))
        kund = np.fmin(kund, np.nanmin(q, axis=1))
    return kbar, kund
