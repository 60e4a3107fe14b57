"""Closed-form solutions: product spheres and geodesic spheres in S^{n+1}_K.

The product ``S^k(r) x S^{n-k}(s)`` with ``r = rho cos u`` and
``s = rho sin u`` stays a product under the flow, so the flow is the
scalar ODE for ``u``.  A geodesic sphere of radius ``d`` obeys
``cos(sqrt(K) d(t)) = cos(sqrt(K) d0) exp(nKt)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .geometry_core import PrincipalCurvatures


class Extinction(ValueError):
    """The requested time lies at or beyond the extinction time."""


class StepUnderflow(RuntimeError):
    """Adaptive step size fell below the floor."""


@dataclass(frozen=True)
class ProductSphereState:
    n: int
    k: int
    u: float
    t: float = 0.0

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n - 1:
            raise ValueError(f"need 1 <= k <= n-1, got n={self.n}, k={self.k}")
        if not 0.0 < self.u < 0.5 * math.pi:
            raise ValueError(f"u must lie in (0, pi/2), got {self.u}")

    def radii(self, K: float) -> tuple[float, float]:
        """Radii ``(r, s)`` of the S^k and S^{n-k} factors."""
        rho = 1.0 / math.sqrt(K)
        return rho * math.cos(self.u), rho * math.sin(self.u)


@dataclass(frozen=True)
class GeodesicSphereState:
    n: int
    d: float
    t: float = 0.0


@dataclass(frozen=True)
class StepControl:
    """RK4 step policy for the scalar ODEs."""

    dt: float | None = None
    u_min: float = 1e-4
    max_increment: float = 1e-2
    dt_floor: float = 1e-14


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    collapsed: bool = False
    collapse_factor: str | None = None

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]


def product_sphere_curvatures(state: ProductSphereState, K: float) -> PrincipalCurvatures:
    """``-sqrt(K) tan u`` with multiplicity k, ``sqrt(K) cot u`` with multiplicity n-k."""
    sk = math.sqrt(K)
    lam = -sk * math.tan(state.u)
    mu = sk / math.tan(state.u)
    return PrincipalCurvatures(tuple([lam] * state.k + [mu] * (state.n - state.k)))


def product_sphere_mean_curvature(state: ProductSphereState, K: float) -> float:
    return math.sqrt(K) * ((state.n - state.k) / math.tan(state.u) - state.k * math.tan(state.u))


def product_sphere_strict_margin(state: ProductSphereState, K: float) -> float:
    """``|A|^2 - H^2/(n-2) - 4K`` expanded so that no large terms cancel (n >= 3)."""
    n, k = state.n, state.k
    t2 = math.tan(state.u) ** 2
    c2 = 1.0 / t2
    return K * (
        k * (n - 2 - k) / (n - 2) * t2
        + (n - k) * (k - 2) / (n - 2) * c2
        + 2.0 * k * (n - k) / (n - 2)
        - 4.0
    )


def product_sphere_cylindrical_deficit(state: ProductSphereState, K: float) -> float:
    """``|A|^2 - H^2/(n-1)`` expanded so that no large terms cancel."""
    n, k = state.n, state.k
    t2 = math.tan(state.u) ** 2
    c2 = 1.0 / t2
    return K * (
        k * (n - 1 - k) / (n - 1) * t2
        + (n - k) * (k - 1) / (n - 1) * c2
        + 2.0 * k * (n - k) / (n - 1)
    )


def product_sphere_ode_rhs(state: ProductSphereState, K: float) -> float:
    """``du/dt = -K[(n-k) cot u - k tan u]``."""
    return -K * ((state.n - state.k) / math.tan(state.u) - state.k * math.tan(state.u))


def _rhs_u(n: int, k: int, u: float, K: float) -> float:
    return -K * ((n - k) / math.tan(u) - k * math.tan(u))


def rk4_step_u(n: int, k: int, u: float, dt: float, K: float) -> float:
    k1 = _rhs_u(n, k, u, K)
    k2 = _rhs_u(n, k, u + 0.5 * dt * k1, K)
    k3 = _rhs_u(n, k, u + 0.5 * dt * k2, K)
    k4 = _rhs_u(n, k, u + dt * k3, K)
    return u + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0


def _stiffness(n: int, k: int, u: float, K: float) -> float:
    return K * ((n - k) / math.sin(u) ** 2 + k / math.cos(u) ** 2)


def flow_product_sphere(
    state: ProductSphereState,
    t_end: float,
    K: float,
    control: StepControl | None = None,
) -> Trajectory:
    """Integrate the product-sphere ODE with RK4 up to ``t_end`` or collapse."""
    if not t_end > state.t:
        raise ValueError("t_end must exceed the initial time")
    control = control or StepControl()
    base_dt = control.dt if control.dt is not None else 1e-3 / K
    n, k = state.n, state.k
    u, t = state.u, state.t
    traj = Trajectory(states=[state])
    upper = 0.5 * math.pi - control.u_min
    while t < t_end:
        dt = min(base_dt, 1.0 / _stiffness(n, k, u, K), t_end - t)
        if t_end - t - dt < 1e-9 * dt:
            # absorb a round-off sliver into this step rather than taking a micro step
            dt = t_end - t
        while abs(_rhs_u(n, k, u, K)) * dt > control.max_increment:
            dt *= 0.5
            if dt < control.dt_floor:
                raise StepUnderflow(f"dt underflow at t={t}, u={u}")
        u_new = rk4_step_u(n, k, u, dt, K)
        t = t + dt if t_end - t > dt else t_end
        if u_new < control.u_min or u_new > upper:
            traj.collapsed = True
            # S^{n-k} factor has radius rho sin u, S^k factor rho cos u
            traj.collapse_factor = f"S^{n - k}" if u_new < control.u_min else f"S^{k}"
            break
        u = u_new
        traj.states.append(replace(state, u=u, t=t))
    return traj


def minimal_clifford_angle(n: int, k: int) -> float:
    if not 1 <= k <= n - 1:
        raise ValueError(f"need 1 <= k <= n-1, got n={n}, k={k}")
    return math.atan(math.sqrt((n - k) / k))


def geodesic_sphere_curvatures(state: GeodesicSphereState, K: float) -> PrincipalCurvatures:
    sk = math.sqrt(K)
    return PrincipalCurvatures(tuple([sk / math.tan(sk * state.d)] * state.n))


def geodesic_sphere_closed_form(d0: float, t: float, n: int, K: float) -> float:
    """Geodesic radius at time ``t`` of the sphere that starts at radius ``d0``."""
    sk = math.sqrt(K)
    c = math.cos(sk * d0) * math.exp(n * K * t)
    if abs(c) >= 1.0:
        raise Extinction(f"extinct before t={t} (cos argument {c})")
    return math.acos(c) / sk


def geodesic_sphere_extinction_time(d0: float, n: int, K: float) -> float:
    c0 = abs(math.cos(math.sqrt(K) * d0))
    if c0 == 0.0:
        return math.inf
    return -math.log(c0) / (n * K)


def geodesic_sphere_rk4(d0: float, t_end: float, n: int, K: float, dt: float) -> float:
    """RK4 integration of ``d' = -n sqrt(K) cot(sqrt(K) d)``; independent check of the closed form."""
    sk = math.sqrt(K)

    def rhs(d: float) -> float:
        return -n * sk / math.tan(sk * d)

    d, t = d0, 0.0
    while t < t_end:
        h = min(dt, t_end - t)
        k1 = rhs(d)
        k2 = rhs(d + 0.5 * h * k1)
        k3 = rhs(d + 0.5 * h * k2)
        k4 = rhs(d + h * k3)
        d += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        t += h
    return d
