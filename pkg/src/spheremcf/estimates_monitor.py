"""Measured versions of the a-priori estimates, and a search for the Poincare constant.

Estimates that only assert the existence of a constant are checked as
boundedness or non-growth of the measured supremum; no numerical value of
such a constant is assumed anywhere in this module.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

from .exact_models import (
    GeodesicSphereState,
    ProductSphereState,
    Trajectory,
    geodesic_sphere_curvatures,
    product_sphere_curvatures,
)
from .geometry_core import (
    DerivedConstants,
    InadmissibleParameters,
    cylindrical_deficit_HA,
    derive_constants,
    f_sigma_eta_HA,
    mean_curvature,
    noncollapse_radicand_HA,
    second_form_norm_sq,
)
from .rotsym_flow import HistoryFrame, NodeCurvature

log = logging.getLogger(__name__)


class MonitorMisconfigured(ValueError):
    """A monitored denominator that must be positive is not."""


@dataclass
class EstimateSummary:
    name: str
    sup: float
    t_sup: float
    fitted_constant: float
    violated: bool
    slack: float
    note: str = ""


@dataclass
class EstimateReport:
    estimates: dict[str, EstimateSummary] = field(default_factory=dict)
    series: dict[str, list[list[float]]] = field(default_factory=dict)

    def add(self, summary: EstimateSummary) -> None:
        self.estimates[summary.name] = summary

    @property
    def any_violation(self) -> bool:
        return any(e.violated for e in self.estimates.values())

    def to_dict(self) -> dict:
        return {
            "estimates": {k: asdict(v) for k, v in sorted(self.estimates.items())},
            "series": {k: v for k, v in sorted(self.series.items())},
        }


# Evolution identities along homogeneous trajectories.


@dataclass
class EvolutionResidual:
    times: np.ndarray
    H_residual: np.ndarray
    H_relative: np.ndarray
    A2_residual: np.ndarray
    A2_relative: np.ndarray


def _time_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second order centered differences on a nonuniform grid (interior samples)."""
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return (h1 * h1 * (y[2:] - y[1:-1]) + h2 * h2 * (y[1:-1] - y[:-2])) / (h1 * h2 * (h1 + h2))


def evolution_residual(trajectory: Trajectory | list, K: float) -> EvolutionResidual:
    """Residuals of the H and |A|^2 evolution equations on a homogeneous trajectory.

    On homogeneous hypersurfaces every spatial derivative vanishes, so the
    equations reduce to ``H' = (|A|^2 + nK) H`` and
    ``(|A|^2)' = 2|A|^2(|A|^2 + nK) - 4nK(|A|^2 - H^2/n)``.
    """
    states = trajectory.states if isinstance(trajectory, Trajectory) else list(trajectory)
    if len(states) < 3:
        raise ValueError("need at least three samples")
    t = np.array([s.t for s in states])
    H = np.empty(len(states))
    A2 = np.empty(len(states))
    for i, s in enumerate(states):
        if isinstance(s, ProductSphereState):
            pc = product_sphere_curvatures(s, K)
        elif isinstance(s, GeodesicSphereState):
            pc = geodesic_sphere_curvatures(s, K)
        else:
            raise TypeError(f"not a homogeneous state: {type(s).__name__}")
        H[i] = mean_curvature(pc)
        A2[i] = second_form_norm_sq(pc)
    n = states[0].n
    dH = _time_derivative(t, H)
    dA2 = _time_derivative(t, A2)
    Hi, Ai = H[1:-1], A2[1:-1]
    rhs_H = (Ai + n * K) * Hi
    rhs_A = 2.0 * Ai * (Ai + n * K) - 4.0 * n * K * (Ai - Hi * Hi / n)
    res_H = np.abs(dH - rhs_H)
    res_A = np.abs(dA2 - rhs_A)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_H = np.where(np.abs(rhs_H) > 0, res_H / np.abs(rhs_H), res_H)
        rel_A = np.where(np.abs(rhs_A) > 0, res_A / np.abs(rhs_A), res_A)
    return EvolutionResidual(times=t[1:-1], H_residual=res_H, H_relative=rel_H, A2_residual=res_A, A2_relative=rel_A)


# Cylindrical estimate.


def cylindrical_values(curv: NodeCurvature, t: float, K: float, eta: float, delta: float, n: int) -> np.ndarray:
    """``(|A|^2 - H^2/(n-1) - eta H^2) e^{2 delta K t} / K`` at every node."""
    dev = cylindrical_deficit_HA(curv.H, curv.normA2, n) - eta * curv.H**2
    return dev * math.exp(2.0 * delta * K * t) / K


def _era_non_growth(times, values, breaks, slack) -> tuple[bool, list[int]]:
    """True if some era's maximum exceeds its first value beyond ``slack``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    edges = [-math.inf] + sorted(breaks) + [math.inf]
    bad = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        idx = np.nonzero((times >= lo) & (times < hi))[0]
        if len(idx) < 2:
            continue
        first = values[idx[0]]
        peak = values[idx].max()
        if peak > first + slack * max(abs(first), 1.0):
            bad.append(int(idx[int(np.argmax(values[idx]))]))
    return bool(bad), bad


def cylindrical_estimate_check(
    times,
    sup_values,
    surgery_times=(),
    slack: float = 0.01,
) -> EstimateSummary:
    """Fitted C_eta and a non-growth check of the per-time supremum between surgeries.

    ``sup_values[i]`` is the node maximum of :func:`cylindrical_values` at
    ``times[i]``.  The fitted constant is the overall supremum.
    """
    times = np.asarray(times, dtype=float)
    vals = np.asarray(sup_values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty series")
    i = int(np.argmax(vals))
    violated, _ = _era_non_growth(times, vals, surgery_times, slack)
    return EstimateSummary(
        name="cylindrical",
        sup=float(vals[i]),
        t_sup=float(times[i]),
        fitted_constant=float(vals[i]),
        violated=violated,
        slack=slack,
    )


def fplus_check(times, fplus_max, surgery_times=(), slack: float = 0.01) -> EstimateSummary:
    """Non-increase of the node maximum of f_+ between surgeries."""
    times = np.asarray(times, dtype=float)
    vals = np.asarray(fplus_max, dtype=float)
    i = int(np.argmax(vals))
    violated, _ = _era_non_growth(times, vals, surgery_times, slack)
    return EstimateSummary("fplus", float(vals[i]), float(times[i]), float(vals[i]), violated, slack)


# Gradient and Hessian estimates.


@dataclass
class GradientRatios:
    grad: float
    grad_node: int
    hess: float
    hess_node: int
    grad_over_GG: float
    grad_over_GG_node: int


def fit_gradient_constants(H: np.ndarray, A2: np.ndarray, K: float, n: int, beta: float) -> tuple[float, float]:
    """Smallest admissible ``C_beta, C_0`` (each at least 2) for the given samples."""
    c_beta = float(np.max((A2 - (1.0 / (n - 1) + beta) * H * H) / K))
    c_0 = float(np.max((A2 - 3.0 / (n + 2) * H * H) / K))
    return max(2.0, c_beta), max(2.0, c_0)


def gradient_hessian_ratios(
    curv: NodeCurvature,
    n: int,
    K: float,
    beta: float,
    C_beta: float | None = None,
    C_0: float | None = None,
) -> GradientRatios:
    """Node suprema of ``|grad A|^2/(H^4+K^2)``, ``|grad^2 A|^2/(H^6+K^3)`` and ``|grad A|^2/(G_beta G_0)``."""
    H, A2 = curv.H, curv.normA2
    if C_beta is None or C_0 is None:
        fb, f0 = fit_gradient_constants(H, A2, K, n, beta)
        C_beta = fb if C_beta is None else C_beta
        C_0 = f0 if C_0 is None else C_0
    g2 = curv.grad_A**2
    h2 = curv.hess_A**2
    r1 = g2 / (H**4 + K * K)
    r2 = h2 / (H**6 + K**3)
    G_beta = (1.0 / (n - 1) + beta) * H * H - A2 + 2.0 * C_beta * K
    G_0 = 3.0 / (n + 2) * H * H - A2 + 2.0 * C_0 * K
    if np.any(G_beta <= 0.0) or np.any(G_0 <= 0.0):
        raise MonitorMisconfigured("G_beta or G_0 is not positive; the fitted constants are too small")
    r3 = g2 / (G_beta * G_0)
    i1, i2, i3 = int(np.argmax(r1)), int(np.argmax(r2)), int(np.argmax(r3))
    return GradientRatios(float(r1[i1]), i1, float(r2[i2]), i2, float(r3[i3]), i3)


# Bernstein-type interior estimates.


@dataclass
class BernsteinReport:
    Lambda0: float
    lambda0: float
    window_end: float
    Lambda_hat: dict[int, float]
    frames_used: int
    A2_bound_holds: bool


def interior_constants(n: int, alpha: float, Theta: float, theta_power: int = 2) -> tuple[float, float]:
    """``(Lambda_0, lambda_0)`` with ``Lambda_0/2 = Theta^p/(n-2+alpha) + 2(2-alpha)``
    and ``exp(2 n lambda_0) = 1 + n/(n + Lambda_0)``."""
    Lam0 = 2.0 * (Theta**theta_power / (n - 2 + alpha) + 2.0 * (2.0 - alpha))
    lam0 = math.log1p(n / (n + Lam0)) / (2.0 * n)
    return Lam0, lam0


def bernstein_check(frames: list[HistoryFrame], n: int, K: float, alpha: float, Theta: float, theta_power: int = 2) -> BernsteinReport:
    """Suprema of ``t^m |grad^m A|^2 / K`` for m = 1, 2 over ``t <= lambda_0/K``."""
    Lam0, lam0 = interior_constants(n, alpha, Theta, theta_power)
    end = lam0 / K
    hats = {1: 0.0, 2: 0.0}
    used = 0
    ok = True
    for fr in frames:
        if fr.t > end:
            continue
        used += 1
        ok &= bool(np.max(fr.normA2) <= Lam0 * K)
        hats[1] = max(hats[1], float(np.max(fr.t * fr.grad_A**2)) / K)
        hats[2] = max(hats[2], float(np.max(fr.t**2 * fr.hess_A**2)) / K)
    return BernsteinReport(Lam0, lam0, end, hats, used, ok)


# Noncollapsing.


@dataclass
class NoncollapseResult:
    mu: float
    C: float
    violated: bool
    first_violation_t: float | None
    max_upper_ratio: float
    max_lower_ratio: float


def noncollapse_ratios(curv: NodeCurvature, kbar: np.ndarray, kund: np.ndarray, K: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """``kbar/F`` and ``kund/F`` at every node."""
    rad = noncollapse_radicand_HA(curv.H, curv.normA2, K, n)
    if np.any(rad <= 0.0):
        raise MonitorMisconfigured("noncollapsing radicand is not positive: the state is not strictly pinched")
    F = np.sqrt(rad)
    return kbar / F, kund / F


def noncollapse_bound(t: float, mu: float, C: float, K: float) -> float:
    return C + (mu - C) * math.exp(-4.0 * K * t)


def noncollapse_check(samples, C: float, K: float, mu: float | None = None, slack: float = 0.05) -> NoncollapseResult:
    """Check ``kund/F >= -B(t)`` and ``kbar/F <= B(t)``, ``B = C + (mu-C) e^{-4Kt}``.

    ``samples`` is a sequence of ``(t, max kbar/F, min kund/F)``.  When ``mu``
    is omitted it is measured from the first sample and raised to C if smaller.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("no samples")
    if mu is None:
        _, up0, lo0 = samples[0]
        mu = max(up0, -lo0, C)
    first = None
    worst_up = -math.inf
    worst_lo = -math.inf
    for t, up, lo in samples:
        B = noncollapse_bound(t, mu, C, K)
        worst_up = max(worst_up, up / B)
        worst_lo = max(worst_lo, -lo / B)
        if (up > B * (1.0 + slack) or lo < -B * (1.0 + slack)) and first is None:
            first = t
    return NoncollapseResult(mu, C, first is not None, first, worst_up, worst_lo)


# Poincare constant search.


@dataclass
class GammaSearchResult:
    gamma_hat: float
    argmin: tuple[float, ...]
    samples_evaluated: int
    admissible_samples: int
    reference_ratio: float
    reference_included: bool
    refined: int


def normC2(lam: np.ndarray, K: float = 1.0) -> np.ndarray:
    """``sum_{i,j} (lam_j - lam_i)^2 (lam_i lam_j + K)^2`` over the last axis."""
    lam = np.asarray(lam, dtype=float)
    d = lam[..., None, :] - lam[..., :, None]
    p = lam[..., None, :] * lam[..., :, None] + K
    return np.sum(d * d * p * p, axis=(-1, -2))


def f1_eta(lam: np.ndarray, n: int, eta: float) -> np.ndarray:
    H = lam.sum(axis=-1)
    return (lam * lam).sum(axis=-1) - (1.0 / (n - 1) + eta) * H * H


def g2_alpha(lam: np.ndarray, n: int, alpha: float, K: float = 1.0) -> np.ndarray:
    H = lam.sum(axis=-1)
    return (lam * lam).sum(axis=-1) - H * H / (n - 2 + alpha) - 2.0 * (2.0 - alpha) * K


@dataclass
class AcylindricalSample:
    lam: tuple[float, ...]
    f1: float
    g2: float
    W: float
    normC2: float

    @property
    def admissible(self) -> bool:
        return self.f1 >= 0.0 >= self.g2

    @property
    def ratio(self) -> float:
        return (self.normC2 + 1.0) / self.W**3


def acylindrical_sample(lam, n: int, alpha: float, eta: float) -> AcylindricalSample:
    """Unit-K evaluation of the quantities entering the Poincare inequality."""
    c = derive_constants(n, alpha, eta)
    v = np.sort(np.asarray(lam, dtype=float))
    if v.size != n:
        raise ValueError(f"need {n} curvatures, got {v.size}")
    H = float(v.sum())
    return AcylindricalSample(
        lam=tuple(float(x) for x in v),
        f1=float(f1_eta(v, n, eta)),
        g2=float(g2_alpha(v, n, alpha)),
        W=c.a * H * H + c.b,
        normC2=float(normC2(v)),
    )


class _Scaled:
    """Compact coordinates ``mu = lam / sqrt(W)`` on the acylindrical set (K = 1).

    With ``r^2 = 1/W = (1 - a H(mu)^2)/b`` the ratio ``(|C|^2 + 1)/W^3`` becomes
    ``sum (mu_j - mu_i)^2 (mu_i mu_j + r^2)^2 + r^6``; infinity corresponds to r = 0.
    """

    def __init__(self, n: int, consts: DerivedConstants, alpha: float):
        self.n = n
        self.a = consts.a
        self.b = consts.b
        self.c1 = 1.0 / (n - 1) + consts.eta
        self.c2 = 1.0 / (n - 2 + alpha)
        self.radius = math.sqrt((self.c2 - self.a) / self.a + 1.0) if self.c2 > self.a else math.sqrt(1.0 / self.a)

    def r2(self, mu: np.ndarray) -> np.ndarray:
        H = mu.sum(axis=-1)
        return (1.0 - self.a * H * H) / self.b

    def constraints(self, mu: np.ndarray) -> np.ndarray:
        """Stacked constraint values; admissible iff all are >= 0."""
        H = mu.sum(axis=-1)
        S = (mu * mu).sum(axis=-1)
        return np.stack(
            [
                1.0 - self.a * H * H,
                S - self.c1 * H * H,
                self.c2 * H * H + (1.0 - self.a * H * H) - S,
            ],
            axis=-1,
        )

    def ratio(self, mu: np.ndarray) -> np.ndarray:
        r2 = self.r2(mu)
        d = mu[..., None, :] - mu[..., :, None]
        p = mu[..., None, :] * mu[..., :, None] + r2[..., None, None]
        return np.sum(d * d * p * p, axis=(-1, -2)) + r2**3

    def to_lambda(self, mu: np.ndarray) -> np.ndarray:
        r2 = self.r2(mu)
        return mu / np.sqrt(r2)[..., None]

    def from_lambda(self, lam: np.ndarray) -> np.ndarray:
        H = lam.sum(axis=-1)
        W = self.a * H * H + self.b
        return lam / np.sqrt(W)[..., None]


def _two_value_grid(sc: _Scaled, per_axis: int) -> np.ndarray:
    n = sc.n
    g = np.linspace(-sc.radius, sc.radius, per_axis)
    P, Q = np.meshgrid(g, g, indexing="ij")
    P, Q = P.ravel(), Q.ravel()
    blocks = []
    for m in range(1, n):
        blocks.append(np.column_stack([np.repeat(P[:, None], m, axis=1), np.repeat(Q[:, None], n - m, axis=1)]))
    return np.concatenate(blocks)


def poincare_gamma_search(
    n: int,
    alpha: float,
    eta: float,
    budget: int = 200_000,
    seed: int = 0,
    block: int = 10_000,
    starts_per_block: int = 2,
    grid_per_axis: int = 121,
    tol: float = 1e-12,
) -> GammaSearchResult:
    """Minimum of ``(|C|^2 + 1)/W^3`` over sampled spectra in the acylindrical set.

    Candidates are a grid over spectra with two distinct values, ``budget``
    uniform samples in the compact scaled domain drawn in fixed blocks from
    a seeded generator, and local constrained refinement started from the
    best admissible samples of each block.  The samples of a smaller budget
    are a prefix of those of a larger one, and so are the refinement starts,
    so the result is non-increasing in ``budget``.

    Raises
    ------
    InadmissibleParameters
        If the eta window is empty or eta lies outside it.
    """
    consts = derive_constants(n, alpha, eta)
    if not consts.a > 0:
        raise InadmissibleParameters("a must be positive")
    sc = _Scaled(n, consts, alpha)
    best = math.inf
    best_mu: np.ndarray | None = None
    evaluated = 0
    admissible = 0

    def consider(mu: np.ndarray) -> np.ndarray:
        nonlocal best, best_mu, evaluated, admissible
        evaluated += len(mu)
        ok = np.all(sc.constraints(mu) >= -tol, axis=-1)
        mu = mu[ok]
        admissible += len(mu)
        if len(mu) == 0:
            return mu
        vals = sc.ratio(mu)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            best_mu = mu[i].copy()
        return mu

    ref_lam = np.zeros(n)
    ref_lam[n // 2 :] = 1.0
    ref = acylindrical_sample(ref_lam, n, alpha, eta)
    ref_included = ref.admissible
    if ref_included:
        consider(sc.from_lambda(ref_lam)[None, :])

    consider(_two_value_grid(sc, grid_per_axis))

    rng = np.random.default_rng(seed)
    starts: list[np.ndarray] = []
    remaining = budget
    while remaining > 0:
        m = min(block, remaining)
        remaining -= m
        x = rng.normal(size=(m, n))
        x /= np.linalg.norm(x, axis=1)[:, None]
        x *= sc.radius * rng.random(m)[:, None] ** (1.0 / n)
        ok = consider(x)
        if len(ok):
            vals = sc.ratio(ok)
            order = np.argsort(vals, kind="stable")[:starts_per_block]
            starts.extend(ok[j] for j in order)

    cons = {"type": "ineq", "fun": lambda v: sc.constraints(v)}
    refined = 0
    for x0 in starts:
        res = minimize(lambda v: float(sc.ratio(v)), x0, method="SLSQP", constraints=[cons], options={"ftol": 1e-14, "maxiter": 200})
        if np.all(sc.constraints(res.x) >= -tol):
            refined += 1
            v = float(sc.ratio(res.x))
            if v < best:
                best = v
                best_mu = res.x.copy()
    if best_mu is None:
        raise InadmissibleParameters("no admissible sample found")
    lam_best = np.sort(sc.to_lambda(best_mu)) if sc.r2(best_mu) > 0 else np.full(n, math.inf)
    log.info("gamma search: %d samples, %d admissible, gamma_hat=%.6g", evaluated, admissible, best)
    return GammaSearchResult(
        gamma_hat=best,
        argmin=tuple(float(v) for v in lam_best),
        samples_evaluated=evaluated,
        admissible_samples=admissible,
        reference_ratio=ref.ratio,
        reference_included=ref_included,
        refined=refined,
    )


# Local curvature comparability on parabolic cylinders.


@dataclass
class ComparabilityResult:
    c_sharp: float
    points_checked: int
    violations: int


def measured_c_sharp(frames: list[HistoryFrame], h_sharp: float, K: float) -> float:
    """Smallest ``c`` with ``|grad H| <= c H^2`` and ``|dH/dt| <= c^2 H^3 / 2`` where ``H >= h_sharp sqrt(K)``.

    Time derivatives are backward differences at fixed node index between
    consecutive frames of the same generation.
    """
    c_space = c_time = 0.0
    prev = None
    for fr in frames:
        mask = fr.H >= h_sharp * math.sqrt(K)
        if np.any(mask):
            c_space = max(c_space, float(np.max(fr.grad_H[mask] / fr.H[mask] ** 2)))
            if prev is not None and prev.generation == fr.generation and prev.H.size == fr.H.size and fr.t > prev.t:
                dH = np.abs(fr.H - prev.H) / (fr.t - prev.t)
                c_time = max(c_time, float(np.max(dH[mask] / fr.H[mask] ** 3)))
        prev = fr
    return max(c_space, math.sqrt(2.0 * c_time))


def comparability_scan(frames: list[HistoryFrame], h_sharp: float, K: float, stride: int = 1) -> ComparabilityResult:
    """Check ``H(p,t)/10 <= H(q,s) <= 10 H(p,t)`` on parabolic cylinders of radius ``1/(10 c H)``.

    The cylinder at ``(p, t)`` is realized as the nodes within arclength
    ``r`` of the node closest to p, in every frame with ``t - r^2 < s <= t``.
    """
    frames = list(frames)
    c = measured_c_sharp(frames, h_sharp, K)
    if c == 0.0:
        return ComparabilityResult(0.0, 0, 0)
    checked = bad = 0
    for j, fr in enumerate(frames):
        idx = np.nonzero(fr.H >= h_sharp * math.sqrt(K))[0][::stride]
        for i in idx:
            Hp = fr.H[i]
            r = 1.0 / (10.0 * c * Hp)
            p = fr.nodes[i]
            for other in frames[: j + 1]:
                if other.t <= fr.t - r * r:
                    continue
                k = int(np.argmin(np.sum((other.nodes - p) ** 2, axis=1)))
                near = np.abs(other.s - other.s[k]) <= r
                Hq = other.H[near]
                checked += 1
                if np.any(Hq < Hp / 10.0) or np.any(Hq > 10.0 * Hp):
                    bad += 1
    return ComparabilityResult(c, checked, bad)


# Per-node monitored scalars used by the run time series.


def fplus_nodes(curv: NodeCurvature, t: float, K: float, n: int, sigma: float, consts: DerivedConstants) -> np.ndarray:
    """``max(e^{2 delta K t} f_{sigma,eta}, 0)`` at every node."""
    f = f_sigma_eta_HA(curv.H, curv.normA2, K, n, sigma, consts)
    return np.maximum(math.exp(2.0 * consts.delta * K * t) * f, 0.0)


def kato_slack(curv: NodeCurvature, n: int) -> np.ndarray:
    """``|grad A|^2 - (1 - 1e-6) 3/(n+2) |grad H|^2`` at every node; Kato holds where >= 0."""
    return curv.grad_A**2 - (1.0 - 1e-6) * 3.0 / (n + 2) * curv.grad_H**2
