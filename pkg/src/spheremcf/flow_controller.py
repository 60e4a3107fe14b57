"""The surgery algorithm: evolve, stop at the trigger level, cut necks, discard, classify.

All times and curvature thresholds in the configuration are dimensionless
(multiples of 1/K and of K), and all lengths of named initial profiles are
in units of ``rho = 1/sqrt(K)``, so a configuration and its copy with a
different K describe parabolically rescaled runs.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import profiles
from .estimates_monitor import (
    EstimateReport,
    EstimateSummary,
    GradientRatios,
    MonitorMisconfigured,
    comparability_scan,
    cylindrical_estimate_check,
    cylindrical_values,
    fit_gradient_constants,
    fplus_check,
    fplus_nodes,
    gradient_hessian_ratios,
    interior_constants,
    kato_slack,
    noncollapse_bound,
    noncollapse_ratios,
)
from .exact_models import ProductSphereState, StepControl as OdeControl, flow_product_sphere, product_sphere_curvatures
from .geometry_core import FlowParams, cylindrical_deficit_HA, f_plus_HA, quadratic_margin_HA, strict_margin_HA
from .rotsym_flow import (
    FlowState,
    NodeCurvature,
    NotEmbedded,
    ProfileCurve,
    StepControl,
    area,
    inscribed_exscribed,
    mcf_step,
    regrid,
)
from .surgery import (
    RING,
    SurgeryEvent,
    SurgeryFailed,
    SurgeryParams,
    TopologyLedger,
    classify_component,
    detect_necks,
    perform_surgery,
)

log = logging.getLogger(__name__)

TERMINATED = "terminated-by-classification"
CONVERGED = "converged-to-minimal"
UNRESOLVED = "unresolved-singularity"
BUDGET = "budget-exhausted"

CSV_COLUMNS = (
    "t",
    "maxH2_over_K",
    "min_margin_strict",
    "max_cyl_deficit_ratio",
    "max_gradA_ratio",
    "max_kbar_over_F",
    "area_times_Kpow",
    "fplus_max",
    "components",
)


class ConfigError(ValueError):
    """Invalid configuration or initial data outside the surgery class."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass
class MonitorConfig:
    noncollapse: bool = True
    gradient: bool = True
    comparability: bool = True
    kato: bool = True
    noncollapse_every: int = 1


@dataclass
class RunConfig:
    scenario: str
    profile: dict = field(default_factory=dict)
    n: int = 4
    K: float = 1.0
    alpha: float = 0.5
    eta: float = 0.05
    sigma: float = 0.1
    V: float = 100.0
    Theta: float = 1e4
    N: int = 400
    c_cfl: float = 0.2
    c_react: float = 0.02
    surgery: SurgeryParams = field(default_factory=SurgeryParams)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    t_max: float = 10.0
    converge_time: float = 5.0
    converge_tol: float = 1e-3
    pinch_stop: float = 1e-3
    sample_every: int = 20
    regrid_ratio: float = 2.0
    require_class: bool = True
    seed: int = 0

    def params(self) -> FlowParams:
        return FlowParams(self.n, self.K, self.alpha, self.V, self.Theta, self.eta, self.sigma)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


@dataclass
class RunReport:
    config: dict
    rows: list[tuple] = field(default_factory=list)
    events: list[SurgeryEvent] = field(default_factory=list)
    ledger: TopologyLedger = field(default_factory=TopologyLedger)
    estimates: EstimateReport = field(default_factory=EstimateReport)
    status: str = ""
    classification: str = ""
    steps: int = 0
    final_time: float = 0.0
    invariant_violations: list[str] = field(default_factory=list)
    class_check: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    def to_dict(self) -> dict:
        """Everything except wall-clock time, so that reruns serialize identically."""
        return {
            "config": self.config,
            "status": self.status,
            "classification": self.classification,
            "steps": self.steps,
            "final_time_K": self.final_time,
            "class_check": self.class_check,
            "events": [e.to_dict() for e in self.events],
            "ledger": self.ledger.to_dict(),
            "estimates": self.estimates.to_dict(),
            "invariant_violations": list(self.invariant_violations),
        }


def initial_profile(cfg: RunConfig) -> ProfileCurve:
    p = dict(cfg.profile)
    K, N = cfg.K, cfg.N
    rho = 1.0 / math.sqrt(K)
    name = cfg.scenario
    if name == "geodesic_sphere":
        return profiles.geodesic_sphere(p.get("angle", math.pi / 3) * rho, K, N)
    if name == "tube":
        return profiles.tube(p.get("u", 0.3), K, N)
    if name == "equator":
        return profiles.equator(K, N, p.get("amplitude", 0.0), int(p.get("mode", 3)))
    if name == "dumbbell":
        keys = ("neck_radius", "neck_slope2", "neck_length", "blend_length")
        return profiles.dumbbell(K, N, **{k: p[k] for k in keys if k in p})
    if name == "profile_table":
        return regrid(profiles.load_table(p["path"], K, bool(p.get("closed", False))), N)
    raise ConfigError([f"unknown rotational scenario {name!r}"])


def class_conditions(curvs: list[NodeCurvature], areas: list[float], cfg: RunConfig, Theta: float) -> dict:
    """Pinching margin, area bound and curvature bound of the surgery class."""
    K, n = cfg.K, cfg.n
    q = max(float(np.max(quadratic_margin_HA(c.H, c.normA2, K, cfg.alpha, n))) for c in curvs)
    A = sum(areas) * K ** (n / 2.0)
    H2 = max(float(np.max(c.H**2)) for c in curvs) / K
    return {
        "pinching_margin_over_K": float(q / K),
        "pinched": bool(q < 0.0),
        "area_over_bound": float(A / cfg.V),
        "area_ok": bool(A <= cfg.V),
        "maxH2_over_K": float(H2),
        "curvature_ok": bool(H2 <= Theta),
    }


@dataclass
class _Component:
    cid: int
    state: FlowState
    last_area: float
    era_start: float


class _Monitor:
    """Per-sample quantities, time series and running suprema."""

    def __init__(self, cfg: RunConfig, params: FlowParams, report: RunReport):
        self.cfg = cfg
        self.p = params
        self.c = params.constants
        self.report = report
        self.times: list[float] = []
        self.cyl: list[float] = []
        self.fplus: list[float] = []
        self.grad: list[float] = []
        self.hess: list[float] = []
        self.gg: list[float] = []
        self.alpha_margin: list[float] = []
        self.strict: list[float] = []
        self.maxA2: list[float] = []
        self.noncollapse: list[tuple[float, float, float]] = []
        self.kato_violations = 0
        self.kato_nodes = 0
        self.mu: float | None = None
        self.C_beta = None
        self.C_0 = None
        self.bern = {1: 0.0, 2: 0.0}
        self.Lam0, self.lam0 = interior_constants(cfg.n, cfg.alpha, cfg.Theta)
        self.sample_index = 0

    def sample(self, t: float, comps: list[_Component], curvs: list[NodeCurvature]) -> tuple:
        cfg, K, n = self.cfg, self.cfg.K, self.cfg.n
        if self.C_beta is None:
            H = np.concatenate([c.H for c in curvs])
            A2 = np.concatenate([c.normA2 for c in curvs])
            self.C_beta, self.C_0 = fit_gradient_constants(H, A2, K, n, self.c.beta)
        maxH2 = maxA2 = strict = cyl = grad = hess = gg = fp = amarg = -math.inf
        kbar_max = -math.inf
        kund_min = math.inf
        tot_area = 0.0
        do_nc = cfg.monitors.noncollapse and self.sample_index % max(cfg.monitors.noncollapse_every, 1) == 0
        for comp, cv in zip(comps, curvs):
            maxH2 = max(maxH2, float(np.max(cv.H**2)) / K)
            maxA2 = max(maxA2, float(np.max(cv.normA2)) / K)
            strict = max(strict, float(np.max(strict_margin_HA(cv.H, cv.normA2, K, n))) / K)
            amarg = max(amarg, float(np.max(quadratic_margin_HA(cv.H, cv.normA2, K, cfg.alpha, n))) / K)
            cyl = max(cyl, float(np.max(cylindrical_values(cv, t, K, self.c.eta, self.c.delta, n))))
            fp = max(fp, float(np.max(fplus_nodes(cv, t, K, n, cfg.sigma, self.c))) / K**cfg.sigma)
            tot_area += comp.last_area
            if cfg.monitors.gradient:
                try:
                    r: GradientRatios = gradient_hessian_ratios(cv, n, K, self.c.beta, self.C_beta, self.C_0)
                except MonitorMisconfigured:
                    self.C_beta, self.C_0 = fit_gradient_constants(cv.H, cv.normA2, K, n, self.c.beta)
                    self.C_beta = max(self.C_beta, 2.0)
                    r = gradient_hessian_ratios(cv, n, K, self.c.beta, self.C_beta, self.C_0)
                grad, hess, gg = max(grad, r.grad), max(hess, r.hess), max(gg, r.grad_over_GG)
            if cfg.monitors.kato:
                ks = kato_slack(cv, n)
                self.kato_violations += int(np.count_nonzero(ks < 0.0))
                self.kato_nodes += ks.size
            if t <= self.lam0 / K:
                self.bern[1] = max(self.bern[1], float(np.max(t * cv.grad_A**2)) / K)
                self.bern[2] = max(self.bern[2], float(np.max(t * t * cv.hess_A**2)) / K)
            if do_nc:
                try:
                    kb, ku = inscribed_exscribed(comp.state.profile, n, cv)
                    up, lo = noncollapse_ratios(cv, kb, ku, K, n)
                    kbar_max = max(kbar_max, float(up.max()))
                    kund_min = min(kund_min, float(lo.min()))
                except (NotEmbedded, MonitorMisconfigured) as exc:
                    self.report.invariant_violations.append(f"noncollapse monitor at Kt={K * t:.6g}: {exc}")
        if do_nc and math.isfinite(kbar_max):
            if self.mu is None:
                # the decay bound is stated for mu >= C
                self.mu = max(kbar_max, -kund_min, self.c.C_noncollapse)
            self.noncollapse.append((t, kbar_max, kund_min))
        self.sample_index += 1
        self.times.append(t)
        self.cyl.append(cyl)
        self.fplus.append(fp)
        self.grad.append(grad)
        self.hess.append(hess)
        self.gg.append(gg)
        self.alpha_margin.append(amarg)
        self.strict.append(strict)
        self.maxA2.append(maxA2)
        kbar_col = kbar_max if math.isfinite(kbar_max) else float("nan")
        return (K * t, maxH2, -strict, cyl, grad if cfg.monitors.gradient else float("nan"), kbar_col, float(tot_area * K ** (n / 2.0)), fp, len(comps))

    def finish(self, surgery_times: list[float]) -> EstimateReport:
        cfg, K = self.cfg, self.cfg.K
        rep = EstimateReport()
        if not self.times:
            return rep
        tK = [K * t for t in self.times]
        rep.add(cylindrical_estimate_check(self.times, self.cyl, surgery_times))
        rep.add(fplus_check(self.times, self.fplus, surgery_times))
        burn = self.lam0 / K
        if cfg.monitors.gradient:
            g = np.asarray(self.grad)
            after = np.asarray(self.times) >= burn
            violated = False
            if after.sum() >= 2:
                ga = g[after]
                violated = bool(np.max(ga) > 2.0 * ga[0] + 1e-8)
            i = int(np.argmax(g))
            rep.add(EstimateSummary("gradient", float(g[i]), float(self.times[i]), float(g[i]), violated, 2.0, "growth factor after burn-in"))
            h = np.asarray(self.hess)
            i = int(np.argmax(h))
            rep.add(EstimateSummary("hessian", float(h[i]), float(self.times[i]), float(h[i]), False, 0.0, "reported only"))
            gg = np.asarray(self.gg)
            i = int(np.argmax(gg))
            rep.add(
                EstimateSummary(
                    "gradient_over_GbetaG0",
                    float(gg[i]),
                    float(self.times[i]),
                    float(gg[i]),
                    False,
                    0.0,
                    f"C_beta={self.C_beta:.6g}, C_0={self.C_0:.6g}",
                )
            )
        rep.add(EstimateSummary("bernstein_1", self.bern[1], 0.0, self.bern[1], not math.isfinite(self.bern[1]), 0.0, f"window Kt <= {self.lam0:.6g}"))
        rep.add(EstimateSummary("bernstein_2", self.bern[2], 0.0, self.bern[2], not math.isfinite(self.bern[2]), 0.0, f"window Kt <= {self.lam0:.6g}"))
        rep.add(
            EstimateSummary(
                "kato",
                float(self.kato_violations),
                0.0,
                0.0,
                self.kato_violations > 0,
                1e-6,
                f"{self.kato_nodes} node samples",
            )
        )
        am = np.asarray(self.alpha_margin)
        i = int(np.argmax(am))
        rep.add(EstimateSummary("alpha_pinching", float(am[i]), float(self.times[i]), 0.0, bool(am[0] < 0.0 and am[i] >= 0.0), 0.0))
        if self.noncollapse and self.mu is not None:
            C = self.c.C_noncollapse
            worst_up = worst_lo = -math.inf
            first = None
            for t, up, lo in self.noncollapse:
                B = noncollapse_bound(t, self.mu, C, K)
                worst_up = max(worst_up, up / B)
                worst_lo = max(worst_lo, -lo / B)
                if first is None and (up > 1.05 * B or lo < -1.05 * B):
                    first = t
            rep.add(
                EstimateSummary(
                    "noncollapse",
                    max(worst_up, worst_lo),
                    first if first is not None else 0.0,
                    self.mu,
                    first is not None,
                    0.05,
                    f"mu={self.mu:.6g}, C={C:.6g}",
                )
            )
        rep.series = {
            "t_K": [[v] for v in tK],
            "cylindrical": [[v] for v in self.cyl],
            "fplus": [[v] for v in self.fplus],
            "alpha_margin": [[v] for v in self.alpha_margin],
            "strict_margin": [[v] for v in self.strict],
            "maxA2_over_K": [[v] for v in self.maxA2],
            "noncollapse": [[K * t, up, lo] for t, up, lo in self.noncollapse],
        }
        if cfg.monitors.gradient:
            rep.series["gradient"] = [[v] for v in self.grad]
            rep.series["hessian"] = [[v] for v in self.hess]
        return rep


def termination_check(comps: list, ledger: TopologyLedger, t: float, cfg: RunConfig, curvs=None) -> str | None:
    """Status if the run should stop now, else None."""
    if not comps:
        return TERMINATED
    K = cfg.K
    if t >= cfg.t_max / K:
        return BUDGET
    if curvs is not None and t >= cfg.converge_time / K:
        if all(float(np.max(c.normA2)) / K <= cfg.converge_tol for c in curvs):
            return CONVERGED
    return None


def _run_product_sphere(cfg: RunConfig, report: RunReport) -> RunReport:
    """ODE-only scenario for products S^k x S^(n-k)."""
    K, n = cfg.K, cfg.n
    k = int(cfg.profile.get("k", 1))
    st = ProductSphereState(n, k, float(cfg.profile.get("u", 0.3)))
    traj = flow_product_sphere(st, cfg.t_max / K, K, OdeControl(dt=cfg.profile.get("dt_K", 1e-3) / K))
    params = cfg.params()
    c = params.constants
    for s in traj.states:
        pc = product_sphere_curvatures(s, K)
        H = np.array([sum(pc.values)])
        A2 = np.array([sum(v * v for v in pc.values)])
        row = (
            K * s.t,
            float(H[0] ** 2) / K,
            -float(strict_margin_HA(H, A2, K, n)[0]) / K,
            float((cylindrical_deficit_HA(H, A2, n) - c.eta * H * H)[0]) * math.exp(2 * c.delta * K * s.t) / K,
            float("nan"),
            float("nan"),
            float("nan"),
            float(f_plus_HA(H, A2, s.t, K, n, cfg.sigma, c)[0]) / K**cfg.sigma,
            1,
        )
        report.rows.append(row)
    report.steps = len(traj.states) - 1
    report.final_time = K * traj.states[-1].t
    tag = RING if k == 1 else "product"
    cid = report.ledger.add_initial(tag)
    if traj.collapsed:
        report.ledger.discard(cid)
        report.status = TERMINATED
        report.classification = "S^1xS^(n-1)" if k == 1 else f"S^{k}xS^{n - k}"
    else:
        report.status = BUDGET
        report.classification = "S^1xS^(n-1)" if k == 1 else f"S^{k}xS^{n - k}"
    return report


def run(cfg: RunConfig) -> RunReport:
    """Run the surgically modified flow described by ``cfg``.

    Raises
    ------
    ConfigError
        If the parameters are inadmissible or the initial data lie outside
        the surgery class (unless ``require_class`` is false).
    """
    t_wall = time.perf_counter()
    try:
        params = cfg.params()
        sp = cfg.surgery.resolved(cfg.n, cfg.K)
    except ValueError as exc:
        raise ConfigError([str(exc)]) from exc
    report = RunReport(config=cfg.to_dict())
    if cfg.scenario == "product_sphere":
        out = _run_product_sphere(cfg, report)
        out.wall_clock = time.perf_counter() - t_wall
        return out
    n, K = cfg.n, cfg.K
    rho = 1.0 / math.sqrt(K)
    control = StepControl(c_cfl=cfg.c_cfl, c_react=cfg.c_react)
    profile0 = initial_profile(cfg)
    ledger = report.ledger
    state0 = FlowState(profile0)
    cid = ledger.add_initial(classify_component(profile0))
    comps = [_Component(cid, state0, area(profile0, n), 0.0)]
    curvs = [state0.record(n)]
    report.class_check = class_conditions(curvs, [comps[0].last_area], cfg, cfg.Theta)
    if cfg.require_class:
        bad = [k for k in ("pinched", "area_ok", "curvature_ok") if not report.class_check[k]]
        if bad:
            raise ConfigError([f"initial data outside the surgery class: {', '.join(bad)} ({report.class_check})"])
    area0 = comps[0].last_area
    monitor = _Monitor(cfg, params, report)
    surgery_times: list[float] = []
    min_decrement = math.inf
    t = 0.0
    step = 0
    status = None
    classification_override = None
    while True:
        sample_now = step % cfg.sample_every == 0
        if sample_now:
            if step > 0:
                curvs = [c.state.record(n) for c in comps]
            for comp in comps:
                a = area(comp.state.profile, n)
                if a > comp.last_area * (1.0 + 1e-8):
                    report.invariant_violations.append(f"area increased on component {comp.cid} at Kt={K * t:.6g}")
                comp.last_area = a
                margin = float(np.max(strict_margin_HA(curvs[comps.index(comp)].H, curvs[comps.index(comp)].normA2, K, n)))
                if margin >= 0.0:
                    report.invariant_violations.append(f"strict pinching lost on component {comp.cid} at Kt={K * t:.6g}")
            if comps:
                report.rows.append(monitor.sample(t, comps, curvs))
            status = termination_check(comps, ledger, t, cfg, curvs)
            if status is not None:
                break
            maxH2 = max(float(np.max(c.H**2)) for c in curvs)
            if maxH2 >= sp.Theta3 * K:
                comps, curvs, acted = _surgery_phase(comps, curvs, cfg, sp, params, ledger, report, t)
                for ev in report.events:
                    if ev.t == t:
                        surgery_times.append(t)
                        min_decrement = min(min_decrement, ev.area_removed)
                status = termination_check(comps, ledger, t, cfg, None)
                if status is not None:
                    break
            # unresolved pinch: interior node too close to the axis
            for comp in comps:
                if _interior_pinch(comp.state.profile) < cfg.pinch_stop * rho:
                    status = UNRESOLVED
                    break
            if status is not None:
                break
        for comp in comps:
            prof = comp.state.profile
            if prof.spacing_ratio() > cfg.regrid_ratio:
                comp.state.profile = regrid(prof, prof.size)
                comp.state.generation += 1
        dt = min(_dt(c.state, n, control) for c in comps)
        fixed = StepControl(c_cfl=cfg.c_cfl, c_react=cfg.c_react, dt=dt)
        for comp in comps:
            comp.state = mcf_step(comp.state, n, fixed)
        t += dt
        step += 1
    report.status = status
    report.steps = step
    report.final_time = K * t
    report.estimates = monitor.finish(surgery_times)
    _final_checks(report, ledger, area0, min_decrement, monitor)
    if report.status == CONVERGED:
        report.classification = ledger.classification()
    elif report.status == TERMINATED:
        report.classification = ledger.classification()
    else:
        report.classification = classification_override or "unclassified"
    report.wall_clock = time.perf_counter() - t_wall
    log.info("run finished: %s, %s, %d steps, %.2fs", report.status, report.classification, step, report.wall_clock)
    return report


def _interior_pinch(profile: ProfileCurve) -> float:
    """Smallest interior local minimum of the orbit radius z (inf if none)."""
    z = profile.nodes[:, 2]
    if profile.closed:
        lo = (z <= np.roll(z, 1)) & (z <= np.roll(z, -1))
    else:
        lo = np.zeros(z.size, dtype=bool)
        lo[1:-1] = (z[1:-1] <= z[:-2]) & (z[1:-1] <= z[2:])
    return float(z[lo].min()) if lo.any() else math.inf


def _dt(state: FlowState, n: int, control: StepControl) -> float:
    from .rotsym_flow import stable_dt

    return stable_dt(state.profile, control, n)


def _surgery_phase(comps, curvs, cfg: RunConfig, sp: SurgeryParams, params: FlowParams, ledger, report: RunReport, t: float):
    """Detect necks, cut the accepted ones, and discard recognized high-curvature components."""
    n, K = cfg.n, cfg.K
    new_comps: list[_Component] = []
    new_curvs: list[NodeCurvature] = []
    protected: set[int] = set()
    for comp, cv in zip(comps, curvs):
        necks = detect_necks(comp.state, cv, n, K, sp, report.events)
        if cfg.monitors.comparability:
            res = comparability_scan(list(comp.state.history), sp.h_sharp, K, stride=8)
            if res.violations:
                report.invariant_violations.append(f"curvature comparability failed at {res.violations} of {res.points_checked} samples (Kt={K * t:.6g})")
        cover = [nk for nk in necks if nk.covers_component]
        if cover:
            tag = classify_component(comp.state.profile)
            log.info("component %d covered by a neck; discarding (%s)", comp.cid, tag)
            ledger.discard(comp.cid)
            continue
        eligible = [nk for nk in necks if nk.H0 * nk.H0 >= sp.Theta1 * K]
        accepted = [nk for nk in eligible if nk.accepted]
        if eligible and not accepted:
            # necks are forming but not yet of sufficient quality: keep flowing
            protected.add(comp.cid)
            new_comps.append(comp)
            new_curvs.append(cv)
            continue
        if not accepted:
            new_comps.append(comp)
            new_curvs.append(cv)
            continue
        neck = max(accepted, key=lambda nk: nk.H0)
        try:
            out = perform_surgery(comp.state, cv, neck, n, sp, params.constants, cfg.sigma, component=comp.cid)
        except SurgeryFailed as exc:
            report.invariant_violations.append(f"surgery failed at Kt={K * t:.6g}: {exc}")
            protected.add(comp.cid)
            new_comps.append(comp)
            new_curvs.append(cv)
            continue
        tags = [classify_component(p) for p in out.pieces]
        ids = ledger.record_surgery(comp.cid, tags)
        out.event.created = ids
        report.events.append(out.event)
        log.info("surgery at Kt=%.6g on component %d -> %s", K * t, comp.cid, ids)
        for cid, piece in zip(ids, out.pieces):
            st = FlowState(piece, t=t)
            st.generation = comp.state.generation + 1
            c_new = st.record(n)
            new_comps.append(_Component(cid, st, area(piece, n), t))
            new_curvs.append(c_new)
    comps, curvs = [], []
    for comp, cv in zip(new_comps, new_curvs):
        if comp.cid not in protected and float(np.max(cv.H**2)) >= sp.Theta1 * K:
            tag = classify_component(comp.state.profile)
            log.info("discarding component %d (%s), max H^2/K = %.4g", comp.cid, tag, float(np.max(cv.H**2)) / K)
            ledger.discard(comp.cid)
            continue
        comps.append(comp)
        curvs.append(cv)
    # surviving components must lie in the class with Theta2
    for comp, cv in zip(comps, curvs):
        if comp.cid in protected:
            continue
        chk = class_conditions([cv], [area(comp.state.profile, n)], cfg, sp.Theta2)
        if not (chk["pinched"] and chk["curvature_ok"]):
            report.invariant_violations.append(f"component {comp.cid} left the surgery class after surgery at Kt={K * t:.6g}")
    return comps, curvs, True


def _final_checks(report: RunReport, ledger: TopologyLedger, area0: float, min_decrement: float, monitor: _Monitor) -> None:
    if not ledger.reconciles():
        report.invariant_violations.append("topology ledger does not reconcile")
    for ev in report.events:
        if not ev.area_removed > 0.0:
            report.invariant_violations.append(f"surgery at Kt={ev.t} did not decrease area")
        lo, hi = ev.band
        if not all(lo <= h <= hi for h in ev.H_cut):
            report.invariant_violations.append(f"surgery at Kt={ev.t} outside the trigger band")
    if report.events and len(report.events) > area0 / min_decrement:
        report.invariant_violations.append("more surgeries than the area bound allows")
    est = report.estimates.estimates
    if "kato" in est and est["kato"].violated:
        report.invariant_violations.append(f"Kato inequality violated at {int(est['kato'].sup)} node samples")
    if "noncollapse" in est and est["noncollapse"].violated:
        report.invariant_violations.append("noncollapsing bound violated beyond 5% slack")
    if "alpha_pinching" in est and est["alpha_pinching"].violated:
        report.invariant_violations.append("quadratic pinching not preserved")
