"""Command line: run, verify, gamma-search, oracle.

Exit codes: 0 success, 2 invariant violation, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import oracle
from .estimates_monitor import poincare_gamma_search
from .exact_models import (
    ProductSphereState,
    StepControl as OdeControl,
    flow_product_sphere,
    minimal_clifford_angle,
    product_sphere_curvatures,
    product_sphere_strict_margin,
)
from .flow_controller import CSV_COLUMNS, ConfigError, MonitorConfig, RunConfig, RunReport, initial_profile, run
from .geometry_core import FlowParams, InadmissibleParameters
from .rotsym_flow import ProfileCurve, profile_curvatures
from .surgery import SurgeryParams

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVARIANT = 2
EXIT_CONFIG = 3

SCENARIOS = ("product_sphere", "geodesic_sphere", "tube", "equator", "dumbbell", "profile_table")
_SUBCONFIGS = {"surgery": SurgeryParams, "monitors": MonitorConfig}


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig`, collecting every problem before raising."""
    problems: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["top level must be an object"])
    data = dict(data)
    data.pop("out", None)
    known = _field_names(RunConfig)
    for key in sorted(set(data) - known):
        problems.append(f"unknown key {key!r}")
    scenario = data.get("scenario")
    if scenario is None:
        problems.append("missing key 'scenario'")
    elif scenario not in SCENARIOS:
        problems.append(f"unknown scenario {scenario!r}; expected one of {', '.join(SCENARIOS)}")
    kwargs = {k: v for k, v in data.items() if k in known}
    for key, cls in _SUBCONFIGS.items():
        sub = kwargs.get(key, {})
        if not isinstance(sub, dict):
            problems.append(f"{key} must be an object")
            kwargs.pop(key, None)
            continue
        bad = sorted(set(sub) - _field_names(cls))
        for b in bad:
            problems.append(f"unknown key {key}.{b}")
        kwargs[key] = cls(**{k: v for k, v in sub.items() if k not in bad})
    if "profile" in kwargs and not isinstance(kwargs["profile"], dict):
        problems.append("profile must be an object")
        kwargs.pop("profile")
    kwargs.setdefault("scenario", scenario or "geodesic_sphere")
    cfg = RunConfig(**kwargs)
    problems += _numeric_problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _numeric_problems(cfg: RunConfig) -> list[str]:
    errs = FlowParams.violations(cfg)  # duck-typed: RunConfig has every FlowParams field
    if not isinstance(cfg.N, int) or cfg.N < 16:
        errs.append(f"N >= 16 required, got {cfg.N}")
    if not 0 < cfg.c_cfl <= 0.25:
        errs.append(f"c_cfl in (0, 0.25] required, got {cfg.c_cfl}")
    if not cfg.c_react > 0:
        errs.append(f"c_react > 0 required, got {cfg.c_react}")
    for name in ("t_max", "converge_time", "converge_tol", "pinch_stop"):
        if not getattr(cfg, name) > 0:
            errs.append(f"{name} > 0 required, got {getattr(cfg, name)}")
    if not cfg.sample_every >= 1:
        errs.append(f"sample_every >= 1 required, got {cfg.sample_every}")
    if cfg.n >= 2 and cfg.K > 0:
        errs += cfg.surgery.violations(cfg.n, cfg.K)
    p = cfg.profile
    if cfg.scenario == "product_sphere":
        k, u = p.get("k", 1), p.get("u", 0.3)
        if not 1 <= k <= cfg.n - 1:
            errs.append(f"profile.k in [1, n-1] required, got {k}")
        if not 0 < u < math.pi / 2:
            errs.append(f"profile.u in (0, pi/2) required, got {u}")
    elif cfg.scenario == "geodesic_sphere" and not 0 < p.get("angle", math.pi / 3) < math.pi / 2:
        errs.append(f"profile.angle in (0, pi/2) required for a pinched sphere, got {p.get('angle')}")
    elif cfg.scenario == "tube" and not 0 < p.get("u", 0.3) < math.pi / 2:
        errs.append(f"profile.u in (0, pi/2) required, got {p.get('u')}")
    elif cfg.scenario == "profile_table" and "path" not in p:
        errs.append("profile.path required for profile_table")
    return errs


def parse_config(path: str | Path) -> RunConfig:
    """Read a JSON configuration file.

    Raises
    ------
    ConfigError
        On a missing file, a syntax error (with line and column) or any
        violated constraint; all constraint violations are listed.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"]) from exc
    if isinstance(data, dict) and "profile" in data and isinstance(data["profile"], dict) and "path" in data["profile"]:
        data["profile"] = dict(data["profile"], path=str((path.parent / data["profile"]["path"]).resolve()))
    return config_from_dict(data)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def emit_timeseries(report: RunReport, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            w.writerow([_fmt(v) for v in row])


def emit_report(report: RunReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(report.to_dict()), fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_failures(report: RunReport) -> list[str]:
    out = list(report.invariant_violations)
    out += [f"estimate {k} violated" for k, v in sorted(report.estimates.estimates.items()) if v.violated]
    if report.status == "unresolved-singularity":
        out.append("unresolved singularity")
    return out


# Subcommands.


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    report = run(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_timeseries(report, out / "timeseries.csv")
    emit_report(report, out / "report.json")
    print(f"status: {report.status}")
    print(f"classification: {report.classification}")
    print(f"surgeries: {len(report.events)}")
    print(f"wall clock: {report.wall_clock:.2f}s")
    fails = report_failures(report)
    for f in fails:
        print(f"VIOLATION: {f}")
    return EXIT_INVARIANT if fails else EXIT_OK


def _verify_exact(n: int = 4) -> list[tuple[str, bool, str]]:
    """Fast checks of the exact models: Clifford stationarity, sharpness, and homogeneous pinching."""
    out = []
    K = 1.0
    u = minimal_clifford_angle(n, 2)
    st = ProductSphereState(n, 2, u)
    A2 = sum(v * v for v in product_sphere_curvatures(st, K).values)
    traj = flow_product_sphere(st, 1.0, K, OdeControl(dt=1e-3))
    drift = abs(traj.states[-1].u - u)
    out.append(("clifford stationary", drift <= 1e-10 and abs(A2 - n * K) <= 1e-12, f"drift={drift:.3g}, |A|^2={A2!r}"))
    worst = 0.0
    for m in (4, 5, 6):
        for uu in np.linspace(0.05, 1.5, 50):
            st = ProductSphereState(m, 2, float(uu))
            margin = product_sphere_strict_margin(st, K)
            r, sr = st.radii(K)
            ref = 2.0 * (m - 4) / (m - 2) * (sr * sr) / (r * r) * K
            worst = max(worst, abs(margin - ref) / max(abs(ref), K))
    out.append(("sharpness k=2", worst <= 1e-10, f"max rel err={worst:.3g}"))
    return out


def _verify_run(cfg: RunConfig) -> list[tuple[str, bool, str]]:
    report = run(cfg)
    out = [("run status", report.status != "unresolved-singularity", report.status)]
    for name, est in sorted(report.estimates.estimates.items()):
        out.append((f"estimate {name}", not est.violated, f"sup={est.sup:.6g}"))
    out.append(("invariants", not report.invariant_violations, "; ".join(report.invariant_violations[:3])))
    if report.rows and cfg.scenario != "product_sphere":
        margins = [row[0] for row in report.estimates.series.get("alpha_margin", [])]
        out.append(("alpha pinching at every sample", all(m < 0 for m in margins), f"max={max(margins, default=0.0):.6g}"))
    return out


def cmd_verify(args) -> int:
    checks = _verify_exact()
    if args.config:
        cfg = parse_config(args.config)
        checks += _verify_run(cfg)
    g = poincare_gamma_search(4, 0.5, 0.05, budget=args.budget, seed=args.seed or 0)
    checks.append(("poincare gamma positive", g.gamma_hat > 0 and g.reference_included, f"gamma={g.gamma_hat:.6g}"))
    ok = True
    for name, passed, note in checks:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name} {note}".rstrip())
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_gamma(args) -> int:
    try:
        res = poincare_gamma_search(args.n, args.alpha, args.eta, budget=args.budget, seed=args.seed or 0)
    except InadmissibleParameters as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_jsonable(dataclasses.asdict(res)), indent=2, sort_keys=True))
    return EXIT_OK if res.gamma_hat > 0 else EXIT_INVARIANT


def profile_oracle_check(profile: ProfileCurve, n: int, samples: int = 5) -> list[dict]:
    """Compare the rotational curvature formulas with the embedding oracle at interior nodes."""
    P = profile.nodes
    closed = profile.closed
    if closed:
        Q = np.vstack([P, P[:1]])
    else:
        Q = P
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(Q, axis=0), axis=1))])
    spline = CubicSpline(s, Q, bc_type="periodic" if closed else "not-a-knot")
    R = np.linalg.norm(P[0])

    def prof(t: float) -> np.ndarray:
        x = spline(t)
        return R * x / np.linalg.norm(x)

    curv = profile_curvatures(profile, n)
    X = oracle.rotational_chart(prof, n)
    lo, hi = (0, len(P)) if closed else (len(P) // 10, len(P) - len(P) // 10)
    picks = np.linspace(lo, hi - 1, samples).astype(int)
    rows = []
    for i in picks:
        p = prof(s[i])
        T = spline(s[i], 1)
        T = T / np.linalg.norm(T)
        nu = np.cross(T, p / np.linalg.norm(p))
        ref = np.concatenate([nu, np.zeros(n - 1)])
        step = 1e-3 * R
        cn = oracle.curvature_norms(X, np.concatenate([[s[i]], np.zeros(n - 1)]), ref, second_derivative=False, step=step, step_h=10 * step)
        rows.append(
            {
                "node": int(i),
                "H": [cn.H, float(curv.H[i])],
                "normA2": [cn.normA2, float(curv.normA2[i])],
                "gradA2": [cn.gradA2, float(curv.grad_A[i] ** 2)],
            }
        )
    return rows


def cmd_oracle(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
    else:
        cfg = config_from_dict({"scenario": "dumbbell", "N": 800})
    if cfg.scenario == "product_sphere":
        X, u0, ref = oracle.product_sphere_chart(cfg.n, int(cfg.profile.get("k", 1)), float(cfg.profile.get("u", 0.3)), cfg.K)
        lam = np.sort(oracle.principal_curvatures(X, u0, ref))
        exact = np.sort(product_sphere_curvatures(ProductSphereState(cfg.n, int(cfg.profile.get("k", 1)), float(cfg.profile.get("u", 0.3))), cfg.K).array)
        err = float(np.max(np.abs(lam - exact)) / max(np.max(np.abs(exact)), 1.0))
        print(json.dumps({"oracle": lam.tolist(), "exact": exact.tolist(), "rel_err": err}, indent=2))
        return EXIT_OK if err <= 1e-5 else EXIT_INVARIANT
    rows = profile_oracle_check(initial_profile(cfg), cfg.n)
    worst = 0.0
    for r in rows:
        for key, tol in (("H", 1.0), ("normA2", 1.0), ("gradA2", 5.0)):
            o, f = r[key]
            rel = abs(o - f) / max(abs(o), cfg.K**(0.5 if key == "H" else 1.0 if key == "normA2" else 2.0))
            r[key + "_rel"] = rel
            worst = max(worst, rel / tol)
    print(json.dumps(_jsonable(rows), indent=2))
    return EXIT_OK if worst <= 2e-2 else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spheremcf", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run a configured flow with surgery")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget", type=int, default=20000)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("gamma-search", help="search the Poincare constant")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--budget", type=int, default=200000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gamma)
    p = sub.add_parser("oracle", help="finite-difference embedding checks")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
