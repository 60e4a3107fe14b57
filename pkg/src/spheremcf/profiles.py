"""Named initial profiles for the rotational PDE and a plain-text table loader."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .rotsym_flow import ProfileCurve, project_to_sphere, regrid


def geodesic_sphere(d: float, K: float, N: int) -> ProfileCurve:
    """Circle of geodesic radius ``d`` about ``(rho, 0, 0)``; normal points away from the center."""
    rho = 1.0 / math.sqrt(K)
    th = math.sqrt(K) * d
    phi = np.linspace(0.0, math.pi, N)
    P = rho * np.column_stack(
        [np.full(N, math.cos(th)), math.sin(th) * np.cos(phi), math.sin(th) * np.sin(phi)]
    )
    P[0, 2] = P[-1, 2] = 0.0
    return ProfileCurve(project_to_sphere(P, K, False), False, K)


def tube(u: float, K: float, N: int) -> ProfileCurve:
    """The loop ``z = rho sin u``: the product S^1(rho cos u) x S^{n-1}(rho sin u)."""
    rho = 1.0 / math.sqrt(K)
    psi = -2.0 * math.pi * np.arange(N) / N
    P = rho * np.column_stack(
        [math.cos(u) * np.cos(psi), math.cos(u) * np.sin(psi), np.full(N, math.sin(u))]
    )
    return ProfileCurve(project_to_sphere(P, K, True), True, K)


def equator(K: float, N: int, amplitude: float = 0.0, mode: int = 3) -> ProfileCurve:
    """Great half circle through the pole, optionally displaced by ``amplitude cos(mode phi)``.

    Odd modes keep the symmetry ``(x, y) -> (-x, -y)``, so the perturbed
    hypersurface still splits the ambient sphere into halves of equal volume.
    """
    rho = 1.0 / math.sqrt(K)
    phi = np.linspace(0.0, math.pi, N)
    w = amplitude * np.cos(mode * phi)
    P = rho * np.column_stack([np.sin(w), -np.cos(phi) * np.cos(w), np.sin(phi) * np.cos(w)])
    P[0, 2] = P[-1, 2] = 0.0
    return ProfileCurve(project_to_sphere(P, K, False), False, K)


def exp_orbit(base: np.ndarray, e1: np.ndarray, e2: np.ndarray, X: np.ndarray, Z: np.ndarray, K: float) -> np.ndarray:
    """Exponential map of the orbit sphere at ``base`` applied to ``X e1 + Z e2``."""
    rho = 1.0 / math.sqrt(K)
    r = np.hypot(X, Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(r > 0, np.sin(r / rho) * rho / np.where(r > 0, r, 1.0), 1.0)
    return np.cos(r / rho)[:, None] * base[None, :] + c[:, None] * (X[:, None] * e1[None, :] + Z[:, None] * e2[None, :])


def log_orbit(base: np.ndarray, e1: np.ndarray, e2: np.ndarray, P: np.ndarray, K: float) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`exp_orbit`: tangent-plane coordinates of orbit-sphere points."""
    rho = 1.0 / math.sqrt(K)
    cosang = np.clip(P @ base / (rho * rho), -1.0, 1.0)
    ang = np.arccos(cosang)
    V = P - cosang[:, None] * base[None, :]
    norm = np.linalg.norm(V, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > 0, rho * ang / np.where(norm > 0, norm, 1.0), 0.0)
    return (V @ e1) * scale, (V @ e2) * scale


def _neck_half(r: float, c: float, x1: float, w: float, R: float, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Half profile from the waist to the axis, by integrating a prescribed curvature.

    Curvature follows the hyperbola ``Z^2 = r^2 + c X^2`` up to ``X = x1``,
    then blends (quintic smoothstep over arclength ``w``) into the constant
    value ``-1/R`` until the tangent points straight down.
    """
    xs = np.linspace(0.0, x1, samples)
    zs = np.sqrt(r * r + c * xs * xs)
    zp = c * xs / zs
    k_hyp = (c - zp * zp) / zs / (1.0 + zp * zp) ** 1.5
    s_hyp = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xs), np.diff(zs)))])
    ds = s_hyp[1]
    s1 = s_hyp[-1]
    s = np.arange(0.0, s1 + w + 4.0 * R + 4.0 * x1, ds)
    u = np.clip((s - s1 + 0.5 * w) / w, 0.0, 1.0)
    blend = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
    k = np.interp(s, s_hyp, k_hyp) * (1.0 - blend) - blend / R
    theta = cumulative_trapezoid(k, s, initial=0.0)
    stop = int(np.argmax(theta <= -0.5 * math.pi))
    if stop == 0:
        raise ValueError("cap never turns to the axis; increase the search range")
    s, theta = s[: stop + 1].copy(), theta[: stop + 1].copy()
    # end exactly where the tangent turns vertical, so the endpoint is continuous in R
    frac = (theta[-2] + 0.5 * math.pi) / (theta[-2] - theta[-1])
    s[-1] = s[-2] + frac * (s[-1] - s[-2])
    theta[-1] = -0.5 * math.pi
    X = cumulative_trapezoid(np.cos(theta), s, initial=0.0)
    Z = r + cumulative_trapezoid(np.sin(theta), s, initial=0.0)
    return X, Z


def dumbbell(
    K: float,
    N: int,
    neck_radius: float = 0.06,
    neck_slope2: float = 0.2,
    neck_length: float = 0.3,
    blend_length: float = 0.1,
    samples: int = 20000,
) -> ProfileCurve:
    """Symmetric dumbbell: hyperboloid neck between two convex caps.

    Built in the tangent plane at ``(rho, 0, 0)``.  The neck is the
    hyperbola ``Z^2 = r^2 + c X^2`` on ``|X| <= neck_length``; there the ratio
    of profile to rotational curvature is bounded by ``-c``, so small ``c``
    keeps the hypersurface quadratically pinched.  The cap radius is solved
    for so that the curve meets the axis.  Lengths are in units of ``rho``.
    """
    rho = 1.0 / math.sqrt(K)
    r, x1, w = neck_radius * rho, neck_length * rho, blend_length * rho
    c = neck_slope2
    R = brentq(lambda R_: _neck_half(r, c, x1, w, R_, samples)[1][-1], 0.05 * rho, 3.0 * rho, xtol=1e-14 * rho)
    X, Z = _neck_half(r, c, x1, w, R, samples)
    # run from +X to -X so that the normal points away from the enclosed region
    XX = np.concatenate([X[::-1], -X[1:]])
    ZZ = np.concatenate([Z[::-1], Z[1:]])
    ZZ[0] = ZZ[-1] = 0.0
    base = np.array([rho, 0.0, 0.0])
    P = exp_orbit(base, np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), XX, ZZ, K)
    P = project_to_sphere(P, K, False)
    return regrid(ProfileCurve(P, False, K), N)


def load_table(path: str | Path, K: float, closed: bool = False) -> ProfileCurve:
    """Read whitespace-separated columns (xi, x, y, z); the xi column is ignored."""
    data = np.loadtxt(path, comments="#", ndmin=2)
    P = np.ascontiguousarray(data[:, 1:4], dtype=float)
    return ProfileCurve(project_to_sphere(P, K, closed), closed, K)
