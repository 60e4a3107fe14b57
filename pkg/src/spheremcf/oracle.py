"""Finite-difference second fundamental form of an explicit embedding.

Given a local chart ``X: R^n -> R^{n+2}`` of a hypersurface of the sphere,
everything is computed from point evaluations of ``X`` with fourth order
central stencils: metric, Christoffel symbols, second fundamental form,
and its first two covariant derivatives.  Nothing here knows about
rotational symmetry, which is what makes it an independent check of the
reduced formulas in :mod:`spheremcf.rotsym_flow`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Chart = Callable[[np.ndarray], np.ndarray]

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])


def _derivative(f: Callable[[np.ndarray], np.ndarray], u: np.ndarray, h: float) -> np.ndarray:
    """Jacobian of ``f`` at ``u``; last axis indexes the coordinate."""
    cols = []
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        acc = sum(c * f(u + o * e) for c, o in zip(_D1, _OFFSETS) if c != 0.0)
        cols.append(acc / h)
    return np.stack(cols, axis=-1)


def _jet2(X: Chart, u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, first and second derivatives of ``X`` at ``u``."""
    n = u.size
    x0 = X(u)
    J = np.empty((x0.size, n))
    Hs = np.empty((x0.size, n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        vals = [X(u + o * ei) for o in _OFFSETS]
        J[:, i] = sum(c * v for c, v in zip(_D1, vals)) / h
        Hs[:, i, i] = sum(c * v for c, v in zip(_D2, vals)) / h**2
    for i in range(n):
        for j in range(i + 1, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            acc = np.zeros_like(x0)
            for ci, oi in zip(_D1, _OFFSETS):
                if ci == 0.0:
                    continue
                for cj, oj in zip(_D1, _OFFSETS):
                    if cj == 0.0:
                        continue
                    acc += ci * cj * X(u + oi * ei + oj * ej)
            Hs[:, i, j] = Hs[:, j, i] = acc / h**2
    return x0, J, Hs


def _unit_normal(x0: np.ndarray, J: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to the position and all tangent vectors."""
    basis = np.column_stack([x0, J])
    q, _ = np.linalg.qr(basis, mode="complete")
    N = q[:, -1]
    if float(N @ ref) < 0.0:
        N = -N
    return N


@dataclass
class PointGeometry:
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray  # Gamma[l, k, i]
    h: np.ndarray
    normal: np.ndarray


def point_geometry(X: Chart, u: np.ndarray, ref_normal: np.ndarray, step: float = 1e-3) -> PointGeometry:
    x0, J, Hs = _jet2(X, u, step)
    N = _unit_normal(x0, J, ref_normal)
    g = J.T @ J
    g_inv = np.linalg.inv(g)
    first_kind = np.einsum("aki,aj->kij", Hs, J)  # <d_k d_i X, d_j X>
    gamma = np.einsum("lj,kij->lki", g_inv, first_kind)
    h = -np.einsum("aij,a->ij", Hs, N)
    return PointGeometry(g=g, g_inv=g_inv, christoffel=gamma, h=h, normal=N)


def principal_curvatures(X: Chart, u, ref_normal, step: float = 1e-3) -> np.ndarray:
    """Sorted eigenvalues of the shape operator at ``u``.

    The sign convention is ``A(V, W) = <D_V N, W>`` with ``N`` the unit
    normal having positive inner product with ``ref_normal``.
    """
    pg = point_geometry(X, np.asarray(u, dtype=float), np.asarray(ref_normal, dtype=float), step)
    L = np.linalg.cholesky(pg.g)
    Li = np.linalg.inv(L)
    return np.sort(np.linalg.eigvalsh(Li @ pg.h @ Li.T))


def _nabla_h(X: Chart, u: np.ndarray, ref: np.ndarray, step: float, step_h: float) -> tuple[np.ndarray, PointGeometry]:
    pg = point_geometry(X, u, ref, step)

    def h_at(v: np.ndarray) -> np.ndarray:
        return point_geometry(X, v, pg.normal, step).h

    dh = _derivative(h_at, u, step_h)  # dh[i, j, k] = d_k h_ij
    dh = np.moveaxis(dh, -1, 0)  # [k, i, j]
    G = pg.christoffel
    nab = dh - np.einsum("lki,lj->kij", G, pg.h) - np.einsum("lkj,il->kij", G, pg.h)
    return nab, pg


@dataclass
class CurvatureNorms:
    principal: np.ndarray
    H: float
    normA2: float
    gradA2: float
    gradH2: float
    hessA2: float | None


def curvature_norms(
    X: Chart,
    u,
    ref_normal,
    second_derivative: bool = True,
    step: float = 1e-3,
    step_h: float = 1e-2,
    step_hh: float = 3e-2,
) -> CurvatureNorms:
    """``|A|^2``, ``|grad A|^2``, ``|grad H|^2`` and optionally ``|grad^2 A|^2`` at ``u``."""
    u = np.asarray(u, dtype=float)
    ref = np.asarray(ref_normal, dtype=float)
    nab, pg = _nabla_h(X, u, ref, step, step_h)
    gi = pg.g_inv
    S = gi @ pg.h
    lam = np.sort(np.linalg.eigvals(S).real)
    A2 = float(np.trace(S @ S))
    H = float(np.trace(S))
    gradA2 = float(np.einsum("kij,kc,ia,jb,cab->", nab, gi, gi, gi, nab))
    dH = np.einsum("ij,kij->k", gi, nab)
    gradH2 = float(dH @ gi @ dH)
    hessA2 = None
    if second_derivative:
        N0 = pg.normal

        def nab_at(v: np.ndarray) -> np.ndarray:
            return _nabla_h(X, v, N0, step, step_h)[0]

        d_nab = np.moveaxis(_derivative(nab_at, u, step_hh), -1, 0)  # [m, k, i, j]
        G = pg.christoffel
        nn = (
            d_nab
            - np.einsum("lmk,lij->mkij", G, nab)
            - np.einsum("lmi,klj->mkij", G, nab)
            - np.einsum("lmj,kil->mkij", G, nab)
        )
        hessA2 = float(np.einsum("mkij,mr,ks,ia,jb,rsab->", nn, gi, gi, gi, gi, nn))
    return CurvatureNorms(principal=lam, H=H, normA2=A2, gradA2=gradA2, gradH2=gradH2, hessA2=hessA2)


def gnomonic_sphere_chart(theta: np.ndarray) -> np.ndarray:
    """Chart of the unit sphere around ``e_0``: ``(1, theta)/|(1, theta)|``."""
    v = np.concatenate([[1.0], theta])
    return v / math.sqrt(float(v @ v))


def product_sphere_chart(n: int, k: int, u: float, K: float) -> tuple[Chart, np.ndarray, np.ndarray]:
    """Chart of ``(rho cos u w1, rho sin u w2)`` and the normal pointing to increasing u.

    Returns ``(X, u0, ref_normal)``.
    """
    rho = 1.0 / math.sqrt(K)

    def X(p: np.ndarray) -> np.ndarray:
        w1 = gnomonic_sphere_chart(p[:k])
        w2 = gnomonic_sphere_chart(p[k:])
        return np.concatenate([rho * math.cos(u) * w1, rho * math.sin(u) * w2])

    e1 = np.zeros(k + 1)
    e1[0] = 1.0
    e2 = np.zeros(n - k + 1)
    e2[0] = 1.0
    ref = np.concatenate([-math.sin(u) * e1, math.cos(u) * e2])
    return X, np.zeros(n), ref


def rotational_chart(profile: Callable[[float], np.ndarray], n: int) -> Chart:
    """Chart ``(s, theta) -> (x(s), y(s), z(s) w(theta))`` of a rotational hypersurface."""

    def X(p: np.ndarray) -> np.ndarray:
        x, y, z = profile(float(p[0]))
        w = gnomonic_sphere_chart(p[1:])
        return np.concatenate([[x, y], z * w])

    return X


def geodesic_circle_profile(d: float, K: float) -> Callable[[float], np.ndarray]:
    """Circle of geodesic radius ``d`` about ``(rho, 0, 0)`` in the orbit sphere; s is the angle."""
    rho = 1.0 / math.sqrt(K)
    th = math.sqrt(K) * d

    def prof(s: float) -> np.ndarray:
        return rho * np.array([math.cos(th), math.sin(th) * math.cos(s), math.sin(th) * math.sin(s)])

    return prof
