"""Pointwise curvature algebra for hypersurfaces of the round sphere.

Everything here is a pure function of the principal curvatures (or of the
pair ``H``, ``|A|^2``) and the ambient curvature ``K``.  The array-level
helpers accept numpy arrays so that the PDE engine can evaluate the same
formulas at every node without a Python loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InadmissibleParameters(ValueError):
    """Raised when (n, alpha, eta) fall outside the admissible windows."""


class NotPinched(ValueError):
    """Raised when a quantity needs strict pinching and the input violates it."""


@dataclass(frozen=True)
class PrincipalCurvatures:
    """Sorted principal curvatures ``lambda_1 <= ... <= lambda_n``."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) == 0:
            raise ValueError("need at least one principal curvature")
        object.__setattr__(self, "values", tuple(sorted(vals)))

    @classmethod
    def of(cls, values: Sequence[float]) -> "PrincipalCurvatures":
        return cls(tuple(values))

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    @property
    def smallest(self) -> float:
        return self.values[0]

    @property
    def largest(self) -> float:
        return self.values[-1]

    def reversed_orientation(self) -> "PrincipalCurvatures":
        return PrincipalCurvatures(tuple(-v for v in self.values))


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the estimates, fixed once per flow."""

    n: int
    alpha: float
    eta: float
    a: float
    b: float
    delta: float
    beta: float
    C_noncollapse: float
    eta_max_poincare: float
    eta_max_cylindrical: float
    eta_max_gradient: float


def _windows(n: int, alpha: float) -> tuple[float, float, float]:
    poincare = 1.0 / (n - 2 + alpha) - 1.0 / (n - 1)
    cylindrical = (2 - alpha) * (n - alpha) / (2 * n * (n - 1) * (n - 2 + alpha))
    beta = 0.5 * (3.0 / (n + 2) - 1.0 / (n - 1))
    gradient = (1.0 - 3.0 / (4 * (n + 2))) * beta
    return poincare, cylindrical, gradient


def derive_constants(n: int, alpha: float, eta: float) -> DerivedConstants:
    """Compute ``a, b, delta, beta, C`` and the admissible eta windows.

    Raises
    ------
    InadmissibleParameters
        If the eta window is empty, eta lies outside it, or a or delta are
        not positive.
    """
    if n < 2:
        raise InadmissibleParameters(f"n must be at least 2, got {n}")
    if not 0.0 < alpha <= 1.0:
        raise InadmissibleParameters(f"alpha must lie in (0, 1), got {alpha}")
    poincare, cylindrical, gradient = _windows(n, alpha)
    windows = f"windows: poincare (0, {poincare:.6g}), cylindrical (0, {cylindrical:.6g})"
    if poincare <= 0.0:
        raise InadmissibleParameters(f"empty eta window for n={n}, alpha={alpha}; {windows}")
    if not 0.0 < eta < min(poincare, cylindrical):
        raise InadmissibleParameters(f"eta={eta} outside admissible range; {windows}")
    a = 1.0 / (n - 2 + alpha) - 1.0 / (n - 1) - eta + alpha / (2 * n * (n - 1))
    b = 2.0 * (2.0 - alpha)
    if a <= 0.0:
        raise InadmissibleParameters(f"a={a} is not positive; {windows}")
    delta = min(
        1.0 - (n + 2) / 3.0 * (1.0 / (n - 2 + alpha) - alpha / (2 * n * (n - 1))),
        1.0 / (a * 2 * (n - 1)),
        alpha + n / 2.0 - 2.0,
    )
    if delta <= 0.0:
        raise InadmissibleParameters(f"delta={delta} is not positive for n={n}, alpha={alpha}")
    beta = 0.5 * (3.0 / (n + 2) - 1.0 / (n - 1))
    C = math.sqrt((n - 2) * (n - 2 + alpha) / (4.0 * alpha))
    return DerivedConstants(
        n=n,
        alpha=alpha,
        eta=eta,
        a=a,
        b=b,
        delta=delta,
        beta=beta,
        C_noncollapse=C,
        eta_max_poincare=poincare,
        eta_max_cylindrical=cylindrical,
        eta_max_gradient=gradient,
    )


@dataclass(frozen=True)
class FlowParams:
    """Dimension, ambient curvature and pinching parameters of a flow."""

    n: int
    K: float
    alpha: float
    V: float
    Theta: float
    eta: float
    sigma: float

    def violations(self) -> list[str]:
        """Every violated constraint, empty when the parameters are admissible."""
        errs: list[str] = []
        if self.n < 3:
            errs.append(f"n >= 3 required, got {self.n}")
        if not self.K > 0:
            errs.append(f"K > 0 required, got {self.K}")
        if not 0 < self.alpha < 1:
            errs.append(f"alpha in (0, 1) required, got {self.alpha}")
        if self.n == 3 and not self.alpha > 2.0 / 3.0:
            errs.append(f"alpha > 2/3 required when n=3, got {self.alpha}")
        if not self.V > 0:
            errs.append(f"V > 0 required, got {self.V}")
        if not self.Theta > 0:
            errs.append(f"Theta > 0 required, got {self.Theta}")
        if not 0 < self.sigma < 1:
            errs.append(f"sigma in (0, 1) required, got {self.sigma}")
        if self.n >= 2 and 0 < self.alpha <= 1:
            try:
                derive_constants(self.n, self.alpha, self.eta)
            except InadmissibleParameters as exc:
                errs.append(str(exc))
        return errs

    def __post_init__(self) -> None:
        errs = self.violations()
        if errs:
            raise InadmissibleParameters("; ".join(errs))
        object.__setattr__(self, "_constants", derive_constants(self.n, self.alpha, self.eta))

    @property
    def constants(self) -> DerivedConstants:
        return self._constants  # type: ignore[attr-defined]


# Array-level formulas in terms of H and |A|^2.


def quadratic_margin_HA(H, A2, K: float, alpha: float, n: int):
    """``|A|^2 - H^2/(n-2+alpha) - 2(2-alpha)K``."""
    return A2 - H * H / (n - 2 + alpha) - 2.0 * (2.0 - alpha) * K


def strict_margin_HA(H, A2, K: float, n: int):
    """Margin of the strict pinching condition; negative means pinched."""
    if n == 3:
        return A2 - 0.6 * H * H - 8.0 / 3.0 * K
    return A2 - H * H / (n - 2) - 4.0 * K


def cylindrical_deficit_HA(H, A2, n: int):
    return A2 - H * H / (n - 1)


def weight_W_H(H, K: float, consts: DerivedConstants):
    return consts.a * H * H + consts.b * K


def f_sigma_eta_HA(H, A2, K: float, n: int, sigma: float, consts: DerivedConstants):
    W = weight_W_H(H, K, consts)
    return (A2 - (1.0 / (n - 1) + consts.eta) * H * H) * W ** (sigma - 1.0)


def f_plus_HA(H, A2, t: float, K: float, n: int, sigma: float, consts: DerivedConstants):
    f = f_sigma_eta_HA(H, A2, K, n, sigma, consts)
    return np.maximum(math.exp(2.0 * consts.delta * K * t) * f, 0.0)


def noncollapse_radicand_HA(H, A2, K: float, n: int):
    return 4.0 * K + H * H / (n - 2) - A2


# Scalar operations on PrincipalCurvatures.


def mean_curvature(pc: PrincipalCurvatures) -> float:
    return float(sum(pc.values))


def second_form_norm_sq(pc: PrincipalCurvatures) -> float:
    return float(sum(v * v for v in pc.values))


def scalar_curvature(pc: PrincipalCurvatures, K: float) -> float:
    n = pc.n
    H = mean_curvature(pc)
    return H * H - second_form_norm_sq(pc) + n * (n - 1) * K


def quadratic_margin(pc: PrincipalCurvatures, K: float, alpha: float) -> float:
    return float(quadratic_margin_HA(mean_curvature(pc), second_form_norm_sq(pc), K, alpha, pc.n))


def strict_margin(pc: PrincipalCurvatures, K: float) -> float:
    return float(strict_margin_HA(mean_curvature(pc), second_form_norm_sq(pc), K, pc.n))


def strict_pinching_check(pc: PrincipalCurvatures, K: float, n: int | None = None) -> bool:
    if n is not None and n != pc.n:
        raise ValueError(f"pc has {pc.n} entries, expected {n}")
    if pc.n < 3:
        raise ValueError("strict pinching needs n >= 3")
    return strict_margin(pc, K) < 0.0


def cylindrical_deficit(pc: PrincipalCurvatures) -> float:
    return float(cylindrical_deficit_HA(mean_curvature(pc), second_form_norm_sq(pc), pc.n))


def weight_W(H: float, params: FlowParams) -> float:
    consts = params.constants
    if consts.a <= 0:
        raise InadmissibleParameters("a must be positive")
    return float(weight_W_H(H, params.K, consts))


def f_sigma_eta(pc: PrincipalCurvatures, t: float, params: FlowParams) -> tuple[float, float]:
    """Return ``(f, f_plus)`` at time ``t``."""
    H = mean_curvature(pc)
    A2 = second_form_norm_sq(pc)
    c = params.constants
    f = float(f_sigma_eta_HA(H, A2, params.K, params.n, params.sigma, c))
    fp = max(math.exp(2.0 * c.delta * params.K * t) * f, 0.0)
    return f, fp


def noncollapse_F(pc: PrincipalCurvatures, K: float) -> float:
    n = pc.n
    rad = noncollapse_radicand_HA(mean_curvature(pc), second_form_norm_sq(pc), K, n)
    if rad <= 0.0:
        raise NotPinched(f"noncollapsing radicand {rad} is not positive")
    return math.sqrt(rad)
