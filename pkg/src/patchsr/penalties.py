"""Sparsity penalties: values, curvature, convexity thresholds, exact proximal maps.

The proximal map solves, for each scalar x,

    prox(x) = argmin_u  (x - u)^2 / (2 * weight) + phi_gamma(u),

where ``weight`` is the product lambda * mu carried into the backward step.
For the Cauchy penalty the stationarity condition is the cubic

    u^3 - x*u^2 + (gamma^2 + 2*weight)*u - x*gamma^2 = 0,

solved by Cardano's formula; for the MCP a firm-threshold style closed form
follows from comparing the stationary points of the two branches; for l1 the
map is plain soft thresholding.

The non-convex penalties make the subproblem multi-valued unless gamma exceeds
a threshold gamma_bar(weight).  Balancing the curvature 1/weight of the
quadratic term against the most negative curvature of the penalty
(-1/(4*gamma^2) for Cauchy, -1/gamma for MCP) gives

    gamma_bar = sqrt(weight) / 2   (Cauchy)
    gamma_bar = weight             (MCP)

and any gamma > gamma_bar makes the objective strictly convex, hence the prox
a singleton.  :class:`ProxProblem` enforces this gate at construction and the
prox routines refuse to run without it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Penalty, PenaltyKind
from .errors import ConvexityGateError, ParameterError

__all__ = [
    "ProxProblem",
    "gamma_bar",
    "penalty_value",
    "penalty_second_derivative",
    "prox_scalar",
    "prox_vector",
]


def gamma_bar(kind: PenaltyKind, weight: float) -> float:
    """Strict-convexity threshold for the prox subproblem at the given weight.

    Returns 0 for l1: the convex case admits any gamma and its prox is always
    well posed.
    """
    if not math.isfinite(weight) or weight <= 0:
        raise ParameterError(f"weight must be positive, got {weight}")
    if kind is PenaltyKind.CAUCHY:
        return math.sqrt(weight) / 2.0
    if kind is PenaltyKind.MCP:
        return float(weight)
    return 0.0


def _mcp_value(t_abs, gamma):
    edge = math.sqrt(2.0 * gamma)
    slope = math.sqrt(2.0 / gamma)
    quad = -t_abs * t_abs / (2.0 * gamma) + slope * t_abs
    return np.where(t_abs < edge, quad, 1.0)


def penalty_value(p: Penalty, t):
    """Evaluate the penalty, shifted so its minimum value is exactly zero.

    Additive constants do not change minimizers; shifting keeps objectives
    nonnegative, which simplifies descent checks.  Accepts scalars or arrays.
    """
    arr = np.asarray(t, dtype=float)
    if p.kind is PenaltyKind.CAUCHY:
        out = np.log1p((arr / p.gamma) ** 2)
    elif p.kind is PenaltyKind.MCP:
        out = _mcp_value(np.abs(arr), p.gamma)
    else:
        out = np.abs(arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


def penalty_second_derivative(p: Penalty, t):
    """Second derivative of the penalty where defined (0 a.e. for l1).

    The most negative value over all t is -1/(4*gamma^2) for Cauchy and
    -1/gamma for MCP, which is what the convexity gate balances against.
    """
    arr = np.asarray(t, dtype=float)
    if p.kind is PenaltyKind.CAUCHY:
        g2 = p.gamma * p.gamma
        out = 2.0 * (g2 - arr * arr) / (g2 + arr * arr) ** 2
    elif p.kind is PenaltyKind.MCP:
        out = np.where(np.abs(arr) < math.sqrt(2.0 * p.gamma), -1.0 / p.gamma, 0.0)
    else:
        out = np.zeros_like(arr)
    return float(out) if np.isscalar(t) or arr.ndim == 0 else out


@dataclass(frozen=True)
class ProxProblem:
    """A validated prox instance: the penalty together with its weight.

    Construction fails with :class:`ConvexityGateError` whenever the penalty's
    gamma does not clear gamma_bar(kind, weight), because below the threshold
    the prox may be multi-valued.
    """

    weight: float
    penalty: Penalty

    def __post_init__(self):
        if not math.isfinite(self.weight) or self.weight <= 0:
            raise ParameterError(f"prox weight must be positive, got {self.weight}")
        if self.penalty.kind is PenaltyKind.L1:
            return
        bar = gamma_bar(self.penalty.kind, self.weight)
        if self.penalty.gamma <= bar:
            raise ConvexityGateError(
                f"gamma={self.penalty.gamma} must exceed gamma_bar={bar} for "
                f"{self.penalty.kind.value} with weight={self.weight}; the prox "
                "subproblem is not strictly convex"
            )


def _soft_threshold(x, weight):
    return np.sign(x) * np.maximum(np.abs(x) - weight, 0.0)


def _mcp_prox(x, gamma, weight):
    ax = np.abs(x)
    edge = math.sqrt(2.0 * gamma)
    slope = math.sqrt(2.0 / gamma)
    # Stationary point of the quadratic branch, clamped to its domain.  The
    # gate guarantees gamma > weight, so the denominator is positive.
    u_quad = np.clip(gamma * (ax - weight * slope) / (gamma - weight), 0.0, edge)
    # The saturated branch is an unpenalized quadratic, minimized at |x| itself.
    u_sat = np.maximum(ax, edge)
    j_quad = (u_quad - ax) ** 2 / (2.0 * weight) + _mcp_value(u_quad, gamma)
    j_sat = (u_sat - ax) ** 2 / (2.0 * weight) + _mcp_value(u_sat, gamma)
    # Ties go to the quadratic candidate, which never exceeds the saturated one.
    return np.sign(x) * np.where(j_quad <= j_sat, u_quad, u_sat)


def _cauchy_prox(x, gamma, weight):
    ax = np.abs(x)
    g2 = gamma * gamma
    q = g2 + 2.0 * weight
    # Depressed form v^3 + P v + Q = 0 of the stationarity cubic with u = v + x/3.
    p_dep = q - ax * ax / 3.0
    q_dep = ax * (q / 3.0 - g2 - 2.0 * ax * ax / 27.0)
    disc = (q_dep / 2.0) ** 2 + (p_dep / 3.0) ** 3
    # The gate guarantees one simple real root, i.e. disc > 0 up to rounding;
    # clamp cancellation-induced tiny negatives.
    sq = np.sqrt(np.maximum(disc, 0.0))
    # Pick the larger-magnitude cube-root term to avoid subtractive cancellation.
    s3 = np.where(q_dep <= 0.0, -q_dep / 2.0 + sq, -q_dep / 2.0 - sq)
    s = np.cbrt(s3)
    safe_s = np.where(s != 0.0, s, 1.0)
    v = np.where(s != 0.0, s - p_dep / (3.0 * safe_s), 0.0)
    u = v + ax / 3.0
    # One Newton polish step on g(u) = u^3 - x u^2 + q u - x g2 absorbs the
    # floating-point error left by the closed form near |x| ~ 0.
    g = ((u - ax) * u + q) * u - ax * g2
    gp = (3.0 * u - 2.0 * ax) * u + q
    u = np.where(gp > 0.0, u - g / np.where(gp > 0.0, gp, 1.0), u)
    # Shrinkage: the minimizer lies in [0, |x|]; clipping only trims rounding.
    u = np.clip(u, 0.0, ax)
    return np.sign(x) * u


def _prox_array(pp: ProxProblem, x: np.ndarray) -> np.ndarray:
    pen = pp.penalty
    if pen.kind is PenaltyKind.L1:
        return _soft_threshold(x, pp.weight)
    if pen.kind is PenaltyKind.MCP:
        return _mcp_prox(x, pen.gamma, pp.weight)
    return _cauchy_prox(x, pen.gamma, pp.weight)


def prox_scalar(pp: ProxProblem, x: float) -> float:
    """The unique minimizer of (x-u)^2/(2*weight) + phi_gamma(u).

    Sign symmetry is exact: the computation runs on |x| and the sign is folded
    back, so prox(-x) == -prox(x) bit for bit.
    """
    return float(_prox_array(pp, np.asarray(float(x))))


def prox_vector(pp: ProxProblem, v: np.ndarray) -> np.ndarray:
    """Componentwise prox: the penalty is separable, so the map applies per entry."""
    return _prox_array(pp, np.asarray(v, dtype=float))
