"""Per-patch forward-backward splitting with descent monitoring and stopping rules.

Starting from a_0 = 0, each iteration takes a gradient step on the quadratic
data term followed by the exact penalty prox:

    b_{k+1} = a_k - mu * A^T (A a_k - y)
    a_{k+1} = prox_{lam*mu*phi}(b_{k+1})

with A the composite forward operator.  For mu <= 1/||A^T A|| the objective is
nonincreasing; gamma is derived once per solve as tau * gamma_bar(kind, lam*mu),
which keeps the backward step a singleton for any tau > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Penalty, PenaltyKind, SolverConfig
from .errors import DimensionError, NumericError, ParameterError
from .operators import PatchOperator, apply_forward
from .penalties import ProxProblem, gamma_bar, penalty_value, prox_vector

__all__ = ["SolveResult", "derive_penalty", "objective", "fb_solve"]

# Tiny relative slop when validating an explicit mu against 1/L, so that a
# caller passing exactly 1/lipschitz is never rejected by rounding.
_MU_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Outcome of one patch solve: coefficients, trace, and convergence flag."""

    coefficients: np.ndarray
    iterations: int
    objective_trace: list[float]
    converged: bool


def objective(
    op: PatchOperator, pen: Penalty, lam: float, y: np.ndarray, a: np.ndarray
) -> float:
    """0.5 * ||y - S_q(H(D a))||^2 + lam * sum_i phi(a_i)."""
    if not math.isfinite(lam) or lam <= 0:
        raise ParameterError(f"lam must be positive, got {lam}")
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n_lr,):
        raise DimensionError(f"LR patch must have length {op.n_lr}, got shape {y.shape}")
    residual = y - apply_forward(op, a)
    return 0.5 * float(residual @ residual) + lam * float(np.sum(penalty_value(pen, a)))


def derive_penalty(kind: PenaltyKind, lam: float, mu: float, tau: float) -> Penalty:
    """Build the penalty whose gamma = tau * gamma_bar(kind, lam*mu).

    Any tau > 1 clears the convexity gate by construction; for l1 there is no
    shape parameter and the gate is vacuous.
    """
    if kind is PenaltyKind.L1:
        return Penalty(PenaltyKind.L1)
    return Penalty(kind, tau * gamma_bar(kind, lam * mu))


def _resolve_mu(cfg: SolverConfig, lipschitz: float) -> float:
    if cfg.mu is None:
        if lipschitz <= 0:
            raise ParameterError(
                "operator norm is zero; no convergent step size exists"
            )
        return 1.0 / lipschitz
    if lipschitz <= 0 or cfg.mu * lipschitz > 1.0 + _MU_SLACK:
        raise ParameterError(
            f"mu={cfg.mu} exceeds 1/L={1.0 / lipschitz if lipschitz else math.inf}"
        )
    return cfg.mu


def fb_solve(
    op: PatchOperator, kind: PenaltyKind, cfg: SolverConfig, y: np.ndarray
) -> SolveResult:
    """Minimize the per-patch objective by forward-backward splitting.

    Stops when the relative iterate change ||a_{k+1} - a_k|| / max(||a_k||, 1e-12)
    drops below cfg.tol, or after cfg.max_iters iterations.  The returned trace
    holds the objective at a_0, a_1, ... and is nonincreasing for mu <= 1/L.

    Raises :class:`NumericError` (with the iteration index) if an iterate goes
    non-finite, and :class:`ConvexityGateError` before iterating if the derived
    penalty were ever to violate the gate.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (op.n_lr,):
        raise DimensionError(f"LR patch must have length {op.n_lr}, got shape {y.shape}")

    mu = _resolve_mu(cfg, op.lipschitz)
    pen = derive_penalty(kind, cfg.lam, mu, cfg.tau)
    prox = ProxProblem(cfg.lam * mu, pen)

    # The materialized matrix is the same linear map as apply_forward; using it
    # keeps the inner loop to two thin matvecs per iteration.
    mat = op.matrix
    a = np.zeros(op.dictionary.n_d)
    residual = mat @ a - y
    trace = [0.5 * float(residual @ residual)]
    converged = False
    iterations = 0

    for k in range(cfg.max_iters):
        b = a - mu * (mat.T @ residual)
        a_next = prox_vector(prox, b)
        if not np.all(np.isfinite(a_next)):
            raise NumericError("iterate became non-finite", iteration=k + 1)
        residual = mat @ a_next - y
        trace.append(
            0.5 * float(residual @ residual)
            + cfg.lam * float(np.sum(penalty_value(pen, a_next)))
        )
        change = float(np.linalg.norm(a_next - a)) / max(
            float(np.linalg.norm(a)), 1e-12
        )
        a = a_next
        iterations = k + 1
        if change < cfg.tol:
            converged = True
            break

    a.setflags(write=False)
    return SolveResult(
        coefficients=a,
        iterations=iterations,
        objective_trace=trace,
        converged=converged,
    )
