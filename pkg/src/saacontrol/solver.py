"""Proximal-gradient solver for the composite SAA problem.

Iterates ``u+ = prox_{gamma psi_alpha}(u - gamma * grad h(u))`` where ``h`` is the
sample mean of the terminal costs plus ``(alpha/2)|u|^2``. A point is a solution
exactly when it is a fixed point of this map for some (equivalently every)
``gamma > 0``; the stopping test is the unit-step fixed-point residual, which is
the criticality measure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Control
from .ensemble import EnsembleProblem, criticality_from_gradient, saa_objective, smooth_value_and_gradient
from .regularizer import prox_values, psi_alpha_value

__all__ = ["SolverOptions", "SolveReport", "StepTooLargeError", "solve"]

log = logging.getLogger(__name__)


class StepTooLargeError(RuntimeError):
    """The composite objective increased under a fixed step size."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iters: int = 10000
    step_mode: str = "backtracking"
    step_size: float = 1.0
    shrink: float = 0.5
    growth: float = 1.1
    acceleration: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.step_mode not in ("fixed", "backtracking"):
            raise ValueError(f"unknown step_mode {self.step_mode!r}")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if not (0 < self.shrink < 1 < self.growth):
            raise ValueError("need 0 < shrink < 1 < growth")


@dataclass(eq=False)
class SolveReport:
    u_star: Control
    value: float
    criticality: float
    iterations: int
    converged: bool
    step_min: float
    step_max: float
    step_last: float
    backtracks: int
    provenance: dict = field(default_factory=dict)


def _composite(ep: EnsembleProblem, u: Control, smooth_value: float) -> float:
    return smooth_value + psi_alpha_value(u, ep.spec)


def _sufficient_decrease(val, grad, c_val, c_grad, diff, gamma, dt) -> bool:
    """Composite sufficient decrease ``h(c) <= h(u) + <grad, d> + |d|^2 / (2 gamma)``.

    Once ``h(c) - h(u)`` is at the level of rounding error the value test is
    meaningless, so the curvature along ``d`` is measured from the gradient
    difference instead (identical to the value test for quadratics).
    """
    dd = dt * float(np.sum(diff * diff))
    if dd == 0.0:
        return True
    if abs(c_val - val) > 1e-9 * max(1.0, abs(val)):
        return c_val - val - dt * float(np.sum(grad * diff)) <= 0.5 * dd / gamma
    return dt * float(np.sum((c_grad - grad) * diff)) <= dd / gamma


def solve(ep: EnsembleProblem, u0: Control, opts: SolverOptions | None = None, callback=None) -> SolveReport:
    """Minimize the SAA objective plus regularizer starting from ``u0``.

    ``callback(iteration, u, objective, criticality)`` is called for the initial
    point and after every accepted step.

    Raises
    ------
    ValueError
        If ``u0`` lies outside the control box or the objective is not finite there.
    StepTooLargeError
        In fixed-step mode, when the composite objective increases.
    """
    opts = opts or SolverOptions()
    spec = ep.spec
    if not spec.in_box(u0.values):
        raise ValueError("initial control lies outside the control box")

    dt = u0.grid.dt
    u = u0
    h_val, grad = smooth_value_and_gradient(ep, u)
    phi = _composite(ep, u, h_val)
    if not np.isfinite(phi):
        raise ValueError("objective is not finite at the initial control")

    gamma = opts.step_size
    steps: list[float] = []
    backtracks = 0
    # momentum state
    y, y_val, y_grad = u, h_val, grad
    t_k = 1.0
    y_is_u = True

    chi = criticality_from_gradient(u, grad, spec)
    it = 0
    if callback is not None:
        callback(it, u, phi, chi)
    while chi > opts.tol and it < opts.max_iters:
        it += 1
        base, base_val, base_grad = (y, y_val, y_grad) if opts.acceleration else (u, h_val, grad)
        while True:
            cand_vals = prox_values(base.values - gamma * base_grad, gamma, spec)
            cand = base.with_values(cand_vals)
            c_val, c_grad = smooth_value_and_gradient(ep, cand)
            if opts.step_mode == "fixed":
                break
            if _sufficient_decrease(base_val, base_grad, c_val, c_grad, cand_vals - base.values, gamma, dt):
                break
            gamma *= opts.shrink
            backtracks += 1
            if gamma < 1e-14:
                raise RuntimeError("backtracking step size underflow")
        steps.append(gamma)

        c_phi = _composite(ep, cand, c_val)
        if opts.step_mode == "fixed" and not opts.acceleration:
            if c_phi > phi + 1e-9 * (1.0 + abs(phi)):
                raise StepTooLargeError(
                    f"objective increased from {phi!r} to {c_phi!r} at iteration {it} with fixed step "
                    f"{gamma}; use step_mode='backtracking' or a smaller step"
                )

        if opts.acceleration:
            if c_phi > phi and not y_is_u:
                # restart: fall back to a plain step from the last iterate
                t_k = 1.0
                y, y_val, y_grad = u, h_val, grad
                y_is_u = True
                continue
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_k * t_k))
            mom = (t_k - 1.0) / t_next
            y_vals = np.clip(cand_vals + mom * (cand_vals - u.values), spec.lo, spec.hi)
            u, h_val, grad, phi = cand, c_val, c_grad, c_phi
            t_k = t_next
            y = u.with_values(y_vals)
            y_is_u = not mom > 0
            y_val, y_grad = (h_val, grad) if y_is_u else smooth_value_and_gradient(ep, y)
        else:
            u, h_val, grad, phi = cand, c_val, c_grad, c_phi

        chi = criticality_from_gradient(u, grad, spec)
        if callback is not None:
            callback(it, u, phi, chi)
        if opts.step_mode == "backtracking":
            gamma *= opts.growth

    converged = chi <= opts.tol
    if not converged:
        log.warning("solver stopped after %d iterations with criticality %.3e", it, chi)
    value = saa_objective(ep, u)
    return SolveReport(
        u_star=u,
        value=value,
        criticality=chi,
        iterations=it,
        converged=converged,
        step_min=min(steps) if steps else gamma,
        step_max=max(steps) if steps else gamma,
        step_last=steps[-1] if steps else gamma,
        backtracks=backtracks,
        provenance=ep.samples.provenance,
    )

