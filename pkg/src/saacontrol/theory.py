"""Closed-form constants and mean convergence-rate bounds for SAA optimal control.

The constants that cannot be computed from problem data (the covering constant
``rho``, the gradient Lipschitz constant, the variance terms) are user supplied
and default to 1, so the resulting curves are meaningful only up to constants;
their ``N^{-1/2}`` shape is what the experiments compare against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TheoryConstants",
    "lipschitz_T",
    "radius_R",
    "covering_bound_log2",
    "entropy_integral_bound",
    "value_rate_bound",
    "estimate_lipschitz_constants",
]


@dataclass(frozen=True)
class TheoryConstants:
    """Problem constants entering the rate bounds.

    ``L_f``, ``L_F``, ``V0`` and ``r_psi`` must be at least 1. ``L_gradT`` is the
    Lipschitz constant of the sampled gradient map, and ``c0`` / ``c0_grad`` stand
    in for the standard deviations of ``T(u0, xi)`` and of ``grad_u T(u0, xi)``.
    """

    L_f: float = 1.0
    L_F: float = 1.0
    V0: float = 1.0
    r_psi: float = 1.0
    m: int = 1
    alpha: float = 1.0
    rho: float = 1.0
    L_gradT: float = 1.0
    c0: float = 1.0
    c0_grad: float = 1.0

    def __post_init__(self):
        for name in ("L_f", "L_F", "V0", "r_psi"):
            if not getattr(self, name) >= 1.0:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.alpha > 0 or not self.rho > 0:
            raise ValueError("alpha and rho must be positive")
        if self.c0 < 0 or self.c0_grad < 0 or self.L_gradT < 0:
            raise ValueError("variance and Lipschitz constants must be nonnegative")

    @property
    def L_T(self) -> float:
        return lipschitz_T(self.L_f, self.L_F)


def lipschitz_T(L_f: float, L_F: float) -> float:
    """Lipschitz constant ``sqrt(2) L_F L_f exp(L_f)`` of the control-to-cost map."""
    return math.sqrt(2.0) * L_F * L_f * math.exp(L_f)


def radius_R(tc: TheoryConstants) -> tuple[float, float]:
    """Radius of the ball containing all sampled gradients.

    Returns ``(R0, R)`` with ``R0 = L_f (1 + L_F) e^{L_f}`` and
    ``R = R0 + 6 L_f^2 (1 + V0) e^{2 L_f r_psi} R0``.
    """
    r0 = tc.L_f * (1.0 + tc.L_F) * math.exp(tc.L_f)
    r = r0 + 6.0 * tc.L_f**2 * (1.0 + tc.V0) * math.exp(2.0 * tc.L_f * tc.r_psi) * r0
    return r0, r


def covering_bound_log2(m: int, R: float, alpha: float, nu: float, rho: float) -> float:
    """Upper bound ``rho sqrt(m) R m / (alpha nu)`` on the base-2 log covering number."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    return rho * math.sqrt(m) * R * m / (alpha * nu)


def entropy_integral_bound(c1: float, D: float) -> float:
    """Closed-form bound ``sqrt(D/2) (sqrt(c1 + D/2) + sqrt(c1))`` on the entropy integral.

    Valid for a set of diameter ``D`` whose covering numbers satisfy
    ``N(eps) <= 2^{c1/eps}``.
    """
    if c1 < 0 or not D > 0:
        raise ValueError("need c1 >= 0 and D > 0")
    return math.sqrt(D / 2.0) * (math.sqrt(c1 + D / 2.0) + math.sqrt(c1))


def value_rate_bound(
    N,
    alpha: float,
    tc: TheoryConstants,
    r_psi: float | None = None,
    R: float | None = None,
    m: int | None = None,
    c0: float | None = None,
    kind: str = "value",
    lipschitz: float | None = None,
):
    """Right-hand side of the mean convergence-rate bound.

    ``kind="value"`` bounds ``E|v_N - v*|`` using ``L_T`` and ``c0``;
    ``kind="criticality"`` bounds ``E[chi(u_N)]`` using ``L_gradT`` and ``c0_grad``.
    Unset arguments fall back to the fields of ``tc`` (``R`` to :func:`radius_R`);
    ``lipschitz`` overrides the Lipschitz constant selected by ``kind``.
    Accepts scalar or array ``N``.
    """
    r_psi = tc.r_psi if r_psi is None else r_psi
    m = tc.m if m is None else m
    R = radius_R(tc)[1] if R is None else R
    if kind == "value":
        lip = tc.L_T
        c0 = tc.c0 if c0 is None else c0
    elif kind == "criticality":
        lip = tc.L_gradT
        c0 = tc.c0_grad if c0 is None else c0
    else:
        raise ValueError(f"unknown bound kind {kind!r}")
    if lipschitz is not None:
        lip = lipschitz
    N = np.asarray(N, dtype=float)
    if np.any(N < 1):
        raise ValueError("N must be >= 1")
    entropy = math.sqrt(1.0 + tc.rho * math.sqrt(m) * R * m / alpha)
    out = (c0 + 16.0 * math.sqrt(3.0) * lip * r_psi * entropy) / np.sqrt(N)
    return float(out) if out.ndim == 0 else out


def estimate_lipschitz_constants(problem, u_bound: float, samples: np.ndarray, n_points: int = 200, seed: int = 0) -> dict:
    """Crude numerical estimates of ``L_f`` and ``V0`` for a built-in problem.

    ``L_f`` is the largest spectral norm of ``[df/dx, f1]`` observed at random
    states near the initial states, with controls drawn from ``[-u_bound, u_bound]``;
    ``V0`` is the largest initial-state norm. Both are clipped below at 1.
    """
    rng = np.random.default_rng(seed)
    xis = samples[rng.integers(0, samples.shape[0], n_points)]
    x0 = problem.initial_state(xis)
    x = x0 * (1.0 + 0.1 * rng.standard_normal(x0.shape))
    u = rng.uniform(-u_bound, u_bound, (n_points, problem.m))
    jac = problem.drift_jac(x, xis)
    if problem.control_field_jac is not None:
        jac = jac + np.einsum("bimj,bm->bij", problem.control_field_jac(x, xis), u)
    full = np.concatenate([jac, problem.control_field(x, xis)], axis=2)
    L_f = float(np.max(np.linalg.norm(full, ord=2, axis=(1, 2))))
    V0 = float(np.max(np.linalg.norm(x0, axis=1)))
    return {"L_f": max(L_f, 1.0), "V0": max(V0, 1.0)}
