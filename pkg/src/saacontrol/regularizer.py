"""Strongly convex regularizer ``(alpha/2)|u|^2 + beta |u|_1 + box indicator`` and its prox."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Control

__all__ = ["RegularizerSpec", "psi_value", "psi_alpha_value", "prox_psi_alpha", "soft_threshold"]


@dataclass(frozen=True, eq=False)
class RegularizerSpec:
    alpha: float
    beta: float
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo and hi must be 1-D arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("control box is empty")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def uniform(cls, alpha: float, beta: float, lo: float, hi: float, m: int) -> "RegularizerSpec":
        return cls(alpha, beta, np.full(m, float(lo)), np.full(m, float(hi)))

    @property
    def m(self) -> int:
        return self.lo.shape[0]

    @property
    def r_psi(self) -> float:
        """Sup-norm radius of the box, ``max_j max(|lo_j|, |hi_j|)`` (inf if unbounded)."""
        return float(np.max(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def in_box(self, values: np.ndarray) -> bool:
        return bool(np.all(values >= self.lo) and np.all(values <= self.hi))


def psi_alpha_value(u: Control, spec: RegularizerSpec) -> float:
    """``psi(u) - (alpha/2)|u|^2``: the L1 term plus the box indicator."""
    v = u.values
    if not spec.in_box(v):
        return np.inf
    return float(spec.beta * u.grid.dt * np.sum(np.abs(v)))


def psi_value(u: Control, spec: RegularizerSpec) -> float:
    v = u.values
    if not spec.in_box(v):
        return np.inf
    dt = u.grid.dt
    return float(0.5 * spec.alpha * dt * np.sum(v * v) + spec.beta * dt * np.sum(np.abs(v)))


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def prox_psi_alpha(v: Control, gamma: float, spec: RegularizerSpec) -> Control:
    """Proximal map of ``gamma * psi_alpha``.

    Entrywise ``clip(soft_threshold(v, gamma * beta), lo_j, hi_j)``. The weight
    ``dt`` multiplies both the L1 term and the squared distance, so it cancels and
    the thresholds do not depend on the grid.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return v.with_values(prox_values(v.values, gamma, spec))


def prox_values(values: np.ndarray, gamma: float, spec: RegularizerSpec) -> np.ndarray:
    shrunk = soft_threshold(values, gamma * spec.beta) if spec.beta > 0 else values
    return np.clip(shrunk, spec.lo, spec.hi)
