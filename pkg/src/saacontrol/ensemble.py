"""SAA objective, smooth-part gradient, and criticality measures over a sample set.

Samples are processed in chunks of a fixed size and the per-sample results are
combined with a fixed pairwise tree, so every result is bitwise identical no
matter how many worker threads evaluate the chunks.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import Control, IntegrationDivergedError, ProblemDef, objective_batch, value_and_gradient_batch, weighted_norm
from .regularizer import RegularizerSpec, prox_values, psi_value
from .sampling import SampleSet

__all__ = [
    "EnsembleProblem",
    "tree_sum",
    "saa_objective",
    "smooth_value_and_gradient",
    "saa_smooth_gradient",
    "criticality",
    "criticality_from_gradient",
    "reference_criticality",
]

CHUNK_SIZE = 1024


@dataclass(frozen=True, eq=False)
class EnsembleProblem:
    problem: ProblemDef
    spec: RegularizerSpec
    samples: SampleSet
    threads: int = 1

    def __post_init__(self):
        if self.samples.dim != self.problem.param_dim:
            raise ValueError(
                f"sample dimension {self.samples.dim} does not match problem parameter dimension "
                f"{self.problem.param_dim}"
            )
        if self.spec.m != self.problem.m:
            raise ValueError("regularizer channel count does not match the problem")

    @property
    def N(self) -> int:
        return self.samples.N

    def with_samples(self, samples: SampleSet) -> "EnsembleProblem":
        return replace(self, samples=samples)

    def with_threads(self, threads: int) -> "EnsembleProblem":
        return replace(self, threads=threads)


def tree_sum(a: np.ndarray) -> np.ndarray:
    """Sum along axis 0 by repeated pairwise halving; the order depends only on ``len(a)``."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        raise ValueError("cannot sum an empty array")
    while a.shape[0] > 1:
        half = a.shape[0] // 2
        head = a[:half] + a[half : 2 * half]
        if a.shape[0] % 2:
            head = np.concatenate([head, a[2 * half :]], axis=0)
        a = head
    return a[0]


def _chunks(n: int):
    return [(i, min(i + CHUNK_SIZE, n)) for i in range(0, n, CHUNK_SIZE)]


def _map_chunks(ep: EnsembleProblem, fn):
    pts = ep.samples.points
    chunks = _chunks(pts.shape[0])

    def run(bounds):
        lo, hi = bounds
        try:
            return fn(pts[lo:hi])
        except IntegrationDivergedError as exc:
            idx = lo + exc.sample
            raise IntegrationDivergedError(
                exc.node, idx, f"integration diverged at RK4 node {exc.node} for sample {idx}"
            ) from exc

    if ep.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=min(ep.threads, len(chunks))) as pool:
            return list(pool.map(run, chunks))
    return [run(c) for c in chunks]


def per_sample_values(ep: EnsembleProblem, u: Control) -> np.ndarray:
    parts = _map_chunks(ep, lambda xs: objective_batch(ep.problem, u, xs))
    return np.concatenate(parts)


def per_sample_gradients(ep: EnsembleProblem, u: Control) -> tuple[np.ndarray, np.ndarray]:
    parts = _map_chunks(ep, lambda xs: value_and_gradient_batch(ep.problem, u, xs))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_mean_value(ep: EnsembleProblem, u: Control) -> float:
    """``(1/N) sum_i T(u, xi_i)`` without the regularizer."""
    return float(tree_sum(per_sample_values(ep, u)) / ep.N)


def saa_objective(ep: EnsembleProblem, u: Control) -> float:
    """SAA objective plus ``psi(u)``; ``inf`` outside the control box."""
    reg = psi_value(u, ep.spec)
    if not np.isfinite(reg):
        return np.inf
    return sample_mean_value(ep, u) + reg


def smooth_value_and_gradient(ep: EnsembleProblem, u: Control) -> tuple[float, np.ndarray]:
    """Value and gradient of the smooth part ``g_N(u) + (alpha/2)|u|^2``.

    The gradient is returned as a raw ``(q, m)`` array in the weighted L2 sense.
    """
    vals, grads = per_sample_gradients(ep, u)
    dt = u.grid.dt
    a = ep.spec.alpha
    value = float(tree_sum(vals) / ep.N) + 0.5 * a * dt * float(np.sum(u.values * u.values))
    grad = tree_sum(grads) / ep.N + a * u.values
    return value, grad


def saa_smooth_gradient(ep: EnsembleProblem, u: Control) -> Control:
    return u.with_values(smooth_value_and_gradient(ep, u)[1])


def criticality_from_gradient(u: Control, smooth_grad: np.ndarray, spec: RegularizerSpec) -> float:
    """``|u - prox_{psi_alpha}(u - grad)|`` with unit step."""
    residual = u.values - prox_values(u.values - smooth_grad, 1.0, spec)
    return weighted_norm(residual, u.grid.dt)


def criticality(ep: EnsembleProblem, u: Control) -> float:
    return criticality_from_gradient(u, smooth_value_and_gradient(ep, u)[1], ep.spec)


def reference_criticality(problem: ProblemDef, spec: RegularizerSpec, reference_samples: SampleSet, u: Control, threads: int = 1) -> float:
    """Criticality measure evaluated on the reference sample set."""
    return criticality(EnsembleProblem(problem, spec, reference_samples, threads), u)
