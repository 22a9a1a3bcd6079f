"""Fixed-step RK4 integration of affine-control ODEs and discrete-adjoint gradients.

The dynamics are ``x' = f0(x, xi) + f1(x, xi) u`` with ``u`` piecewise constant on a
uniform grid. All problem callables are vectorized over a leading sample axis so an
entire ensemble is integrated in one pass; the public single-sample functions are
thin wrappers around the batched routines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ControlGrid",
    "Control",
    "ProblemDef",
    "StateTrajectory",
    "AdjointTrajectory",
    "IntegrationDivergedError",
    "integrate_forward",
    "eval_objective_sample",
    "gradient_sample",
    "adjoint_sample",
    "forward_batch",
    "objective_batch",
    "value_and_gradient_batch",
]


class IntegrationDivergedError(FloatingPointError):
    """Raised when the RK4 state becomes non-finite.

    ``node`` is the first RK4 node with a non-finite entry and ``sample`` the
    position inside the evaluated batch (or the ensemble index once tagged).
    """

    def __init__(self, node: int, sample: int = 0, message: str | None = None):
        self.node = node
        self.sample = sample
        super().__init__(message or f"integration diverged at RK4 node {node} (sample {sample})")


@dataclass(frozen=True)
class ControlGrid:
    t_final: float
    q: int
    m: int

    def __post_init__(self):
        if not (self.t_final > 0 and np.isfinite(self.t_final)):
            raise ValueError(f"t_final must be positive and finite, got {self.t_final}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")

    @property
    def dt(self) -> float:
        return self.t_final / self.q

    @property
    def shape(self) -> tuple[int, int]:
        return (self.q, self.m)

    def interval_starts(self) -> np.ndarray:
        return np.arange(self.q) * self.dt


@dataclass(frozen=True, eq=False)
class Control:
    """Piecewise-constant control; ``values[k, j]`` is channel ``j`` on interval ``k``."""

    grid: ControlGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"control values have shape {values.shape}, expected {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("control values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: ControlGrid) -> "Control":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: ControlGrid, value) -> "Control":
        return cls(grid, np.broadcast_to(np.asarray(value, dtype=float), grid.shape))

    def with_values(self, values) -> "Control":
        return Control(self.grid, values)

    def inner(self, other: "Control") -> float:
        """Weighted L2 inner product ``dt * sum(u * v)``."""
        return float(self.grid.dt * np.sum(self.values * _values(other)))

    def norm(self) -> float:
        return weighted_norm(self.values, self.grid.dt)

    def __sub__(self, other: "Control") -> "Control":
        return Control(self.grid, self.values - _values(other))

    def __add__(self, other: "Control") -> "Control":
        return Control(self.grid, self.values + _values(other))


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Control) else np.asarray(u, dtype=float)


def weighted_norm(values: np.ndarray, dt: float) -> float:
    """L2(0, t_f) norm of a piecewise-constant function given its interval values."""
    return float(np.sqrt(dt * np.sum(np.square(values))))


@dataclass(frozen=True)
class ProblemDef:
    """Parameterized affine-control ODE with a terminal cost.

    Every callable takes batched arrays: ``x`` of shape ``(B, n)`` and ``xi`` of
    shape ``(B, p)``.

    drift(x, xi) -> (B, n)
    drift_jac(x, xi) -> (B, n, n), derivative of drift with respect to x
    control_field(x, xi) -> (B, n, m)
    control_field_jac(x, xi) -> (B, n, m, n), entry ``[b, i, j, l] = d f1_ij / d x_l``;
        ``None`` when the control field does not depend on the state
    terminal_cost(x, xi) -> (B,)
    terminal_cost_grad(x, xi) -> (B, n)
    initial_state(xi) -> (B, n)
    """

    n: int
    m: int
    drift: Callable[[np.ndarray, np.ndarray], np.ndarray]
    drift_jac: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_field: Callable[[np.ndarray, np.ndarray], np.ndarray]
    control_field_jac: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]]
    terminal_cost: Callable[[np.ndarray, np.ndarray], np.ndarray]
    terminal_cost_grad: Callable[[np.ndarray, np.ndarray], np.ndarray]
    initial_state: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    steps_per_interval: int = 1
    name: str = "custom"
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("parameter box bounds must be 1-D arrays of equal length")
        if np.any(lo > hi):
            raise ValueError("parameter box has lo > hi in some coordinate")
        if int(self.steps_per_interval) != self.steps_per_interval or self.steps_per_interval < 1:
            raise ValueError("steps_per_interval must be a positive integer")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def param_dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, xi, atol: float = 0.0) -> bool:
        xi = np.asarray(xi, dtype=float)
        return bool(np.all(xi >= self.lower - atol) and np.all(xi <= self.upper + atol))

    def rhs(self, x, u, xi) -> np.ndarray:
        """Combined right-hand side ``f0 + f1 u`` for a batch at a fixed control value."""
        return self.drift(x, xi) + _matvec(self.control_field(x, xi), u)

    def rhs_jac(self, x, u, xi) -> np.ndarray:
        jac = self.drift_jac(x, xi)
        if self.control_field_jac is not None:
            jac = jac + np.einsum("bimj,m->bij", self.control_field_jac(x, xi), u)
        return jac

    def with_steps(self, s: int) -> "ProblemDef":
        from dataclasses import replace

        return replace(self, steps_per_interval=s)


@dataclass(frozen=True, eq=False)
class StateTrajectory:
    grid: ControlGrid
    steps_per_interval: int
    states: np.ndarray

    @property
    def times(self) -> np.ndarray:
        k = self.grid.q * self.steps_per_interval
        return np.linspace(0.0, self.grid.t_final, k + 1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    grid: ControlGrid
    steps_per_interval: int
    costates: np.ndarray


def _matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    # a: (B, n, m); v: (m,) or (B, m)
    if v.ndim == 1:
        return a @ v
    return (a @ v[..., None])[..., 0]


def _rmatvec(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # a^T w for a: (B, n, m), w: (B, n)
    return (w[:, None, :] @ a)[:, 0, :]


def _check_inputs(problem: ProblemDef, values: np.ndarray, grid: ControlGrid, xis: np.ndarray):
    if grid.m != problem.m:
        raise ValueError(f"control has {grid.m} channels, problem expects {problem.m}")
    if xis.ndim != 2 or xis.shape[1] != problem.param_dim:
        raise ValueError(f"parameters must have shape (B, {problem.param_dim}), got {xis.shape}")


def forward_batch(problem: ProblemDef, u: Control, xis, keep_stages: bool = False):
    """Integrate a batch of parameter vectors with one shared control.

    Returns the node states of shape ``(B, K + 1, n)`` where ``K = q * s``. With
    ``keep_stages`` also returns the four RK4 stage points per step, shape
    ``(K, 4, B, n)``, which the adjoint sweep needs.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    grid = u.grid
    _check_inputs(problem, u.values, grid, xis)
    s = problem.steps_per_interval
    h = grid.dt / s
    n_steps = grid.q * s
    batch = xis.shape[0]

    states = np.empty((batch, n_steps + 1, problem.n))
    x = np.asarray(problem.initial_state(xis), dtype=float).reshape(batch, problem.n)
    states[:, 0] = x
    _raise_if_bad(x, 0)
    stages = np.empty((n_steps, 4, batch, problem.n)) if keep_stages else None

    with np.errstate(over="ignore", invalid="ignore"):
        _rk4_sweep(problem, u, xis, x, h, n_steps, s, states, stages)
    return states, stages


def _rk4_sweep(problem, u, xis, x, h, n_steps, s, states, stages):
    for j in range(n_steps):
        uk = u.values[j // s]
        k1 = problem.rhs(x, uk, xis)
        y2 = x + 0.5 * h * k1
        k2 = problem.rhs(y2, uk, xis)
        y3 = x + 0.5 * h * k2
        k3 = problem.rhs(y3, uk, xis)
        y4 = x + h * k3
        k4 = problem.rhs(y4, uk, xis)
        if stages is not None:
            stages[j, 0] = x
            stages[j, 1] = y2
            stages[j, 2] = y3
            stages[j, 3] = y4
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _raise_if_bad(x, j + 1)
        states[:, j + 1] = x


def _raise_if_bad(x: np.ndarray, node: int):
    ok = np.isfinite(x).all(axis=1)
    if not ok.all():
        raise IntegrationDivergedError(node, int(np.argmin(ok)))


def objective_batch(problem: ProblemDef, u: Control, xis) -> np.ndarray:
    """Terminal cost ``F(x(t_f, xi), xi)`` for each row of ``xis``."""
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    states, _ = forward_batch(problem, u, xis)
    return np.asarray(problem.terminal_cost(states[:, -1], xis), dtype=float)


def value_and_gradient_batch(problem: ProblemDef, u: Control, xis, keep_costates: bool = False):
    """Per-sample objective values and weighted-L2 gradients via the discrete adjoint.

    Returns ``(values, grads)`` with shapes ``(B,)`` and ``(B, q, m)``; with
    ``keep_costates`` a third array of costates ``(B, K + 1, n)`` is appended.
    """
    xis = np.atleast_2d(np.asarray(xis, dtype=float))
    grid = u.grid
    s = problem.steps_per_interval
    h = grid.dt / s
    n_steps = grid.q * s
    states, stages = forward_batch(problem, u, xis, keep_stages=True)
    batch = xis.shape[0]
    x_final = states[:, -1]
    values = np.asarray(problem.terminal_cost(x_final, xis), dtype=float)
    lam = np.asarray(problem.terminal_cost_grad(x_final, xis), dtype=float).reshape(batch, problem.n)

    grads = np.zeros((batch, grid.q, grid.m))
    costates = np.empty((batch, n_steps + 1, problem.n)) if keep_costates else None
    if keep_costates:
        costates[:, n_steps] = lam

    for j in range(n_steps - 1, -1, -1):
        k = j // s
        uk = u.values[k]
        y1, y2, y3, y4 = stages[j]
        bk4 = (h / 6.0) * lam
        bk3 = (h / 3.0) * lam
        bk2 = (h / 3.0) * lam
        bk1 = (h / 6.0) * lam
        lam_new = lam.copy()
        gu = np.zeros((batch, grid.m))

        g = _rmatvec(problem.rhs_jac(y4, uk, xis), bk4)
        lam_new += g
        bk3 = bk3 + h * g
        gu += _rmatvec(problem.control_field(y4, xis), bk4)

        g = _rmatvec(problem.rhs_jac(y3, uk, xis), bk3)
        lam_new += g
        bk2 = bk2 + 0.5 * h * g
        gu += _rmatvec(problem.control_field(y3, xis), bk3)

        g = _rmatvec(problem.rhs_jac(y2, uk, xis), bk2)
        lam_new += g
        bk1 = bk1 + 0.5 * h * g
        gu += _rmatvec(problem.control_field(y2, xis), bk2)

        g = _rmatvec(problem.rhs_jac(y1, uk, xis), bk1)
        lam_new += g
        gu += _rmatvec(problem.control_field(y1, xis), bk1)

        grads[:, k] += gu
        lam = lam_new
        if keep_costates:
            costates[:, j] = lam

    grads /= grid.dt
    if keep_costates:
        return values, grads, costates
    return values, grads


def _single(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1:
        raise ValueError("expected a single parameter vector")
    return xi[None, :]


def integrate_forward(problem: ProblemDef, u: Control, xi) -> StateTrajectory:
    """Integrate one parameter sample and return the state at every RK4 node."""
    states, _ = forward_batch(problem, u, _single(xi))
    return StateTrajectory(u.grid, problem.steps_per_interval, states[0])


def eval_objective_sample(problem: ProblemDef, u: Control, xi) -> float:
    return float(objective_batch(problem, u, _single(xi))[0])


def gradient_sample(problem: ProblemDef, u: Control, xi) -> Control:
    """Exact gradient of :func:`eval_objective_sample` in the weighted L2 inner product."""
    _, grads = value_and_gradient_batch(problem, u, _single(xi))
    return Control(u.grid, grads[0])


def adjoint_sample(problem: ProblemDef, u: Control, xi) -> tuple[AdjointTrajectory, Control]:
    _, grads, costates = value_and_gradient_batch(problem, u, _single(xi), keep_costates=True)
    return (
        AdjointTrajectory(u.grid, problem.steps_per_interval, costates[0]),
        Control(u.grid, grads[0]),
    )
