import numpy as np
import pytest

from saacontrol.dynamics import ControlGrid, ProblemDef


def scalar_problem(rate=0.0, x0=0.0, cost="square", field=1.0, lower=(0.0,), upper=(0.0,)):
    """x' = rate * x + field * u with a scalar state; used by many small oracles."""

    def drift(x, xi):
        return rate * x

    def drift_jac(x, xi):
        return np.full((x.shape[0], 1, 1), float(rate))

    def control_field(x, xi):
        return np.full((x.shape[0], 1, 1), float(field))

    if cost == "square":
        F = lambda x, xi: x[:, 0] ** 2
        dF = lambda x, xi: 2.0 * x
    elif cost == "identity":
        F = lambda x, xi: x[:, 0].copy()
        dF = lambda x, xi: np.ones_like(x)
    elif cost == "constant":
        F = lambda x, xi: np.full(x.shape[0], 3.0)
        dF = lambda x, xi: np.zeros_like(x)
    else:
        raise ValueError(cost)

    return ProblemDef(
        n=1,
        m=1,
        drift=drift,
        drift_jac=drift_jac,
        control_field=control_field,
        control_field_jac=None,
        terminal_cost=F,
        terminal_cost_grad=dF,
        initial_state=lambda xi: np.full((xi.shape[0], 1), float(x0)),
        lower=np.array(lower, dtype=float),
        upper=np.array(upper, dtype=float),
    )


def random_smooth_problem(seed=0, n=3, m=2, p=2, steps=1):
    """Nonlinear test dynamics with a state-dependent control field."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, p))
    C = rng.normal(size=(n, m))
    w = rng.normal(size=n)

    def drift(x, xi):
        return xi[:, :1] * (np.tanh(x) @ A.T) + xi @ B.T

    def drift_jac(x, xi):
        sech2 = 1.0 - np.tanh(x) ** 2
        return xi[:, 0, None, None] * A[None, :, :] * sech2[:, None, :]

    def control_field(x, xi):
        return C[None, :, :] * (1.0 + 0.3 * np.sin(x))[:, :, None]

    def control_field_jac(x, xi):
        out = np.zeros((x.shape[0], n, m, n))
        for i in range(n):
            out[:, i, :, i] = C[i][None, :] * 0.3 * np.cos(x[:, i])[:, None]
        return out

    def F(x, xi):
        return np.sum(x**2, axis=1) + np.sin(x @ w)

    def dF(x, xi):
        return 2.0 * x + np.cos(x @ w)[:, None] * w[None, :]

    def x0(xi):
        return np.stack([0.5 + xi[:, 0]] + [xi[:, 1] * (k + 1) / n for k in range(n - 1)], axis=1)

    return ProblemDef(
        n=n,
        m=m,
        drift=drift,
        drift_jac=drift_jac,
        control_field=control_field,
        control_field_jac=control_field_jac,
        terminal_cost=F,
        terminal_cost_grad=dF,
        initial_state=x0,
        lower=np.array([0.5, -0.5]),
        upper=np.array([1.5, 0.5]),
        steps_per_interval=steps,
        name="random-smooth",
    )


def fd_gradient(objective, values, dt, h=1e-5):
    """Central differences of ``objective`` w.r.t. each entry, scaled to the weighted L2 gradient."""
    grad = np.zeros_like(values)
    for idx in np.ndindex(values.shape):
        e = np.zeros_like(values)
        e[idx] = h
        grad[idx] = (objective(values + e) - objective(values - e)) / (2 * h) / dt
    return grad


def wnorm(a, dt):
    return float(np.sqrt(dt * np.sum(np.asarray(a) ** 2)))


@pytest.fixture
def unit_grid():
    return ControlGrid(1.0, 10, 1)


def pytest_terminal_summary(terminalreporter):
    from tests import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)
