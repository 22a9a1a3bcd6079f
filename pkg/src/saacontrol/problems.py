"""Built-in benchmark problems: a parameterized harmonic oscillator and SEIR vaccination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlGrid, ProblemDef
from .regularizer import RegularizerSpec
from .sampling import ParameterBox

__all__ = [
    "OscillatorConfig",
    "VaccinationConfig",
    "make_oscillator",
    "make_vaccination",
    "VACCINATION_NOMINAL",
]


@dataclass(frozen=True)
class OscillatorConfig:
    # alpha is not fixed by the benchmark description; 1.0 is our default
    alpha: float = 1.0
    beta: float = 0.0
    control_bound: float = 3.0
    t_final: float = 1.0
    q: int = 50
    steps_per_interval: int = 1
    param_lower: tuple = (0.0, -5.0, -5.0, -0.5, -0.5)
    param_upper: tuple = (2 * np.pi, 5.0, 5.0, 0.5, 0.5)

    @property
    def grid(self) -> ControlGrid:
        return ControlGrid(self.t_final, self.q, 2)

    @property
    def regularizer(self) -> RegularizerSpec:
        return RegularizerSpec.uniform(self.alpha, self.beta, -self.control_bound, self.control_bound, 2)

    @property
    def box(self) -> ParameterBox:
        return ParameterBox(np.array(self.param_lower), np.array(self.param_upper))


def make_oscillator(cfg: OscillatorConfig | None = None) -> ProblemDef:
    """Rotation ``[[0, -w], [w, 0]] x + u + (xi2, xi3)`` with ``x(0) = (1 + xi4, xi5)``.

    Parameters are ``xi = (w, xi2, xi3, xi4, xi5)``; the cost is ``|x(t_f)|^2``.
    """
    cfg = cfg or OscillatorConfig()

    def drift(x, xi):
        w = xi[:, 0]
        return np.stack([-w * x[:, 1] + xi[:, 1], w * x[:, 0] + xi[:, 2]], axis=1)

    def drift_jac(x, xi):
        w = xi[:, 0]
        jac = np.zeros((x.shape[0], 2, 2))
        jac[:, 0, 1] = -w
        jac[:, 1, 0] = w
        return jac

    eye = np.eye(2)

    def control_field(x, xi):
        return np.broadcast_to(eye, (x.shape[0], 2, 2))

    def cost(x, xi):
        return x[:, 0] ** 2 + x[:, 1] ** 2

    def cost_grad(x, xi):
        return 2.0 * x

    def x0(xi):
        return np.stack([1.0 + xi[:, 3], xi[:, 4]], axis=1)

    return ProblemDef(
        n=2,
        m=2,
        drift=drift,
        drift_jac=drift_jac,
        control_field=control_field,
        control_field_jac=None,
        terminal_cost=cost,
        terminal_cost_grad=cost_grad,
        initial_state=x0,
        lower=np.array(cfg.param_lower, dtype=float),
        upper=np.array(cfg.param_upper, dtype=float),
        steps_per_interval=cfg.steps_per_interval,
        name="oscillator",
        metadata={"alpha": cfg.alpha},
    )


# (a, b, c, d, e, g): disease death, birth, incidence, natural death, infection, recovery rates
VACCINATION_NOMINAL = (0.2, 0.525, 0.001, 0.5, 0.5, 0.1)


@dataclass(frozen=True)
class VaccinationConfig:
    S0: float = 1000.0
    E0: float = 100.0
    I0: float = 50.0
    R0: float = 15.0
    t_final: float = 20.0
    q: int = 50
    steps_per_interval: int = 1
    alpha: float = 2.0
    beta: float = 0.0
    u_min: float = 0.0
    u_max: float = 0.9
    nominal: tuple = VACCINATION_NOMINAL
    sigma: float = 0.15

    @property
    def N0(self) -> float:
        return self.S0 + self.E0 + self.I0 + self.R0

    @property
    def grid(self) -> ControlGrid:
        return ControlGrid(self.t_final, self.q, 1)

    @property
    def regularizer(self) -> RegularizerSpec:
        return RegularizerSpec.uniform(self.alpha, self.beta, self.u_min, self.u_max, 1)

    @property
    def box(self) -> ParameterBox:
        nom = np.array(self.nominal, dtype=float)
        return ParameterBox((1.0 - self.sigma) * nom, (1.0 + self.sigma) * nom)


def make_vaccination(cfg: VaccinationConfig | None = None) -> ProblemDef:
    """SEIR model without the recovered compartment, plus an accumulator for the infected integral.

    State ``x = (S, E, I, N, z)`` with ``z' = I`` so the running cost becomes the
    terminal cost ``F = z``. The control (vaccination rate) enters as ``-u S`` in
    the ``S`` equation.
    """
    cfg = cfg or VaccinationConfig()

    def drift(x, xi):
        S, E, I, N = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
        a, b, c, d, e, g = xi.T
        return np.stack(
            [
                b * N - d * S - c * S * I,
                c * S * I - (e + d) * E,
                e * E - (g + a + d) * I,
                (b - d) * N - a * I,
                I,
            ],
            axis=1,
        )

    def drift_jac(x, xi):
        S, I = x[:, 0], x[:, 2]
        a, b, c, d, e, g = xi.T
        jac = np.zeros((x.shape[0], 5, 5))
        jac[:, 0, 0] = -d - c * I
        jac[:, 0, 2] = -c * S
        jac[:, 0, 3] = b
        jac[:, 1, 0] = c * I
        jac[:, 1, 1] = -(e + d)
        jac[:, 1, 2] = c * S
        jac[:, 2, 1] = e
        jac[:, 2, 2] = -(g + a + d)
        jac[:, 3, 2] = -a
        jac[:, 3, 3] = b - d
        jac[:, 4, 2] = 1.0
        return jac

    def control_field(x, xi):
        f1 = np.zeros((x.shape[0], 5, 1))
        f1[:, 0, 0] = -x[:, 0]
        return f1

    def control_field_jac(x, xi):
        out = np.zeros((x.shape[0], 5, 1, 5))
        out[:, 0, 0, 0] = -1.0
        return out

    def cost(x, xi):
        return x[:, 4].copy()

    def cost_grad(x, xi):
        grad = np.zeros_like(x)
        grad[:, 4] = 1.0
        return grad

    init = np.array([cfg.S0, cfg.E0, cfg.I0, cfg.N0, 0.0])

    def x0(xi):
        return np.tile(init, (xi.shape[0], 1))

    box = cfg.box
    return ProblemDef(
        n=5,
        m=1,
        drift=drift,
        drift_jac=drift_jac,
        control_field=control_field,
        control_field_jac=control_field_jac,
        terminal_cost=cost,
        terminal_cost_grad=cost_grad,
        initial_state=x0,
        lower=box.lower,
        upper=box.upper,
        steps_per_interval=cfg.steps_per_interval,
        name="vaccination",
        metadata={"alpha": cfg.alpha, "sigma": cfg.sigma},
    )
