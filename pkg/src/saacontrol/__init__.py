"""Sample average approximation for risk-neutral optimal control of parameterized ODEs."""

from .dynamics import (
    AdjointTrajectory,
    Control,
    ControlGrid,
    IntegrationDivergedError,
    ProblemDef,
    StateTrajectory,
    eval_objective_sample,
    gradient_sample,
    integrate_forward,
)
from .ensemble import EnsembleProblem, criticality, reference_criticality, saa_objective, saa_smooth_gradient
from .problems import OscillatorConfig, VaccinationConfig, make_oscillator, make_vaccination
from .regularizer import RegularizerSpec, prox_psi_alpha, psi_value
from .sampling import ParameterBox, SampleSet, derive_seed, nominal_point, sample_iid, sample_sobol
from .solver import SolveReport, SolverOptions, StepTooLargeError, solve

__version__ = "0.1.0"
