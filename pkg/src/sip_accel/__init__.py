"""Accelerated primal-dual solvers for convex semi-infinite programs."""

from .core import (
    ConfigurationError,
    ContractError,
    FeasibleSet,
    ProblemConstants,
    ProblemInstance,
    lagrangian,
    linearize_g,
    project,
    weighted_average,
)
from .problems import (
    NoiseModel,
    build_convex_instance,
    build_problem,
    build_strongly_convex_instance,
    build_toy1,
    make_stochastic,
)
from .schedules import ScheduleParams, StepTuple, recommended_params, step, verify_conditions
from .certify import Certificate, certify

__version__ = "0.1.0"
