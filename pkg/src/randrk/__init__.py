"""Randomized two-stage Runge-Kutta under noisy information: solver, error harness, stability regions."""

from .core import DomainError, IVProblem, Mesh, RngStream, make_problem, norm1
from .noise import NoiseSpec, perturb, perturb_initial
from .solver import (
    SolverOverflow,
    Trajectory,
    euler_trajectory,
    interpolate,
    midpoint_trajectory,
    rrk2_step,
    rrk2_trajectory,
)

__version__ = "0.1.0"
