"""Uniform-in-epsilon Landau damping toolkit for the linearized Vlasov-Poisson
equation with linear Boltzmann and Fokker-Planck collisions."""

from .foundations import (
    FiniteSobolevTail,
    GaussianHermite,
    Model,
    PhysicalParams,
    chi,
    coulomb_w,
    fp_damping_exponent,
    initial_mode,
    maxwellian_profile,
    psi,
)
from .kernels import KernelSpec, kernel_fp, kernel_lb, kernel_limit
from .dispersion import PenroseReport, kernel_distance, laplace_kernel, penrose_margin
from .volterra import ModeTrajectory, TimeGrid, density_mode, solve_volterra
from .kinetic import ModeState, VelocityGrid, run_scenario, step_fp, step_lb
from .acceptance import CRITERIA, run_criteria

__version__ = "0.1.0"

__all__ = [
    "chi",
    "coulomb_w",
    "CRITERIA",
    "density_mode",
    "FiniteSobolevTail",
    "fp_damping_exponent",
    "GaussianHermite",
    "initial_mode",
    "kernel_distance",
    "kernel_fp",
    "kernel_lb",
    "kernel_limit",
    "KernelSpec",
    "laplace_kernel",
    "maxwellian_profile",
    "Model",
    "ModeState",
    "ModeTrajectory",
    "penrose_margin",
    "PenroseReport",
    "PhysicalParams",
    "psi",
    "run_criteria",
    "run_scenario",
    "solve_volterra",
    "step_fp",
    "step_lb",
    "TimeGrid",
    "VelocityGrid",
]
