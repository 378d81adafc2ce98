"""Certification and simulation toolkit for time-distributed optimization
in input-constrained linear MPC.

The optimal control problem is condensed to a box-constrained QP whose
parameter is the current state; running only ``ell`` first-order solver
iterations per control step couples the plant with an optimizer that
never quite converges.  This package computes the closed-form
small-gain certificates for that coupling and simulates it.
"""

from .bench import BenchmarkCase, by_name, jones_system, pendulum_case
from .certify import (GainReport, SolverKind, certify, gain_report,
                      iteration_bound)
from .ocp import (BoxSet, CondensedQp, OcpSpec, PlantModel, condense,
                  jacobi_precondition, project)
from .sim import (StabilityTest, TrajectoryLog, empirical_min_iterations,
                  evaluate_value_function, simulate_optimal, simulate_tdo)
from .solvers import SolveOutcome, apgm_run, backend, oracle_solve, pgm_run

__version__ = "0.1.0"

__all__ = [
    "BenchmarkCase", "BoxSet", "CondensedQp", "GainReport", "OcpSpec",
    "PlantModel", "SolveOutcome", "SolverKind", "StabilityTest",
    "TrajectoryLog", "apgm_run", "backend", "by_name", "certify",
    "condense", "empirical_min_iterations", "evaluate_value_function",
    "gain_report", "iteration_bound", "jacobi_precondition",
    "jones_system", "oracle_solve", "pendulum_case", "pgm_run", "project",
    "simulate_optimal", "simulate_tdo", "__version__",
]
