"""The two benchmark problems: a stable 4-state system with two inputs
and the classic cart-pendulum linearized about its upright equilibrium,
discretized by zero-order hold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .certify import SolverKind
from .linalg import expm
from .ocp import OcpSpec, PlantModel


@dataclass(frozen=True, eq=False)
class BenchmarkCase:
    """A named plant/spec pair with its nominal run settings."""

    name: str
    plant: PlantModel
    spec: OcpSpec
    x0: np.ndarray
    nominal_iterations: dict
    sampling_period: float | None = None


def jones_system() -> BenchmarkCase:
    """Stable 4-state, 2-input system with Q = 10I, R = I, N = 5."""
    a = np.array([
        [0.7, -0.1, 0.0, 0.0],
        [0.2, -0.5, 0.1, 0.0],
        [0.0, 0.1, 0.1, 0.0],
        [0.5, 0.0, 0.5, 0.5],
    ])
    b = np.array([
        [0.0, 0.1],
        [0.1, 1.0],
        [0.1, 0.0],
        [0.0, 0.0],
    ])
    spec = OcpSpec(q=10.0 * np.eye(4), r=np.eye(2), horizon=5,
                   u_lower=[-1.0, -1.0], u_upper=[1.0, 1.0])
    return BenchmarkCase(
        name="jones",
        plant=PlantModel(a, b),
        spec=spec,
        x0=np.array([10.0, -10.0, 10.0, -10.0]),
        nominal_iterations={SolverKind.PGM: 10, SolverKind.APGM: 10},
    )


def pendulum_continuous(mass_cart: float = 1.0, mass_pole: float = 0.1,
                        damping: float = 0.1, length: float = 1.0,
                        gravity: float = 9.81):
    """Continuous-time cart-pendulum linearization, state (y, dy, phi, dphi).

    The coupled second-order equations

        J phidd - m l ydd = m g l phi
        (M + m) ydd - m l phidd = -b dy + F,   J = (4/3) m l^2

    are solved for (ydd, phidd) by inverting the 2x2 mass matrix
    [[J, -ml], [-ml, M+m]]; entries below are the resulting rational
    expressions in the physical parameters.
    """
    m_total = mass_cart + mass_pole
    inertia = (4.0 / 3.0) * mass_pole * length ** 2
    det = inertia * m_total - (mass_pole * length) ** 2
    ac = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.0, -inertia * damping / det,
         mass_pole ** 2 * length ** 2 * gravity / det, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, -mass_pole * length * damping / det,
         m_total * mass_pole * gravity * length / det, 0.0],
    ])
    bc = np.array([
        [0.0],
        [inertia / det],
        [0.0],
        [mass_pole * length / det],
    ])
    return ac, bc


def zoh_discretize(ac, bc, tau: float):
    """Exact zero-order-hold discretization via the augmented exponential.

    ``expm([[Ac, Bc], [0, 0]] tau)`` carries both the state transition
    ``e^(Ac tau)`` and the held-input integral in one call.
    """
    if tau <= 0.0:
        raise ValueError(f"sampling period must be positive, got {tau}")
    ac = np.asarray(ac, dtype=float)
    bc = np.asarray(bc, dtype=float)
    n, m = bc.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = ac
    aug[:n, n:] = bc
    phi = expm(aug * tau)
    return phi[:n, :n], phi[:n, n:]


def pendulum_case(tau: float = 0.2) -> BenchmarkCase:
    """ZOH-discretized pendulum with Q = I, R = I, N = 7, box [-1, 1]."""
    ac, bc = pendulum_continuous()
    a, b = zoh_discretize(ac, bc, tau)
    spec = OcpSpec(q=np.eye(4), r=np.eye(1), horizon=7,
                   u_lower=[-1.0], u_upper=[1.0])
    return BenchmarkCase(
        name="pendulum",
        plant=PlantModel(a, b),
        spec=spec,
        x0=np.array([2.0, 0.0, 0.0, 0.0]),
        nominal_iterations={SolverKind.PGM: 100_000, SolverKind.APGM: 8_000},
        sampling_period=tau,
    )


BENCHMARK_NAMES = ("jones", "pendulum")


def by_name(name: str) -> BenchmarkCase:
    """Look up a benchmark by its CLI name."""
    if name == "jones":
        return jones_system()
    if name == "pendulum":
        return pendulum_case()
    raise KeyError(f"unknown benchmark {name!r}; choose from {BENCHMARK_NAMES}")
