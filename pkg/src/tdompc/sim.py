"""Closed-loop simulation of the coupled plant-optimizer system.

Per control step the solver runs a fixed budget of iterations on the
condensed QP at the measured state, warmstarted from the previous
step's iterate (no shift); the first stage of the resulting input plan
is applied to the plant.  The module also simulates the ideal
optimal-MPC loop, searches for the smallest stabilizing budget, and
samples the value function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .certify import SolverKind, format_sig12
from .ocp import (CondensedQp, OcpSpec, PlantModel, condense,
                  jacobi_precondition, project)
from .solvers import apgm_run, oracle_solve, pgm_run

# A state this large means the loop has blown up; stopping here (rather
# than at float overflow near 1e308) keeps every tracked quadratic and
# the oracle's certificate representable on the final logged step.
_DIVERGENCE_LIMIT = 1e140


@dataclass(frozen=True)
class StabilityTest:
    """Operational stability check: has the state shrunk enough by the end?

    Passes when ``|x_K| <= shrink_tolerance * |x_0|`` at
    ``K = horizon_steps``.
    """

    horizon_steps: int = 400
    shrink_tolerance: float = 1e-4

    def __post_init__(self):
        if self.horizon_steps < 1:
            raise ValueError(
                f"horizon_steps must be >= 1, got {self.horizon_steps}")
        if not 0.0 < self.shrink_tolerance < 1.0:
            raise ValueError(
                f"shrink_tolerance must be in (0, 1), got {self.shrink_tolerance}")


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """Per-step records of one closed-loop run.

    ``states`` has one more row than the others (it includes the final
    state).  Iterates and solutions are stored in physical input
    coordinates even for preconditioned runs; ``error_norms`` and
    ``psis`` are ``None`` when suboptimality tracking was disabled.
    """

    states: np.ndarray
    inputs: np.ndarray
    iterates: np.ndarray
    solutions: np.ndarray | None
    error_norms: np.ndarray | None
    psis: np.ndarray | None
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def passes(self, test: StabilityTest) -> bool:
        """Apply the shrink test at ``test.horizon_steps`` (or run end)."""
        k = min(test.horizon_steps, self.states.shape[0] - 1)
        x0 = np.linalg.norm(self.states[0])
        xk = np.linalg.norm(self.states[k])
        if not np.isfinite(xk):
            return False
        return xk <= test.shrink_tolerance * x0

    def csv_lines(self):
        """CSV with a JSON metadata header line (``#``-prefixed)."""
        n = self.states.shape[1]
        m = self.inputs.shape[1] if self.steps else 0
        yield "# " + json.dumps(self.meta, sort_keys=True)
        cols = (["k"] + [f"x_{i+1}" for i in range(n)]
                + [f"u_{i+1}" for i in range(m)] + ["e_norm", "psi"])
        yield ",".join(cols)
        for k in range(self.states.shape[0]):
            row = [str(k)]
            row += [format_sig12(v) for v in self.states[k]]
            if k < self.steps:
                row += [format_sig12(v) for v in self.inputs[k]]
                row.append(format_sig12(self.error_norms[k])
                           if self.error_norms is not None else "nan")
            else:
                row += ["nan"] * m + ["nan"]
            row.append(format_sig12(self.psis[k])
                       if self.psis is not None else "nan")
            yield ",".join(row)

    def write_csv(self, stream) -> None:
        for line in self.csv_lines():
            stream.write(line + "\n")


def evaluate_value_function(qp: CondensedQp, x, tol: float | None = None):
    """Optimal cost ``V(x)``, its square root, and the minimizer.

    The minimizer is returned in the QP's own coordinates.  ``V``
    satisfies the sandwich ``|x|_P^2 <= V(x) <= |x|_W^2 - |S(x)|_H^2``.
    """
    x = np.asarray(x, dtype=float).ravel()
    s = oracle_solve(qp, x, tol=tol)
    value = float(s @ (qp.h @ s) + 2.0 * s @ (qp.g @ x) + x @ (qp.w @ x))
    value = max(value, 0.0)
    return value, np.sqrt(value), s


def _solver_step(qp: CondensedQp, kind: SolverKind, z, x, ell):
    if kind is SolverKind.PGM:
        return pgm_run(qp, z, x, ell).iterate
    return apgm_run(qp, z, x, ell).iterate


def _prepare(plant: PlantModel, spec: OcpSpec, precondition: bool):
    qp = condense(plant, spec)
    if precondition:
        qp, _ = jacobi_precondition(qp)
    return qp


def simulate_tdo(plant: PlantModel, spec: OcpSpec, kind: SolverKind, ell,
                 x0, z0=None, steps: int = 400, *, precondition: bool = False,
                 track_errors: bool = True, oracle_tol: float | None = None,
                 meta: dict | None = None) -> TrajectoryLog:
    """Simulate the budgeted plant-optimizer loop for ``steps`` steps.

    ``z0`` is an initial input plan in physical coordinates (default
    zero).  With ``track_errors`` the per-step suboptimality
    ``|z_k - S(x_k)|`` and value-function samples are logged at one
    oracle solve per step; disable it for large sweeps.

    The run stops early if the state overflows (meta records
    ``diverged_at``); the shrink test then fails by construction.
    """
    qp = _prepare(plant, spec, precondition)
    return _run_loop(qp, kind, ell, x0, z0, steps,
                     track_errors=track_errors, oracle_tol=oracle_tol,
                     meta=meta)


def _run_loop(qp: CondensedQp, kind: SolverKind, ell, x0, z0, steps,
              *, track_errors, oracle_tol=None, meta=None) -> TrajectoryLog:
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(x0, dtype=float).ravel()
    if x.shape[0] != qp.n or not np.all(np.isfinite(x)):
        raise ValueError(f"x0 must be a finite vector of length {qp.n}")
    if z0 is None:
        z = np.zeros(len(qp.box))
    else:
        z = np.asarray(z0, dtype=float).ravel() / qp.scale
        if kind is SolverKind.APGM:
            z = project(z, qp.box)

    states = [x]
    inputs, iterates, solutions, e_norms, psis = [], [], [], [], []
    diverged_at = None
    for k in range(steps):
        z = _solver_step(qp, kind, z, x, ell)
        u = qp.input_from_iterate(z)
        if track_errors:
            value, psi, s = evaluate_value_function(qp, x, tol=oracle_tol)
            e_norms.append(float(np.linalg.norm(qp.scale * (z - s))))
            psis.append(psi)
            solutions.append(qp.iterate_to_inputs(s))
        inputs.append(u)
        iterates.append(qp.iterate_to_inputs(z))
        x = qp.plant.a @ x + qp.plant.b @ u
        states.append(x)
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > _DIVERGENCE_LIMIT:
            diverged_at = k + 1
            break
    if track_errors and diverged_at is None:
        _, psi, _ = evaluate_value_function(qp, x, tol=oracle_tol)
        psis.append(psi)
    elif track_errors:
        psis.append(float("nan"))

    info = {"kind": kind.value, "ell": int(ell), "steps": len(inputs),
            "preconditioned": bool(np.any(qp.scale != 1.0))}
    if diverged_at is not None:
        info["diverged_at"] = diverged_at
    if meta:
        info.update(meta)
    return TrajectoryLog(
        states=np.array(states), inputs=np.array(inputs),
        iterates=np.array(iterates),
        solutions=np.array(solutions) if track_errors else None,
        error_norms=np.array(e_norms) if track_errors else None,
        psis=np.array(psis) if track_errors else None,
        meta=info)


def simulate_optimal(plant: PlantModel, spec: OcpSpec, x0, steps: int = 400,
                     *, oracle_tol: float | None = None,
                     meta: dict | None = None) -> TrajectoryLog:
    """Simulate the ideal optimal-MPC loop ``u = first stage of S(x)``."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    qp = condense(plant, spec)
    x = np.asarray(x0, dtype=float).ravel()
    if x.shape[0] != qp.n or not np.all(np.isfinite(x)):
        raise ValueError(f"x0 must be a finite vector of length {qp.n}")

    states, inputs, solutions, psis = [x], [], [], []
    for _ in range(steps):
        value, psi, s = evaluate_value_function(qp, x, tol=oracle_tol)
        psis.append(psi)
        solutions.append(s)
        u = qp.input_from_iterate(s)
        inputs.append(u)
        x = qp.plant.a @ x + qp.plant.b @ u
        states.append(x)
    _, psi, _ = evaluate_value_function(qp, x, tol=oracle_tol)
    psis.append(psi)

    info = {"kind": "optimal", "ell": None, "steps": steps,
            "preconditioned": False}
    if meta:
        info.update(meta)
    sols = np.array(solutions)
    return TrajectoryLog(
        states=np.array(states), inputs=np.array(inputs), iterates=sols,
        solutions=sols, error_norms=np.zeros(steps), psis=np.array(psis),
        meta=info)


def empirical_min_iterations(plant: PlantModel, spec: OcpSpec,
                             kind: SolverKind, x0, ell_max: int,
                             test: StabilityTest | None = None, *,
                             precondition: bool = False) -> int | None:
    """Smallest stabilizing budget found by doubling then bisection.

    Budgets are judged by running the loop for ``test.horizon_steps``
    steps and applying the shrink test.  Returns ``None`` when even
    ``ell_max`` fails.  (The pass/fail boundary located by bisection is
    the conventional "observed" iteration requirement; passes below a
    failed budget are not searched for.)
    """
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    test = test or StabilityTest()
    qp = _prepare(plant, spec, precondition)

    def passes(ell: int) -> bool:
        log = _run_loop(qp, kind, ell, x0, None, test.horizon_steps,
                        track_errors=False)
        return log.passes(test)

    if passes(1):
        return 1
    lo = 1
    hi = 2
    while hi < ell_max and not passes(hi):
        lo = hi
        hi *= 2
    if hi >= ell_max:
        if not passes(ell_max):
            return None
        hi = ell_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return hi
