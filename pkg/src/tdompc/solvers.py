"""Iteration-budgeted first-order solvers and the high-accuracy oracle.

The per-step solver map is ``T^ell(z, x)``: ``ell`` projected-gradient
(or accelerated) iterations on the condensed QP at parameter ``x``,
warmstarted from ``z``.  The hot loops live in a compiled extension
when available; a NumPy twin with identical semantics is selected at
import time otherwise.  ``TDO_MPC_BACKEND=compiled|python`` forces the
choice.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import OracleError
from .ocp import CondensedQp, project

_ORACLE_ITER_CAP = 10_000_000
_ENV_BACKEND = "TDO_MPC_BACKEND"


def _select_backend():
    forced = os.environ.get(_ENV_BACKEND)
    if forced not in (None, "compiled", "python"):
        raise ImportError(
            f"{_ENV_BACKEND} must be 'compiled' or 'python', got {forced!r}")
    if forced != "python":
        try:
            from . import _kernels
            return _kernels, "compiled"
        except ImportError:
            if forced == "compiled":
                raise
    from . import _kernels_py
    return _kernels_py, "python"


_impl, _BACKEND = _select_backend()


def backend() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return _BACKEND


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Result of a budgeted solver run.

    ``fixed_point_residual`` is ``|z - clamp(z - alpha grad)|`` at the
    returned iterate; zero exactly at the QP solution.
    """

    iterate: np.ndarray
    iterations_used: int
    fixed_point_residual: float


def _linear_term(qp: CondensedQp, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != qp.n:
        raise ValueError(f"state has length {x.shape[0]}, expected {qp.n}")
    return np.ascontiguousarray(qp.g @ x)


def _check_budget(iters) -> int:
    count = int(iters)
    if count != iters or count < 1:
        raise ValueError(f"iteration budget must be an integer >= 1, got {iters}")
    return count


def _prep_iterate(qp: CondensedQp, z0) -> np.ndarray:
    if z0 is None:
        return np.zeros(len(qp.box))
    z = np.ascontiguousarray(np.asarray(z0, dtype=float).ravel())
    if z.shape[0] != len(qp.box):
        raise ValueError(
            f"iterate has length {z.shape[0]}, expected {len(qp.box)}")
    return z


def pgm_run(qp: CondensedQp, z0, x, iters) -> SolveOutcome:
    """``iters`` projected-gradient steps with the optimal fixed step.

    The step is ``1/(lam_min + lam_max)`` applied to the gradient
    ``2(Hz + Gx)``, giving per-iteration contraction
    ``(kappa - 1)/(kappa + 1)`` toward the QP solution.
    """
    iters = _check_budget(iters)
    z = _prep_iterate(qp, z0)
    q = _linear_term(qp, x)
    step = 2.0 * qp.step_size
    out = _impl.pgm(qp.h, q, qp.box.lower, qp.box.upper, step, z, iters)
    res = _impl.residual(qp.h, q, qp.box.lower, qp.box.upper, step, out)
    return SolveOutcome(out, iters, res)


def apgm_run(qp: CondensedQp, z0, x, iters) -> SolveOutcome:
    """``iters`` accelerated steps with constant momentum.

    Uses step ``1/(2 lam_max)`` on the gradient and momentum
    ``(sqrt(kappa)-1)/(sqrt(kappa)+1)``; the momentum memory restarts at
    ``z0`` each call.  ``z0`` must lie in the box (project first).
    """
    iters = _check_budget(iters)
    z = _prep_iterate(qp, z0)
    if not qp.box.contains(z, tol=1e-12):
        raise ValueError("APGM initial iterate lies outside the box; "
                         "project it first")
    z = project(z, qp.box)
    q = _linear_term(qp, x)
    root = math.sqrt(qp.kappa)
    momentum = (root - 1.0) / (root + 1.0)
    step = 1.0 / qp.lam_max
    out = _impl.apgm(qp.h, q, qp.box.lower, qp.box.upper, step, momentum,
                     z, iters)
    res = _impl.residual(qp.h, q, qp.box.lower, qp.box.upper,
                         2.0 * qp.step_size, out)
    return SolveOutcome(out, iters, res)


def _active_set(h, q, lower, upper):
    """Exact box-QP solve by block pivoting on the active set.

    Returns the minimizer of ``z'Hz/2 + q'z`` over the box (so callers
    pass ``q = Gx``, matching the cost's gradient ``2(Hz + Gx)``), or
    ``None`` if the pivoting cycles.
    """
    nm = q.shape[0]
    grad_slack = 1e-12 * max(1.0, float(np.max(np.abs(q))))
    state = np.zeros(nm, dtype=np.int8)
    free_sol = np.linalg.solve(h, -q)
    state[free_sol <= lower] = -1
    state[free_sol >= upper] = 1

    for _ in range(4 * nm + 16):
        z = np.where(state == -1, lower, np.where(state == 1, upper, 0.0))
        free = state == 0
        if free.any():
            clamped = ~free
            rhs = -(q[free] + h[np.ix_(free, clamped)] @ z[clamped])
            z[free] = np.linalg.solve(h[np.ix_(free, free)], rhs)
        grad = h @ z + q
        bad_lo = free & (z < lower)
        bad_hi = free & (z > upper)
        loosen_lo = (state == -1) & (grad < -grad_slack)
        loosen_hi = (state == 1) & (grad > grad_slack)
        if not (bad_lo.any() or bad_hi.any() or loosen_lo.any()
                or loosen_hi.any()):
            return z
        state[bad_lo] = -1
        state[bad_hi] = 1
        state[loosen_lo] = 0
        state[loosen_hi] = 0
    return None


def oracle_solve(qp: CondensedQp, x, tol: float | None = None) -> np.ndarray:
    """Solve the QP at parameter ``x`` to high accuracy.

    An exact active-set solve is attempted first (machine-precision
    solution in a handful of passes at this scale); if the pivoting
    cycles, projected-gradient iterations finish the job.  The result
    is certified by its fixed-point residual: at most ``tol`` scaled by
    the problem's gradient magnitude (the scaling only matters for
    astronomically large ``x``, where an absolute residual is not
    representable).
    """
    if tol is None:
        tol = config.tolerances().oracle_residual
    if tol <= 0.0:
        raise ValueError(f"oracle tolerance must be positive, got {tol}")
    q = _linear_term(qp, x)
    step = 2.0 * qp.step_size
    lower, upper = qp.box.lower, qp.box.upper
    limit = tol * max(1.0, step * float(np.max(np.abs(q), initial=0.0)))

    z = _active_set(qp.h, q, lower, upper)
    if z is not None:
        res = _impl.residual(qp.h, q, lower, upper, step, z)
        if res <= limit:
            return z
        start = z
    else:
        start = np.clip(np.linalg.solve(qp.h, -q), lower, upper)

    z, _ = _impl.pgm_to_tolerance(qp.h, q, lower, upper, step,
                                  np.ascontiguousarray(start), limit,
                                  _ORACLE_ITER_CAP, 64)
    res = _impl.residual(qp.h, q, lower, upper, step, z)
    if res > limit:
        raise OracleError(
            f"oracle could not certify the QP solution: residual {res:.3e} "
            f"exceeds {limit:.3e} after {_ORACLE_ITER_CAP} iterations")
    return z
