"""Pure-NumPy solver kernels.

Fallback twin of the compiled ``_kernels`` extension; same call
signatures, same semantics, selected at import time by
:mod:`tdompc.solvers` when the extension is unavailable (or when
``TDO_MPC_BACKEND=python`` forces it).

All kernels work on the generic box-QP iteration
``z <- clamp(z - step * (H z + q))`` where ``step`` already absorbs the
gradient's factor of two.
"""

import numpy as np


def pgm(h, q, lower, upper, step, z0, iters):
    """Run ``iters`` projected-gradient steps from ``z0``."""
    z = np.array(z0, dtype=float)
    for _ in range(iters):
        z = np.clip(z - step * (h @ z + q), lower, upper)
    return z


def apgm(h, q, lower, upper, step, momentum, z0, iters):
    """Run ``iters`` accelerated steps with constant momentum from ``z0``."""
    z = np.array(z0, dtype=float)
    z_prev = z.copy()
    for _ in range(iters):
        y = z + momentum * (z - z_prev)
        z_prev = z
        z = np.clip(y - step * (h @ y + q), lower, upper)
    return z


def residual(h, q, lower, upper, step, z):
    """Fixed-point residual ``|z - clamp(z - step*(Hz + q))|``."""
    moved = np.clip(z - step * (h @ z + q), lower, upper)
    return float(np.linalg.norm(z - moved))


def pgm_to_tolerance(h, q, lower, upper, step, z0, tol, max_iters, check_every):
    """Projected-gradient until the fixed-point residual reaches ``tol``.

    Returns ``(iterate, iterations_used)``; the caller re-checks the
    residual, so hitting ``max_iters`` is not an error here.
    """
    z = np.array(z0, dtype=float)
    used = 0
    while used < max_iters:
        burst = min(check_every, max_iters - used)
        for _ in range(burst):
            z = np.clip(z - step * (h @ z + q), lower, upper)
        used += burst
        if residual(h, q, lower, upper, step, z) <= tol:
            break
    return z, used
