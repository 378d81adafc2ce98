"""Dense matrix kernels used by every other module.

Symmetric eigendecomposition and singular values are delegated to
LAPACK through NumPy; the Riccati, Lyapunov and matrix-exponential
routines are written here because their stopping rules and error
semantics are part of this package's contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import (
    DefinitenessError,
    NotSchurError,
    StabilizabilityError,
    SymmetryError,
)

_FIXED_POINT_CAP = 100_000


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array, copying only if needed."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _require_square(m: np.ndarray, name: str) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")


def sym_eig(m, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    m : array_like
        Symmetric matrix. Asymmetry beyond ``tol`` times the largest
        entry magnitude is rejected.
    tol : float, optional
        Relative symmetry tolerance (default from the active bundle).

    Returns
    -------
    (w, v)
        Eigenvalues in ascending order and the orthonormal eigenvector
        matrix, so that ``m = v @ diag(w) @ v.T``.
    """
    arr = as_matrix(m, "symmetric matrix")
    _require_square(arr, "symmetric matrix")
    if tol is None:
        tol = config.tolerances().symmetry
    scale = np.max(np.abs(arr)) or 1.0
    gap = np.max(np.abs(arr - arr.T))
    if gap > tol * scale:
        raise SymmetryError(
            f"matrix is not symmetric: max|M - M.T| = {gap:.3e} "
            f"exceeds {tol:.1e} * {scale:.3e}"
        )
    w, v = np.linalg.eigh(0.5 * (arr + arr.T))
    return w, v


def spectral_norm(m) -> float:
    """Largest singular value of ``m``."""
    arr = as_matrix(m, "matrix")
    return float(np.linalg.norm(arr, 2))


def spectral_radius(m) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    arr = as_matrix(m, "matrix")
    _require_square(arr, "matrix")
    return float(np.max(np.abs(np.linalg.eigvals(arr))))


@dataclass(frozen=True)
class SpdFactor:
    """A symmetric positive definite matrix with its square-root pair.

    ``sqrt @ sqrt`` reconstructs ``original`` and ``inv_sqrt`` is its
    inverse, each within the bundle's reconstruction tolerance.
    """

    original: np.ndarray
    sqrt: np.ndarray
    inv_sqrt: np.ndarray


def spd_factor(m, tol: float | None = None) -> SpdFactor:
    """Factor an SPD matrix into symmetric square roots.

    Raises
    ------
    DefinitenessError
        If the smallest eigenvalue is below ``spd_floor`` times the
        largest (indefinite or numerically singular input).
    """
    w, v = sym_eig(m, tol=tol)
    floor = config.tolerances().spd_floor
    if w[0] <= floor * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise DefinitenessError(
            f"matrix is not positive definite: eigenvalue range "
            f"[{w[0]:.3e}, {w[-1]:.3e}]"
        )
    root = np.sqrt(w)
    sqrt = (v * root) @ v.T
    inv_sqrt = (v / root) @ v.T
    original = as_matrix(m)
    return SpdFactor(
        original=original,
        sqrt=0.5 * (sqrt + sqrt.T),
        inv_sqrt=0.5 * (inv_sqrt + inv_sqrt.T),
    )


def weighted_eig_bounds(m, w) -> tuple[float, float]:
    """Extreme eigenvalues of ``W^(-1/2) M W^(-1/2)``.

    These are the tightest constants relating the M- and W-quadratic
    forms: ``lo*|x|_W^2 <= |x|_M^2 <= hi*|x|_W^2``.
    """
    m_arr = as_matrix(m, "M")
    w_arr = as_matrix(w, "W")
    if m_arr.shape != w_arr.shape:
        raise ValueError(
            f"dimension mismatch: M is {m_arr.shape}, W is {w_arr.shape}"
        )
    inv_root = spd_factor(w_arr).inv_sqrt
    t = inv_root @ m_arr @ inv_root
    vals = np.linalg.eigvalsh(0.5 * (t + t.T))
    return float(vals[0]), float(vals[-1])


def solve_dare(a, b, q, r, tol: float | None = None,
               max_iters: int = _FIXED_POINT_CAP) -> np.ndarray:
    """Solve the discrete algebraic Riccati equation.

    Fixed-point iteration ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA``
    from ``P = Q``; converges exactly when ``(A, B)`` is stabilizable
    (with SPD ``Q``), so non-convergence is reported as a
    stabilizability failure.
    """
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    q = as_matrix(q, "Q")
    r = as_matrix(r, "R")
    _require_square(a, "A")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"B must have {n} rows, got {b.shape}")
    if q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {q.shape}")
    if r.shape != (b.shape[1],) * 2:
        raise ValueError(f"R must be {b.shape[1]}x{b.shape[1]}, got {r.shape}")
    if tol is None:
        tol = config.tolerances().fixed_point_change

    p = q.copy()
    # Divergence (non-stabilizable pairs) is detected and reported, so
    # the transient float overflow on the way there is not news.
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(max_iters):
            pb = p @ b
            gain = np.linalg.solve(r + b.T @ pb, pb.T @ a)
            nxt = q + a.T @ p @ a - (a.T @ pb) @ gain
            nxt = 0.5 * (nxt + nxt.T)
            if not np.all(np.isfinite(nxt)):
                raise StabilizabilityError(
                    "Riccati iteration diverged; (A, B) is not stabilizable"
                )
            change = np.max(np.abs(nxt - p))
            p = nxt
            if change <= tol * max(np.max(np.abs(p)), 1.0):
                break
        else:
            raise StabilizabilityError(
                f"Riccati iteration did not converge in {max_iters} sweeps; "
                "(A, B) is likely not stabilizable"
            )
    residual = riccati_residual(a, b, q, r, p)
    if residual > config.tolerances().riccati_residual * spectral_norm(p):
        raise StabilizabilityError(
            f"Riccati fixed point has residual {residual:.3e}"
        )
    return p


def riccati_residual(a, b, q, r, p) -> float:
    """Norm of ``P - Q - A'PA + A'PB (R + B'PB)^-1 B'PA``."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    pb = p @ b
    correction = (a.T @ pb) @ np.linalg.solve(r + b.T @ pb, pb.T @ a)
    return spectral_norm(p - q - a.T @ p @ a + correction)


def solve_dlyap(a, q, tol: float | None = None,
                max_iters: int = _FIXED_POINT_CAP) -> np.ndarray:
    """Solve the discrete Lyapunov equation ``U = Q + A'UA``.

    Requires ``A`` Schur (spectral radius < 1); the fixed-point sweep
    diverges otherwise.
    """
    a = as_matrix(a, "A")
    q = as_matrix(q, "Q")
    _require_square(a, "A")
    if q.shape != a.shape:
        raise ValueError(f"Q must match A's shape {a.shape}, got {q.shape}")
    rho = spectral_radius(a)
    if rho >= 1.0:
        raise NotSchurError(f"A has spectral radius {rho:.6f} >= 1")
    if tol is None:
        tol = config.tolerances().fixed_point_change

    u = q.copy()
    for _ in range(max_iters):
        nxt = q + a.T @ u @ a
        nxt = 0.5 * (nxt + nxt.T)
        change = np.max(np.abs(nxt - u))
        u = nxt
        if change <= tol * max(np.max(np.abs(u)), 1.0):
            return u
    raise NotSchurError(
        f"Lyapunov iteration did not converge in {max_iters} sweeps "
        f"(spectral radius {rho:.6f})"
    )


def expm(m) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a [6/6] Pade step.

    The argument is scaled so its 1-norm is at most 0.5 before the
    rational approximation, then the result is squared back up.
    """
    arr = as_matrix(m, "matrix")
    _require_square(arr, "matrix")
    norm = float(np.linalg.norm(arr, 1))
    squarings = max(0, math.ceil(math.log2(norm / 0.5))) if norm > 0.5 else 0
    scaled = arr / (2.0 ** squarings)

    # Diagonal Pade coefficients c_{k+1} = c_k (q-k) / ((2q-k)(k+1)), q = 6.
    q = 6
    coeff = 1.0
    n = arr.shape[0]
    power = np.eye(n)
    numer = np.eye(n)
    denom = np.eye(n)
    for k in range(q):
        coeff *= (q - k) / ((2 * q - k) * (k + 1))
        power = power @ scaled
        term = coeff * power
        numer += term
        denom += -term if (k + 1) % 2 else term
    result = np.linalg.solve(denom, numer)
    for _ in range(squarings):
        result = result @ result
    return result
