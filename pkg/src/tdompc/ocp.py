"""Condensed parameterized QP built from plant and cost data.

Eliminating the predicted states through the dynamics turns the
finite-horizon OCP

    min  |xi_N|_P^2 + sum_i |xi_i|_Q^2 + |mu_i|_R^2
    s.t. xi_{i+1} = A xi_i + B mu_i,  mu_i in [u_lower, u_upper]

into a box-constrained QP in the stacked input sequence z:

    min_{z in box}  z'Hz + 2 z'Gx + x'Wx.

This module assembles (H, G, W), projects onto the box, and applies
diagonal preconditioning.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import config, linalg
from .errors import DefinitenessError

_W_METHODS = ("series", "assembly", "riccati")


def _check_spd(m: np.ndarray, name: str) -> None:
    w, _ = linalg.sym_eig(m)
    if w[0] <= config.tolerances().spd_floor * max(w[-1], 0.0) or w[-1] <= 0.0:
        raise DefinitenessError(f"{name} must be SPD; eigenvalues span "
                                f"[{w[0]:.3e}, {w[-1]:.3e}]")


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Discrete-time LTI plant ``x+ = Ax + Bu``."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = linalg.as_matrix(self.a, "A")
        b = linalg.as_matrix(self.b, "B")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(
                f"B must have {a.shape[0]} rows to match A, got {b.shape}")
        object.__setattr__(self, "a", _frozen(a))
        object.__setattr__(self, "b", _frozen(b))

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True, eq=False)
class OcpSpec:
    """Cost weights, horizon and per-input box bounds for the OCP.

    ``p`` may be left ``None``, in which case :func:`condense` fills it
    with the Riccati solution; a supplied ``p`` is validated against the
    Riccati residual instead.
    """

    q: np.ndarray
    r: np.ndarray
    horizon: int
    u_lower: np.ndarray
    u_upper: np.ndarray
    p: np.ndarray | None = None

    def __post_init__(self):
        q = linalg.as_matrix(self.q, "Q")
        r = linalg.as_matrix(self.r, "R")
        _check_spd(q, "Q")
        _check_spd(r, "R")
        horizon = int(self.horizon)
        if horizon != self.horizon or horizon < 1:
            raise ValueError(f"horizon must be an integer >= 1, got {self.horizon}")
        lo = np.atleast_1d(np.asarray(self.u_lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.u_upper, dtype=float))
        m = r.shape[0]
        if lo.shape != (m,) or hi.shape != (m,):
            raise ValueError(
                f"box bounds must be length-{m} vectors, got "
                f"{lo.shape} and {hi.shape}")
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise ValueError("input box must contain 0 in its interior")
        p = self.p
        if p is not None:
            p = linalg.as_matrix(p, "P")
            if p.shape != q.shape:
                raise ValueError(f"P must be {q.shape}, got {p.shape}")
            _check_spd(p, "P")
            p = _frozen(p)
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "r", _frozen(r))
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "u_lower", _frozen(lo.reshape(1, -1))[0])
        object.__setattr__(self, "u_upper", _frozen(hi.reshape(1, -1))[0])
        object.__setattr__(self, "p", p)

    def with_r_scale(self, c: float) -> "OcpSpec":
        """Same spec with R scaled by ``c`` (terminal weight recomputed)."""
        if c <= 0.0:
            raise ValueError(f"R scale must be positive, got {c}")
        return dataclasses.replace(self, r=c * self.r, p=None)

    def with_horizon(self, horizon: int) -> "OcpSpec":
        return dataclasses.replace(self, horizon=horizon)


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Stage-major stacked input box {z : lower <= z <= upper}."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape:
            raise ValueError("box bounds must have equal length")
        if not (np.all(lo < 0.0) and np.all(hi > 0.0)):
            raise ValueError("box must contain 0 in its interior")
        object.__setattr__(self, "lower", _frozen(lo.reshape(1, -1))[0])
        object.__setattr__(self, "upper", _frozen(hi.reshape(1, -1))[0])

    @classmethod
    def tile(cls, u_lower, u_upper, horizon: int) -> "BoxSet":
        return cls(np.tile(u_lower, horizon), np.tile(u_upper, horizon))

    def __len__(self) -> int:
        return self.lower.shape[0]

    def contains(self, z, tol: float = 0.0) -> bool:
        z = np.asarray(z, dtype=float).ravel()
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))


def project(z, box: BoxSet) -> np.ndarray:
    """Euclidean projection onto the box (componentwise clamp)."""
    z = np.asarray(z, dtype=float).ravel()
    if z.shape[0] != len(box):
        raise ValueError(f"iterate has length {z.shape[0]}, box expects {len(box)}")
    return np.clip(z, box.lower, box.upper)


@dataclass(frozen=True, eq=False)
class CondensedQp:
    """The condensed QP ``min_z z'Hz + 2z'Gx + x'Wx`` with cached spectra.

    ``scale`` maps solver coordinates back to physical inputs
    (``z_original = scale * z``); it is all-ones until a preconditioner
    is applied.
    """

    h: np.ndarray
    hbar: np.ndarray
    g: np.ndarray
    w: np.ndarray
    box: BoxSet
    plant: PlantModel
    spec: OcpSpec
    scale: np.ndarray
    lam_min: float
    lam_max: float
    h_factor: linalg.SpdFactor
    w_factor: linalg.SpdFactor
    p_factor: linalg.SpdFactor

    @property
    def n(self) -> int:
        return self.plant.n

    @property
    def m(self) -> int:
        return self.plant.m

    @property
    def horizon(self) -> int:
        return self.spec.horizon

    @property
    def kappa(self) -> float:
        """Condition number of H, the sole driver of solver rates."""
        return self.lam_max / self.lam_min

    @property
    def step_size(self) -> float:
        """Gradient step 1/(lam_min + lam_max) for the projected method."""
        return 1.0 / (self.lam_min + self.lam_max)

    @property
    def bbar(self) -> np.ndarray:
        """Map from solver iterate to state increment: x+ = Ax + bbar z."""
        out = np.zeros((self.n, len(self.box)))
        out[:, : self.m] = self.plant.b * self.scale[: self.m]
        return out

    def input_from_iterate(self, z) -> np.ndarray:
        """First-stage physical input applied by the receding-horizon law."""
        z = np.asarray(z, dtype=float).ravel()
        return self.scale[: self.m] * z[: self.m]

    def iterate_to_inputs(self, z) -> np.ndarray:
        """Full stacked physical input sequence for iterate ``z``."""
        return self.scale * np.asarray(z, dtype=float).ravel()


def _prediction_matrices(plant: PlantModel, horizon: int):
    n, m = plant.n, plant.m
    powers = [np.eye(n)]
    for _ in range(horizon):
        powers.append(plant.a @ powers[-1])
    ahat = np.vstack(powers)
    bhat = np.zeros(((horizon + 1) * n, horizon * m))
    for i in range(1, horizon + 1):
        for j in range(i):
            bhat[i * n:(i + 1) * n, j * m:(j + 1) * m] = (
                powers[i - 1 - j] @ plant.b)
    return powers, ahat, bhat


def _stage_cost_blocks(spec: OcpSpec, n: int) -> np.ndarray:
    hhat = np.kron(np.eye(spec.horizon + 1), spec.q)
    hhat[-n:, -n:] = spec.p
    return hhat


def resolve_terminal_weight(plant: PlantModel, spec: OcpSpec) -> OcpSpec:
    """Fill in (or validate) the Riccati terminal weight."""
    if spec.q.shape != (plant.n, plant.n):
        raise ValueError(f"Q is {spec.q.shape} but the plant has n={plant.n}")
    if spec.r.shape != (plant.m, plant.m):
        raise ValueError(f"R is {spec.r.shape} but the plant has m={plant.m}")
    if spec.p is None:
        p = linalg.solve_dare(plant.a, plant.b, spec.q, spec.r)
        return dataclasses.replace(spec, p=p)
    residual = linalg.riccati_residual(plant.a, plant.b, spec.q, spec.r, spec.p)
    limit = config.tolerances().riccati_residual * linalg.spectral_norm(spec.p)
    if residual > limit:
        raise ValueError(
            f"supplied terminal weight fails the Riccati equation: "
            f"residual {residual:.3e} > {limit:.3e}")
    return spec


def condensed_state_weight(plant: PlantModel, spec: OcpSpec,
                           method: str = "series") -> np.ndarray:
    """State-cost matrix W of the condensed QP, by one of three routes.

    ``series`` sums (A^k)'Q(A^k) over the horizon plus the terminal
    (A^N)'P(A^N) term; ``assembly`` contracts the stacked prediction
    matrices; ``riccati`` expands P through the Riccati recursion.  All
    three agree to rounding and are cross-checked in the test-suite.
    """
    if method not in _W_METHODS:
        raise ValueError(f"method must be one of {_W_METHODS}, got {method!r}")
    spec = resolve_terminal_weight(plant, spec)
    a, n = plant.a, plant.n
    if method == "series":
        w = np.zeros((n, n))
        power = np.eye(n)
        for _ in range(spec.horizon):
            w += power.T @ spec.q @ power
            power = a @ power
        w += power.T @ spec.p @ power
    elif method == "assembly":
        _, ahat, _ = _prediction_matrices(plant, spec.horizon)
        w = ahat.T @ _stage_cost_blocks(spec, n) @ ahat
    else:
        pb = spec.p @ plant.b
        pivot = pb @ np.linalg.solve(spec.r + plant.b.T @ pb, pb.T)
        w = spec.p.copy()
        power = np.eye(n)
        for _ in range(spec.horizon):
            power = a @ power
            w += power.T @ pivot @ power
    return 0.5 * (w + w.T)


def condense(plant: PlantModel, spec: OcpSpec) -> CondensedQp:
    """Assemble the condensed QP for ``(plant, spec)``.

    Raises
    ------
    StabilizabilityError
        If no terminal weight exists (Riccati iteration diverges).
    DefinitenessError
        If the assembled Hessian is not numerically positive definite.
    """
    spec = resolve_terminal_weight(plant, spec)
    n, horizon = plant.n, spec.horizon
    _, ahat, bhat = _prediction_matrices(plant, horizon)
    hhat = _stage_cost_blocks(spec, n)

    hbar = bhat.T @ hhat @ bhat
    hbar = 0.5 * (hbar + hbar.T)
    h = hbar + np.kron(np.eye(horizon), spec.r)
    h = 0.5 * (h + h.T)
    g = bhat.T @ hhat @ ahat
    w = condensed_state_weight(plant, spec, "series")

    recon = config.tolerances().reconstruction
    assembled = ahat.T @ hhat @ ahat
    gap = linalg.spectral_norm(assembled - w)
    if gap > recon * max(linalg.spectral_norm(w), 1.0):
        raise ArithmeticError(
            f"state-weight routes disagree by {gap:.3e}; condensation is "
            "numerically unreliable at this horizon")

    try:
        h_factor = linalg.spd_factor(h)
    except DefinitenessError as exc:
        raise DefinitenessError(
            f"condensed Hessian is not positive definite ({exc}); the "
            "problem is too ill-conditioned at this horizon") from exc
    w_factor = linalg.spd_factor(w)
    p_factor = linalg.spd_factor(spec.p)

    wp_floor = float(np.linalg.eigvalsh(w - spec.p)[0])
    if wp_floor < -1e3 * config.tolerances().base * linalg.spectral_norm(w):
        raise ArithmeticError(
            f"W - P has eigenvalue {wp_floor:.3e}; condensation violates "
            "the value-function sandwich")

    vals = np.linalg.eigvalsh(h)
    box = BoxSet.tile(spec.u_lower, spec.u_upper, horizon)
    return CondensedQp(
        h=_frozen(h), hbar=_frozen(hbar), g=_frozen(g), w=_frozen(w),
        box=box, plant=plant, spec=spec, scale=_frozen(np.ones(len(box))),
        lam_min=float(vals[0]), lam_max=float(vals[-1]),
        h_factor=h_factor, w_factor=w_factor, p_factor=p_factor)


def gradient(qp: CondensedQp, z, x) -> np.ndarray:
    """Gradient of the condensed cost in z: ``2(Hz + Gx)``."""
    z = np.asarray(z, dtype=float).ravel()
    x = np.asarray(x, dtype=float).ravel()
    if z.shape[0] != qp.h.shape[0] or x.shape[0] != qp.n:
        raise ValueError(
            f"expected iterate length {qp.h.shape[0]} and state length "
            f"{qp.n}, got {z.shape[0]} and {x.shape[0]}")
    return 2.0 * (qp.h @ z + qp.g @ x)


def _rescaled(qp: CondensedQp, d: np.ndarray) -> CondensedQp:
    h = qp.h * d[:, None] * d[None, :]
    h = 0.5 * (h + h.T)
    hbar = qp.hbar * d[:, None] * d[None, :]
    g = d[:, None] * qp.g
    box = BoxSet(qp.box.lower / d, qp.box.upper / d)
    vals = np.linalg.eigvalsh(h)
    return CondensedQp(
        h=_frozen(h), hbar=_frozen(0.5 * (hbar + hbar.T)), g=_frozen(g),
        w=qp.w, box=box, plant=qp.plant, spec=qp.spec,
        scale=_frozen(qp.scale * d),
        lam_min=float(vals[0]), lam_max=float(vals[-1]),
        h_factor=linalg.spd_factor(h), w_factor=qp.w_factor,
        p_factor=qp.p_factor)


def jacobi_precondition(qp: CondensedQp) -> tuple[CondensedQp, np.ndarray]:
    """Diagonal scaling ``H -> DHD`` with ``D_ii = H_ii^(-1/2)``.

    Falls back to the identity whenever the scaling would worsen the
    condition number, so the returned QP always satisfies
    ``kappa' <= kappa * (1 + condition_slack)``.
    """
    d = 1.0 / np.sqrt(np.diag(qp.h))
    scaled = _rescaled(qp, d)
    if scaled.kappa > qp.kappa * (1.0 + config.tolerances().condition_slack):
        return qp, np.ones(len(qp.box))
    return scaled, d


def apply_preconditioner(qp: CondensedQp, d) -> CondensedQp:
    """Rescale with a user-supplied positive diagonal (no guard)."""
    d = np.asarray(d, dtype=float).ravel()
    if d.shape[0] != len(qp.box):
        raise ValueError(f"diagonal has length {d.shape[0]}, expected {len(qp.box)}")
    if not np.all(np.isfinite(d)) or np.any(d <= 0.0):
        raise ValueError("preconditioner diagonal must be positive and finite")
    return _rescaled(qp, d)


def lqr_gain(plant: PlantModel, spec: OcpSpec) -> np.ndarray:
    """Infinite-horizon LQR feedback gain ``(R + B'PB)^-1 B'PA``."""
    spec = resolve_terminal_weight(plant, spec)
    pb = spec.p @ plant.b
    return np.linalg.solve(spec.r + plant.b.T @ pb, pb.T @ plant.a)


def terminal_predicted_state(qp: CondensedQp, x, z) -> np.ndarray:
    """Predicted state after applying iterate ``z``'s input sequence."""
    x = np.asarray(x, dtype=float).ravel()
    mu = qp.iterate_to_inputs(z)
    xi = x
    for stage in range(qp.horizon):
        xi = qp.plant.a @ xi + qp.plant.b @ mu[stage * qp.m:(stage + 1) * qp.m]
    return xi


def in_terminal_set(qp: CondensedQp, x, z) -> bool:
    """Whether the LQR input at the predicted terminal state is feasible.

    This is the region on which the value function is guaranteed to
    decrease along optimal trajectories.
    """
    xi = terminal_predicted_state(qp, x, z)
    u = -lqr_gain(qp.plant, qp.spec) @ xi
    return bool(np.all(u >= qp.spec.u_lower) and np.all(u <= qp.spec.u_upper))
