"""Numeric tolerance bundle.

All tolerances used across the package derive from a single base value
(default 1e-12) through fixed multipliers, so one knob — the
``TDO_MPC_TOL`` environment variable or :func:`configure` — rescales the
whole bundle coherently.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

_ENV_VAR = "TDO_MPC_TOL"
DEFAULT_BASE = 1e-12


@dataclass(frozen=True)
class Tolerances:
    """Named tolerances, each a fixed multiple of ``base``."""

    base: float = DEFAULT_BASE

    def __post_init__(self) -> None:
        if not 0.0 < self.base < 1.0:
            raise ValueError(f"tolerance base must be in (0, 1), got {self.base}")

    @property
    def symmetry(self) -> float:
        """Relative asymmetry allowed before a matrix is rejected."""
        return self.base

    @property
    def spd_floor(self) -> float:
        """λ⁻/λ⁺ ratio below which a matrix counts as numerically singular."""
        return self.base

    @property
    def reconstruction(self) -> float:
        """Relative residual allowed for eigen/square-root reconstructions."""
        return 100.0 * self.base

    @property
    def fixed_point_change(self) -> float:
        """Relative per-sweep change at which matrix iterations stop."""
        return self.base

    @property
    def riccati_residual(self) -> float:
        """Relative Riccati residual accepted for a terminal weight."""
        return 1000.0 * self.base

    @property
    def lyapunov_residual(self) -> float:
        return 100.0 * self.base

    @property
    def expm_relative(self) -> float:
        return 100.0 * self.base

    @property
    def oracle_residual(self) -> float:
        """Default fixed-point residual demanded of the QP oracle."""
        return self.base

    @property
    def condition_slack(self) -> float:
        """Relative slack in condition-number comparisons."""
        return self.base


def _from_env() -> Tolerances:
    raw = os.environ.get(_ENV_VAR)
    if raw is None:
        return Tolerances()
    try:
        return Tolerances(float(raw))
    except ValueError as exc:
        raise ValueError(f"invalid {_ENV_VAR} value {raw!r}") from exc


_current = _from_env()


def tolerances() -> Tolerances:
    """Return the active tolerance bundle."""
    return _current


def configure(base: float | None = None) -> Tolerances:
    """Replace the active bundle (``base=None`` restores the env default)."""
    global _current
    _current = _from_env() if base is None else Tolerances(base)
    return _current
