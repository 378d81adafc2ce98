"""Closed-form certification quantities for the coupled plant-optimizer loop.

The loop is treated as an interconnection of two ISS systems: the
optimally-controlled plant (gain ``gamma1`` with respect to
suboptimality error) and the budgeted optimizer (gain ``gamma2(ell)``
with respect to state motion).  When the product of the gains — scaled
by the interconnection constant ``zeta`` — drops below one, the loop is
certified asymptotically stable; solving the small-gain condition for
``ell`` gives the iteration thresholds ``ell_star`` (projected
gradient) and ``ell_star_a`` (accelerated).
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import CertificationError, NotContractiveError
from .ocp import CondensedQp, OcpSpec, PlantModel, condense, jacobi_precondition


class SolverKind(enum.Enum):
    """The two budgeted solvers the certificates cover."""

    PGM = "pgm"
    APGM = "apgm"


CSV_FIELDS = (
    "kappa", "eta", "ell_bar", "b", "beta", "gamma1", "zeta", "zeta_a",
    "ell_star", "ell_star_a", "smallgain_at_ell", "verdict",
)


def format_sig12(value) -> str:
    """Deterministic 12-significant-digit rendering used in all CSVs."""
    if isinstance(value, str):
        return value
    return f"{float(value):.12g}"


def pgm_rate(qp: CondensedQp) -> float:
    """Per-iteration contraction factor ``(kappa - 1)/(kappa + 1)``."""
    return (qp.kappa - 1.0) / (qp.kappa + 1.0)


def _eta_a(kappa: float, ell: float) -> float:
    if ell < 1:
        raise ValueError(f"iteration count must be >= 1, got {ell}")
    return math.sqrt(kappa) * (1.0 - kappa ** -0.5) ** ((ell - 1.0) / 2.0)


def apgm_rate(qp: CondensedQp, ell) -> float:
    """ell-step H-norm error factor of the accelerated method.

    Exceeds one for small ``ell`` (momentum overshoot); drops below one
    strictly after ``apgm_min_iters`` iterations.
    """
    return _eta_a(qp.kappa, float(ell))


def _ell_bar(kappa: float) -> float:
    if kappa <= 1.0:
        return 1.0
    return 1.0 - math.log(kappa) / math.log(1.0 - kappa ** -0.5)


def apgm_min_iters(qp: CondensedQp) -> float:
    """Smallest real ``ell`` with accelerated factor one; 1 when kappa=1."""
    return _ell_bar(qp.kappa)


def mpc_gain(qp: CondensedQp) -> tuple[float, float]:
    """Decrease rate ``beta`` and ISS gain ``gamma1`` of the optimal loop.

    ``beta^2 = 1 - lambda_min(W^-1/2 Q W^-1/2)`` bounds the
    value-function contraction of exact MPC; ``gamma1 = beta/(1-beta)``
    is the resulting asymptotic gain with respect to injected
    suboptimality.
    """
    lo, _ = linalg.weighted_eig_bounds(qp.spec.q, qp.w)
    if lo <= 0.0:
        raise CertificationError(
            f"Q is not positive relative to W (ratio {lo:.3e}); the "
            "value-function decrease argument does not apply")
    if lo > 1.0 + 1e-9:
        raise CertificationError(
            f"Q/W eigenvalue ratio {lo:.6f} exceeds 1; W is inconsistent "
            "with its construction")
    beta = math.sqrt(max(1.0 - min(lo, 1.0), 0.0))
    return beta, beta / (1.0 - beta)


def _gamma2_pgm(b: float, eta: float, ell: float) -> float:
    if ell < 1:
        raise ValueError(f"iteration count must be >= 1, got {ell}")
    if eta == 0.0:
        return 0.0
    decay = eta ** ell
    return b * decay / (1.0 - decay)


def _gamma2_apgm(kappa: float, ell: float) -> float:
    rate = _eta_a(kappa, ell)
    if rate >= 1.0:
        raise NotContractiveError(
            f"accelerated gain undefined at ell={ell}: the ell-step factor "
            f"is {rate:.4f} >= 1 (need ell > {_ell_bar(kappa):.2f})")
    return rate / (1.0 - rate)


def optimizer_gain(qp: CondensedQp, ell, kind: SolverKind) -> float:
    """ISS gain of the budgeted optimizer with respect to state motion."""
    if kind is SolverKind.PGM:
        b = linalg.spectral_norm(qp.h_factor.inv_sqrt)
        return _gamma2_pgm(b, pgm_rate(qp), float(ell))
    return _gamma2_apgm(qp.kappa, float(ell))


def interconnection_gain(plant: PlantModel, qp: CondensedQp,
                         kind: SolverKind) -> float:
    """Norm constant coupling the plant-side and optimizer-side gains."""
    cross = linalg.spectral_norm(
        qp.h_factor.inv_sqrt @ qp.g @ qp.p_factor.inv_sqrt)
    bbar = np.zeros((plant.n, len(qp.box)))
    bbar[:, : plant.m] = plant.b * qp.scale[: plant.m]
    if kind is SolverKind.PGM:
        return 2.0 * cross * linalg.spectral_norm(qp.w_factor.sqrt @ bbar)
    return 2.0 * cross * linalg.spectral_norm(
        qp.w_factor.sqrt @ bbar @ qp.h_factor.inv_sqrt)


def _ell_star(zeta: float, gamma1: float, b: float, eta: float) -> float:
    if eta == 0.0:
        return 0.0
    return max(0.0, -math.log(zeta * gamma1 * b + 1.0) / math.log(eta))


def _ell_star_a(zeta_a: float, gamma1: float, kappa: float) -> float:
    if kappa <= 1.0:
        return 1.0
    return 1.0 - 2.0 * math.log(math.sqrt(kappa) * (1.0 + zeta_a * gamma1)) \
        / math.log(1.0 - kappa ** -0.5)


@dataclass(frozen=True)
class GainReport:
    """Every certification scalar for one (problem, solver, ell) triple.

    The ell-dependent gains are exposed as evaluator methods so sweeps
    over ell reuse one report.
    """

    kind: SolverKind
    ell: int
    kappa: float
    eta: float
    ell_bar: float
    b: float
    beta: float
    gamma1: float
    zeta: float
    zeta_a: float
    ell_star: float
    ell_star_a: float
    smallgain_at_ell: float
    verdict: str

    def eta_a(self, ell) -> float:
        """ell-step accelerated error factor at this problem's kappa."""
        return _eta_a(self.kappa, float(ell))

    def gamma2(self, ell) -> float:
        """Projected-gradient optimizer gain at budget ``ell``."""
        return _gamma2_pgm(self.b, self.eta, float(ell))

    def gamma2a(self, ell) -> float:
        """Accelerated optimizer gain; requires ``ell > ell_bar``."""
        return _gamma2_apgm(self.kappa, float(ell))

    def smallgain(self, ell=None, kind: SolverKind | None = None) -> float:
        """Loop-gain product; certified stable when < 1.

        Returns ``inf`` for the accelerated method below its contraction
        onset (the certificate simply does not apply there).
        """
        ell = float(self.ell if ell is None else ell)
        kind = kind or self.kind
        if kind is SolverKind.PGM:
            return self.zeta * self.gamma1 * self.gamma2(ell)
        if _eta_a(self.kappa, ell) >= 1.0:
            return math.inf
        return self.zeta_a * self.gamma1 * self.gamma2a(ell)

    @property
    def certified(self) -> bool:
        return self.verdict == "stable"

    def iteration_bound(self) -> float:
        """The closed-form threshold for this report's solver kind."""
        if self.kind is SolverKind.PGM:
            return self.ell_star
        return max(self.ell_star_a, self.ell_bar)

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind.value, "ell": self.ell}
        for name in CSV_FIELDS:
            value = getattr(self, name)
            if isinstance(value, float) and not math.isfinite(value):
                value = str(value)
            out[name] = value
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=False)

    def csv_row(self) -> str:
        return ",".join(format_sig12(getattr(self, name))
                        for name in CSV_FIELDS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_FIELDS)


def gain_report(qp: CondensedQp, ell, kind: SolverKind) -> GainReport:
    """Assemble the full report for an already-condensed QP."""
    ell_int = int(ell)
    if ell_int != ell or ell_int < 1:
        raise ValueError(f"ell must be an integer >= 1, got {ell}")
    kappa = qp.kappa
    eta = pgm_rate(qp)
    b = linalg.spectral_norm(qp.h_factor.inv_sqrt)
    beta, gamma1 = mpc_gain(qp)
    zeta = interconnection_gain(qp.plant, qp, SolverKind.PGM)
    zeta_a = interconnection_gain(qp.plant, qp, SolverKind.APGM)
    report = GainReport(
        kind=kind, ell=ell_int, kappa=kappa, eta=eta,
        ell_bar=_ell_bar(kappa), b=b, beta=beta, gamma1=gamma1,
        zeta=zeta, zeta_a=zeta_a,
        ell_star=_ell_star(zeta, gamma1, b, eta),
        ell_star_a=_ell_star_a(zeta_a, gamma1, kappa),
        smallgain_at_ell=math.nan, verdict="")
    product = report.smallgain(ell_int, kind)
    stable = product < 1.0
    if kind is SolverKind.APGM:
        stable = stable and ell_int > report.ell_bar
    return dataclasses.replace(
        report, smallgain_at_ell=product,
        verdict="stable" if stable else "not-certified")


def iteration_bound(plant: PlantModel, spec: OcpSpec, kind: SolverKind,
                    precondition: bool = False) -> float:
    """Real-valued iteration threshold; run with ``ceil(bound) + 1``.

    Zero for the projected-gradient method when ``kappa = 1`` (any
    budget certifies).
    """
    qp = condense(plant, spec)
    if precondition:
        qp, _ = jacobi_precondition(qp)
    eta = pgm_rate(qp)
    beta, gamma1 = mpc_gain(qp)
    if kind is SolverKind.PGM:
        b = linalg.spectral_norm(qp.h_factor.inv_sqrt)
        zeta = interconnection_gain(plant, qp, SolverKind.PGM)
        return _ell_star(zeta, gamma1, b, eta)
    zeta_a = interconnection_gain(plant, qp, SolverKind.APGM)
    return max(_ell_star_a(zeta_a, gamma1, qp.kappa), _ell_bar(qp.kappa))


def certify(plant: PlantModel, spec: OcpSpec, ell, kind: SolverKind,
            precondition: bool = False) -> GainReport:
    """Condense, optionally precondition, and evaluate the certificate."""
    qp = condense(plant, spec)
    if precondition:
        qp, _ = jacobi_precondition(qp)
    return gain_report(qp, ell, kind)
