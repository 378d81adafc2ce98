import json
import math

import numpy as np
import pytest

from tdompc.bench import jones_system, pendulum_case
from tdompc.certify import (
    CSV_FIELDS,
    SolverKind,
    apgm_min_iters,
    apgm_rate,
    certify,
    format_sig12,
    gain_report,
    interconnection_gain,
    iteration_bound,
    mpc_gain,
    optimizer_gain,
    pgm_rate,
)
from tdompc.errors import NotContractiveError
from tdompc.ocp import OcpSpec, PlantModel, condense

# Scalar chain constants shared with test_ocp.
P_SCALAR = (0.25 + math.sqrt(4.0625)) / 2.0


def decoupled_qp(h_top, h_bottom):
    """Horizon-1 problem with A=0 whose Hessian is diag(h_top, h_bottom).

    With A=0 the terminal weight equals Q, so H = Q + R exactly and the
    spectrum is pinned by construction.
    """
    r = 0.5
    plant = PlantModel(a=np.zeros((2, 2)), b=np.eye(2))
    spec = OcpSpec(q=np.diag([h_top - r, h_bottom - r]), r=r * np.eye(2),
                   horizon=1, u_lower=[-1.0, -1.0], u_upper=[1.0, 1.0])
    qp = condense(plant, spec)
    assert qp.kappa == pytest.approx(h_top / h_bottom, rel=1e-12)
    return qp


class TestRates:
    def test_pgm_rate_from_condition_number(self):
        # kappa = 3 gives eta = (3-1)/(3+1) = 0.5.
        assert pgm_rate(decoupled_qp(3.0, 1.0)) == pytest.approx(0.5, abs=1e-12)

    def test_pgm_rate_is_zero_at_kappa_one(self):
        assert pgm_rate(decoupled_qp(2.0, 2.0)) == pytest.approx(0.0, abs=1e-12)

    def test_accelerated_rate_hand_value(self):
        # kappa = 4: sqrt(kappa)*(1 - 1/2)^((ell-1)/2) = 2*0.5^2 = 0.5 at ell=5.
        qp = decoupled_qp(8.0, 2.0)
        assert apgm_rate(qp, 5) == pytest.approx(0.5, abs=1e-12)

    def test_accelerated_onset_hand_value(self):
        # Smallest ell with 2*0.5^((ell-1)/2) < 1 is 1 - log4/log(1/2) = 3.
        qp = decoupled_qp(8.0, 2.0)
        assert apgm_min_iters(qp) == pytest.approx(3.0, abs=1e-12)

    def test_onset_degenerates_to_one_at_kappa_one(self):
        assert apgm_min_iters(decoupled_qp(2.0, 2.0)) == pytest.approx(1.0)

    def test_rate_decreases_with_budget(self):
        qp = decoupled_qp(8.0, 2.0)
        rates = [apgm_rate(qp, ell) for ell in range(4, 30)]
        assert all(b < a for a, b in zip(rates, rates[1:]))


class TestGains:
    def test_plant_gain_is_zero_for_deadbeat(self):
        # A=0 drives the state to the origin in one step: W = Q, beta = 0.
        # beta = sqrt(1 - lam) turns eigenvalue noise of eps into
        # sqrt(eps), so "zero" here means below ~1e-7.
        qp = decoupled_qp(3.0, 1.0)
        beta, gamma1 = mpc_gain(qp)
        assert beta == pytest.approx(0.0, abs=1e-7)
        assert gamma1 == pytest.approx(0.0, abs=1e-7)

    def test_plant_gain_scalar_chain(self):
        """beta = sqrt(1 - 1/W) for the scalar chain, by direct arithmetic."""
        plant = PlantModel(a=[[0.5]], b=[[1.0]])
        spec = OcpSpec(q=[[1.0]], r=[[1.0]], horizon=2,
                       u_lower=[-1.0], u_upper=[1.0])
        qp = condense(plant, spec)
        w = 1.25 + 0.0625 * P_SCALAR
        beta_expected = math.sqrt(1.0 - 1.0 / w)
        beta, gamma1 = mpc_gain(qp)
        assert beta == pytest.approx(beta_expected, abs=1e-10)
        assert gamma1 == pytest.approx(beta_expected / (1.0 - beta_expected), abs=1e-9)

    def test_optimizer_gain_hand_value(self):
        # b = 1/sqrt(lam_min) = 1, eta = 0.5, ell = 1: gamma2 = 0.5/0.5 = 1.
        qp = decoupled_qp(3.0, 1.0)
        assert optimizer_gain(qp, 1, SolverKind.PGM) == pytest.approx(1.0, abs=1e-12)

    def test_optimizer_gain_vanishes_at_kappa_one(self):
        qp = decoupled_qp(2.0, 2.0)
        assert optimizer_gain(qp, 1, SolverKind.PGM) == 0.0

    def test_accelerated_gain_hand_value(self):
        # eta_a(5) = 0.5 at kappa 4, so the gain is 0.5/(1-0.5) = 1.
        qp = decoupled_qp(8.0, 2.0)
        assert optimizer_gain(qp, 5, SolverKind.APGM) == pytest.approx(1.0, abs=1e-12)

    def test_accelerated_gain_needs_contraction(self):
        qp = decoupled_qp(8.0, 2.0)
        with pytest.raises(NotContractiveError):
            optimizer_gain(qp, 2, SolverKind.APGM)  # at/below the onset

    def test_interconnection_gain_scalar_chain(self):
        """ζ for the N=1 scalar chain from explicit 1x1 norms."""
        plant = PlantModel(a=[[0.5]], b=[[1.0]])
        spec = OcpSpec(q=[[1.0]], r=[[1.0]], horizon=1,
                       u_lower=[-1.0], u_upper=[1.0])
        qp = condense(plant, spec)
        p = P_SCALAR
        h = 1.0 + p
        g = 0.5 * p
        w = 1.0 + 0.25 * p
        expected = 2.0 * (g / math.sqrt(h * p)) * math.sqrt(w)
        got = interconnection_gain(plant, qp, SolverKind.PGM)
        assert got == pytest.approx(expected, abs=1e-10)

    def test_interconnection_gain_zero_for_deadbeat(self):
        qp = decoupled_qp(3.0, 1.0)
        plant = PlantModel(a=np.zeros((2, 2)), b=np.eye(2))
        assert interconnection_gain(plant, qp, SolverKind.PGM) == pytest.approx(0.0, abs=1e-12)


class TestReports:
    def test_jones_report_frozen_values(self):
        """Preconditioned 4-state benchmark, horizon 5: pinned certificate."""
        case = jones_system()
        report = certify(case.plant, case.spec, 10, SolverKind.PGM, precondition=True)
        assert report.kappa == pytest.approx(5.872053122130, rel=1e-9)
        assert report.eta == pytest.approx(0.708966161283, rel=1e-9)
        assert report.ell_bar == pytest.approx(4.326377212867, rel=1e-9)
        assert report.b == pytest.approx(1.578951674332, rel=1e-9)
        assert report.beta == pytest.approx(0.850915298983, rel=1e-9)
        assert report.gamma1 == pytest.approx(5.707596374253, rel=1e-9)
        assert report.zeta == pytest.approx(1.184616405926, rel=1e-9)
        assert report.zeta_a == pytest.approx(1.248326732923, rel=1e-9)
        assert report.ell_star == pytest.approx(7.145035819815, rel=1e-9)
        assert report.ell_star_a == pytest.approx(12.199544305700, rel=1e-9)
        assert report.verdict == "stable"

    def test_certified_at_own_bound(self):
        case = jones_system()
        for kind in (SolverKind.PGM, SolverKind.APGM):
            for precondition in (False, True):
                bound = iteration_bound(case.plant, case.spec, kind,
                                        precondition=precondition)
                ell = int(math.ceil(bound)) + 1
                report = certify(case.plant, case.spec, ell, kind,
                                 precondition=precondition)
                assert report.certified, (kind, precondition)
                assert report.smallgain_at_ell < 1.0

    def test_bound_is_sharp_to_one_iteration(self):
        """The product crosses 1 exactly where the bound says it does."""
        case = jones_system()
        report = certify(case.plant, case.spec, 10, SolverKind.PGM, precondition=True)
        below = max(1, int(math.floor(report.ell_star)))
        above = int(math.ceil(report.ell_star)) + 1
        assert report.smallgain(below) >= 1.0
        assert report.smallgain(above) < 1.0

    def test_uncertified_with_tiny_budget(self):
        case = pendulum_case()
        report = certify(case.plant, case.spec, 1, SolverKind.PGM, precondition=True)
        assert not report.certified
        assert report.verdict == "not-certified"
        assert report.smallgain_at_ell >= 1.0

    def test_accelerated_needs_onset(self):
        # Below the onset budget the certificate must refuse even if the
        # formal product would be small.
        case = jones_system()
        report = gain_report(condense(case.plant, case.spec), 2, SolverKind.APGM)
        assert report.ell_bar > 2
        assert not report.certified
        assert math.isinf(report.smallgain(2))

    def test_trivial_problem_certifies_minimal_budgets(self):
        plant = PlantModel(a=[[0.0]], b=[[1.0]])
        spec = OcpSpec(q=[[1.0]], r=[[1.0]], horizon=3,
                       u_lower=[-1.0], u_upper=[1.0])
        # kappa = 1: one PGM step suffices (eta = 0, bound 0).
        report = certify(plant, spec, 1, SolverKind.PGM)
        assert report.certified
        assert report.iteration_bound() == pytest.approx(0.0)
        # The accelerated rate formula only contracts strictly past the
        # onset ell_bar = 1, so the accelerated certificate starts at 2.
        assert not certify(plant, spec, 1, SolverKind.APGM).certified
        report_a = certify(plant, spec, 2, SolverKind.APGM)
        assert report_a.certified
        assert report_a.iteration_bound() == pytest.approx(1.0)

    def test_gamma2_monotone_in_budget(self):
        case = jones_system()
        report = gain_report(condense(case.plant, case.spec), 10, SolverKind.PGM)
        vals = [report.gamma2(ell) for ell in range(1, 120)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        start = int(math.ceil(report.ell_bar))
        avals = [report.gamma2a(ell) for ell in range(start + 1, start + 120)]
        assert all(b < a for a, b in zip(avals, avals[1:]))


class TestSerialization:
    def test_csv_field_order(self):
        assert CSV_FIELDS == (
            "kappa", "eta", "ell_bar", "b", "beta", "gamma1", "zeta",
            "zeta_a", "ell_star", "ell_star_a", "smallgain_at_ell", "verdict",
        )

    def test_csv_row_matches_header(self):
        case = jones_system()
        report = certify(case.plant, case.spec, 10, SolverKind.PGM)
        header = report.csv_header().split(",")
        row = report.csv_row().split(",")
        assert header == list(CSV_FIELDS)
        assert len(row) == len(header)
        assert row[-1] == report.verdict
        # Numeric cells parse back and match to 12 significant digits.
        assert float(row[0]) == pytest.approx(report.kappa, rel=1e-11)

    def test_significant_digit_formatting(self):
        assert format_sig12(1.0) == "1"
        assert format_sig12(0.5) == "0.5"
        assert format_sig12(math.pi) == "3.14159265359"
        assert format_sig12(1e-30) == "1e-30"

    def test_json_round_trip(self):
        case = jones_system()
        report = certify(case.plant, case.spec, 10, SolverKind.APGM)
        blob = json.loads(report.to_json())
        assert blob["kind"] == "apgm"
        assert blob["ell"] == 10
        for field in CSV_FIELDS[:-1]:
            assert field in blob
        assert blob["verdict"] == report.verdict

    def test_json_handles_non_finite(self):
        # Below the accelerated onset the product is infinite; JSON must
        # still be parseable.
        case = jones_system()
        report = certify(case.plant, case.spec, 2, SolverKind.APGM)
        blob = json.loads(report.to_json())
        assert blob["verdict"] == "not-certified"


def test_budget_validation():
    case = jones_system()
    with pytest.raises(ValueError):
        certify(case.plant, case.spec, 0, SolverKind.PGM)
