"""Closeness parameters, transfer bounds, and instance verification."""

import math

import numpy as np
import pytest

import anonpricing as ap
from anonpricing import Agent, Distribution, OracleConfig, RHO


def collapse_pair():
    """Posting curve that dies after its peak, with a flat ex-ante bound."""
    P = ap.synthetic_curve([(0, 0), (0.25, 0.5), (0.25 + 1e-9, 0.0), (1, 0)])
    R = ap.synthetic_curve([(0, 0), (0.25, 0.5), (1, 0.5)])
    return P, R


class TestAlpha:
    def test_regular_agent_alpha_one(self, uniform_posting_curve):
        hull = ap.concave_hull(uniform_posting_curve)
        for beta in (1.0, 2.0, 5.0):
            assert ap.alpha_for_beta(uniform_posting_curve, hull, beta) == pytest.approx(1.0, abs=1e-9)

    def test_constant_ratio(self):
        P = ap.synthetic_curve([(0, 0), (0.5, 0.5), (1, 0.6)])
        R = ap.synthetic_curve([(0, 0), (0.5, 1.0), (1, 1.2)])
        assert ap.alpha_for_beta(P, R, 1.0) == pytest.approx(2.0, abs=1e-9)

    def test_collapsed_posting_curve_infinite(self):
        P, R = collapse_pair()
        assert ap.alpha_for_beta(P, R, 1.0) == math.inf
        # restricting to the healthy stretch keeps it finite
        assert ap.alpha_for_beta(P, R, 4.0) == pytest.approx(1.0, abs=1e-6)

    def test_restriction_monotone(self):
        P, R = collapse_pair()
        alphas = [ap.alpha_for_beta(P, R, b) for b in (1.0, 2.0, 3.0, 4.0, 8.0)]
        for a, b in zip(alphas, alphas[1:]):
            assert b <= a + 1e-12

    def test_beta_validated(self):
        P, R = collapse_pair()
        with pytest.raises(ValueError):
            ap.alpha_for_beta(P, R, 0.5)


class TestZetaEta:
    def test_regular_agent_one(self, uniform_posting_curve):
        hull = ap.concave_hull(uniform_posting_curve)
        assert ap.zeta(uniform_posting_curve, hull) == pytest.approx(1.0, abs=1e-9)
        assert ap.eta(uniform_posting_curve, hull) == pytest.approx(1.0, abs=1e-9)

    def test_running_max_rescues_collapse(self):
        P, R = collapse_pair()
        assert ap.zeta(P, R) == pytest.approx(1.0, abs=1e-6)

    def test_private_uniform_within_three(self, private_uu_posting_curve, private_uu_rbar):
        z = ap.zeta(private_uu_posting_curve, private_uu_rbar)
        assert z <= 3.05
        e = ap.eta(private_uu_posting_curve, private_uu_rbar)
        assert e <= 2.05

    def test_capacitated_bound_curve_zeta(self):
        P = ap.concave_hull(Agent(model="linear", values=Distribution.equal_revenue(100), id="er").price_curve())
        qs = np.unique(np.concatenate([P.qs, np.linspace(0, 1, 257)]))
        vals = [ap.risk_two_priced_bound(P, 5.0, 100.0, float(q)).bound for q in qs]
        rbar = ap.RevenueCurve(qs, vals, name="Rbar")
        assert ap.zeta(P, rbar) <= 2 + math.log(20) + 1e-6

    def test_ordering_eta_zeta_alpha(self, private_uu_posting_curve, private_uu_rbar):
        P, R = private_uu_posting_curve, private_uu_rbar
        assert ap.eta(P, R) <= ap.zeta(P, R) + 1e-9
        assert ap.zeta(P, R) <= ap.alpha_for_beta(P, R, 1.0) + 1e-9

    def test_zeta_below_alpha_beta_product(self, private_uu_posting_curve, private_uu_rbar):
        P, R = private_uu_posting_curve, private_uu_rbar
        z = ap.zeta(P, R)
        for beta in (1.0, 1.5, 2.0, 3.0, 5.0):
            a = ap.alpha_for_beta(P, R, beta)
            assert z <= a * beta + 1e-9


class TestTransferBounds:
    def test_basic_product(self):
        tb = ap.transfer_bounds(2.0, 3.0, 6.0)
        assert tb.basic == pytest.approx(6.0)

    def test_improved_sqrt(self):
        tb = ap.transfer_bounds(2.0, 4.0, 2.0)
        assert tb.improved == pytest.approx(4.0)

    def test_improved_alpha_branch(self):
        tb = ap.transfer_bounds(10.0, 2.0, 1.0)
        assert tb.improved == pytest.approx(10.0)

    def test_validated(self):
        with pytest.raises(ValueError):
            ap.transfer_bounds(0.5, 1.0, 1.0)


class TestTable1:
    def test_public(self):
        assert ap.table1_bound("public") == pytest.approx(math.e, abs=1e-12)

    def test_private_mhr(self):
        assert ap.table1_bound("private-mhr") == pytest.approx(3 * math.e, abs=1e-12)

    def test_private_kappa_at_e(self):
        k = math.e
        ref = math.sqrt(2 * (2 + k) * (1 + k)) * math.e
        got = ap.table1_bound("private-kappa", kappa=k)
        assert got == pytest.approx(ref, abs=1e-12)
        assert got == pytest.approx(16.1017, abs=1e-3)

    def test_risk_averse(self):
        assert ap.table1_bound("risk-averse", eta_cap=20.0) == pytest.approx((2 + math.log(20)) * math.e, abs=1e-12)

    def test_unknown(self):
        with pytest.raises(ValueError):
            ap.table1_bound("mystery")


class TestVerifyInstance:
    def test_two_uniform(self):
        agents = [Agent(model="linear", values=Distribution.uniform(0, 1), id=f"u{i}") for i in (1, 2)]
        rep = ap.verify_instance(agents)
        assert rep.ratio == pytest.approx(0.5 / 0.38490017945975047, abs=1e-3)
        assert rep.bound == pytest.approx(math.e, abs=1e-9)
        assert rep.passed
        assert all(a.alphas[1.0] == pytest.approx(1.0, abs=1e-6) for a in rep.agents)

    def test_public_budget_alpha_one(self):
        agents = [Agent(model="public-budget", values=Distribution.uniform(0, 1), budget=0.3, id="pb")]
        rep = ap.verify_instance(agents, OracleConfig(values=50))
        assert rep.alpha[1.0] <= 1.05
        assert rep.passed
        assert rep.table1_model == "public"

    def test_budget_gap_instance_flagged(self):
        fix = ap.get_fixture("mhr-fail", n=30)
        rep = ap.verify_instance(list(fix.agents), OracleConfig(values=4, budgets=4))
        assert rep.ratio >= 1.9
        assert any("assumption violated" in f for f in rep.flags)
        assert rep.kappa == pytest.approx(900.0, abs=1e-6)

    def test_pass_flag_monotone_in_parameters(self):
        # passing at the measured (alpha, beta) implies passing at any
        # looser pair: the bound only grows
        agents = [Agent(model="linear", values=Distribution.uniform(0, 1), id="u")]
        rep = ap.verify_instance(agents)
        assert rep.passed
        for scale in (1.0, 1.5, 4.0):
            for b in rep.betas:
                loose = ap.transfer_bounds(max(rep.alpha[b] * scale, 1.0), b * scale, rep.eta * scale)
                assert rep.ratio <= loose.basic * RHO + rep.slack

    def test_mixed_models_allowed(self):
        agents = [
            Agent(model="linear", values=Distribution.uniform(0, 1), id="u"),
            Agent(model="capacitated", values=Distribution.equal_revenue(10), capacity=2.0, id="c"),
        ]
        rep = ap.verify_instance(agents)
        assert rep.table1 is None
        assert math.isfinite(rep.ratio)

    def test_csv(self, tmp_path):
        agents = [Agent(model="linear", values=Distribution.uniform(0, 1), id="u")]
        rep = ap.verify_instance(agents)
        out = tmp_path / "c.csv"
        rep.to_csv(out)
        text = out.read_text()
        assert text.startswith("agent,model,alpha@1")
        assert "summary" in text


class TestTransferInequalities:
    def test_ap_transfer_inequality(self, private_uu_posting_curve, private_uu_rbar):
        # alpha*beta * AP(P) >= AP(R) for every measured (alpha_at_beta, beta)
        P, R = private_uu_posting_curve, private_uu_rbar
        ap_p = ap.ap_optimize([P]).revenue
        ap_r = ap.ap_optimize([R]).revenue
        scale = max(ap_r, 1.0)
        for beta in (1.0, 2.0, 3.0):
            a = ap.alpha_for_beta(P, R, beta)
            assert ap_p >= ap_r / (a * beta) - 1e-6 * scale

    def test_ear_transfer_inequality(self, private_uu_posting_curve, private_uu_rbar):
        P, R = private_uu_posting_curve, private_uu_rbar
        z = ap.zeta(P, R)
        ear_p = ap.ear_optimize([ap.concave_hull(P)]).revenue
        ear_r = ap.ear_optimize([R]).revenue
        assert ear_p >= ear_r / z - 1e-6 * max(ear_r, 1.0)
