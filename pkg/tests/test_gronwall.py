"""Discrete Gronwall verifier: hypotheses, recursions, constants, soundness."""

import math

import numpy as np
import pytest

from pfluidlab.gronwall import (
    GronwallData,
    check_hypotheses,
    check_recursions,
    classical_gronwall_bound,
    classical_gronwall_check,
    derive_constants,
    inject_violation,
    make_valid_instance,
    verify_conclusion,
)


def zero_data(M=5, gamma0=1.0, h=0.5, **kw):
    args = dict(
        k=0.1,
        M=M,
        a=np.zeros(M + 1),
        b=np.zeros(M + 1),
        r=np.zeros(M + 1),
        s=np.zeros(M + 1),
        gamma0=gamma0,
        gamma1=1.0,
        gamma2=1.0,
        gamma3=1.0,
        lam=0.5,
        Lam=1.0,
        theta=0.5,
        p=1.8,
        h=h,
    )
    args.update(kw)
    return GronwallData(**args)


class TestHypotheses:
    def test_all_zero_passes(self):
        flags = check_hypotheses(zero_data())
        assert all(flags.values())

    def test_initial_violation_detected(self):
        d = zero_data()
        d.a[0] = math.sqrt(2.0 * d.gamma0) * d.h
        flags = check_hypotheses(d)
        assert not flags["a0"]
        assert flags["b0"] and flags["r_sum"] and flags["s_sum"]

    def test_side_condition_strict(self):
        d = zero_data(gamma0=4.0, h=0.5)  # h == 1/sqrt(gamma0)
        assert not check_hypotheses(d)["h_side"]
        d2 = zero_data(gamma0=4.0, h=0.49)
        assert check_hypotheses(d2)["h_side"]


class TestRecursions:
    def test_zero_sequences_hold_with_equality(self):
        first, second = check_recursions(zero_data())
        assert all(first) and all(second)

    def test_jump_violates_first(self):
        d = zero_data()
        d.a[3] = 1.0
        first, second = check_recursions(d)
        assert not first[2]  # recursion index m=3 maps to list index 2
        assert all(first[:2]) and all(first[3:])

    def test_data_validation(self):
        with pytest.raises(ValueError):
            zero_data(k=1.5)
        with pytest.raises(ValueError):
            zero_data(p=2.5)
        with pytest.raises(ValueError):
            zero_data(theta=0.0)
        d = zero_data()
        with pytest.raises(ValueError):
            GronwallData(**{**d.to_dict(), "a": [-1.0] * (d.M + 1)})


class TestDeriveConstants:
    def test_p2_removes_powers(self):
        d = zero_data(p=2.0, lam=1.0, Lam=1.0)
        c = derive_constants(d)
        # with p = 2 every (.)^{p-2} factor is 1
        assert c["G_min"] == pytest.approx(d.gamma1)
        assert c["G_max"] == pytest.approx(d.gamma1)

    def test_self_consistency_defining_display(self):
        # gamma0 <= min{1, (2 Lam)^{2-p}/g1} gamma4 exp(2 gamma5 k M)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            d = make_valid_instance(rng)
            c = derive_constants(d)
            lhs = d.gamma0
            rhs = (
                min(1.0, (2.0 * d.Lam) ** (2.0 - d.p) / d.gamma1)
                * c["gamma4"]
                * c["growth_factor"]
            )
            assert lhs <= rhs * (1.0 + 1e-12)

    def test_gamma0bar_decreases_in_gamma2(self):
        lo = derive_constants(zero_data(gamma2=1.0))["gamma0bar"]
        hi = derive_constants(zero_data(gamma2=2.0))["gamma0bar"]
        assert hi < lo

    def test_kbar_at_most_one(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            c = derive_constants(make_valid_instance(rng))
            assert 0.0 < c["kbar"] <= 1.0


class TestConclusion:
    def test_zero_sequences_pass(self):
        v = verify_conclusion(zero_data(h=1e-3))
        assert v.applicable
        assert v.conclusion_ok is True

    def test_constructive_instances_pass(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            v = verify_conclusion(make_valid_instance(rng))
            assert v.applicable, (v.hypotheses, v.coupling)
            assert v.conclusion_ok is True

    def test_coupling_violation_not_applicable(self):
        d = zero_data()
        c = derive_constants(d)
        d.h = math.sqrt(2.0 * c["gamma0bar"] * d.k)
        v = verify_conclusion(d)
        assert not v.applicable
        assert v.conclusion_ok is None
        assert v.to_dict()["status"] == "not applicable"

    def test_injected_violations_flagged(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            data = make_valid_instance(rng)
            broken, kind = inject_violation(rng, data)
            v = verify_conclusion(broken)
            assert not v.clean_pass, kind

    def test_verdict_json_serializable(self):
        import json

        v = verify_conclusion(zero_data(h=1e-3))
        blob = json.dumps(v.to_dict())
        assert "conclusion_ok" in blob


class TestClassical:
    def test_bound_dominates_extremal_recursion(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            assert classical_gronwall_check(rng) <= 1e-10

    def test_bound_formula(self):
        # constant beta: x_m <= alpha exp(beta k m)
        out = classical_gronwall_bound(2.0, 3.0, 0.1, 4)
        expect = 2.0 * np.exp(3.0 * 0.1 * np.arange(5))
        assert np.allclose(out, expect, rtol=1e-14)


class TestRoundTrip:
    def test_dict_round_trip(self):
        rng = np.random.default_rng(19)
        d = make_valid_instance(rng)
        d2 = GronwallData.from_dict(d.to_dict())
        assert np.array_equal(d.a, d2.a)
        assert d2.labels == d.labels
        assert d2.gamma0 == d.gamma0
