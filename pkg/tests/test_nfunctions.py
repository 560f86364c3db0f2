"""N-function family: values, shifts, conjugates, Young splittings."""

import math

import numpy as np
import pytest

from pfluidlab.constitutive import (
    PDeltaParams,
    nfunc,
    nfunc_conjugate,
    nfunc_prime,
    nfunc_second,
    shifted_nfunc,
    shifted_nfunc_batch,
    shifted_nfunc_conjugate,
    shifted_nfunc_conjugate_batch,
    shifted_nfunc_prime,
    young_split,
)


def antiderivative(p, sigma, t):
    """Independent closed form of the integral of (sigma+s)^(p-2) s over [0,t]."""
    if sigma == 0.0:
        return t**p / p
    b = sigma + t
    return (b**p - sigma**p) / p - sigma * (b ** (p - 1) - sigma ** (p - 1)) / (p - 1)


class TestNfunc:
    def test_quadratic_case(self):
        params = PDeltaParams(p=2.0, delta=0.0)
        assert nfunc(params, 1.0) == pytest.approx(0.5, rel=1e-14)
        assert nfunc(params, 3.0) == pytest.approx(4.5, rel=1e-14)

    def test_degenerate_three_halves(self):
        params = PDeltaParams(p=1.5, delta=0.0)
        assert nfunc(params, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-13)

    def test_vanishes_at_zero(self):
        for p, d in [(1.5, 0.0), (1.9, 0.7), (2.0, 1.0)]:
            assert nfunc(PDeltaParams(p=p, delta=d), 0.0) == 0.0

    def test_negative_argument_rejected(self):
        with pytest.raises(ValueError):
            nfunc(PDeltaParams(p=1.5), -1.0)
        with pytest.raises(ValueError):
            nfunc_prime(PDeltaParams(p=1.5), -0.5)

    def test_quadrature_matches_closed_antiderivative(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            p = rng.uniform(1.1, 2.0)
            d = 10.0 ** rng.uniform(-4, 1)
            t = 10.0 ** rng.uniform(-2, 3)
            got = nfunc(PDeltaParams(p=p, delta=d), t)
            assert got == pytest.approx(antiderivative(p, d, t), rel=1e-10)

    def test_second_derivative_closed_form(self):
        params = PDeltaParams(p=1.6, delta=0.3)
        t = 0.8
        h = 1e-6
        fd = (nfunc_prime(params, t + h) - nfunc_prime(params, t - h)) / (2 * h)
        assert nfunc_second(params, t) == pytest.approx(fd, rel=1e-8)
        assert nfunc_second(PDeltaParams(p=1.5, delta=0.0), 0.0) == math.inf
        assert nfunc_second(PDeltaParams(p=2.0, delta=0.0), 0.0) == 1.0


class TestShifted:
    def test_zero_shift_collapses(self):
        params = PDeltaParams(p=1.7, delta=0.2)
        for t in (0.3, 1.0, 7.0):
            assert shifted_nfunc(params, 0.0, t) == pytest.approx(
                nfunc(params, t), rel=1e-12
            )
            assert shifted_nfunc_prime(params, 0.0, t) == pytest.approx(
                nfunc_prime(params, t), rel=1e-14
            )

    def test_unit_shift_quadratic_case(self):
        # p = 2, delta = 0: phi'_1(1) = phi'(2) * 1/2 = 1
        params = PDeltaParams(p=2.0, delta=0.0)
        assert shifted_nfunc_prime(params, 1.0, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_prime_limit_value_at_zero(self):
        assert shifted_nfunc_prime(PDeltaParams(p=1.5, delta=0.0), 0.0, 0.0) == 0.0

    def test_equivalence_ratio_envelope(self):
        rng = np.random.default_rng(9)
        for _ in range(300):
            params = PDeltaParams(p=rng.uniform(1.5, 2.0), delta=rng.uniform(0, 1))
            a = 10.0 ** rng.uniform(-6, 6) * (rng.uniform() > 0.2)
            t = 10.0 ** rng.uniform(-6, 6)
            val = shifted_nfunc(params, a, t)
            ref = (params.delta + a + t) ** (params.p - 2.0) * t * t
            assert 0.25 * ref <= val <= 4.0 * ref

    def test_batch_matches_quadrature_path(self):
        rng = np.random.default_rng(13)
        params = PDeltaParams(p=1.65, delta=0.37)
        a = 10.0 ** rng.uniform(-6, 6, 64)
        t = 10.0 ** rng.uniform(-8, 6, 64)
        got = shifted_nfunc_batch(params, a, t)
        for i in range(len(a)):
            assert got[i] == pytest.approx(
                shifted_nfunc(params, a[i], t[i]), rel=1e-11
            )


class TestConjugate:
    def test_quadratic_self_conjugate(self):
        params = PDeltaParams(p=2.0, delta=0.0)
        assert nfunc_conjugate(params, 1.0) == pytest.approx(0.5, rel=1e-14)

    def test_power_closed_form(self):
        params = PDeltaParams(p=1.5, delta=0.0)
        pc = 3.0
        for t in (0.2, 1.0, 5.0):
            assert nfunc_conjugate(params, t) == pytest.approx(t**pc / pc, rel=1e-12)

    def test_zero_argument(self):
        assert shifted_nfunc_conjugate(PDeltaParams(p=1.8, delta=0.4), 2.0, 0.0) == 0.0

    def test_young_equality_random(self):
        rng = np.random.default_rng(21)
        for _ in range(100):
            params = PDeltaParams(p=rng.uniform(1.5, 2.0), delta=rng.uniform(0, 1))
            t = 10.0 ** rng.uniform(-3, 3)
            lhs = nfunc(params, t) + nfunc_conjugate(params, nfunc_prime(params, t))
            rhs = t * nfunc_prime(params, t)
            assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(29)
        params = PDeltaParams(p=1.7, delta=0.25)
        a = 10.0 ** rng.uniform(-5, 5, 40)
        t = 10.0 ** rng.uniform(-6, 6, 40)
        got = shifted_nfunc_conjugate_batch(params, a, t)
        for i in range(len(a)):
            assert got[i] == pytest.approx(
                shifted_nfunc_conjugate(params, a[i], t[i]), rel=1e-9
            )

    def test_scaling_law_kappa_squared(self):
        rng = np.random.default_rng(31)
        for _ in range(200):
            params = PDeltaParams(p=rng.uniform(1.5, 2.0), delta=rng.uniform(0, 1))
            a = 10.0 ** rng.uniform(-4, 4) * (rng.uniform() > 0.3)
            t = 10.0 ** rng.uniform(-4, 4)
            kap = rng.uniform(0.0, 1.0)
            big = shifted_nfunc_conjugate(params, a, kap * t)
            ref = shifted_nfunc_conjugate(params, a, t)
            assert big <= 4.0 * kap**2 * ref + 1e-300


class TestYoungSplit:
    def test_zero_factors(self):
        params = PDeltaParams(p=1.6, delta=0.2)
        lhs, rhs = young_split(params, 0.5, 0.0, 2.0, 0.7)
        assert lhs == 0.0 and rhs >= 0.0
        lhs, rhs = young_split(params, 0.5, 2.0, 0.0, 0.7)
        assert lhs == 0.0 and rhs >= 0.0

    def test_quadratic_unit_case(self):
        # p = 2, delta = a = 0, eps = 1, t = s = 1: 1 <= 0.5 + c * 0.5, c >= 1
        params = PDeltaParams(p=2.0, delta=0.0)
        lhs, rhs = young_split(params, 0.0, 1.0, 1.0, 1.0)
        assert lhs == pytest.approx(1.0)
        assert lhs <= rhs
        assert rhs == pytest.approx(0.5 + 2.0 * 0.5, rel=1e-12)

    def test_property_sampled(self):
        rng = np.random.default_rng(37)
        for _ in range(300):
            params = PDeltaParams(p=rng.uniform(1.5, 2.0), delta=rng.uniform(0, 1))
            a = 10.0 ** rng.uniform(-6, 6) * (rng.uniform() > 0.2)
            t = 10.0 ** rng.uniform(-6, 6)
            s = 10.0 ** rng.uniform(-6, 6)
            eps = 10.0 ** rng.uniform(-2, 1)
            lhs, rhs = young_split(params, a, t, s, eps)
            assert lhs <= rhs * (1.0 + 1e-10)
