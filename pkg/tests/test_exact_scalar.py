from __future__ import annotations

import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from martingale_range.exact_scalar import (
    AffineSequence,
    DyadicRational,
    LogRational,
    ScalarFieldError,
    affine_dominates,
    eventual_sign,
    first_violation,
    log_enclosure,
    lr_add,
    lr_scale,
    lr_sign,
    monotone_from,
)

from conftest import small_q

LN2 = LogRational(0, 1)


def _oracle(a, b, dps=200):
    with mpmath.workdps(dps):
        return mpmath.mpf(a.numerator) / a.denominator + mpmath.mpf(b.numerator) / b.denominator * mpmath.log(2)


class TestDyadicRational:
    def test_canonical_form(self):
        d = DyadicRational.from_fraction(Fraction(6, 8))
        assert d.to_fraction() == Fraction(3, 4)
        z = DyadicRational.from_fraction(Fraction(0))
        assert z.to_fraction() == 0

    def test_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            DyadicRational.from_fraction(Fraction(1, 3))

    @given(st.integers(-10**6, 10**6), st.integers(0, 40))
    def test_round_trip(self, p, e):
        q = Fraction(p, 1 << e)
        assert DyadicRational.from_fraction(q).to_fraction() == q


class TestSign:
    @pytest.mark.parametrize("a,b,s", [(0, 0, 0), (1, -1, 1), (-2, 2, -1), (0, 3, 1), (-1, 0, -1)])
    def test_examples(self, a, b, s):
        assert lr_sign(LogRational(a, b)) == s

    def test_against_200_digit_oracle(self):
        rng = random.Random(2024)
        for _ in range(10_000):
            a = Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 1000))
            b = Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 1000))
            v = _oracle(a, b)
            if abs(v) > mpmath.mpf(10) ** -50:
                assert lr_sign(LogRational(a, b)) == (1 if v > 0 else -1)

    def test_near_cancellation(self):
        # a rational convergent of ln2 gives a tiny but nonzero value
        x = LogRational(Fraction(-1143, 1649), 1)
        assert lr_sign(x) == (1 if _oracle(Fraction(-1143, 1649), Fraction(1)) > 0 else -1)

    def test_other_primes(self):
        ln3 = LogRational.log(3)
        assert (ln3 - LN2).sign() == 1
        assert (LogRational.log(Fraction(9, 8)) - 2 * ln3 + 3 * LN2).sign() == 0

    def test_enclosure_brackets_ln2(self):
        for p in (2, 3, 5, 7):
            lo, hi = log_enclosure(p, 128)
            with mpmath.workdps(80):
                v = mpmath.log(p)
                assert mpmath.mpf(lo.numerator) / lo.denominator <= v <= mpmath.mpf(hi.numerator) / hi.denominator
            assert hi - lo < Fraction(1, 1 << 100)


class TestArithmetic:
    def test_examples(self):
        assert lr_add(LogRational(1, 0), LogRational(0, 2)) == LogRational(1, 2)
        assert lr_scale(Fraction(1, 2), LogRational(3, 4)) == LogRational(Fraction(3, 2), 2)
        assert lr_scale(Fraction(1, 2), LogRational(0, 6), per_ln2=True) == LogRational(3, 0)

    def test_scale_per_ln2_rejects_mixed(self):
        with pytest.raises(ScalarFieldError):
            lr_scale(Fraction(1, 2), LogRational(1, 6), per_ln2=True)

    def test_log_factors(self):
        assert LogRational.log(Fraction(1, 4)) == LogRational(0, -2)
        assert LogRational.log(12) == 2 * LN2 + LogRational.log(3)

    @given(small_q, small_q, small_q, small_q, small_q, small_q, small_q)
    def test_vector_space_laws(self, a1, b1, a2, b2, a3, b3, q):
        x, y, z = LogRational(a1, b1), LogRational(a2, b2), LogRational(a3, b3)
        assert lr_add(lr_add(x, y), z) == lr_add(x, lr_add(y, z))
        assert lr_scale(q, lr_add(x, y)) == lr_add(lr_scale(q, x), lr_scale(q, y))
        assert (x - x).sign() == 0

    @given(small_q, small_q)
    def test_representation_unique(self, a, b):
        x = LogRational(a, b)
        assert (x.a, x.b) == (a, b)
        assert (x == LogRational(0)) == (a == 0 and b == 0)

    @given(small_q, small_q)
    def test_float_agrees(self, a, b):
        assert float(LogRational(a, b)) == pytest.approx(float(_oracle(a, b, 30)), abs=1e-12)

    def test_json_round_trip(self):
        x = LogRational(Fraction(3, 7), Fraction(-1, 2), {3: 2})
        assert LogRational.from_json(x.to_json()) == x


def seq(a=0, s=0, g=0, start=0):
    return AffineSequence(a, s, g, start)


class TestAffine:
    def test_examples(self):
        assert affine_dominates(seq(0, 1), seq(1), 1) == (True, None)
        assert affine_dominates(seq(1), seq(0, 1), 1) == (False, 2)
        rhs = AffineSequence(LogRational(0, -3), LogRational(0, Fraction(1, 2)), 0, 0)
        assert affine_dominates(seq(0, Fraction(1, 2)), rhs, 0) == (True, None)

    def test_example_against_float_oracle(self):
        rhs = AffineSequence(LogRational(0, -3), LogRational(0, Fraction(1, 2)), 0, 0)
        with mpmath.workdps(100):
            ln2 = mpmath.log(2)
            assert all(mpmath.mpf(m) / 2 >= -3 * ln2 + ln2 * m / 2 for m in range(10_001))

    @given(small_q, small_q, small_q, st.integers(0, 20), st.integers(0, 10))
    def test_reflexive(self, a, s, g, start, k):
        x = seq(a, s, g, start)
        assert affine_dominates(x, x, start + k)[0]

    @given(small_q, small_q, small_q, small_q, small_q, small_q, st.integers(0, 8), st.sampled_from([1, 2]))
    def test_first_violation_matches_brute_force(self, a1, s1, g1, a2, s2, g2, start, step):
        lhs, rhs = seq(a1, s1, g1), seq(LogRational(a2, b=s2 / 4), s2, g2)
        got = first_violation(lhs, rhs, start, step)
        brute = next((m for m in range(start, start + 4000, step) if lhs(m) < rhs(m)), None)
        if got is None:
            assert brute is None
        else:
            assert got == brute or (brute is None and got >= start + 4000)

    def test_geometric_sign_change_late(self):
        # 1 - m/1000 + 0 stays nonnegative until m = 1001
        assert first_violation(seq(1, Fraction(-1, 1000), 0), 0, 0) == 1001
        # 2^-m decays under a tiny positive constant: never violated
        assert first_violation(seq(Fraction(1, 10**9), 0, -1, 0), 0, 40) is None

    def test_eventual_sign_and_monotone(self):
        s, m0 = eventual_sign(seq(-5, 1, 100))
        assert s == 1 and all(seq(-5, 1, 100)(m) > 0 for m in range(m0, m0 + 50))
        d, m0 = monotone_from(seq(0, 1, 64))
        assert d == 1

    def test_evaluation_is_exact(self):
        x = AffineSequence(LogRational(1, 1), LogRational(0, 1), Fraction(3), 2)
        assert x(5) == LogRational(1 + Fraction(3, 32), 6)

    def test_shift_and_json(self):
        x = seq(1, 2, 3, 4)
        assert x.shifted(2)(10) == x(8)
        assert AffineSequence.from_json(x.to_json()) == x
