from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from martingale_range.dyadic_step import (
    DyadicStep,
    StepFunction,
    TailAlgebraError,
    TailedDyadicStep,
    band_interval,
    band_of,
    dilate_pow2,
    even_band_indicator,
    even_band_measure,
    l1_norm,
    levelset_measure,
    pointwise,
    pointwise_leq,
    rearrange,
    rearrange_at,
    weak_l1_quasinorm,
)
from martingale_range.exact_scalar import AffineSequence, LogRational

from conftest import F, decreasing_steps, dyadic_steps

ONE, ZERO = Fraction(1), Fraction(0)


def linear_bands():
    """v_m = m on every band I_m."""
    law = AffineSequence(0, 1, 0, 0)
    return TailedDyadicStep.from_band_values([], law, law)


def grid(n):
    return [Fraction(2 * i + 1, 1 << (n + 1)) for i in range(1 << n)]


class TestDyadicStep:
    def test_length_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            DyadicStep.from_values([1, 2, 3])

    def test_equality_across_resolutions(self):
        assert DyadicStep.from_values([1, 1, 2, 2]) == DyadicStep.from_values([1, 2])
        assert DyadicStep.from_values([1, 1, 2, 3]) != DyadicStep.from_values([1, 2])

    @given(dyadic_steps())
    def test_refine_preserves_function(self, x):
        y = x.refine(x.resolution + 2)
        assert y == x
        assert all(x(t) == y(t) for t in grid(x.resolution + 2))

    @given(dyadic_steps())
    def test_json_round_trip(self, x):
        assert DyadicStep.from_json(x.to_json()) == x


class TestRearrange:
    def test_examples(self):
        assert rearrange(DyadicStep.from_values([3, 1, 4, 1])).values == [4, 3, 1, 1]
        assert rearrange(DyadicStep.from_values([-2, 5])).values == [5, 2]
        y = DyadicStep.from_values([5, 2, 2, 0])
        assert rearrange(y) == y

    @given(dyadic_steps())
    def test_sorted_absolute_values(self, x):
        mu = rearrange(x)
        assert mu.refine(x.resolution).values == sorted((abs(v) for v in x.values), reverse=True)

    @given(dyadic_steps())
    def test_idempotent_and_norm_preserving(self, x):
        mu = rearrange(x)
        assert rearrange(mu) == mu
        assert l1_norm(mu) == l1_norm(x)
        assert rearrange(abs(x)) == mu

    @given(decreasing_steps())
    def test_fixed_point(self, y):
        assert rearrange(y) == y


class TestDilation:
    def test_examples(self):
        one = StepFunction.constant(1)
        half = StepFunction.indicator(0, F(1, 2))
        assert dilate_pow2(one, -1) == half
        assert dilate_pow2(half, 1) == one
        mu = rearrange(DyadicStep.from_values([4, 3, 1, 1]))
        s4 = dilate_pow2(mu, 2)
        assert all(s4(Fraction(i, 64)) == 4 for i in range(64))

    @given(dyadic_steps(), st.integers(-3, 3))
    def test_pointwise_oracle(self, x, k):
        y = dilate_pow2(x, k)
        s = Fraction(2) ** k
        for t in grid(x.resolution + 4):
            expect = x(t / s) if t / s < 1 else 0
            assert y(t) == expect

    @given(dyadic_steps(), st.integers(0, 4))
    def test_compress_then_stretch(self, x, k):
        assert dilate_pow2(dilate_pow2(x, -k), k) == x

    def test_tailed_shift(self):
        x = linear_bands()
        y = dilate_pow2(x, -2)
        for m in range(2, 30):
            assert y.band_value(m) == m - 2
        assert y.band_value(0) == 0 and y.band_value(1) == 0


class TestLevelSets:
    def test_examples(self):
        assert levelset_measure(StepFunction.indicator(0, F(1, 2)), F(1, 2)) == F(1, 2)
        assert levelset_measure(StepFunction.constant(0), F(1, 3)) == 0
        assert levelset_measure(linear_bands(), F(5, 2)) == F(1, 8)

    def test_tailed_against_band_enumeration(self):
        x = linear_bands()
        for s in [F(1, 2), F(3), F(7, 2), F(10)]:
            brute = sum(F(1, 1 << (m + 1)) for m in range(61) if m > s)
            assert abs(levelset_measure(x, s) - brute) < F(1, 1 << 55)
            brute = sum(F(1, 1 << (m + 1)) for m in range(61) if m >= s)
            assert abs(levelset_measure(x, s, strict=False) - brute) < F(1, 1 << 55)

    def test_logarithmic_threshold(self):
        # {m > 3 ln2} = {m >= 3}
        assert levelset_measure(linear_bands(), LogRational(0, 3)) == F(1, 8)

    @given(dyadic_steps(), st.lists(st.fractions(-70, 70, max_denominator=8), min_size=1, max_size=20))
    def test_brute_force_cells(self, x, ss):
        w = Fraction(1, 1 << x.resolution)
        for s in ss:
            assert levelset_measure(x, s) == w * sum(1 for v in x.values if abs(v) > s)
            assert levelset_measure(x, s, strict=False) == w * sum(1 for v in x.values if abs(v) >= s)

    def test_rearrange_at_examples(self):
        half = StepFunction.indicator(0, F(1, 2))
        assert rearrange_at(half, F(1, 4)) == 1
        assert rearrange_at(half, F(3, 4)) == 0
        assert rearrange_at(linear_bands(), F(1, 16)) == 3

    def test_rearrange_at_against_truncation(self):
        x = linear_bands()
        trunc = x.restrict_outer(30)
        for j in range(1, 20):
            t = F(1, 1 << j)
            assert rearrange_at(x, t) == rearrange_at(trunc, t) or rearrange_at(x, t) >= 28

    @given(dyadic_steps(max_level=3))
    def test_rearrange_at_zero_tail(self, x):
        tx = TailedDyadicStep.from_step(x)
        mu = rearrange(x)
        for t in grid(x.resolution + 2):
            assert rearrange_at(tx, t) == mu(t)


class TestNorms:
    def test_examples(self):
        q = StepFunction.indicator(0, F(1, 4))
        assert l1_norm(q) == F(1, 4)
        assert weak_l1_quasinorm(q) == F(1, 4)
        assert weak_l1_quasinorm(DyadicStep.from_values([4, 3, 1, 1])) == F(3, 2)

    @given(dyadic_steps())
    def test_weak_below_strong(self, x):
        assert weak_l1_quasinorm(x) <= l1_norm(x)

    def test_growing_tails_rejected(self):
        with pytest.raises(TailAlgebraError):
            weak_l1_quasinorm(linear_bands())


class TestPointwise:
    def test_examples(self):
        x = DyadicStep.from_values([1, -2])
        assert pointwise(x, op="abs") == DyadicStep.from_values([1, 2])
        assert pointwise_leq(x, x)[0]
        ok, w = pointwise_leq(DyadicStep.from_values([1, 3]), DyadicStep.from_values([2, 2]))
        assert not ok and tuple(w["interval"]) == (F(1, 2), F(1))

    @given(dyadic_steps(), dyadic_steps())
    def test_ops_match_cells(self, x, y):
        for t in grid(max(x.resolution, y.resolution) + 1):
            assert pointwise(x, y, "add")(t) == x(t) + y(t)
            assert pointwise(x, y, "sub")(t) == x(t) - y(t)
            assert pointwise(x, y, "max")(t) == max(x(t), y(t))
            assert pointwise(x, y, "min")(t) == min(x(t), y(t))
            assert pointwise(x, None, "mul_by_rational", F(-3, 2))(t) == F(-3, 2) * x(t)

    @given(dyadic_steps(), dyadic_steps())
    def test_leq_matches_cells(self, x, y):
        ok, _ = pointwise_leq(x, y)
        n = max(x.resolution, y.resolution) + 1
        assert ok == all(x(t) <= y(t) for t in grid(n))


class TestTailed:
    def test_even_band_set(self):
        e = even_band_indicator()
        assert e.integral() == F(2, 3)
        for k in (0, 2, 4, 10):
            assert even_band_measure(k) == F(2, 3) * F(1, 1 << k)
        for m in range(20):
            assert e.band_value(m) == (1 if m % 2 == 0 else 0)

    def test_band_helpers(self):
        assert band_interval(0) == (F(1, 2), ONE)
        assert band_of(F(3, 16)) == 2
        assert band_of(F(1, 8)) == 2

    def test_integral_closed_form(self):
        x = linear_bands()
        brute = sum(Fraction(m, 1 << (m + 1)) for m in range(200))
        assert abs(x.integral() - brute) < F(1, 1 << 180)
        assert x.integral() == 1

    @given(dyadic_steps(max_level=3))
    def test_from_step_round_trip(self, x):
        tx = TailedDyadicStep.from_step(x)
        for t in grid(x.resolution + 3):
            assert tx.value_at(t) == x(t)

    def test_truncate_keeps_mean(self):
        x = linear_bands()
        tr = x.truncate(10)
        assert tr.integral() == x.integral()
        for m in range(10):
            a, b = band_interval(m)
            assert tr((a + b) / 2) == m

    def test_arithmetic_with_tails(self):
        x = linear_bands()
        y = TailedDyadicStep.from_band_values([], AffineSequence(1, 0, 0, 0), AffineSequence(-1, 0, 0, 0))
        z = x + y
        w = abs(y - x)
        for m in range(40):
            assert z.band_value(m) == m + (1 if m % 2 == 0 else -1)
            assert w.band_value(m) == abs((1 if m % 2 == 0 else -1) - m)

    def test_leq_finds_tail_violation(self):
        x = linear_bands()
        c = TailedDyadicStep.constant(F(25, 2))
        ok, w = x.leq(c)
        assert not ok and w["band"] == 13
        assert c.leq(x, start=13)[0]

    def test_json_round_trip(self):
        x = linear_bands().extend(3)
        assert TailedDyadicStep.from_json(x.to_json()) == x

    def test_rearrange_constant_tails(self):
        x = even_band_indicator()
        mu = rearrange(x)
        assert mu == StepFunction.indicator(0, F(2, 3))
