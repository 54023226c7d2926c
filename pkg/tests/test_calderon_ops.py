from __future__ import annotations

import math
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from martingale_range.calderon_ops import (
    CalderonPiece,
    NonMonotoneError,
    PiecewiseCalderon,
    band_sup_sequence,
    calderon_S,
    dilate_calderon,
    dual_Cstar,
    eval_at_pow2,
    hardy_C,
    hilbert_eval,
    integrate_against,
    sup_on_band,
)
from martingale_range.dyadic_step import DyadicStep, StepFunction, rearrange
from martingale_range.exact_scalar import LogRational

from conftest import F, decreasing_steps, dyadic_steps

LN2 = LogRational(0, 1)


def mp(q):
    q = Fraction(q)
    return mpmath.mpf(q.numerator) / q.denominator


def oracle(x, t, which="S"):
    """Defining integrals evaluated piece by piece in mpmath."""
    t = mp(t)
    inner = outer = mpmath.mpf(0)
    for a, b, v in x.pieces():
        a, b, v = mp(a), mp(b), mp(v)
        lo, hi = a, min(b, t)
        if hi > lo:
            inner += v * (hi - lo)
        lo, hi = max(a, t), b
        if hi > lo:
            outer += v * mpmath.log(hi / lo)
    c, cs = inner / t, outer
    return {"C": c, "C*": cs, "S": c + cs}[which]


def lr_mp(x: LogRational):
    return x.to_mpf(120)


class TestExamples:
    def test_hardy(self):
        one = StepFunction.constant(1)
        c = hardy_C(one)
        assert all(c(F(k, 16)) == 1 for k in range(1, 17))
        half = hardy_C(StepFunction.indicator(0, F(1, 2)))
        assert half(F(1, 4)) == 1 and half(F(3, 4)) == F(2, 3)
        mu = DyadicStep.from_values([4, 3, 1, 1])
        assert hardy_C(mu)(F(1, 2)) == F(7, 2)

    def test_dual(self):
        assert dual_Cstar(StepFunction.constant(1))(F(1, 4)) == LogRational(0, 2)
        d = dual_Cstar(StepFunction.indicator(F(1, 2), 1))
        assert all(d(F(k, 64)) == LN2 for k in range(1, 33))
        assert dual_Cstar(DyadicStep.from_values([4, 3, 1, 1]))(F(1, 2)) == LN2

    def test_calderon(self):
        s = calderon_S(StepFunction.constant(1))
        assert s(F(1, 4)) == LogRational(1, 2)
        assert dilate_calderon(s, -1)(F(1, 8)) == LogRational(1, 2)
        assert len(s.pieces) == 1 and s.tail_piece.gamma == 1 and s.tail_piece.beta == 0

    def test_band_sup(self):
        s = calderon_S(StepFunction.constant(1))
        assert sup_on_band(s, 1) == LogRational(1, 2)
        const = PiecewiseCalderon([CalderonPiece(F(0), F(1), LogRational(5))])
        assert sup_on_band(const, 3) == 5
        g = PiecewiseCalderon([CalderonPiece(F(0), F(1), LogRational(4), 0, 1)])
        seq = band_sup_sequence(g)
        for m in range(30):
            assert seq(m) == 4 + LN2 * (m + 1) == sup_on_band(g, m)

    def test_non_monotone_detected(self):
        g = PiecewiseCalderon([CalderonPiece(F(0), F(1), LogRational(0), 0, -1)])
        with pytest.raises(NonMonotoneError):
            sup_on_band(g, 2)
        assert sup_on_band(g, 2, require_monotone=False) == LogRational(0, -2)

    def test_hilbert(self):
        assert hilbert_eval(StepFunction.constant(1), 0.5) == pytest.approx(0, abs=1e-14)
        assert hilbert_eval(StepFunction.indicator(0, F(1, 2)), 0.75) == pytest.approx(math.log(3))
        assert hilbert_eval(StepFunction.constant(1), 0.25) == pytest.approx(-math.log(3))
        with pytest.raises(ValueError):
            hilbert_eval(StepFunction.constant(1), 1.0)


class TestOracle:
    def test_pow2_against_100_digit_evaluation(self):
        rng = random.Random(99)
        with mpmath.workdps(110):
            for _ in range(100):
                n = rng.randint(0, 6)
                x = DyadicStep(n, [Fraction(rng.randint(-999, 999), rng.randint(1, 50)) for _ in range(1 << n)])
                g = {"C": hardy_C(x), "C*": dual_Cstar(x), "S": calderon_S(x)}
                for m in range(0, 12):
                    for k, gk in g.items():
                        got = lr_mp(eval_at_pow2(gk, m))
                        assert abs(got - oracle(x, F(1, 1 << m), k)) < mpmath.mpf(10) ** -80

    @given(dyadic_steps(max_level=4))
    def test_general_dyadic_points(self, x):
        s = calderon_S(x)
        with mpmath.workdps(40):
            for k in range(1, 33):
                t = F(k, 32)
                assert abs(lr_mp(s(t)) - oracle(x, t)) < mpmath.mpf(10) ** -30

    def test_quadrature_cross_check(self):
        x = DyadicStep.from_values([4, 3, 1, 1])
        f = lambda s: 4 if s < 0.25 else 3 if s < 0.5 else 1
        cuts = [0.25, 0.5, 0.75]
        for t in (0.1, 0.3, 0.6, 0.9):
            inner = mpmath.quad(f, [0, *[p for p in cuts if p < t], t]) / t
            outer = mpmath.quad(lambda s: f(s) / s, [t, *[p for p in cuts if p > t], 1])
            got = float(calderon_S(x)(Fraction(t).limit_denominator(1 << 30)))
            assert got == pytest.approx(float(inner + outer), rel=1e-8)


class TestProperties:
    @given(dyadic_steps(max_level=4), dyadic_steps(max_level=4))
    def test_duality(self, x, y):
        assert integrate_against(hardy_C(x), y) == integrate_against(dual_Cstar(y), x)

    @given(dyadic_steps(max_level=4), dyadic_steps(max_level=4))
    def test_linearity(self, x, y):
        assert calderon_S(x + y) == calderon_S(x) + calderon_S(y)
        assert calderon_S(x * F(3, 2)) == calderon_S(x) * F(3, 2)

    @given(dyadic_steps(max_level=4, nonneg=True))
    def test_S_dominates_parts(self, x):
        s, c, d = calderon_S(x), hardy_C(x), dual_Cstar(x)
        for t in s.ends:
            assert s(t) >= c(t) and s(t) >= d(t)

    def test_monotone_for_decreasing_inputs(self):
        rng = random.Random(5)
        for _ in range(100):
            n = rng.randint(0, 6)
            mu = rearrange(DyadicStep(n, [Fraction(rng.randint(0, 999), rng.randint(1, 9)) for _ in range(1 << n)]))
            s = calderon_S(mu)
            assert s.is_nonincreasing()
            pts = sorted(set(s.ends) | {p.lo for p in s.pieces if p.lo})
            vals = [s(t) for t in pts]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
            sups = [sup_on_band(s, m) for m in range(41)]
            assert all(a <= b for a, b in zip(sups, sups[1:]))

    @given(decreasing_steps(max_level=4), st.integers(-3, 0))
    def test_dilation_pointwise(self, mu, k):
        s = calderon_S(mu)
        d = dilate_calderon(s, k)
        scale = Fraction(2) ** k
        for j in range(1, 17):
            t = F(j, 16)
            expect = s(t / scale) if t / scale <= 1 else 0
            assert d(t) == expect

    @given(dyadic_steps(max_level=3))
    def test_json_round_trip(self, x):
        s = calderon_S(x)
        assert PiecewiseCalderon.from_json(s.to_json()) == s

    def test_pieces_must_tile(self):
        with pytest.raises(ValueError):
            PiecewiseCalderon([CalderonPiece(F(0), F(1, 2), LogRational(1))])
        with pytest.raises(ValueError):
            PiecewiseCalderon([CalderonPiece(F(0), F(1), LogRational(1), 1, 0)])
