from __future__ import annotations

import os
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from martingale_range.dyadic_step import DyadicStep

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

small_q = st.fractions(min_value=-64, max_value=64, max_denominator=16)


@st.composite
def dyadic_steps(draw, max_level=4, nonneg=False, values=None):
    n = draw(st.integers(0, max_level))
    vals = values or (st.fractions(0, 64, max_denominator=16) if nonneg else small_q)
    return DyadicStep(n, draw(st.lists(vals, min_size=1 << n, max_size=1 << n)))


@st.composite
def decreasing_steps(draw, max_level=4):
    x = draw(dyadic_steps(max_level, nonneg=True))
    return DyadicStep(x.resolution, sorted(x.values, reverse=True))


@pytest.fixture
def rng():
    return random.Random(12345)


def F(p, q=1):
    return Fraction(p, q)
