"""Step functions on (0,1), band-structured functions with analytic tails, and rearrangements.

Pieces are right-open: a step function with breaks ``0 = p0 < ... < pr = 1``
takes ``levels[i]`` on ``[p_i, p_{i+1})`` (and the last level at 1).  Since
step functions are only ever compared almost everywhere, the convention only
matters for point evaluation, where it makes the decreasing rearrangement
right-continuous.

A :class:`TailedDyadicStep` is given on the bands ``I_m = (2^-m-1, 2^-m)``:
an explicit local step function for each ``m < K`` and, for ``m >= K``, the
constant value ``tail_even(m)`` or ``tail_odd(m)`` depending on the parity of m.
"""

from __future__ import annotations

from bisect import bisect_right
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .exact_scalar import (
    AffineSequence,
    LogRational,
    Scalar,
    as_scalar,
    eventual_sign,
    first_violation,
    monotone_from,
    parse_rational,
    search_first,
    sign,
)

__all__ = [
    "StepFunction",
    "DyadicStep",
    "TailedDyadicStep",
    "TailAlgebraError",
    "StructureError",
    "band_interval",
    "band_of",
    "even_band_indicator",
    "even_band_measure",
    "rearrange",
    "rearrange_at",
    "Distribution",
    "levelset_measure",
    "dilate_pow2",
    "l1_norm",
    "weak_l1_quasinorm",
    "pointwise",
    "pointwise_leq",
    "scalar_to_json",
    "scalar_from_json",
]

ZERO = Fraction(0)
ONE = Fraction(1)

# prefix extensions beyond this many bands are refused as pathological
MAX_EXTENSION = 1 << 16


class StructureError(ValueError):
    """Arguments do not share a representable common refinement."""


class TailAlgebraError(ValueError):
    """A tail law falls outside what the requested operation supports."""


def _abs(v):
    return -v if sign(v) < 0 else v


def _is_dyadic(q: Fraction) -> bool:
    d = q.denominator
    return d & (d - 1) == 0


def _exponent(q: Fraction) -> int:
    return q.denominator.bit_length() - 1


def scalar_to_json(v):
    if isinstance(v, LogRational):
        return v.to_json() if not v.is_rational else f"{v.a.numerator}/{v.a.denominator}"
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def scalar_from_json(d) -> Scalar:
    if isinstance(d, dict):
        lr = LogRational.from_json(d)
        return lr.a if lr.is_rational else lr
    return parse_rational(d)


# --------------------------------------------------------------------------
# finite step functions
# --------------------------------------------------------------------------


class StepFunction:
    """Finite step function on (0,1) with rational breakpoints."""

    __slots__ = ("breaks", "levels")

    def __init__(self, breaks: Sequence, levels: Sequence):
        breaks = [Fraction(b) for b in breaks]
        levels = [as_scalar(v) for v in levels]
        if len(breaks) != len(levels) + 1:
            raise ValueError("need exactly one more break than levels")
        if breaks[0] != 0 or breaks[-1] != 1:
            raise ValueError("breaks must run from 0 to 1")
        for a, b in zip(breaks, breaks[1:]):
            if not a < b:
                raise ValueError("breaks must be strictly increasing")
        self.breaks, self.levels = _merge_runs(breaks, levels)

    @classmethod
    def _from_canonical(cls, breaks: tuple, levels: tuple, **extra):
        obj = cls.__new__(cls)
        obj.breaks = breaks
        obj.levels = levels
        for k, v in extra.items():
            setattr(obj, k, v)
        return obj

    @classmethod
    def constant(cls, c=ONE):
        return _make((ZERO, ONE), (as_scalar(c),), 0)

    @classmethod
    def indicator(cls, a, b):
        """Indicator of the interval ``(a, b)`` inside (0,1)."""
        a, b = Fraction(a), Fraction(b)
        breaks, levels = [ZERO], []
        if a > 0:
            breaks.append(a)
            levels.append(ZERO)
        breaks.append(b)
        levels.append(ONE)
        if b < 1:
            breaks.append(ONE)
            levels.append(ZERO)
        return _make(breaks, levels, 0)

    # evaluation ---------------------------------------------------------

    def pieces(self):
        """Iterate ``(left, right, level)``."""
        b = self.breaks
        for i, v in enumerate(self.levels):
            yield b[i], b[i + 1], v

    def value_at(self, t) -> Scalar:
        t = Fraction(t)
        if not 0 <= t <= 1:
            raise ValueError("evaluation point outside [0,1]")
        i = bisect_right(self.breaks, t) - 1
        return self.levels[min(i, len(self.levels) - 1)]

    __call__ = value_at

    def integral(self) -> Scalar:
        total = ZERO
        for a, b, v in self.pieces():
            if v:
                total = total + v * (b - a)
        return total

    def inner(self, other: "StepFunction") -> Scalar:
        return (self * other).integral()

    def is_nonincreasing(self) -> bool:
        return all(sign(a - b) >= 0 for a, b in zip(self.levels, self.levels[1:]))

    def is_nonnegative(self) -> bool:
        return all(sign(v) >= 0 for v in self.levels)

    def sup(self) -> Scalar:
        return max(self.levels)

    def inf(self) -> Scalar:
        return min(self.levels)

    # arithmetic -----------------------------------------------------------

    def combine(self, other: "StepFunction", op: Callable) -> "StepFunction":
        breaks, la, lb = _common_refinement(self, other)
        return _make(breaks, [op(x, y) for x, y in zip(la, lb)], _joint_resolution(self, other))

    def map(self, op: Callable) -> "StepFunction":
        return _make(self.breaks, [op(v) for v in self.levels], getattr(self, "resolution", None))

    def __add__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda x, y: x + y)
        return self.map(lambda v: v + other)

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda x, y: x - y)
        return self.map(lambda v: v - other)

    def __neg__(self):
        return self.map(lambda v: -v)

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            return self.combine(other, lambda x, y: x * y)
        q = as_scalar(other)
        return self.map(lambda v: v * q)

    __rmul__ = __mul__

    def __abs__(self):
        return self.map(_abs)

    def maximum(self, other: "StepFunction") -> "StepFunction":
        return self.combine(other, lambda x, y: x if sign(x - y) >= 0 else y)

    def minimum(self, other: "StepFunction") -> "StepFunction":
        return self.combine(other, lambda x, y: x if sign(x - y) <= 0 else y)

    def leq(self, other: "StepFunction"):
        """``(True, None)`` if ``self <= other`` everywhere, else ``(False, (a, b))``."""
        diff = other - self
        for a, b, v in diff.pieces():
            if sign(v) < 0:
                return False, (a, b)
        return True, None

    def restrict(self, a, b) -> "StepFunction":
        """The function ``u -> self(a + u*(b - a))`` on (0,1)."""
        a, b = Fraction(a), Fraction(b)
        w = b - a
        i = max(bisect_right(self.breaks, a) - 1, 0)
        breaks, levels = [ZERO], []
        while True:
            levels.append(self.levels[i])
            end = self.breaks[i + 1]
            if end >= b:
                breaks.append(ONE)
                break
            breaks.append((end - a) / w)
            i += 1
        res = None
        if hasattr(self, "resolution") and _is_dyadic(w) and _is_dyadic(a):
            res = max(self.resolution - _exponent(w), 0)
        return _make(breaks, levels, res)

    # comparison / display --------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return self.breaks == other.breaks and self.levels == other.levels

    def __hash__(self):
        return hash((self.breaks, self.levels))

    def __repr__(self):
        body = ", ".join(f"[{a},{b}):{v}" for a, b, v in self.pieces())
        return f"{type(self).__name__}({body})"

    def to_json(self) -> dict:
        return {"breaks": [scalar_to_json(b) for b in self.breaks],
                "levels": [scalar_to_json(v) for v in self.levels]}


class DyadicStep(StepFunction):
    """Step function constant on the cells ``((i-1)2^-N, i 2^-N)``.

    ``DyadicStep(N, values)`` takes the dense list of ``2**N`` cell values.
    Internally runs of equal values are merged, so very fine resolutions with
    few distinct pieces stay cheap.
    """

    __slots__ = ("resolution",)

    def __init__(self, resolution: int, values: Sequence):
        if resolution < 0:
            raise ValueError("resolution must be non-negative")
        values = list(values)
        if len(values) != 1 << resolution:
            raise ValueError(f"expected {1 << resolution} values, got {len(values)}")
        w = Fraction(1, 1 << resolution)
        breaks = [w * i for i in range(len(values) + 1)]
        self.breaks, self.levels = _merge_runs(breaks, [as_scalar(v) for v in values])
        self.resolution = resolution

    @classmethod
    def from_values(cls, values: Sequence) -> "DyadicStep":
        n = len(values)
        if n == 0 or n & (n - 1):
            raise ValueError("number of values must be a power of two")
        return cls(n.bit_length() - 1, values)

    @classmethod
    def from_runs(cls, resolution: int, breaks: Sequence, levels: Sequence) -> "DyadicStep":
        f = StepFunction(breaks, levels)
        out = _make(f.breaks, f.levels, resolution)
        if not isinstance(out, DyadicStep) or out.resolution != resolution:
            raise ValueError("breaks are not on the dyadic grid of the given resolution")
        return out

    @property
    def values(self) -> list:
        cell = Fraction(1, 1 << self.resolution)
        out = []
        for a, b, v in self.pieces():
            out.extend([v] * int((b - a) / cell))
        return out

    def refine(self, resolution: int) -> "DyadicStep":
        if resolution < self.resolution:
            raise ValueError("cannot coarsen")
        return DyadicStep._from_canonical(self.breaks, self.levels, resolution=resolution)

    def to_json(self) -> dict:
        return {"resolution": self.resolution, "values": [scalar_to_json(v) for v in self.values]}

    @classmethod
    def from_json(cls, data: dict) -> "DyadicStep":
        if "values" not in data or "resolution" not in data:
            raise ValueError("step JSON needs 'resolution' and 'values'")
        return cls(int(data["resolution"]), [scalar_from_json(v) for v in data["values"]])


def _merge_runs(breaks, levels):
    out_b, out_l = [breaks[0]], []
    for i, v in enumerate(levels):
        if out_l and out_l[-1] == v:
            out_b[-1] = breaks[i + 1]
        else:
            out_l.append(v)
            out_b.append(breaks[i + 1])
    return tuple(out_b), tuple(out_l)


def _make(breaks, levels, resolution):
    """Canonical step function; a DyadicStep whenever every break is dyadic."""
    b, l = _merge_runs(list(breaks), list(levels))
    need = 0
    for q in b:
        if not _is_dyadic(q):
            return StepFunction._from_canonical(b, l)
        need = max(need, _exponent(q))
    res = need if resolution is None else max(resolution, need)
    return DyadicStep._from_canonical(b, l, resolution=res)


def _joint_resolution(f, g):
    rf = getattr(f, "resolution", None)
    rg = getattr(g, "resolution", None)
    if rf is None or rg is None:
        return None
    return max(rf, rg)


def _common_refinement(f: StepFunction, g: StepFunction):
    bf, bg = f.breaks, g.breaks
    i = j = 0
    breaks = [ZERO]
    la, lb = [], []
    while i < len(f.levels) and j < len(g.levels):
        la.append(f.levels[i])
        lb.append(g.levels[j])
        ef, eg = bf[i + 1], bg[j + 1]
        end = min(ef, eg)
        breaks.append(end)
        if ef == end:
            i += 1
        if eg == end:
            j += 1
    return breaks, la, lb


# --------------------------------------------------------------------------
# bands
# --------------------------------------------------------------------------


def band_interval(m: int) -> tuple[Fraction, Fraction]:
    """``I_m = (2^-m-1, 2^-m)``."""
    return Fraction(1, 1 << (m + 1)), Fraction(1, 1 << m)


def band_of(t) -> int:
    """Index m with ``2^-m-1 <= t < 2^-m`` (t in (0,1))."""
    t = Fraction(t)
    if not 0 < t < 1:
        raise ValueError("t must lie in (0,1)")
    q, p = t.denominator, t.numerator
    # ceil(log2(q/p)) - 1
    k = q.bit_length() - p.bit_length()
    if (p << k) < q:
        k += 1
    elif k > 0 and (p << (k - 1)) >= q:
        k -= 1
    return k - 1


def _parity_measure(m0: int) -> Fraction:
    """Measure of the union of bands ``I_m0, I_m0+2, ...``."""
    return Fraction(2, 3) / (1 << m0)


def _first_of_parity(k: int, r: int) -> int:
    return k if k % 2 == r else k + 1


def _tail_integral(seq: AffineSequence, m0: int) -> Scalar:
    """``sum over m = m0, m0+2, ... of seq(m) * 2^-m-1`` in closed form."""
    # with m = m0 + 2i: sum 4^-i = 4/3, sum i 4^-i = 4/9, sum 16^-i = 16/15
    w = Fraction(1, 1 << (m0 + 1))
    total = ZERO
    if seq.intercept or seq.slope:
        total = total + (seq.intercept + seq.slope * m0) * (w * Fraction(4, 3))
        total = total + seq.slope * (w * Fraction(8, 9))
    if seq.geo:
        total = total + seq.geo * (Fraction(1, 1 << (2 * m0 + 1)) * Fraction(16, 15))
    return total


def _place_bands(bands: Sequence[StepFunction], inner_level=ZERO) -> StepFunction:
    """Global step function with band m given by ``bands[m]`` and a constant on ``J_n``."""
    n = len(bands)
    if n == 0:
        return _make((ZERO, ONE), (inner_level,), 0)
    breaks = [ZERO, Fraction(1, 1 << n)]
    levels = [inner_level]
    res = n
    for m in range(n - 1, -1, -1):
        a, b = band_interval(m)
        w = b - a
        local = bands[m]
        res = max(res, m + 1 + getattr(local, "resolution", 0))
        for i, v in enumerate(local.levels):
            levels.append(v)
            breaks.append(a + local.breaks[i + 1] * w)
    return _make(breaks, levels, res)


class TailedDyadicStep:
    """Band-structured function with explicit bands ``0..K-1`` and parity tail laws."""

    __slots__ = ("bands", "tail_even", "tail_odd")

    def __init__(self, bands: Sequence[StepFunction], tail_even: AffineSequence,
                 tail_odd: AffineSequence):
        self.bands = tuple(bands)
        k = len(self.bands)
        self.tail_even = tail_even.with_start(k)
        self.tail_odd = tail_odd.with_start(k)

    @property
    def prefix_depth(self) -> int:
        return len(self.bands)

    K = prefix_depth

    @classmethod
    def constant(cls, c=ONE) -> "TailedDyadicStep":
        s = AffineSequence.constant(as_scalar(c))
        return cls((), s, s)

    @classmethod
    def from_band_values(cls, values: Sequence, tail_even, tail_odd) -> "TailedDyadicStep":
        return cls([DyadicStep.constant(v) for v in values], _as_seq(tail_even), _as_seq(tail_odd))

    @classmethod
    def from_step(cls, x: StepFunction) -> "TailedDyadicStep":
        """Exact band decomposition of a finite step function."""
        # J_k lies inside the first piece for the smallest k with 2^-k <= its right end
        first = x.breaks[1]
        k = 0
        while Fraction(1, 1 << k) > first:
            k += 1
        bands = [x.restrict(*band_interval(m)) for m in range(k)]
        tail = AffineSequence.constant(x.levels[0])
        return cls(bands, tail, tail)

    def tail(self, r: int) -> AffineSequence:
        return self.tail_odd if r % 2 else self.tail_even

    def band(self, m: int) -> StepFunction:
        if m < len(self.bands):
            return self.bands[m]
        return DyadicStep.constant(self.tail(m)(m))

    def band_value(self, m: int) -> Scalar:
        """Value on a band that is constant (every tail band is)."""
        b = self.band(m)
        if len(b.levels) != 1:
            raise StructureError(f"band {m} is not constant")
        return b.levels[0]

    def extend(self, k: int) -> "TailedDyadicStep":
        if k <= len(self.bands):
            return self
        if k - len(self.bands) > MAX_EXTENSION:
            raise TailAlgebraError(f"refusing to materialize {k - len(self.bands)} bands")
        extra = [self.band(m) for m in range(len(self.bands), k)]
        return TailedDyadicStep(self.bands + tuple(extra), self.tail_even, self.tail_odd)

    def compact(self) -> "TailedDyadicStep":
        """Drop trailing explicit bands already described by the tail laws."""
        bands = list(self.bands)
        while bands:
            m = len(bands) - 1
            b = bands[-1]
            if len(b.levels) == 1 and b.levels[0] == self.tail(m)(m):
                bands.pop()
            else:
                break
        return TailedDyadicStep(bands, self.tail_even, self.tail_odd)

    def value_at(self, t) -> Scalar:
        m = band_of(t)
        a, b = band_interval(m)
        return self.band(m).value_at((Fraction(t) - a) / (b - a))

    __call__ = value_at

    @property
    def has_constant_tails(self) -> bool:
        return self.tail_even.is_constant and self.tail_odd.is_constant

    # integrals ------------------------------------------------------------

    def integral(self) -> Scalar:
        total = ZERO
        for m, b in enumerate(self.bands):
            total = total + b.integral() * Fraction(1, 1 << (m + 1))
        k = len(self.bands)
        for r in (0, 1):
            total = total + _tail_integral(self.tail(r), _first_of_parity(k, r))
        return total

    def integral_inner(self, m: int) -> Scalar:
        """Integral over ``J_m``."""
        x = self.extend(m)
        total = ZERO
        for j in range(m, len(x.bands)):
            total = total + x.bands[j].integral() * Fraction(1, 1 << (j + 1))
        k = max(m, len(x.bands))
        for r in (0, 1):
            total = total + _tail_integral(x.tail(r), _first_of_parity(k, r))
        return total

    def truncate(self, m: int) -> DyadicStep:
        """Bands ``0..m-1`` kept exactly, the mean value placed on ``J_m``."""
        x = self.extend(m)
        mean = x.integral_inner(m) * (1 << m)
        return _place_bands(x.bands[:m], inner_level=mean)

    def restrict_outer(self, m: int) -> StepFunction:
        """Bands ``0..m-1`` kept exactly, zero on ``J_m``."""
        return _place_bands(self.extend(m).bands[:m])

    # arithmetic -----------------------------------------------------------

    def _binary(self, other, band_op, tail_op) -> "TailedDyadicStep":
        other = as_tailed(other)
        k = max(len(self.bands), len(other.bands))
        x, y = self.extend(k), other.extend(k)
        bands = [band_op(p, q) for p, q in zip(x.bands, y.bands)]
        return TailedDyadicStep(bands, tail_op(x.tail_even, y.tail_even),
                                tail_op(x.tail_odd, y.tail_odd))

    def __add__(self, other):
        if isinstance(other, (TailedDyadicStep, StepFunction)):
            return self._binary(other, lambda p, q: p + q, lambda s, t: s + t)
        return self + TailedDyadicStep.constant(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (TailedDyadicStep, StepFunction)):
            return self._binary(other, lambda p, q: p - q, lambda s, t: s - t)
        return self - TailedDyadicStep.constant(other)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TailedDyadicStep([-b for b in self.bands], -self.tail_even, -self.tail_odd)

    def __mul__(self, other):
        if isinstance(other, (TailedDyadicStep, StepFunction)):
            other = as_tailed(other)
            if not (self.has_constant_tails or other.has_constant_tails):
                raise TailAlgebraError("product needs one factor with constant tails")
            return self._binary(other, lambda p, q: p * q, lambda s, t: s * t)
        q = as_scalar(other)
        return TailedDyadicStep([b * q for b in self.bands], self.tail_even * q, self.tail_odd * q)

    __rmul__ = __mul__

    def __abs__(self):
        k = len(self.bands)
        signs = []
        for r in (0, 1):
            s, m0 = eventual_sign(self.tail(r), _first_of_parity(k, r), 2)
            signs.append((s, m0))
        x = self.extend(max(m0 for _, m0 in signs))
        return TailedDyadicStep([abs(b) for b in x.bands],
                                x.tail_even * (signs[0][0] or 1), x.tail_odd * (signs[1][0] or 1))

    def maximum(self, other) -> "TailedDyadicStep":
        d = self - other
        return (self + other + abs(d)) * Fraction(1, 2)

    def minimum(self, other) -> "TailedDyadicStep":
        d = self - other
        return (self + other - abs(d)) * Fraction(1, 2)

    def map_bands(self, op: Callable[[int, StepFunction], StepFunction]) -> "TailedDyadicStep":
        return TailedDyadicStep([op(m, b) for m, b in enumerate(self.bands)],
                                self.tail_even, self.tail_odd)

    # comparison -----------------------------------------------------------

    def leq(self, other, parity: int | None = None, start: int = 0):
        """Decide ``self <= other`` on the bands ``m >= start`` (optionally of one parity).

        Returns ``(True, None)`` or ``(False, witness)`` where the witness is a
        dict with the violating band and the interval ``(a, b)`` in (0,1).
        """
        d = as_tailed(other) - self
        k = len(d.bands)
        for m in range(start, k):
            if parity is not None and m % 2 != parity:
                continue
            ok, w = _nonneg(d.bands[m])
            if not ok:
                a, b = band_interval(m)
                lo, hi = a + w[0] * (b - a), a + w[1] * (b - a)
                return False, {"band": m, "interval": (lo, hi)}
        worst = None
        for r in (0, 1):
            if parity is not None and r != parity:
                continue
            m0 = _first_of_parity(max(k, start), r)
            bad = first_violation(d.tail(r), ZERO, m0, 2)
            if bad is not None and (worst is None or bad < worst):
                worst = bad
        if worst is not None:
            return False, {"band": worst, "interval": band_interval(worst)}
        return True, None

    def __eq__(self, other):
        if not isinstance(other, (TailedDyadicStep, StepFunction)):
            return NotImplemented
        other = as_tailed(other)
        k = max(len(self.bands), len(other.bands))
        x, y = self.extend(k), other.extend(k)
        return (x.bands == y.bands and x.tail_even.same_law(y.tail_even)
                and x.tail_odd.same_law(y.tail_odd))

    def __hash__(self):  # pragma: no cover - value objects are compared, not hashed
        return hash(len(self.bands))

    def __repr__(self):
        return (f"TailedDyadicStep(K={len(self.bands)}, tail_even={self.tail_even}, "
                f"tail_odd={self.tail_odd})")

    # serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        return {"prefix_depth": len(self.bands), "bands": [b.to_json() for b in self.bands],
                "tail_even": self.tail_even.to_json(), "tail_odd": self.tail_odd.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "TailedDyadicStep":
        bands = []
        for b in data.get("bands", []):
            if "values" in b:
                bands.append(DyadicStep.from_json(b))
            else:
                bands.append(StepFunction([parse_rational(q) for q in b["breaks"]],
                                          [scalar_from_json(v) for v in b["levels"]]))
        if int(data.get("prefix_depth", len(bands))) != len(bands):
            raise ValueError("prefix_depth does not match the number of bands")
        return cls(bands, AffineSequence.from_json(data["tail_even"]),
                   AffineSequence.from_json(data["tail_odd"]))


def _nonneg(f: StepFunction):
    for a, b, v in f.pieces():
        if sign(v) < 0:
            return False, (a, b)
    return True, None


def _as_seq(v) -> AffineSequence:
    return v if isinstance(v, AffineSequence) else AffineSequence.constant(as_scalar(v))


def as_tailed(x) -> TailedDyadicStep:
    if isinstance(x, TailedDyadicStep):
        return x
    if isinstance(x, StepFunction):
        return TailedDyadicStep.from_step(x)
    return TailedDyadicStep.constant(x)


def even_band_indicator() -> TailedDyadicStep:
    """``chi_E`` for ``E`` the union of the even bands."""
    return TailedDyadicStep((), AffineSequence.constant(ONE), AffineSequence.constant(ZERO))


def even_band_measure(k: int = 0) -> Fraction:
    """Measure of ``E`` intersected with ``(0, 2^-k)``."""
    return _parity_measure(_first_of_parity(k, 0))


# --------------------------------------------------------------------------
# distribution function and rearrangement
# --------------------------------------------------------------------------


class Distribution:
    """Exact distribution function ``s -> m{|x| > s}`` of a step or tailed function.

    Explicit pieces are kept as a list sorted by decreasing value; growing tail
    laws are searched rather than enumerated.
    """

    def __init__(self, x):
        if isinstance(x, StepFunction):
            items = [(_abs(v), b - a) for a, b, v in x.pieces()]
            growing = []
        else:
            x = abs(x)
            k = len(x.bands)
            start = k
            growing_r = []
            for r in (0, 1):
                seq = x.tail(r)
                if seq.is_constant:
                    continue
                if not seq.slope:
                    raise TailAlgebraError("tail converging to a limit has infinitely many levels")
                if sign(seq.slope) < 0:  # pragma: no cover - abs makes tails eventually >= 0
                    raise TailAlgebraError("negative tail slope")
                _, m0 = monotone_from(seq, _first_of_parity(k, r), 2)
                start = max(start, m0)
                growing_r.append(r)
            x = x.extend(start)
            k = len(x.bands)
            items = []
            for m, band in enumerate(x.bands):
                w = Fraction(1, 1 << (m + 1))
                for a, b, v in band.pieces():
                    items.append((v, (b - a) * w))
            growing = []
            for r in (0, 1):
                m0 = _first_of_parity(k, r)
                if r in growing_r:
                    growing.append((x.tail(r), m0))
                else:
                    items.append((x.tail(r).intercept, _parity_measure(m0)))
        merged: dict = {}
        for v, w in items:
            merged[v] = merged.get(v, ZERO) + w
        vals = sorted(merged, key=_SortKey, reverse=True)
        self.values = vals
        self.cum = []  # cum[i] = measure of pieces with value >= vals[i]
        acc = ZERO
        for v in vals:
            acc += merged[v]
            self.cum.append(acc)
        self.growing = growing

    def _count_above(self, s, strict: bool) -> int:
        """Number of explicit values ``> s`` (or ``>= s``)."""
        lo, hi = 0, len(self.values)
        while lo < hi:
            mid = (lo + hi) // 2
            c = sign(self.values[mid] - s)
            if c > 0 or (c == 0 and not strict):
                lo = mid + 1
            else:
                hi = mid
        return lo

    def _tail_first(self, seq: AffineSequence, m0: int, s, strict: bool) -> int:
        def above(i):
            c = seq.sign_minus(m0 + 2 * i, s)
            return c > 0 or (c == 0 and not strict)

        return m0 + 2 * search_first(above, 0)

    def measure(self, s, strict: bool = True) -> Fraction:
        n = self._count_above(s, strict)
        total = self.cum[n - 1] if n else ZERO
        for seq, m0 in self.growing:
            total += _parity_measure(self._tail_first(seq, m0, s, strict))
        return total

    def at(self, t) -> Scalar:
        """``inf{s >= 0 : m{|x| > s} <= t}``."""
        t = Fraction(t)
        best = None
        if self.measure(ZERO) <= t:
            return ZERO
        # explicit candidates: D(values[i]) is non-decreasing in i
        lo, hi = 0, len(self.values)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.measure(self.values[mid]) <= t:
                lo = mid + 1
            else:
                hi = mid
        if lo > 0:
            best = self.values[lo - 1]
        for seq, m0 in self.growing:
            i = search_first(lambda i: self.measure(seq(m0 + 2 * i)) <= t, 0)
            v = seq(m0 + 2 * i)
            if best is None or sign(v - best) < 0:
                best = v
        return best

    def breakpoints(self):
        """``(value, measure of {|x| >= value})`` for the explicit values."""
        return list(zip(self.values, self.cum))


class _SortKey:
    __slots__ = ("v",)

    def __init__(self, v):
        self.v = v

    def __lt__(self, other):
        return sign(self.v - other.v) < 0


def rearrange(x):
    """Decreasing rearrangement.

    A DyadicStep keeps its resolution; a tailed function with constant tails
    gives a StepFunction with rational breaks.
    """
    if isinstance(x, TailedDyadicStep):
        if not x.has_constant_tails:
            raise TailAlgebraError("rearrange needs constant tails; use rearrange_at")
        dist = Distribution(x)
        if dist.growing:  # pragma: no cover - constant tails never grow
            raise TailAlgebraError("unbounded function")
        return _from_distribution(dist, None)
    dist = Distribution(x)
    return _from_distribution(dist, getattr(x, "resolution", None))


def _from_distribution(dist: Distribution, resolution):
    breaks, levels = [ZERO], []
    for v, c in dist.breakpoints():
        if c == breaks[-1]:
            continue
        breaks.append(c)
        levels.append(v)
    if breaks[-1] != 1:
        breaks.append(ONE)
        levels.append(ZERO)
    return _make(breaks, levels, resolution)


def rearrange_at(x, t) -> Scalar:
    """Exact ``mu(t; x)`` for ``0 < t < 1``."""
    t = Fraction(t) if not hasattr(t, "to_fraction") else t.to_fraction()
    if not 0 < t < 1:
        raise ValueError("t must lie in (0,1)")
    return Distribution(x).at(t)


def levelset_measure(x, s, strict: bool = True) -> Fraction:
    """Measure of ``{|x| > s}`` (or ``{|x| >= s}`` when not strict)."""
    return Distribution(x).measure(as_scalar(s), strict)


def l1_norm(x) -> Scalar:
    return abs(x).integral()


def weak_l1_quasinorm(x) -> Scalar:
    """``sup_t t*mu(t; x)``; the supremum over each piece of mu is at its right end."""
    dist = Distribution(x)
    if dist.growing:
        raise TailAlgebraError("weak L1 quasi-norm of an unbounded tail law is not supported")
    best = ZERO
    for v, c in dist.breakpoints():
        p = v * c
        if sign(p - best) > 0:
            best = p
    return best


# --------------------------------------------------------------------------
# dilation
# --------------------------------------------------------------------------


def dilate_pow2(x, k: int):
    """``sigma_s x(t) = x(t/s)`` on (0,1) with ``s = 2^k``; zero where ``t/s > 1``."""
    if isinstance(x, TailedDyadicStep):
        return _dilate_tailed(x, k)
    s = Fraction(1 << k) if k >= 0 else Fraction(1, 1 << -k)
    res = getattr(x, "resolution", None)
    if k <= 0:
        breaks = [b * s for b in x.breaks]
        levels = list(x.levels)
        if k < 0:
            breaks.append(ONE)
            levels.append(ZERO)
        return _make(breaks, levels, None if res is None else res - k)
    breaks, levels = [ZERO], []
    for a, b, v in x.pieces():
        a, b = a * s, b * s
        if a >= 1:
            break
        levels.append(v)
        breaks.append(min(b, ONE))
    return _make(breaks, levels, None if res is None else max(res - k, 0))


def _dilate_tailed(x: TailedDyadicStep, k: int) -> TailedDyadicStep:
    # output band m is input band m + k
    kk = len(x.bands)
    if k < 0:
        bands = [DyadicStep.constant(ZERO)] * (-k) + list(x.bands)
    else:
        bands = list(x.bands[k:])
    law = {}
    for r in (0, 1):
        src = x.tail((r + k) % 2)
        law[r] = src.shifted(-k)
    nk = max(kk - k, 0)
    if len(bands) != nk:  # pragma: no cover
        raise AssertionError("band bookkeeping")
    return TailedDyadicStep(bands, _unsafe_start(law[0], nk), _unsafe_start(law[1], nk))


def _unsafe_start(seq: AffineSequence, k: int) -> AffineSequence:
    return AffineSequence(seq.intercept, seq.slope, seq.geo, k)


# --------------------------------------------------------------------------
# generic pointwise helpers
# --------------------------------------------------------------------------


def pointwise(x, y=None, op: str = "add", q=None):
    """Apply one of add, sub, abs, min, max, mul_by_rational."""
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "abs":
        return abs(x)
    if op == "max":
        return _lift(x, y)[0].maximum(_lift(x, y)[1])
    if op == "min":
        return _lift(x, y)[0].minimum(_lift(x, y)[1])
    if op == "mul_by_rational":
        return x * Fraction(q if q is not None else y)
    raise ValueError(f"unknown pointwise operation {op!r}")


def _lift(x, y):
    if isinstance(x, TailedDyadicStep) or isinstance(y, TailedDyadicStep):
        return as_tailed(x), as_tailed(y)
    return x, y


def pointwise_leq(x, y, parity: int | None = None):
    """Decide ``x <= y`` everywhere; returns ``(ok, witness)``."""
    if isinstance(x, StepFunction) and isinstance(y, StepFunction) and parity is None:
        ok, w = x.leq(y)
        return ok, (None if ok else {"interval": w})
    return as_tailed(x).leq(as_tailed(y), parity=parity)
