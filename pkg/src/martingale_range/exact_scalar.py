"""Exact scalars of the form ``a + sum_p c_p * ln(p)`` with rational coefficients.

Every value produced by the Hardy, dual Hardy and Calderon operators applied to a
step function with dyadic breakpoints, evaluated at a rational point, lives in
this field.  The special case where only ``ln 2`` occurs is the classical
``a + b*ln2`` scalar.

Signs are decided exactly: the value is zero iff every coefficient is zero
(logarithms of distinct primes are linearly independent over Q and ``e^r`` is
transcendental for rational ``r != 0``), otherwise interval enclosures of the
logarithms are refined until the sign is certain.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Mapping, Union

from sympy import factorint

__all__ = [
    "DyadicRational",
    "LogRational",
    "AffineSequence",
    "Scalar",
    "ScalarFieldError",
    "as_scalar",
    "sign",
    "lr_sign",
    "lr_add",
    "lr_scale",
    "log_enclosure",
    "affine_dominates",
    "first_violation",
    "eventual_sign",
    "monotone_from",
    "search_first",
    "parse_rational",
]

Rational = Union[int, Fraction]


class ScalarFieldError(ValueError):
    """An operation would leave the field of rational log-combinations."""


# --------------------------------------------------------------------------
# Dyadic rationals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DyadicRational:
    """``numerator / 2**exponent`` in canonical form (odd numerator or zero)."""

    numerator: int
    exponent: int = 0

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("exponent must be non-negative")
        num, exp = self.numerator, self.exponent
        if num == 0:
            exp = 0
        else:
            while exp > 0 and num % 2 == 0:
                num //= 2
                exp -= 1
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "exponent", exp)

    @classmethod
    def from_fraction(cls, q: Rational) -> "DyadicRational":
        q = Fraction(q)
        den = q.denominator
        if den & (den - 1):
            raise ValueError(f"{q} is not a dyadic rational")
        return cls(q.numerator, den.bit_length() - 1)

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, 1 << self.exponent)

    def __str__(self):
        return f"{self.numerator}/{1 << self.exponent}"


# --------------------------------------------------------------------------
# Certified logarithm enclosures
# --------------------------------------------------------------------------

_INITIAL_BITS = 64
_MAX_BITS = 1 << 20
_ENCLOSURES: dict[int, tuple[int, Fraction, Fraction]] = {}
_ENCLOSURE_LOCK = threading.Lock()


def _atanh_enclosure(num: int, den: int, bits: int) -> tuple[int, int]:
    """Bounds ``lo <= 2**bits * atanh(num/den) <= hi`` for ``0 <= num/den <= 1/3``."""
    if num == 0:
        return 0, 0
    total = 0
    count = 0
    k = 0
    pnum, pden = num, den
    num2, den2 = num * num, den * den
    scale = 1 << bits
    while True:
        total += (pnum * scale) // (pden * (2 * k + 1))
        count += 1
        k += 1
        pnum *= num2
        pden *= den2
        # remaining terms are bounded by z^(2k+1) / ((2k+1)(1-z^2)) <= 9/8 z^(2k+1)
        if pnum * scale * 9 < pden * 8:
            break
    # floor loses < 1 per term; the tail adds < 1 more
    return total, total + count + 1


def _compute_log_enclosure(p: int, bits: int) -> tuple[Fraction, Fraction]:
    if p == 2:
        lo, hi = _atanh_enclosure(1, 3, bits)
        return Fraction(2 * lo, 1 << bits), Fraction(2 * hi, 1 << bits)
    k = p.bit_length() - 1
    base = 1 << k
    lo2, hi2 = _compute_log_enclosure(2, bits)
    lo, hi = _atanh_enclosure(p - base, p + base, bits)
    if p == base:
        return k * lo2, k * hi2
    return k * lo2 + Fraction(2 * lo, 1 << bits), k * hi2 + Fraction(2 * hi, 1 << bits)


def log_enclosure(p: int, bits: int = _INITIAL_BITS) -> tuple[Fraction, Fraction]:
    """Rational interval containing ``ln p`` of width about ``2**-bits`` or better.

    Results are cached; the cache only ever gets replaced by a tighter enclosure.
    """
    cached = _ENCLOSURES.get(p)
    if cached is not None and cached[0] >= bits:
        return cached[1], cached[2]
    lo, hi = _compute_log_enclosure(p, bits)
    with _ENCLOSURE_LOCK:
        cur = _ENCLOSURES.get(p)
        if cur is None or cur[0] < bits:
            _ENCLOSURES[p] = (bits, lo, hi)
    return lo, hi


@lru_cache(maxsize=4096)
def _factor(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(sorted(factorint(n).items()))


# --------------------------------------------------------------------------
# LogRational
# --------------------------------------------------------------------------


class LogRational:
    """Exact scalar ``a + b*ln2 + sum over odd primes p of c_p*ln p``.

    ``LogRational(a, b)`` is the plain ``a + b*ln2`` scalar.  Further logarithms
    are passed as ``logs={p: c_p}``; composite keys are factored.
    """

    __slots__ = ("a", "logs", "_float")

    def __init__(self, a: Rational = 0, b: Rational = 0, logs: Mapping[int, Rational] | None = None):
        self.a = Fraction(a)
        coeffs: dict[int, Fraction] = {}
        if b:
            coeffs[2] = Fraction(b)
        if logs:
            for n, c in logs.items():
                c = Fraction(c)
                if not c:
                    continue
                if n < 1:
                    raise ValueError("logarithm keys must be positive integers")
                for p, e in _factor(n):
                    coeffs[p] = coeffs.get(p, Fraction(0)) + e * c
        self.logs: tuple[tuple[int, Fraction], ...] = tuple(
            sorted((p, c) for p, c in coeffs.items() if c)
        )
        self._float = None

    @classmethod
    def _raw(cls, a: Fraction, logs: tuple[tuple[int, Fraction], ...]) -> "LogRational":
        obj = cls.__new__(cls)
        obj.a = a
        obj.logs = logs
        obj._float = None
        return obj

    @classmethod
    def log(cls, q: Rational) -> "LogRational":
        """Exact ``ln q`` for a positive rational ``q``."""
        q = Fraction(q)
        if q <= 0:
            raise ValueError("logarithm of a non-positive number")
        coeffs: dict[int, Fraction] = {}
        for p, e in _factor(q.numerator) if q.numerator > 1 else ():
            coeffs[p] = coeffs.get(p, Fraction(0)) + e
        for p, e in _factor(q.denominator) if q.denominator > 1 else ():
            coeffs[p] = coeffs.get(p, Fraction(0)) - e
        return cls._raw(Fraction(0), tuple(sorted((p, c) for p, c in coeffs.items() if c)))

    @property
    def b(self) -> Fraction:
        """Coefficient of ``ln 2``."""
        for p, c in self.logs:
            if p == 2:
                return c
        return Fraction(0)

    @property
    def is_rational(self) -> bool:
        return not self.logs

    @property
    def is_log2_only(self) -> bool:
        return all(p == 2 for p, _ in self.logs)

    # arithmetic ------------------------------------------------------------

    def _merge(self, other: "LogRational", factor: int) -> tuple[tuple[int, Fraction], ...]:
        if not other.logs:
            return self.logs
        coeffs = dict(self.logs)
        for p, c in other.logs:
            v = coeffs.get(p, 0) + factor * c
            if v:
                coeffs[p] = v
            else:
                coeffs.pop(p, None)
        return tuple(sorted(coeffs.items()))

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            return LogRational._raw(self.a + other, self.logs)
        if isinstance(other, LogRational):
            return LogRational._raw(self.a + other.a, self._merge(other, 1))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            return LogRational._raw(self.a - other, self.logs)
        if isinstance(other, LogRational):
            return LogRational._raw(self.a - other.a, self._merge(other, -1))
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return LogRational._raw(-self.a, tuple((p, -c) for p, c in self.logs))

    def __mul__(self, other):
        if isinstance(other, LogRational):
            if other.is_rational:
                other = other.a
            elif self.is_rational:
                return other * self.a
            else:
                raise ScalarFieldError("product of two logarithmic scalars")
        if isinstance(other, (int, Fraction)):
            if not other:
                return LogRational._raw(Fraction(0), ())
            return LogRational._raw(self.a * other, tuple((p, c * other) for p, c in self.logs))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, LogRational) and other.is_rational:
            other = other.a
        if isinstance(other, (int, Fraction)):
            return self * (Fraction(1) / Fraction(other))
        raise ScalarFieldError("division by a logarithmic scalar")

    # comparison ------------------------------------------------------------

    def sign(self) -> int:
        if not self.logs:
            return (self.a > 0) - (self.a < 0)
        bits = _INITIAL_BITS
        while bits <= _MAX_BITS:
            lo, hi = self.enclosure(bits)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2
        raise ArithmeticError("sign refinement did not terminate")  # pragma: no cover

    def enclosure(self, bits: int = _INITIAL_BITS) -> tuple[Fraction, Fraction]:
        lo = hi = self.a
        for p, c in self.logs:
            plo, phi = log_enclosure(p, bits)
            if c > 0:
                lo += c * plo
                hi += c * phi
            else:
                lo += c * phi
                hi += c * plo
        return lo, hi

    def _cmp(self, other) -> int:
        if isinstance(other, (int, Fraction, LogRational)):
            return (self - other).sign()
        return NotImplemented

    def __lt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return c if c is NotImplemented else c >= 0

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)):
            return not self.logs and self.a == other
        if isinstance(other, LogRational):
            return self.a == other.a and self.logs == other.logs
        return NotImplemented

    def __hash__(self):
        if not self.logs:
            return hash(self.a)
        return hash((self.a, self.logs))

    def __bool__(self):
        return bool(self.a) or bool(self.logs)

    # conversion ------------------------------------------------------------

    def __float__(self):
        if self._float is None:
            import math

            self._float = math.fsum(
                [float(self.a)] + [float(c) * math.log(p) for p, c in self.logs]
            )
        return self._float

    def to_mpf(self, dps: int = 50):
        import mpmath

        with mpmath.workdps(dps):
            v = mpmath.mpf(self.a.numerator) / self.a.denominator
            for p, c in self.logs:
                v += mpmath.mpf(c.numerator) / c.denominator * mpmath.log(p)
            return +v

    def to_json(self) -> dict:
        out = {"a": _qstr(self.a), "b": _qstr(self.b)}
        others = {str(p): _qstr(c) for p, c in self.logs if p != 2}
        if others:
            out["logs"] = others
        return out

    @classmethod
    def from_json(cls, data) -> "LogRational":
        if isinstance(data, str):
            return cls(parse_rational(data))
        logs = {int(p): parse_rational(c) for p, c in data.get("logs", {}).items()}
        return cls(parse_rational(data.get("a", "0")), parse_rational(data.get("b", "0")), logs)

    def __repr__(self):
        parts = [f"a={self.a}"]
        parts += [f"ln{p}*{c}" for p, c in self.logs]
        return f"LogRational({', '.join(parts)})"


Scalar = Union[Fraction, LogRational]


def _qstr(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def parse_rational(s) -> Fraction:
    """Parse ``"p/q"`` (or an integer literal) into a Fraction."""
    if isinstance(s, int):
        return Fraction(s)
    if not isinstance(s, str):
        raise ValueError(f"rational literal must be a string, got {s!r}")
    return Fraction(s.strip())


def as_scalar(x) -> Scalar:
    if isinstance(x, (Fraction, LogRational)):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"not an exact scalar: {x!r}")


def sign(x) -> int:
    """Exact sign of a Fraction, int or LogRational."""
    if isinstance(x, LogRational):
        return x.sign()
    return (x > 0) - (x < 0)


def lr_sign(x: LogRational) -> int:
    return sign(x)


def lr_add(x: LogRational, y: LogRational) -> LogRational:
    return LogRational(0) + x + y


def lr_scale(q: Rational, x: LogRational, *, per_ln2: bool = False) -> LogRational:
    """Multiply ``x`` by ``q``, or by ``q/ln2`` when ``per_ln2`` is set.

    Division by ``ln 2`` stays inside the field only for pure multiples of
    ``ln 2``; anything else raises :class:`ScalarFieldError`.
    """
    q = Fraction(q)
    if not per_ln2:
        return LogRational(0) + x * q
    if x.a or not x.is_log2_only:
        raise ScalarFieldError("only pure multiples of ln2 can be divided by ln2")
    return LogRational(q * x.b)


# --------------------------------------------------------------------------
# Eventually affine sequences
# --------------------------------------------------------------------------

_EXACT_BITS_LIMIT = 4096


def _pow2_inv(k: int) -> Fraction:
    return Fraction(1, 1 << k)


@dataclass(frozen=True)
class AffineSequence:
    """``m -> intercept + slope*m + geo*2**-m`` for ``m >= start``."""

    intercept: Scalar = Fraction(0)
    slope: Scalar = Fraction(0)
    geo: Scalar = Fraction(0)
    start: int = 0

    def __post_init__(self):
        for name in ("intercept", "slope", "geo"):
            object.__setattr__(self, name, as_scalar(getattr(self, name)))

    @classmethod
    def constant(cls, c, start: int = 0) -> "AffineSequence":
        return cls(c, Fraction(0), Fraction(0), start)

    def __call__(self, m: int) -> Scalar:
        if m < self.start:
            raise IndexError(f"sequence starts at {self.start}, asked for {m}")
        v = self.intercept + self.slope * m
        if self.geo:
            v = v + self.geo * _pow2_inv(m)
        return v

    @property
    def is_constant(self) -> bool:
        return not self.slope and not self.geo

    @property
    def is_rational(self) -> bool:
        return all(not isinstance(c, LogRational) or c.is_rational
                   for c in (self.intercept, self.slope, self.geo))

    def sign_minus(self, m: int, s: Scalar = Fraction(0)) -> int:
        """Sign of ``self(m) - s``; cheap even when ``2**-m`` is astronomically small."""
        return _sign_affine_geo(self.intercept + self.slope * m - s, self.geo, m)

    def with_start(self, start: int) -> "AffineSequence":
        return AffineSequence(self.intercept, self.slope, self.geo, start)

    def shifted(self, d: int) -> "AffineSequence":
        """The sequence ``m -> self(m - d)``."""
        geo = self.geo * (Fraction(1 << d) if d >= 0 else _pow2_inv(-d))
        return AffineSequence(self.intercept - self.slope * d, self.slope, geo, self.start + d)

    def _binary(self, other, op) -> "AffineSequence":
        if not isinstance(other, AffineSequence):
            other = AffineSequence.constant(as_scalar(other), self.start)
        return AffineSequence(
            op(self.intercept, other.intercept),
            op(self.slope, other.slope),
            op(self.geo, other.geo),
            max(self.start, other.start),
        )

    def __add__(self, other):
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._binary(other, lambda a, b: a - b)

    def __neg__(self):
        return AffineSequence(-self.intercept, -self.slope, -self.geo, self.start)

    def __mul__(self, q):
        if isinstance(q, AffineSequence):
            if q.is_constant:
                q = q.intercept
            elif self.is_constant:
                return q * self.intercept
            else:
                raise ScalarFieldError("product of two non-constant sequences")
        q = as_scalar(q)
        return AffineSequence(self.intercept * q, self.slope * q, self.geo * q, self.start)

    __rmul__ = __mul__

    def same_law(self, other: "AffineSequence") -> bool:
        return (self.intercept == other.intercept and self.slope == other.slope
                and self.geo == other.geo)

    def to_json(self) -> dict:
        def enc(c):
            return (c if isinstance(c, LogRational) else LogRational(c)).to_json()

        return {"intercept": enc(self.intercept), "slope": enc(self.slope),
                "geo": enc(self.geo), "start": self.start}

    @classmethod
    def from_json(cls, data) -> "AffineSequence":
        def dec(v):
            lr = LogRational.from_json(v)
            return lr.a if lr.is_rational else lr

        return cls(dec(data.get("intercept", "0")), dec(data.get("slope", "0")),
                   dec(data.get("geo", "0")), int(data.get("start", 0)))


class _Stepped:
    """``d(i) = A + B*i + G*2**(-s*i)`` for ``i >= 0``; index ``i`` maps to ``start + s*i``."""

    def __init__(self, seq: AffineSequence, start: int, step: int):
        self.A = seq.intercept + seq.slope * start
        self.B = seq.slope * step
        self.G = seq.geo * _pow2_inv(start) if start >= 0 else seq.geo * (1 << -start)
        self.s = step
        self.start = start

    def index(self, i: int) -> int:
        return self.start + self.s * i

    def sign_at(self, i: int) -> int:
        return _sign_affine_geo(self.A + self.B * i, self.G, self.s * i)

    def delta_sign(self, i: int) -> int:
        # d(i+1) - d(i) = B - G*(1 - 2^-s)*2^(-s*i)
        frac = 1 - _pow2_inv(self.s)
        return _sign_affine_geo(self.B, -(self.G * frac), self.s * i)


def _sign_affine_geo(v0: Scalar, g: Scalar, k: int) -> int:
    """Sign of ``v0 + g*2**-k`` without expanding huge powers when avoidable."""
    if not g:
        return sign(v0)
    if k <= _EXACT_BITS_LIMIT:
        return sign(v0 + g * _pow2_inv(k))
    s0 = sign(v0)
    if s0 == 0:
        return sign(g)
    v = v0 if isinstance(v0, LogRational) else LogRational(v0)
    gg = g if isinstance(g, LogRational) else LogRational(g)
    bits = _INITIAL_BITS
    while True:
        lo, hi = v.enclosure(bits)
        if lo > 0 or hi < 0:
            break
        bits *= 2
    low = min(abs(lo), abs(hi))
    glo, ghi = gg.enclosure(bits)
    up = max(abs(glo), abs(ghi))
    a = up.numerator * low.denominator
    b = low.numerator * up.denominator
    if a.bit_length() <= b.bit_length() - 1 + k:
        return s0
    return sign(v0 + g * _pow2_inv(k))  # pragma: no cover


def search_first(pred: Callable[[int], bool], lo: int, hi: int | None = None) -> int:
    """Smallest ``i >= lo`` with ``pred(i)``; ``pred`` must be monotone on the range searched.

    With ``hi`` given, ``pred(hi)`` is assumed true.
    """
    if pred(lo):
        return lo
    if hi is None:
        step = 1
        prev = lo
        while True:
            cand = lo + step
            if pred(cand):
                hi = cand
                break
            prev = cand
            step *= 2
        lo = prev
    # invariant: not pred(lo), pred(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _first_negative(d: _Stepped) -> int | None:
    neg = lambda i: d.sign_at(i) < 0  # noqa: E731
    sg, sb = sign(d.G), sign(d.B)
    if neg(0):
        return 0
    if sg == 0:
        return None if sb >= 0 else search_first(neg, 0)
    if sg > 0:
        # convex: increments increase towards B
        if sb < 0:
            return search_first(neg, 0)
        if sb == 0:
            return None if sign(d.A) >= 0 else search_first(neg, 0)
        turn = search_first(lambda i: d.delta_sign(i) >= 0, 0)
        if d.sign_at(turn) >= 0:
            return None
        return search_first(neg, 0, turn)
    # concave: increments decrease towards B
    if sb >= 0:
        return None
    peak = search_first(lambda i: d.delta_sign(i) < 0, 0)
    return search_first(neg, peak)


def first_violation(lhs: AffineSequence, rhs: AffineSequence | Scalar = Fraction(0),
                    start: int | None = None, step: int = 1) -> int | None:
    """First index ``m >= start`` (``m = start mod step``) with ``lhs(m) < rhs(m)``, or None."""
    if not isinstance(rhs, AffineSequence):
        rhs = AffineSequence.constant(as_scalar(rhs), lhs.start)
    if start is None:
        start = max(lhs.start, rhs.start)
    if start < max(lhs.start, rhs.start):
        raise IndexError("comparison starts before the sequences are defined")
    d = _Stepped(lhs - rhs, start, step)
    i = _first_negative(d)
    return None if i is None else d.index(i)


def affine_dominates(lhs: AffineSequence, rhs: AffineSequence, start: int | None = None,
                     step: int = 1) -> tuple[bool, int | None]:
    """Decide ``lhs(m) >= rhs(m)`` for every ``m >= start`` (stepping by ``step``).

    Returns ``(True, None)`` or ``(False, first violating index)``.  Exact: the
    difference is convex, concave or affine along the index set, so the search
    for a violation only ever walks monotone stretches.
    """
    m = first_violation(lhs, rhs, start, step)
    return m is None, m


def eventual_sign(seq: AffineSequence, start: int | None = None, step: int = 1) -> tuple[int, int]:
    """``(s, m0)``: ``seq(m)`` has sign ``s`` (or is zero) for every ``m >= m0`` on the grid.

    ``m0`` is the smallest such index on the grid ``start + step*i``.
    """
    if start is None:
        start = seq.start
    A, B, G = seq.intercept, seq.slope, seq.geo
    s = sign(B) or sign(A) or sign(G)
    if s == 0:
        return 0, start
    e = _Stepped(seq * s, start, step)
    nonneg = lambda i: e.sign_at(i) >= 0  # noqa: E731
    sg, sb = sign(e.G), sign(e.B)
    if sb > 0:
        if sg > 0:
            # convex: the minimum sits at the turn, so a negative stretch contains it
            turn = search_first(lambda i: e.delta_sign(i) >= 0, 0)
            i0 = 0 if e.sign_at(turn) >= 0 else search_first(nonneg, turn)
        else:
            i0 = search_first(nonneg, 0)
    elif sg > 0 or sg == 0:
        i0 = 0
    else:
        i0 = search_first(nonneg, 0)
    return s, e.index(i0)


def monotone_from(seq: AffineSequence, start: int | None = None, step: int = 1) -> tuple[int, int]:
    """``(direction, m0)``: the stepped sequence is monotone from ``m0`` on.

    ``direction`` is +1 (non-decreasing), -1 (non-increasing) or 0 (constant).
    """
    if start is None:
        start = seq.start
    if seq.is_constant:
        return 0, start
    d = _Stepped(seq, start, step)
    sb, sg = sign(d.B), sign(d.G)
    if sb != 0:
        direction = sb
        # increments are B - G(1-2^-s)2^(-s i); their sign settles to sign(B)
        if sb * sg > 0:
            i0 = search_first(lambda i: d.delta_sign(i) * sb >= 0, 0)
        else:
            i0 = 0
        return direction, d.index(i0)
    # B == 0: increments have the sign of -G throughout
    return -sg, start
