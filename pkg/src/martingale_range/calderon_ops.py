"""Hardy operator, its dual, the Calderon operator and exact evaluation of their images.

For a step function the images are, on each piece ``(lo, hi]``, of the form
``alpha + beta/t + gamma*ln(1/t)`` with rational ``beta, gamma`` and a
log-rational ``alpha``.  Evaluating such a piece at a rational point gives an
exact :class:`LogRational`.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import mpmath

from .dyadic_step import StepFunction, scalar_from_json, scalar_to_json
from .exact_scalar import AffineSequence, LogRational, Scalar, as_scalar, parse_rational, sign

__all__ = [
    "CalderonPiece",
    "PiecewiseCalderon",
    "NonMonotoneError",
    "hardy_C",
    "dual_Cstar",
    "calderon_S",
    "dilate_calderon",
    "eval_at_pow2",
    "sup_on_band",
    "band_sup_sequence",
    "integrate_against",
    "hilbert_eval",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class NonMonotoneError(ValueError):
    """The function is not non-increasing where monotonicity was required."""


def _lr(v) -> LogRational:
    return v if isinstance(v, LogRational) else LogRational(v)


@dataclass(frozen=True)
class CalderonPiece:
    """``t -> alpha + beta/t + gamma*ln(1/t)`` on ``(lo, hi]``."""

    lo: Fraction
    hi: Fraction
    alpha: LogRational
    beta: Fraction = ZERO
    gamma: Fraction = ZERO

    def at(self, t: Fraction) -> LogRational:
        """Value of the formula at ``t > 0`` (also used for one-sided limits at the ends)."""
        v = _lr(self.alpha)
        if self.beta:
            v = v + self.beta / t
        if self.gamma:
            v = v + LogRational.log(1 / t) * self.gamma
        return v

    def limit_at_zero_finite(self) -> bool:
        return not self.beta and not self.gamma

    def extremes(self, a: Fraction, b: Fraction) -> tuple[LogRational, LogRational]:
        """Exact infimum and supremum of the formula over ``[a, b]`` (``0 < a < b``)."""
        vals = [self.at(a), self.at(b)]
        if self.gamma:
            crit = -self.beta / self.gamma
            if a < crit < b:
                vals.append(self.at(crit))
        lo = hi = vals[0]
        for v in vals[1:]:
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        return lo, hi

    def nonincreasing_on(self, a: Fraction, b: Fraction) -> bool:
        # derivative -(beta + gamma t)/t^2; beta + gamma t is affine in t
        return self.beta + self.gamma * a >= 0 and self.beta + self.gamma * b >= 0

    def to_json(self) -> dict:
        return {"interval": [scalar_to_json(self.lo), scalar_to_json(self.hi)],
                "alpha": _lr(self.alpha).to_json(), "beta": scalar_to_json(self.beta),
                "gamma": scalar_to_json(self.gamma)}

    @classmethod
    def from_json(cls, d) -> "CalderonPiece":
        lo, hi = (parse_rational(q) for q in d["interval"])
        return cls(lo, hi, LogRational.from_json(d["alpha"]),
                   parse_rational(d.get("beta", "0")), parse_rational(d.get("gamma", "0")))


class PiecewiseCalderon:
    """Pieces tiling (0, 1]; the first piece, on ``(0, hi]``, is the tail piece."""

    __slots__ = ("pieces",)

    def __init__(self, pieces: Sequence[CalderonPiece]):
        pieces = [CalderonPiece(Fraction(p.lo), Fraction(p.hi), _lr(p.alpha),
                                Fraction(p.beta), Fraction(p.gamma)) for p in pieces]
        if not pieces or pieces[0].lo != 0 or pieces[-1].hi != 1:
            raise ValueError("pieces must tile (0, 1]")
        for p, q in zip(pieces, pieces[1:]):
            if p.hi != q.lo:
                raise ValueError("pieces must be contiguous")
        if pieces[0].beta:
            raise ValueError("the piece at 0 must have beta = 0")
        self.pieces = tuple(pieces)

    @property
    def tail_piece(self) -> CalderonPiece:
        return self.pieces[0]

    @property
    def ends(self) -> list[Fraction]:
        return [p.hi for p in self.pieces]

    def piece_at(self, t: Fraction) -> CalderonPiece:
        """The piece with ``lo < t <= hi``."""
        i = bisect_left(self.ends, t)
        return self.pieces[i]

    def __call__(self, t) -> LogRational:
        t = Fraction(t)
        if not 0 < t <= 1:
            raise ValueError("evaluation point outside (0, 1]")
        return self.piece_at(t).at(t)

    def right_limit(self, t) -> LogRational:
        """``lim g(s)`` as ``s`` decreases to ``t`` (for ``0 < t < 1``)."""
        t = Fraction(t)
        i = bisect_left(self.ends, t)
        if self.pieces[i].hi == t:
            i += 1
        return self.pieces[i].at(t)

    def __add__(self, other: "PiecewiseCalderon") -> "PiecewiseCalderon":
        cuts = sorted(set(self.ends) | set(other.ends))
        out = []
        lo = ZERO
        for hi in cuts:
            p, q = self.piece_at(hi), other.piece_at(hi)
            out.append(CalderonPiece(lo, hi, p.alpha + q.alpha, p.beta + q.beta, p.gamma + q.gamma))
            lo = hi
        return PiecewiseCalderon(out)

    def __mul__(self, q) -> "PiecewiseCalderon":
        q = Fraction(q)
        return PiecewiseCalderon([CalderonPiece(p.lo, p.hi, p.alpha * q, p.beta * q, p.gamma * q)
                                  for p in self.pieces])

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PiecewiseCalderon):
            return NotImplemented
        return self._merged() == other._merged()

    def __hash__(self):
        return hash(self._merged())

    def _merged(self) -> tuple:
        """Pieces with adjacent equal formulas joined; equal functions give equal tuples."""
        out = []
        for p in self.pieces:
            key = (p.alpha, p.beta, p.gamma)
            if out and out[-1][2:] == key:
                out[-1] = (out[-1][0], p.hi, *key)
            else:
                out.append((p.lo, p.hi, *key))
        return tuple(out)

    def __repr__(self):
        return f"PiecewiseCalderon({len(self.pieces)} pieces)"

    def is_nonincreasing(self) -> bool:
        """Exact check: every piece non-increasing and no upward jump between pieces."""
        for p in self.pieces:
            if not p.nonincreasing_on(p.lo if p.lo else p.hi / 2, p.hi):
                return False
            if p.lo == 0 and sign(p.gamma) < 0:
                return False
        for p, q in zip(self.pieces, self.pieces[1:]):
            if p.at(p.hi) < q.at(p.hi):
                return False
        return True

    def sup_on(self, a, b) -> LogRational:
        """Exact ``sup`` over the open interval ``(a, b)``, ``0 < a < b <= 1``."""
        a, b = Fraction(a), Fraction(b)
        best = None
        for p in self.pieces:
            lo, hi = max(p.lo, a), min(p.hi, b)
            if lo >= hi:
                continue
            _, s = p.extremes(lo, hi)
            if best is None or s > best:
                best = s
        return best

    def inf_on(self, a, b) -> LogRational:
        a, b = Fraction(a), Fraction(b)
        best = None
        for p in self.pieces:
            lo, hi = max(p.lo, a), min(p.hi, b)
            if lo >= hi:
                continue
            s, _ = p.extremes(lo, hi)
            if best is None or s < best:
                best = s
        return best

    def to_json(self) -> list:
        return [p.to_json() for p in self.pieces]

    @classmethod
    def from_json(cls, data) -> "PiecewiseCalderon":
        return cls([CalderonPiece.from_json(d) for d in data])


def _runs(x: StepFunction):
    return list(x.pieces())


def hardy_C(x: StepFunction) -> PiecewiseCalderon:
    """``Cx(t) = (1/t) * integral of x over (0, t)``."""
    out = []
    prim = ZERO
    for a, b, v in _runs(x):
        v = Fraction(as_scalar(v))
        out.append(CalderonPiece(a, b, LogRational(v), prim - v * a, ZERO))
        prim += v * (b - a)
    return PiecewiseCalderon(out)


def dual_Cstar(x: StepFunction) -> PiecewiseCalderon:
    """``C*x(t) = integral of x(u)/u over (t, 1)``."""
    runs = _runs(x)
    out = []
    acc = LogRational(0)  # integral over (b_i, 1)
    for a, b, v in reversed(runs):
        v = Fraction(as_scalar(v))
        out.append(CalderonPiece(a, b, acc + LogRational.log(b) * v, ZERO, v))
        if a:
            acc = acc + LogRational.log(b / a) * v
    out.reverse()
    return PiecewiseCalderon(out)


def calderon_S(x: StepFunction) -> PiecewiseCalderon:
    """``S = C + C*``."""
    return hardy_C(x) + dual_Cstar(x)


def dilate_calderon(g: PiecewiseCalderon, k: int) -> PiecewiseCalderon:
    """``t -> g(t/s)`` for ``t <= s = 2^k`` and 0 beyond; only compressions (k <= 0)."""
    if k > 0:
        raise ValueError("only compressions (k <= 0) are supported")
    if k == 0:
        return g
    s = Fraction(1, 1 << -k)
    ln_s = LogRational(0, k)
    out = [CalderonPiece(p.lo * s, p.hi * s, p.alpha + ln_s * p.gamma, p.beta * s, p.gamma)
           for p in g.pieces]
    out.append(CalderonPiece(s, ONE, LogRational(0)))
    return PiecewiseCalderon(out)


def eval_at_pow2(g: PiecewiseCalderon, m: int) -> LogRational:
    """``g(2^-m)``."""
    return g(Fraction(1, 1 << m))


def sup_on_band(g: PiecewiseCalderon, m: int, require_monotone: bool = True) -> LogRational:
    """Supremum of g over ``I_m = (2^-m-1, 2^-m)``.

    With ``require_monotone`` the function must be non-increasing there and the
    supremum is its right limit at ``2^-m-1``; otherwise the exact supremum is
    computed piece by piece.
    """
    a, b = Fraction(1, 1 << (m + 1)), Fraction(1, 1 << m)
    if not require_monotone:
        return g.sup_on(a, b)
    ends = g.ends
    i = bisect_left(ends, a)
    if ends[i] == a:
        i += 1
    prev = None
    while i < len(ends):
        p = g.pieces[i]
        lo, hi = max(p.lo, a), min(p.hi, b)
        if not p.nonincreasing_on(lo, hi):
            raise NonMonotoneError(f"piece {p.lo}..{p.hi} increases on band {m}")
        if prev is not None and prev.at(lo) < p.at(lo):
            raise NonMonotoneError(f"upward jump at {lo} on band {m}")
        prev = p
        if p.hi >= b:
            break
        i += 1
    return g.right_limit(a)


def band_sup_sequence(g: PiecewiseCalderon) -> AffineSequence:
    """Band suprema ``g(2^-m-1)`` on the tail piece, as a sequence in m.

    Starts at the first band contained in the tail piece.
    """
    p = g.tail_piece
    if p.beta:
        raise ValueError("tail piece must have beta = 0")
    if sign(p.gamma) < 0:
        raise NonMonotoneError("tail piece increases")
    m0 = 0
    while Fraction(1, 1 << m0) > p.hi:
        m0 += 1
    ln2 = LogRational(0, 1)
    return AffineSequence(p.alpha + ln2 * p.gamma, ln2 * p.gamma, ZERO, m0)


def integrate_against(g: PiecewiseCalderon, y: StepFunction) -> LogRational:
    """Exact ``integral of g*y over (0,1)``."""
    total = LogRational(0)
    cuts = sorted(set(g.ends) | set(y.breaks[1:]))
    lo = ZERO
    for hi in cuts:
        p = g.piece_at(hi)
        v = Fraction(as_scalar(y.value_at(lo)))
        if v:
            part = _lr(p.alpha) * (hi - lo)
            if p.beta:
                if lo == 0:
                    raise ValueError("beta/t is not integrable at 0")
                part = part + LogRational.log(hi / lo) * p.beta
            if p.gamma:
                # antiderivative of ln(1/t) is t*(1 + ln(1/t)), vanishing at 0
                part = part + (LogRational.log(1 / hi) * hi + hi) * p.gamma
                if lo:
                    part = part - (LogRational.log(1 / lo) * lo + lo) * p.gamma
            total = total + part * v
        lo = hi
    return total


def hilbert_eval(x: StepFunction, t: float, dps: int = 30) -> float:
    """Principal value ``integral of x(s)/(t - s)``; floating point, not at a breakpoint."""
    for b in x.breaks:
        if float(b) == t:
            raise ValueError("Hilbert transform evaluated at a breakpoint")
    with mpmath.workdps(dps):
        tt = mpmath.mpf(t)
        total = mpmath.mpf(0)
        for a, b, v in x.pieces():
            if not v:
                continue
            fa = mpmath.mpf(a.numerator) / a.denominator
            fb = mpmath.mpf(b.numerator) / b.denominator
            vv = mpmath.mpf(Fraction(v).numerator) / Fraction(v).denominator
            total += vv * (mpmath.log(abs(tt - fa)) - mpmath.log(abs(tt - fb)))
        return float(total)
