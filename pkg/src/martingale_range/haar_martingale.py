"""Haar system, dyadic conditional expectations and martingale transforms.

Haar functions are unnormalized: ``h_{n,k}`` is +1 on the left half of the
cell ``((k-1)2^-n, k 2^-n)`` and -1 on its right half; the constant function is
the index ``(0, 0)`` (linear index 1).  ``E_n`` averages over the level-n cells
and ``E_{-1} = 0``.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .dyadic_step import (
    DyadicStep,
    StepFunction,
    TailAlgebraError,
    TailedDyadicStep,
    _make,
    band_interval,
)
from .exact_scalar import AffineSequence, as_scalar

__all__ = [
    "HaarIndex",
    "EpsilonPattern",
    "IndexSet",
    "haar",
    "cond_exp",
    "martingale_transform",
    "transform_T",
    "transform_id_minus_T",
    "haar_coeffs",
    "haar_reconstruct",
    "project",
    "h1_series",
    "annihilating_sign",
    "indicator_band_transform",
]

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True, order=True)
class HaarIndex:
    """``h_{n,k}`` with ``1 <= k <= 2^n``; ``HaarIndex(0, 0)`` is the constant."""

    n: int
    k: int

    def __post_init__(self):
        if (self.n, self.k) != (0, 0) and not (self.n >= 0 and 1 <= self.k <= 1 << self.n):
            raise ValueError(f"no Haar function with index ({self.n}, {self.k})")

    @classmethod
    def constant(cls) -> "HaarIndex":
        return cls(0, 0)

    @property
    def is_constant(self) -> bool:
        return self.k == 0

    @property
    def linear(self) -> int:
        return 1 if self.k == 0 else (1 << self.n) + self.k

    @classmethod
    def from_linear(cls, i: int) -> "HaarIndex":
        if i < 1:
            raise ValueError("linear Haar indices start at 1")
        if i == 1:
            return cls(0, 0)
        n = (i - 1).bit_length() - 1
        return cls(n, i - (1 << n))

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        if self.k == 0:
            return ZERO, ONE
        w = Fraction(1, 1 << self.n)
        return (self.k - 1) * w, self.k * w


def haar(n: int, k: int) -> DyadicStep:
    """``h_{n,k}`` as a step function at resolution ``n + 1``."""
    idx = HaarIndex(n, k)
    if idx.is_constant:
        return DyadicStep(0, [ONE])
    a, b = idx.support
    mid = (a + b) / 2
    pts = [ZERO, a, mid, b, ONE]
    vals = [ZERO, ONE, -ONE, ZERO]
    keep = [i for i in range(4) if pts[i] < pts[i + 1]]
    return _make([pts[keep[0]]] + [pts[i + 1] for i in keep], [vals[i] for i in keep], n + 1)


# --------------------------------------------------------------------------
# conditional expectations and transforms
# --------------------------------------------------------------------------


class _Primitive:
    """Exact ``t -> integral of x over (0, t)``."""

    def __init__(self, x: StepFunction):
        self.x = x
        cum = [ZERO]
        for a, b, v in x.pieces():
            cum.append(cum[-1] + v * (b - a))
        self.cum = cum

    def __call__(self, t: Fraction):
        b = self.x.breaks
        i = bisect_right(b, t) - 1
        if i >= len(self.x.levels):
            return self.cum[-1]
        return self.cum[i] + self.x.levels[i] * (t - b[i])


def cond_exp(x: StepFunction, n: int) -> StepFunction:
    """``E_n x``: average over every level-n dyadic cell."""
    if n < -1:
        raise ValueError("level must be at least -1")
    if n == -1:
        return _make((ZERO, ONE), (ZERO,), getattr(x, "resolution", 0))
    scale = 1 << n
    dirty = set()
    for b in x.breaks[1:-1]:
        c = b * scale
        if c.denominator != 1:
            dirty.add(int(c))
    if not dirty:
        return x
    prim = _Primitive(x)
    cuts = set(b for b in x.breaks if (b * scale).denominator == 1)
    for j in dirty:
        cuts.add(Fraction(j, scale))
        cuts.add(Fraction(j + 1, scale))
    cuts = sorted(cuts)
    levels = []
    w = Fraction(1, scale)
    for a, b in zip(cuts, cuts[1:]):
        if b - a == w and int(a * scale) in dirty:
            levels.append((prim(b) - prim(a)) * scale)
        else:
            levels.append(x.value_at(a))
    res = getattr(x, "resolution", None)
    return _make(cuts, levels, res)


@dataclass(frozen=True)
class EpsilonPattern:
    """Signs ``eps_m`` in {-1, 0, 1}: an explicit prefix, then a repeating period."""

    prefix: tuple = ()
    period: tuple = (1,)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(e) for e in self.prefix))
        object.__setattr__(self, "period", tuple(int(e) for e in self.period))
        if not self.period:
            raise ValueError("period must be non-empty")
        if any(e not in (-1, 0, 1) for e in self.prefix + self.period):
            raise ValueError("entries must lie in {-1, 0, 1}")

    def __getitem__(self, m: int) -> int:
        if m < len(self.prefix):
            return self.prefix[m]
        return self.period[(m - len(self.prefix)) % len(self.period)]

    @classmethod
    def ones(cls):
        return cls((), (1,))

    @classmethod
    def zeros(cls):
        return cls((), (0,))

    @classmethod
    def alternating(cls):
        """``eps_m = (-1)^m``."""
        return cls((), (1, -1))

    @classmethod
    def T_pattern(cls):
        """``1, 0, 1, 0, ...``: the transform T."""
        return cls((), (1, 0))

    def to_json(self):
        return {"prefix": list(self.prefix), "period": list(self.period)}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(d.get("prefix", ())), tuple(d.get("period", (1,))))

    def __str__(self):
        pre = ",".join(map(str, self.prefix))
        per = ",".join(map(str, self.period))
        return f"[{pre}]({per})*" if pre else f"({per})*"


def _levels_needed(x: StepFunction) -> int:
    res = getattr(x, "resolution", None)
    if res is None:
        raise ValueError("martingale transforms need dyadic breakpoints")
    return res


def martingale_transform(x: StepFunction, eps: EpsilonPattern) -> StepFunction:
    """``sum_n eps_n (E_n x - E_{n-1} x)``, a finite sum for step inputs."""
    top = _levels_needed(x)
    prev = cond_exp(x, -1)
    total = prev
    for n in range(top + 1):
        cur = cond_exp(x, n) if n < top else x
        e = eps[n]
        if e:
            d = cur - prev
            total = total + (d if e == 1 else -d)
        prev = cur
    return _make(total.breaks, total.levels, top)


def transform_T(x):
    """The transform keeping the even martingale differences (eps = 1, 0, 1, 0, ...)."""
    if isinstance(x, TailedDyadicStep):
        return _transform_T_tailed(x)
    return martingale_transform(x, EpsilonPattern.T_pattern())


def transform_id_minus_T(x):
    return martingale_transform(x, EpsilonPattern((), (0, 1)))


def _local_transform(phi: StepFunction, m: int) -> StepFunction:
    """T restricted to a zero-mean function living on band ``I_m`` (local coordinates)."""
    # local level l corresponds to global level m + 1 + l
    eps = EpsilonPattern((), (1, 0)) if (m + 1) % 2 == 0 else EpsilonPattern((), (0, 1))
    return martingale_transform(phi, eps)


def _transform_T_tailed(g: TailedDyadicStep) -> TailedDyadicStep:
    if not g.has_constant_tails:
        raise TailAlgebraError("transform_T needs constant tails")
    k = len(g.bands)
    a_tail = (g.tail_even.intercept, g.tail_odd.intercept)
    # J-means A_j for j >= k only depend on the parity of j
    c = (Fraction(2, 3) * a_tail[0] + Fraction(1, 3) * a_tail[1],
         Fraction(2, 3) * a_tail[1] + Fraction(1, 3) * a_tail[0])
    kk = k + 1 if (k + 1) % 2 == 0 else k + 2
    w = [b.integral() for b in g.bands] + [a_tail[j % 2] for j in range(k, kk)]
    A = [None] * (kk + 1)
    A[k] = c[k % 2]
    for j in range(k + 1, kk + 1):
        A[j] = c[j % 2]
    for j in range(k - 1, -1, -1):
        A[j] = w[j] * Fraction(1, 2) + A[j + 1] * Fraction(1, 2)
    bands = []
    running = ZERO
    prev = ZERO
    for j in range(kk):
        if j % 2 == 0:
            running = running + A[j] - prev
        prev = A[j]
        val = running + (w[j] - A[j] if j % 2 else ZERO)
        band = StepFunction.constant(val)
        if j < k:
            fine = g.bands[j] - w[j]
            if len(fine.levels) > 1:
                band = band + _local_transform(fine, j)
        bands.append(band)
    s_last = running  # running sum over even indices <= kk - 1
    delta = c[0] - c[1]
    # even j >= kk: s_last + delta*((j - kk)/2 + 1); odd j: s_last + delta*(j - kk + 1)/2 + (a1 - c1)
    half = delta * Fraction(1, 2)
    even = AffineSequence(s_last + delta - half * kk, half, ZERO, kk)
    odd = AffineSequence(s_last + half * (1 - kk) + a_tail[1] - c[1], half, ZERO, kk)
    return TailedDyadicStep(bands, even, odd)


def indicator_band_transform(n: int) -> TailedDyadicStep:
    """Closed form of ``T chi_{I_n}`` for even n, from ``(T_eps + id)/2`` with ``eps_m = (-1)^m``."""
    if n < 0 or n % 2:
        raise ValueError("closed form needs an even n >= 0")
    scale = Fraction(1, 1 << n)
    vals = [scale * ((-1) ** k * (1 << (k + 1)) + 1) / 6 for k in range(n)]
    tail = AffineSequence.constant(scale * ((1 << (n + 1)) + 1) / 6)
    return TailedDyadicStep.from_band_values(vals, tail, tail)


# --------------------------------------------------------------------------
# Haar coefficients and projections
# --------------------------------------------------------------------------


def haar_coeffs(x: StepFunction) -> dict[HaarIndex, Fraction]:
    """Nonzero coefficients of the (finite) expansion of x in the unnormalized Haar system."""
    top = _levels_needed(x)
    vals = DyadicStep._from_canonical(x.breaks, x.levels, resolution=top).values
    out: dict[HaarIndex, Fraction] = {}
    for n in range(top - 1, -1, -1):
        nxt = []
        for k in range(1 << n):
            left, right = vals[2 * k], vals[2 * k + 1]
            coef = (left - right) / 2
            if coef:
                out[HaarIndex(n, k + 1)] = coef
            nxt.append((left + right) / 2)
        vals = nxt
    if vals[0]:
        out[HaarIndex(0, 0)] = vals[0]
    return dict(sorted(out.items()))


def haar_reconstruct(coeffs: Mapping[HaarIndex, Fraction], resolution: int | None = None) -> DyadicStep:
    top = max((i.n + 1 for i in coeffs if not i.is_constant), default=0)
    if resolution is None:
        resolution = top
    if resolution < top:
        raise ValueError("resolution too small for the given coefficients")
    vals = [as_scalar(coeffs.get(HaarIndex(0, 0), ZERO))]
    for n in range(resolution):
        nxt = []
        for k, v in enumerate(vals):
            c = coeffs.get(HaarIndex(n, k + 1), ZERO) if n < top else ZERO
            nxt.append(v + c)
            nxt.append(v - c)
        vals = nxt
    return DyadicStep(resolution, vals)


class IndexSet:
    """Set of linear Haar indices with decidable membership."""

    def __init__(self, kind: str, indices: Iterable[int] = (), of: "IndexSet | None" = None,
                 parts: Sequence["IndexSet"] = ()):
        if kind not in ("explicit", "T-set", "complement", "union", "intersection", "all"):
            raise ValueError(f"unknown index set kind {kind!r}")
        self.kind = kind
        self.indices = frozenset(int(i) for i in indices)
        if any(i < 1 for i in self.indices):
            raise ValueError("linear Haar indices start at 1")
        self.of = of
        self.parts = tuple(parts)

    @classmethod
    def explicit(cls, indices):
        return cls("explicit", indices)

    @classmethod
    def t_set(cls):
        """``{1}`` together with every index of an odd level."""
        return cls("T-set")

    @classmethod
    def all(cls):
        return cls("all")

    def complement(self):
        return IndexSet("complement", of=self)

    def __or__(self, other):
        return IndexSet("union", parts=(self, other))

    def __and__(self, other):
        return IndexSet("intersection", parts=(self, other))

    def __contains__(self, i) -> bool:
        if isinstance(i, HaarIndex):
            i = i.linear
        if self.kind == "explicit":
            return i in self.indices
        if self.kind == "all":
            return True
        if self.kind == "T-set":
            return i == 1 or ((i - 1).bit_length() - 1) % 2 == 1
        if self.kind == "complement":
            return i not in self.of
        if self.kind == "union":
            return any(i in p for p in self.parts)
        return all(i in p for p in self.parts)

    def to_json(self):
        if self.kind == "explicit":
            return {"kind": "explicit", "indices": sorted(self.indices)}
        if self.kind == "complement":
            return {"kind": "complement", "of": self.of.to_json()}
        if self.kind in ("union", "intersection"):
            return {"kind": self.kind, "parts": [p.to_json() for p in self.parts]}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, d):
        kind = d.get("kind")
        if kind == "explicit":
            return cls.explicit(d.get("indices", ()))
        if kind == "complement":
            return cls.from_json(d["of"]).complement()
        if kind in ("union", "intersection"):
            return cls(kind, parts=[cls.from_json(p) for p in d["parts"]])
        return cls(kind)


def project(x: StepFunction, A: IndexSet) -> DyadicStep:
    """Keep exactly the Haar coefficients indexed by A."""
    top = _levels_needed(x)
    kept = {i: c for i, c in haar_coeffs(x).items() if i in A}
    return haar_reconstruct(kept, top)


# --------------------------------------------------------------------------
# series in h_{n,1} and the sign construction
# --------------------------------------------------------------------------


def h1_series(prefix: Sequence, tail_rule=(ZERO, ZERO)) -> TailedDyadicStep:
    """``sum_n a_n h_{n,1}`` with ``a_n = prefix[n]`` then ``a_n = tail_rule[n % 2]``.

    On band ``I_m`` the sum equals ``(a_0 + ... + a_{m-1}) - a_m``.
    """
    prefix = [as_scalar(a) for a in prefix]
    q = (as_scalar(tail_rule[0]), as_scalar(tail_rule[1]))
    k = len(prefix)

    def coef(n):
        return prefix[n] if n < k else q[n % 2]

    vals = []
    partial = ZERO
    for m in range(k + 4):
        vals.append(partial - coef(m))
        partial = partial + coef(m)
    # along a fixed parity the band value gains q_0 + q_1 every two steps
    laws = {}
    for r in (0, 1):
        m0 = k if k % 2 == r else k + 1
        slope = (vals[m0 + 2] - vals[m0]) / 2
        laws[r] = AffineSequence(vals[m0] - slope * m0, slope, ZERO, k)
    return TailedDyadicStep.from_band_values(vals[:k], laws[0], laws[1])


def annihilating_sign(m: int, l: int, operator: str = "T") -> DyadicStep:
    """A +-1 sign on ``Delta_m^l`` killed by T (or by ``id - T``)."""
    if m < 0 or not 1 <= l <= 1 << m:
        raise ValueError(f"no dyadic interval with index ({m}, {l})")
    if operator not in ("T", "id-T"):
        raise ValueError("operator must be 'T' or 'id-T'")
    keep_single = (m % 2 == 0) if operator == "T" else (m % 2 == 1)
    if keep_single:
        return haar(m, l)
    return haar(m + 1, 2 * l - 1) + haar(m + 1, 2 * l)
