"""Lorentz gauges, the derived gauge psi, the criterion integral and Calderon ranges.

Numeric module.  For a gauge phi on (0,1),

    psi(u) = inf over 1 < w < 1/u of phi(u*w) / (1 + ln w),

and the criterion compares ``int_0^u psi(t)/t dt + u int_u^1 psi(t)/t^2 dt``
with ``phi(u)``.
"""

from __future__ import annotations

import json
import math
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .calderon_ops import calderon_S
from .dyadic_step import StepFunction, rearrange

__all__ = [
    "GaugeFunction",
    "PsiFunction",
    "QuadratureError",
    "parse_gauge",
    "psi_eval",
    "psi_closed_form_power",
    "criterion_ratio",
    "criterion_scan",
    "CriterionScan",
    "lorentz_norm",
    "extend_halfline",
    "psi_tilde",
    "check_SE_membership",
    "empirical_S_norm",
    "s_norm_ratio",
]


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested accuracy."""


# --------------------------------------------------------------------------
# gauges
# --------------------------------------------------------------------------


@dataclass
class GaugeFunction:
    """Increasing concave ``phi`` on (0,1) with ``phi(0+) = 0``.

    kind is ``"power"`` (``t**alpha``), ``"identity"`` or ``"custom-sampled"``
    (piecewise linear through the samples, with ``phi(0) = 0``).
    """

    kind: str
    alpha: float | None = None
    samples_t: np.ndarray | None = None
    samples_phi: np.ndarray | None = None

    def __post_init__(self):
        if self.kind == "power":
            if self.alpha is None or not 0 < self.alpha <= 1:
                raise ValueError("power gauge needs 0 < alpha <= 1")
        elif self.kind == "identity":
            self.alpha = 1.0
        elif self.kind == "custom-sampled":
            t = np.asarray(self.samples_t, dtype=float)
            p = np.asarray(self.samples_phi, dtype=float)
            if t.ndim != 1 or t.shape != p.shape or len(t) < 2:
                raise ValueError("custom gauge needs matching 1-d sample arrays")
            order = np.argsort(t)
            t, p = t[order], p[order]
            if t[0] > 0:
                t, p = np.concatenate([[0.0], t]), np.concatenate([[0.0], p])
            if np.any(np.diff(t) <= 0):
                raise ValueError("sample points must be distinct")
            self.samples_t, self.samples_phi = t, p
        else:
            raise ValueError(f"unknown gauge kind {self.kind!r}")

    @classmethod
    def power(cls, alpha: float) -> "GaugeFunction":
        return cls("power", float(alpha))

    @classmethod
    def identity(cls) -> "GaugeFunction":
        return cls("identity")

    @classmethod
    def sampled(cls, t: Sequence[float], phi: Sequence[float]) -> "GaugeFunction":
        return cls("custom-sampled", None, np.asarray(t, float), np.asarray(phi, float))

    def __call__(self, t):
        if self.kind == "identity":
            return t if np.ndim(t) == 0 else np.asarray(t, float)
        if self.kind == "power":
            return np.power(t, self.alpha) if np.ndim(t) else float(t) ** self.alpha
        v = np.interp(t, self.samples_t, self.samples_phi)
        return float(v) if np.ndim(t) == 0 else v

    @property
    def at_one(self) -> float:
        return float(self(1.0))

    def check_invariants(self, points: int = 10_000, tol: float = 1e-12) -> dict:
        grid = np.linspace(1.0 / points, 1.0, points)
        v = np.asarray(self(grid), float)
        increasing = bool(np.all(np.diff(v) >= -tol))
        concave = True
        # several strides, so a kink sitting on a grid point is still seen
        for k in (1, 7, 101, 1009):
            mid = np.asarray(self((grid[:-k] + grid[k:]) / 2), float)
            concave &= bool(np.all(mid >= (v[:-k] + v[k:]) / 2 - tol * max(1.0, abs(v[-1]))))
        if self.kind == "custom-sampled":
            vanishing = bool(float(self(1e-12)) <= 1e-6 * self.at_one)
        else:
            # t**alpha -> 0 for every alpha > 0, even when 1e-12**alpha is not small
            vanishing = True
        return {"increasing": increasing, "concave": concave, "vanishing_at_zero": vanishing}

    def describe(self) -> str:
        if self.kind == "power":
            return f"pow:{self.alpha:g}"
        if self.kind == "identity":
            return "id"
        return f"sampled[{len(self.samples_t)}]"


def parse_gauge(spec: str) -> GaugeFunction:
    """``"pow:<alpha>"``, ``"id"`` or ``"file:<path>"`` (JSON list of ``{"t", "phi"}``)."""
    if spec == "id":
        return GaugeFunction.identity()
    kind, _, arg = spec.partition(":")
    if kind == "pow" and arg:
        return GaugeFunction.power(float(arg))
    if kind == "file" and arg:
        with open(arg) as fh:
            rows = json.load(fh)
        return GaugeFunction.sampled([r["t"] for r in rows], [r["phi"] for r in rows])
    raise ValueError(f"unknown gauge spec {spec!r}")


# --------------------------------------------------------------------------
# psi
# --------------------------------------------------------------------------

_GRID = 64


def psi_eval(phi: GaugeFunction, u: float, tol: float = 1e-10) -> float:
    """``inf_{1<w<1/u} phi(u w)/(1 + ln w)``, searched in ``v = ln w``.

    Both open ends are included as limits: ``w -> 1+`` gives ``phi(u)`` and
    ``w -> 1/u`` gives ``phi(1)/(1 + ln(1/u))``.
    """
    if not 0 < u < 1:
        raise ValueError("u must lie in (0,1)")
    big = math.log(1.0 / u)
    ends = (float(phi(u)), phi.at_one / (1.0 + big))
    vs = np.linspace(0.0, big, _GRID + 1)
    h = np.asarray(phi(np.minimum(u * np.exp(vs), 1.0)), float) / (1.0 + vs)
    i = int(np.argmin(h))
    best = min(float(h[i]), *ends)
    if 0 < i < _GRID and h[i] < h[i - 1] and h[i] < h[i + 1]:
        def obj(v):
            return float(phi(min(u * math.exp(v), 1.0))) / (1.0 + v)

        res = minimize_scalar(obj, bracket=(vs[i - 1], vs[i], vs[i + 1]), method="golden",
                              tol=max(tol, 1e-12))
        if 0 < res.x < big:
            best = min(best, float(res.fun))
    return best


def psi_closed_form_power(alpha: float, u: float) -> float:
    """psi for ``phi = t**alpha``."""
    if u <= math.exp(1.0 - 1.0 / alpha):
        return alpha * math.exp(1.0 - alpha) * u ** alpha
    return min(u ** alpha, 1.0 / (1.0 + math.log(1.0 / u)))


class PsiFunction:
    """Cached psi for a fixed gauge; safe to share between threads."""

    def __init__(self, phi: GaugeFunction, tol: float = 1e-10):
        self.phi = phi
        self.tol = tol
        self._cache: dict[float, float] = {}
        self._lock = threading.Lock()

    def __call__(self, u: float) -> float:
        u = float(u)
        if u >= 1.0:
            return self.phi.at_one
        v = self._cache.get(u)
        if v is None:
            v = psi_eval(self.phi, u, self.tol)
            with self._lock:
                self._cache[u] = v
        return v

    def many(self, us) -> np.ndarray:
        return np.array([self(u) for u in np.ravel(us)], float).reshape(np.shape(us))


# --------------------------------------------------------------------------
# quadrature on dyadic cells in the variable s = ln t
# --------------------------------------------------------------------------

_LOW = np.polynomial.legendre.leggauss(10)
_HIGH = np.polynomial.legendre.leggauss(20)
_MAX_CELLS = 4000
_MAX_SPLIT = 18


class _CellIntegrator:
    """Integrals of ``psi(t) t^-p`` over ``[2^-j-1, 2^-j]`` for p = 1, 2, cached per cell."""

    def __init__(self, psi: Callable[[float], float], tol: float = 1e-10):
        self.psi = psi
        self.tol = tol
        self._cache: dict[tuple[int, int], float] = {}

    def _gauss(self, f, a, b, rule):
        x, w = rule
        mid, half = (a + b) / 2, (b - a) / 2
        return half * sum(wi * f(mid + half * xi) for xi, wi in zip(x, w))

    def _adaptive(self, f, a, b, depth=0):
        lo, hi = self._gauss(f, a, b, _LOW), self._gauss(f, a, b, _HIGH)
        if abs(hi - lo) <= self.tol * max(abs(hi), 1e-300) or abs(hi - lo) < 1e-300:
            return hi
        if depth >= _MAX_SPLIT:
            raise QuadratureError(f"no convergence on [{math.exp(a)}, {math.exp(b)}]")
        m = (a + b) / 2
        return self._adaptive(f, a, m, depth + 1) + self._adaptive(f, m, b, depth + 1)

    def cell(self, j: int, p: int) -> float:
        key = (j, p)
        v = self._cache.get(key)
        if v is None:
            a, b = -(j + 1) * math.log(2), -j * math.log(2)
            # dt/t^p = e^{(1-p)s} ds
            v = self._adaptive(lambda s: self.psi(math.exp(s)) * math.exp((1 - p) * s), a, b)
            self._cache[key] = v
        return v

    def head(self, j: int) -> float:
        """``int_0^{2^-j} psi(t)/t dt``: cells summed until a geometric tail bound is negligible."""
        key = (j, 0)
        v = self._cache.get(key)
        if v is not None:
            return v
        total = 0.0
        k = j
        prev = None
        while True:
            c = self.cell(k, 1)
            total += c
            if prev is not None and prev > 0:
                rho = c / prev
                if rho < 1:
                    tail = c * rho / (1 - rho)
                    if tail <= self.tol * max(total, 1e-300):
                        total += tail
                        break
            if c == 0.0:
                break
            prev = c
            k += 1
            if k - j > _MAX_CELLS:
                raise QuadratureError("integral of psi(t)/t near 0 does not settle")
        self._cache[key] = total
        return total


def criterion_ratio(phi: GaugeFunction, psi, u: float, tol: float = 1e-10,
                    _cells: _CellIntegrator | None = None) -> float:
    """``(int_0^u psi/t + u int_u^1 psi/t^2) / phi(u)`` for ``u = 2^-j``; other u by splitting the end cell."""
    if not 0 < u < 1:
        raise ValueError("u must lie in (0,1)")
    cells = _cells or _CellIntegrator(psi, tol)
    j = -math.log2(u)
    if abs(j - round(j)) < 1e-12:
        j = int(round(j))
        first = cells.head(j)
        second = u * sum(cells.cell(k, 2) for k in range(j))
    else:
        jj = int(math.floor(j))
        a, b = math.log(u), -jj * math.log(2)
        first = cells.head(jj + 1) + cells._adaptive(lambda s: psi(math.exp(s)),
                                                      -(jj + 1) * math.log(2), a)
        second = u * (sum(cells.cell(k, 2) for k in range(jj))
                      + cells._adaptive(lambda s: psi(math.exp(s)) * math.exp(-s), a, b))
    return (first + second) / float(phi(u))


@dataclass
class CriterionScan:
    grid: list
    ratios: list
    sup_ratio: float
    diverging: bool
    psi_values: list = field(default_factory=list)

    def rows(self):
        return [{"u": u, "psi": p, "criterion_ratio": r}
                for u, p, r in zip(self.grid, self.psi_values, self.ratios)]


def criterion_scan(phi: GaugeFunction, psi=None, depth: int = 40, tol: float = 1e-10) -> CriterionScan:
    """Ratios at ``u = 2^-j``, ``j = 1..depth``, with a divergence flag.

    Divergence is flagged when the last eight increments are all positive and
    the latest is at least half the one eight steps earlier (no geometric decay).
    """
    psi = psi or PsiFunction(phi, tol)
    cells = _CellIntegrator(psi, tol)
    grid = [2.0 ** -j for j in range(1, depth + 1)]
    ratios = [criterion_ratio(phi, psi, u, tol, cells) for u in grid]
    inc = np.diff(ratios)
    diverging = False
    if len(inc) >= 9:
        last = inc[-8:]
        diverging = bool(np.all(last > 0) and inc[-1] >= 0.5 * inc[-9])
    return CriterionScan(grid, ratios, float(max(ratios)), diverging, [psi(u) for u in grid])


# --------------------------------------------------------------------------
# norms, extensions, membership
# --------------------------------------------------------------------------


def lorentz_norm(phi: GaugeFunction, x: StepFunction) -> float:
    """``int mu(s; x) d phi(s)`` as a sum over the pieces of the rearrangement."""
    mu = rearrange(x)
    total = 0.0
    for a, b, v in mu.pieces():
        if v:
            total += float(v) * (float(phi(float(b))) - float(phi(float(a))))
    return total


def _require_normalized(phi: GaugeFunction):
    if abs(phi.at_one - 1.0) > 1e-12:
        raise ValueError("half-line extension needs phi(1) = 1")


def extend_halfline(phi: GaugeFunction, t: float) -> float:
    """``phi(t)`` on (0,1) and ``1 + ln t`` for ``t >= 1``."""
    _require_normalized(phi)
    if t <= 0:
        raise ValueError("t must be positive")
    return float(phi(t)) if t < 1 else 1.0 + math.log(t)


def psi_tilde(phi: GaugeFunction, u: float, psi=None) -> float:
    """``min(psi(u), 1)`` for ``u < 1`` and 1 for ``u >= 1``."""
    _require_normalized(phi)
    if u <= 0:
        raise ValueError("u must be positive")
    if u >= 1:
        return 1.0
    psi = psi or PsiFunction(phi)
    return min(psi(u), 1.0)


def check_SE_membership(x: StepFunction, y: StepFunction) -> tuple[bool, dict]:
    """Exact test of ``mu(x) <= S mu(y)`` on all of (0,1)."""
    mux = rearrange(x)
    s = calderon_S(rearrange(y))
    margin = None
    for a, b, v in mux.pieces():
        # S mu(y) is continuous and non-increasing, so its infimum on (a, b) is the value at b
        lo = s(b)
        d = lo - v
        margin = float(d) if margin is None else min(margin, float(d))
        if d < 0:
            return False, {"interval": [str(a), str(b)], "level": str(v),
                           "witness": [_crossing(s, v, a, b), float(b)], "margin": float(d)}
    return True, {"margin": margin}


def _crossing(s, v, a, b) -> float:
    """Left end of the set where the (non-increasing) S mu drops below v inside (a, b)."""
    lo, hi = float(a), float(b)
    if float(s(Fraction(lo) if lo > 0 else Fraction(b) / 2**60)) < float(v):
        return lo
    for _ in range(80):
        mid = (lo + hi) / 2
        if float(s(Fraction(mid))) < float(v):
            hi = mid
        else:
            lo = mid
    return hi


def _psi_grid(psi, octaves: int = 60, per_octave: int = 64):
    ts = 2.0 ** (-np.arange(octaves * per_octave, -1, -1) / per_octave)
    return ts, psi.many(ts)


def _nonneg_decreasing(rng: random.Random, max_level: int):
    from .witness_verifier import random_step

    return rearrange(random_step(rng, max_level))


def s_norm_ratio(phi: GaugeFunction, x: StepFunction, psi=None, _grid=None) -> float:
    """``||S mu(x)||_{psi} / ||x||_{phi}``, or 0 for ``x = 0``."""
    psi = psi or PsiFunction(phi)
    mu = rearrange(x)
    den = lorentz_norm(phi, mu)
    if den == 0:
        return 0.0
    ts, ps = _grid if _grid is not None else _psi_grid(psi)
    return _s_lorentz(mu, ts, ps, psi) / den


def empirical_S_norm(phi: GaugeFunction, psi=None, samples: int = 100, seed: int = 0,
                     max_level: int = 6) -> dict:
    """Report-only ``sup ||S mu(x)||_{psi} / ||x||_{phi}`` over random samples.

    ``int S mu d psi = S mu(1) psi(1) + int psi * (-(S mu)')``; psi is replaced by
    its linear interpolant on a fixed geometric grid, which makes the second
    integral explicit on every piece.
    """
    psi = psi or PsiFunction(phi)
    grid = _psi_grid(psi)
    rng = random.Random(seed)
    best, arg = 0.0, None
    for i in range(samples):
        r = s_norm_ratio(phi, _nonneg_decreasing(rng, max_level), psi, grid)
        if r > best:
            best, arg = r, i
    return {"samples": samples, "sup_ratio": float(best), "argmax_sample": arg,
            "gauge": phi.describe()}


def _s_lorentz(mu: StepFunction, ts: np.ndarray, ps: np.ndarray, psi) -> float:
    s = calderon_S(mu)
    total = float(s(Fraction(1))) * psi(1.0)
    for p in s.pieces:
        beta, gamma = float(p.beta), float(p.gamma)
        if not beta and not gamma:
            continue
        lo, hi = float(p.lo), float(p.hi)
        inner = ts[(ts > max(lo, ts[0])) & (ts < hi)]
        pts = np.concatenate([[max(lo, ts[0])], inner, [hi]])
        vals = np.interp(pts, ts, ps)
        a, b = pts[:-1], pts[1:]
        va, vb = vals[:-1], vals[1:]
        c1 = (vb - va) / (b - a)
        c0 = va - c1 * a
        lg = np.log(b / a)
        total += float(np.sum(c0 * beta * (1 / a - 1 / b) + c1 * beta * lg
                              + c0 * gamma * lg + c1 * gamma * (b - a)))
        if lo == 0 and gamma:
            # below the grid psi(t) ~ psi(a) (t/a)^k, with k read off the lowest octave
            k = max(math.log2(ps[64] / ps[0]), 1e-3) if ps[0] > 0 else 1.0
            total += gamma * ps[0] / k
    return total
