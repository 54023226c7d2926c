"""Verification suites: one deterministic case runner per suite name.

Each case draws from its own generator seeded by ``"<seed>:<suite>:<index>"``,
so results do not depend on scheduling or on ``--jobs``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .calderon_ops import dual_Cstar, hardy_C, integrate_against
from .dyadic_step import (
    DyadicStep,
    StepFunction,
    band_interval,
    l1_norm,
    rearrange,
    weak_l1_quasinorm,
)
from .haar_martingale import (
    EpsilonPattern,
    IndexSet,
    annihilating_sign,
    martingale_transform,
    project,
    transform_id_minus_T,
    transform_T,
)
from .witness_verifier import (
    RNG_ALGORITHM,
    VerificationReport,
    build_f1,
    build_f2,
    empirical_upper_constant,
    random_decreasing_step,
    random_step,
    verify_lemma_c_first,
    verify_lemma_c_second,
    verify_main_theorem,
    verify_prop_c,
    verify_prop_cast,
    verify_upper_bounds,
    verify_y_vs_ychie,
)

__all__ = ["SUITES", "RANDOM_SUITES", "Suite", "run_case", "case_rng", "suite_cases", "RNG_ALGORITHM"]


@dataclass(frozen=True)
class Settings:
    depth: int = 40
    grid_depth: int = 20
    max_level: int | None = None


def case_rng(seed: int, suite: str, index: int) -> random.Random:
    return random.Random(f"{seed}:{suite}:{index}")


def _ok(claim, cond: bool, witness=None, depth=0) -> VerificationReport:
    return VerificationReport(claim, "pass" if cond else "fail", None if cond else witness,
                              depth, "exact")


def _level(s: Settings, default: int) -> int:
    return default if s.max_level is None else s.max_level


# --------------------------------------------------------------------------
# case runners
# --------------------------------------------------------------------------


def _upper_bounds(rng, i, s):
    return verify_upper_bounds(random_step(rng, _level(s, 8)), s.depth)


def _prop_cast(rng, i, s):
    return [verify_prop_cast(random_step(rng, _level(s, 8)), s.depth)]


def _prop_c(rng, i, s):
    return [verify_prop_c(random_step(rng, _level(s, 8)), s.depth)]


def _lemma_c_first(rng, i, s):
    return [verify_lemma_c_first(2 * i, s.depth)]


def _lemma_c_second(rng, i, s):
    return [verify_lemma_c_second(i, s.depth)]


def _y_vs_ychie(rng, i, s):
    return [verify_y_vs_ychie(random_decreasing_step(rng, _level(s, 8)))]


def _main_theorem(rng, i, s):
    return [verify_main_theorem(random_step(rng, _level(s, 8)), s.depth, s.grid_depth)]


def _projection_identity(rng, i, s):
    x = random_step(rng, _level(s, 10))
    lhs, rhs = transform_T(x), project(x, IndexSet.t_set())
    return [_ok("projection-identity", lhs == rhs, {"x": x.to_json()})]


def random_pattern(rng: random.Random) -> EpsilonPattern:
    """All ones, alternating, or a random finite prefix followed by a random period."""
    kind = rng.randrange(3)
    if kind == 0:
        return EpsilonPattern.ones()
    if kind == 1:
        return EpsilonPattern.alternating()
    prefix = tuple(rng.choice((-1, 0, 1)) for _ in range(rng.randint(0, 10)))
    period = tuple(rng.choice((-1, 0, 1)) for _ in range(rng.randint(1, 3)))
    return EpsilonPattern(prefix, period)


def _transform_triple(rng, s):
    x = random_step(rng, _level(s, 6))
    y = random_step(rng, _level(s, 6))
    return x, y, random_pattern(rng)


def _weak_type(rng, i, s):
    x, y, eps = _transform_triple(rng, s)
    tx, ty = martingale_transform(x, eps), martingale_transform(y, eps)
    wit = {"x": x.to_json(), "y": y.to_json(), "eps": eps.to_json()}
    return [
        _ok("weak-type", weak_l1_quasinorm(tx) <= 2 * l1_norm(x), wit),
        _ok("l2-contraction", tx.inner(tx) <= x.inner(x), wit),
        _ok("self-adjoint", tx.inner(y) == x.inner(ty), wit),
    ]


def _duality(rng, i, s):
    x = random_step(rng, _level(s, 6))
    y = random_step(rng, _level(s, 6))
    lhs = integrate_against(hardy_C(x), y)
    rhs = integrate_against(dual_Cstar(y), x)
    return [_ok("duality", lhs == rhs, {"x": x.to_json(), "y": y.to_json()})]


def _interval(index: int) -> tuple[int, int]:
    """Case index to ``(m, l)`` with ``1 <= l <= 2^m``, level by level."""
    m = (index + 1).bit_length() - 1
    return m, index + 2 - (1 << m)


def _narrow(rng, i, s):
    m, l = _interval(i)
    chi = StepFunction.indicator(Fraction(l - 1, 1 << m), Fraction(l, 1 << m))
    out = []
    for op, kill, keep in (("T", transform_T, transform_id_minus_T),
                           ("id-T", transform_id_minus_T, transform_T)):
        x = annihilating_sign(m, l, op)
        killed = kill(x)
        cond = x * x == chi and killed == StepFunction.constant(0) and keep(x) + killed == x
        out.append(_ok(f"narrow-{op}", cond, {"m": m, "l": l}))
    return out


def _truncation(rng, i, s, depth: int = 25, window: int = 23):
    from .haar_martingale import EpsilonPattern as _E

    mu = random_decreasing_step(rng, _level(s, 8))
    out = []
    for name, f in (("f1", build_f1(mu)), ("f2", build_f2(mu))):
        tf = transform_T(f)
        direct = martingale_transform(f.truncate(depth), _E.T_pattern())
        bad = None
        for m in range(window):
            a, b = band_interval(m)
            if tf.band(m) != direct.restrict(a, b):
                bad = m
                break
        out.append(_ok(f"truncation-{name}", bad is None, {"band": bad, "mu": mu.to_json()}))
    return out


def _lorentz(rng, i, s):
    from .lorentz_range import GaugeFunction, PsiFunction, criterion_scan, psi_closed_form_power

    out = []
    worst = 0.0
    for alpha in (0.25, 0.5, 0.75):
        psi = PsiFunction(GaugeFunction.power(alpha))
        for j in range(4, 21):
            u = 2.0 ** -j
            ref = psi_closed_form_power(alpha, u)
            worst = max(worst, abs(psi(u) - ref) / ref)
    out.append(VerificationReport("psi-closed-form", "pass" if worst <= 1e-6 else "fail",
                                  None if worst <= 1e-6 else {"rel_err": worst}, 20, "numeric", worst))
    ident = criterion_scan(GaugeFunction.identity())
    cond = ident.diverging and ident.ratios[-1] > 20
    out.append(VerificationReport("criterion-identity-diverges", "pass" if cond else "fail",
                                  None if cond else {"last": ident.ratios[-1]}, 40, "numeric",
                                  ident.ratios[-1]))
    root = criterion_scan(GaugeFunction.power(0.5))
    cond = (not root.diverging) and root.sup_ratio < 10
    out.append(VerificationReport("criterion-sqrt-bounded", "pass" if cond else "fail",
                                  None if cond else {"sup": root.sup_ratio}, 40, "numeric",
                                  root.sup_ratio))
    return out


def _empirical_constant(rng, i, s):
    patterns = [EpsilonPattern.ones(), EpsilonPattern.alternating(), EpsilonPattern.T_pattern()]
    rep = empirical_upper_constant(patterns, 1, seed=rng.getrandbits(32), max_level=_level(s, 8))
    cond = math.isfinite(rep.sup_ratio)
    r = VerificationReport("empirical-constant", "pass" if cond else "fail", None, 0, "report-only",
                           rep.sup_ratio)
    return [r]


@dataclass(frozen=True)
class Suite:
    name: str
    runner: Callable
    default_cases: int
    randomized: bool = True
    fixed_cases: Callable[[Settings], int] | None = None


SUITES: dict[str, Suite] = {s.name: s for s in [
    Suite("upper-bounds", _upper_bounds, 200),
    Suite("prop-cast", _prop_cast, 200),
    Suite("prop-c", _prop_c, 200),
    Suite("lemma-c-first", _lemma_c_first, 8, randomized=False),
    Suite("lemma-c-second", _lemma_c_second, 16, randomized=False),
    Suite("y-vs-ychie", _y_vs_ychie, 100),
    Suite("main-theorem", _main_theorem, 100),
    Suite("projection-identity", _projection_identity, 100),
    Suite("weak-type", _weak_type, 500),
    Suite("self-adjoint", _weak_type, 500),
    Suite("duality", _duality, 100),
    Suite("narrow", _narrow, 2047, randomized=False,
          fixed_cases=lambda s: (2 << _level(s, 10)) - 1),
    Suite("truncation", _truncation, 50),
    Suite("lorentz", _lorentz, 1, randomized=False, fixed_cases=lambda s: 1),
    Suite("empirical-constant", _empirical_constant, 1000),
]}

RANDOM_SUITES = [n for n, s in SUITES.items() if s.randomized]


def suite_cases(name: str, requested: int | None, settings: Settings) -> int:
    suite = SUITES[name]
    if suite.fixed_cases is not None:
        return suite.fixed_cases(settings)
    return suite.default_cases if requested is None else requested


def run_case(args) -> list[dict]:
    """``(suite, index, seed, settings)`` to a list of report dicts; exceptions become errors."""
    name, index, seed, settings = args
    try:
        reports = SUITES[name].runner(case_rng(seed, name, index), index, settings)
        return [r.to_json() for r in reports]
    except Exception as exc:  # a crashing case must never count as a pass
        return [{"schema": 1, "claim": name, "status": "error",
                 "witness": {"error": f"{type(exc).__name__}: {exc}"}}]
