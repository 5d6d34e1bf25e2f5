"""Threshold curves: closed forms for DICUT and Max-2SAT, empirical upper bounds otherwise."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .csp import (
    Instance,
    PredicateFamily,
    brute_force_value,
    complete_dicut,
    complete_e2sat,
    opposite_units_2sat,
    random_instance,
)
from .errors import CspError
from .lp import lp_value

MAX_SEARCH_VARS = 8
MAX_SEARCH_CONSTRAINTS = 24


def _check_c(c) -> Fraction:
    c = Fraction(c)
    if not 0 <= c <= 1:
        raise CspError("c must lie in [0, 1]")
    return c


def theta_dicut(c) -> Fraction:
    c = _check_c(c)
    if c <= Fraction(1, 4):
        return c
    if c <= Fraction(1, 2):
        return Fraction(1, 4)
    return (3 * c - 1) / 2


def theta_2sat(c) -> Fraction:
    c = _check_c(c)
    if c <= Fraction(1, 2):
        return c
    return (2 * c + 1) / 4


CLOSED_FORMS: dict[str, Callable[[Fraction], Fraction]] = {"dicut": theta_dicut, "2sat": theta_2sat}


@dataclass(frozen=True)
class CurvePoint:
    c: Fraction
    theta: Fraction | None = None
    lb: Fraction | None = None
    ub: Fraction | None = None
    witness: Instance | None = None

    def __post_init__(self):
        if self.lb is not None and self.ub is not None and self.lb > self.ub:
            raise CspError("lower bound exceeds upper bound")

    @property
    def value(self) -> Fraction:
        return self.theta if self.theta is not None else self.ub


def grid(steps: int) -> list[Fraction]:
    return [Fraction(i, steps) for i in range(steps + 1)]


def named_instances(family_name: str | None) -> list[Instance]:
    """Known extremal instances, injected ahead of random search."""
    if family_name == "dicut":
        return [complete_dicut(n) for n in range(2, MAX_SEARCH_VARS + 1)]
    if family_name == "2sat":
        return [opposite_units_2sat()] + [complete_e2sat(n) for n in range(2, 5)]
    return []


def _same_family(a: PredicateFamily, b: PredicateFamily) -> bool:
    return a.arity == b.arity and a.alphabet_size == b.alphabet_size and set(b.tables) <= set(a.tables)


def _rebase(inst: Instance, family: PredicateFamily) -> Instance:
    """Re-express an instance over ``family`` (which must contain its predicates)."""
    cons = tuple((scope, family.tables.index(inst.family.tables[p])) for scope, p in inst.constraints)
    return Instance(inst.num_vars, family, cons)


def empirical_theta_upper(
    family: PredicateFamily,
    c,
    budget: int,
    seed: int,
    family_name: str | None = None,
) -> CurvePoint:
    """Smallest brute-force value among searched instances with LP value >= c.

    The lower end of the interval is the closed form when one is known and 0
    otherwise.  With no qualifying instance the upper end is 1.
    """
    c = _check_c(c)
    rng = np.random.default_rng(seed)
    candidates = [
        _rebase(inst, family) for inst in named_instances(family_name) if _same_family(family, inst.family)
    ]
    best, witness = Fraction(1), None
    closed = CLOSED_FORMS.get(family_name)
    lb = closed(c) if closed else Fraction(0)

    def consider(inst):
        nonlocal best, witness
        if lp_value(inst) >= c:
            v, _ = brute_force_value(inst)
            if witness is None or v < best:
                best, witness = v, inst

    for inst in candidates:
        consider(inst)
    for _ in range(budget):
        n = int(rng.integers(family.arity, MAX_SEARCH_VARS + 1))
        m = int(rng.integers(1, MAX_SEARCH_CONSTRAINTS + 1))
        consider(random_instance(family, n, m, rng))
    return CurvePoint(c, None, min(lb, best), best, witness)


def check_curve_shape(points: Sequence[CurvePoint], closed_form: Callable | None = None, tol: Fraction = Fraction(0)) -> dict:
    """Monotonicity, convexity on the part where theta < c, and closed-form identities."""
    cs = [p.c for p in points]
    if cs != sorted(cs):
        raise CspError("points must be sorted by c")
    vals = [p.value for p in points]
    violations = []
    for a, b in zip(points, points[1:]):
        if b.value < a.value - tol:
            violations.append({"kind": "monotone", "c": str(b.c)})
    star = [p for p in points if p.value < p.c]
    for a, b, d in zip(star, star[1:], star[2:]):
        # value at b must not exceed the chord from a to d
        chord = a.value + (d.value - a.value) * (b.c - a.c) / (d.c - a.c)
        if b.value > chord + tol:
            violations.append({"kind": "convex", "c": str(b.c)})
    if closed_form is not None:
        for p in points:
            if p.value != closed_form(p.c):
                violations.append({"kind": "identity", "c": str(p.c)})
    return {
        "points": len(vals),
        "monotone": not any(v["kind"] == "monotone" for v in violations),
        "convex": not any(v["kind"] == "convex" for v in violations),
        "identities": not any(v["kind"] == "identity" for v in violations),
        "violations": violations,
        "ok": not violations,
    }


def closed_curve(family_name: str, steps: int) -> list[CurvePoint]:
    f = CLOSED_FORMS[family_name]
    return [CurvePoint(c, f(c)) for c in grid(steps)]
