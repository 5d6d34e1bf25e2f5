"""CSP data model, exact evaluation and value oracles.

Predicates are dense truth tables over Sigma^k.  A tuple ``b`` is stored at
its lexicographic index, first coordinate most significant::

    index(b) = b[0]*q**(k-1) + b[1]*q**(k-2) + ... + b[k-1]

Every module in the package uses this order.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceededError, CspError

DEFAULT_ASSIGNMENT_CAP = 2**24

Assignment = tuple  # tuple[int, ...] of length num_vars


def assignment_cap() -> int:
    """Brute-force cap, overridable through ``CSPLAB_CAP_ASSIGNMENTS``."""
    raw = os.environ.get("CSPLAB_CAP_ASSIGNMENTS")
    return int(raw) if raw else DEFAULT_ASSIGNMENT_CAP


def tuple_index(b: Sequence[int], q: int) -> int:
    idx = 0
    for s in b:
        idx = idx * q + s
    return idx


def index_tuple(idx: int, k: int, q: int) -> tuple[int, ...]:
    out = [0] * k
    for t in range(k - 1, -1, -1):
        idx, out[t] = divmod(idx, q)
    return tuple(out)


@dataclass(frozen=True)
class PredicateFamily:
    arity: int
    alphabet_size: int
    tables: tuple[tuple[bool, ...], ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.arity < 1:
            raise CspError("arity must be >= 1")
        if self.alphabet_size < 2:
            raise CspError("alphabet must have at least two symbols")
        if not self.tables:
            raise CspError("family needs at least one predicate")
        size = self.alphabet_size**self.arity
        tables = tuple(tuple(bool(x) for x in t) for t in self.tables)
        for t in tables:
            if len(t) != size:
                raise CspError(f"truth table has {len(t)} entries, expected {size}")
        if not any(any(t) for t in tables):
            raise CspError("every predicate is identically false")
        names = tuple(self.names) or tuple(f"p{i}" for i in range(len(tables)))
        if len(names) != len(tables):
            raise CspError("one name per predicate required")
        if len(set(names)) != len(names):
            raise CspError("predicate names must be unique")
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "names", names)

    @property
    def num_tuples(self) -> int:
        return self.alphabet_size**self.arity

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise CspError(f"unknown predicate {name!r}") from None

    def evaluate(self, p: int, b: Sequence[int]) -> bool:
        return self.tables[p][tuple_index(b, self.alphabet_size)]

    def tuples(self) -> list[tuple[int, ...]]:
        """All of Sigma^k in table order."""
        return list(itertools.product(range(self.alphabet_size), repeat=self.arity))

    def table_array(self) -> np.ndarray:
        return np.array(self.tables, dtype=bool)


@dataclass(frozen=True)
class Instance:
    num_vars: int
    family: PredicateFamily
    constraints: tuple[tuple[tuple[int, ...], int], ...] = field(default=())

    def __post_init__(self):
        if self.num_vars < 0:
            raise CspError("num_vars must be nonnegative")
        k = self.family.arity
        cons = []
        for scope, p in self.constraints:
            scope = tuple(int(v) for v in scope)
            if len(scope) != k:
                raise CspError(f"scope {scope} does not have arity {k}")
            if len(set(scope)) != k:
                raise CspError(f"scope {scope} repeats a variable")
            if any(v < 0 or v >= self.num_vars for v in scope):
                raise CspError(f"scope {scope} out of range for {self.num_vars} vars")
            if not 0 <= p < len(self.family.tables):
                raise CspError(f"predicate index {p} out of range")
            cons.append((scope, int(p)))
        object.__setattr__(self, "constraints", tuple(cons))

    @property
    def m(self) -> int:
        return len(self.constraints)

    @property
    def k(self) -> int:
        return self.family.arity

    @property
    def q(self) -> int:
        return self.family.alphabet_size


def _check_assignment(instance: Instance, tau: Sequence[int]) -> None:
    if len(tau) != instance.num_vars:
        raise CspError(f"assignment has length {len(tau)}, expected {instance.num_vars}")
    if any(s < 0 or s >= instance.q for s in tau):
        raise CspError("assignment symbol outside the alphabet")


def evaluate_constraint(instance: Instance, i: int, tau: Sequence[int]) -> bool:
    if not 0 <= i < instance.m:
        raise CspError(f"constraint index {i} out of range")
    scope, p = instance.constraints[i]
    return instance.family.evaluate(p, [tau[v] for v in scope])


def satisfied_count(instance: Instance, tau: Sequence[int]) -> int:
    _check_assignment(instance, tau)
    fam = instance.family
    return sum(fam.evaluate(p, [tau[v] for v in scope]) for scope, p in instance.constraints)


def instance_value(instance: Instance, tau: Sequence[int]) -> Fraction:
    """Exact fraction of constraints satisfied by ``tau``."""
    if instance.m == 0:
        raise CspError("value of an empty instance is undefined")
    return Fraction(satisfied_count(instance, tau), instance.m)


def degree(instance: Instance, v: int) -> int:
    if not 0 <= v < instance.num_vars:
        raise CspError(f"variable {v} out of range")
    return sum(scope.count(v) for scope, _ in instance.constraints)


def degrees(instance: Instance) -> list[int]:
    deg = [0] * instance.num_vars
    for scope, _ in instance.constraints:
        for v in scope:
            deg[v] += 1
    return deg


def max_degree(instance: Instance) -> int:
    return max(degrees(instance), default=0)


def used_variables(instance: Instance) -> list[int]:
    return sorted({v for scope, _ in instance.constraints for v in scope})


def connected_components(instance: Instance) -> list[list[int]]:
    """Constraint-index groups of the variable/constraint incidence graph.

    Components are listed by their smallest constraint index; indices inside
    a component are increasing.
    """
    parent = list(range(instance.num_vars))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for scope, _ in instance.constraints:
        r0 = find(scope[0])
        for v in scope[1:]:
            r = find(v)
            if r != r0:
                parent[r] = r0
    groups: dict[int, list[int]] = {}
    for i, (scope, _) in enumerate(instance.constraints):
        groups.setdefault(find(scope[0]), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def sub_instance(instance: Instance, indices: Sequence[int]) -> tuple[Instance, list[int]]:
    """Instance on the given constraints, variables relabelled by first use.

    Returns the sub-instance and the list mapping new variable ids to old ones.
    """
    relabel: dict[int, int] = {}
    cons = []
    for i in indices:
        scope, p = instance.constraints[i]
        cons.append((tuple(relabel.setdefault(v, len(relabel)) for v in scope), p))
    back = [0] * len(relabel)
    for old, new in relabel.items():
        back[new] = old
    return Instance(len(relabel), instance.family, tuple(cons)), back


def _satisfied_counts(instance: Instance, vars_: list[int], start: int, stop: int) -> np.ndarray:
    """Satisfied-constraint counts for assignment indices [start, stop).

    Assignment index ``a`` is read in mixed radix over ``vars_`` with the first
    listed variable most significant.
    """
    q = instance.q
    n = len(vars_)
    idx = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((n, idx.size), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        idx, digits[pos] = np.divmod(idx, q)
    col = {v: pos for pos, v in enumerate(vars_)}
    tables = instance.family.table_array()
    counts = np.zeros(stop - start, dtype=np.int64)
    for scope, p in instance.constraints:
        t = np.zeros(stop - start, dtype=np.int64)
        for v in scope:
            t = t * q + digits[col[v]]
        counts += tables[p][t]
    return counts


def brute_force_value(instance: Instance, cap: int | None = None) -> tuple[Fraction, Assignment]:
    """Exact optimum by exhaustive enumeration.

    Only variables that occur in some constraint are enumerated; the others are
    fixed to symbol 0 in the returned witness.  The cap bounds the number of
    enumerated assignments.  Ties go to the first assignment in mixed-radix
    order.
    """
    if instance.m == 0:
        raise CspError("value of an empty instance is undefined")
    cap = assignment_cap() if cap is None else cap
    vars_ = used_variables(instance)
    total = instance.q ** len(vars_)
    if total > cap:
        raise CapExceededError(f"{total} assignments exceed the cap {cap}")
    best, best_idx = -1, 0
    chunk = 1 << 16
    for start in range(0, total, chunk):
        counts = _satisfied_counts(instance, vars_, start, min(total, start + chunk))
        j = int(np.argmax(counts))
        if counts[j] > best:
            best, best_idx = int(counts[j]), start + j
            if best == instance.m:
                break
    tau = [0] * instance.num_vars
    idx = best_idx
    for v in reversed(vars_):
        idx, tau[v] = divmod(idx, instance.q)
    return Fraction(best, instance.m), tuple(tau)


def component_brute_force(instance: Instance, cap: int | None = None) -> tuple[Fraction, Assignment]:
    """Exact optimum by enumerating each connected component separately.

    The cap applies to every component on its own.
    """
    if instance.m == 0:
        raise CspError("value of an empty instance is undefined")
    tau = [0] * instance.num_vars
    for comp in connected_components(instance):
        sub, back = sub_instance(instance, comp)
        _, w = brute_force_value(sub, cap)
        for new, old in enumerate(back):
            tau[old] = w[new]
    return instance_value(instance, tau), tuple(tau)


def local_search_value(instance: Instance, restarts: int = 16, seed: int = 0) -> tuple[Fraction, Assignment]:
    """Best-improvement single-flip hill climbing with random restarts.

    Among flips with equal gain the lowest (variable, symbol) pair wins.
    """
    if instance.m == 0:
        raise CspError("value of an empty instance is undefined")
    rng = np.random.default_rng(seed)
    fam, q = instance.family, instance.q
    incident: list[list[int]] = [[] for _ in range(instance.num_vars)]
    for i, (scope, _) in enumerate(instance.constraints):
        for v in scope:
            incident[v].append(i)

    def sat(i, tau):
        scope, p = instance.constraints[i]
        return fam.evaluate(p, [tau[v] for v in scope])

    best_count, best_tau = -1, None
    for _ in range(max(1, restarts)):
        tau = [int(s) for s in rng.integers(0, q, size=instance.num_vars)]
        count = sum(sat(i, tau) for i in range(instance.m))
        while True:
            gain_best, move = 0, None
            for v in range(instance.num_vars):
                old = tau[v]
                base = sum(sat(i, tau) for i in incident[v])
                for s in range(q):
                    if s == old:
                        continue
                    tau[v] = s
                    gain = sum(sat(i, tau) for i in incident[v]) - base
                    tau[v] = old
                    if gain > gain_best:
                        gain_best, move = gain, (v, s)
            if move is None:
                break
            tau[move[0]] = move[1]
            count += gain_best
        if count > best_count:
            best_count, best_tau = count, tuple(tau)
            if count == instance.m:
                break
    return Fraction(best_count, instance.m), best_tau


# ---------------------------------------------------------------------------
# named families and instances


def dicut_family() -> PredicateFamily:
    # satisfied only by (1, 0)
    return PredicateFamily(2, 2, ((False, False, True, False),), ("dicut",))


def two_sat_family() -> PredicateFamily:
    """f0, f1 are the unary-on-first-coordinate predicates; fXY rejects only (X, Y)."""
    tables = [
        (True, True, False, False),
        (False, False, True, True),
    ]
    names = ["f0", "f1"]
    for b in itertools.product((0, 1), repeat=2):
        t = [True] * 4
        t[tuple_index(b, 2)] = False
        tables.append(tuple(t))
        names.append(f"f{b[0]}{b[1]}")
    return PredicateFamily(2, 2, tuple(tables), tuple(names))


def e2sat_family() -> PredicateFamily:
    fam = two_sat_family()
    return PredicateFamily(2, 2, fam.tables[2:], fam.names[2:])


def complete_dicut(n: int) -> Instance:
    """Both arcs (i, j) and (j, i) for every pair i < j."""
    cons = []
    for i, j in itertools.combinations(range(n), 2):
        cons.append(((i, j), 0))
        cons.append(((j, i), 0))
    return Instance(n, dicut_family(), tuple(cons))


def complete_e2sat(n: int) -> Instance:
    """All four two-literal clauses on every pair i < j."""
    fam = two_sat_family()
    cons = []
    for i, j in itertools.combinations(range(n), 2):
        for name in ("f00", "f01", "f10", "f11"):
            cons.append(((i, j), fam.index_of(name)))
    return Instance(n, fam, tuple(cons))


def opposite_units_2sat() -> Instance:
    fam = two_sat_family()
    return Instance(2, fam, (((0, 1), fam.index_of("f0")), ((0, 1), fam.index_of("f1"))))


def random_instance(family: PredicateFamily, num_vars: int, num_constraints: int, rng: np.random.Generator) -> Instance:
    """Uniform scopes of distinct variables and uniform predicates."""
    if num_vars < family.arity:
        raise CspError("not enough variables for one scope")
    cons = []
    for _ in range(num_constraints):
        scope = tuple(int(v) for v in rng.choice(num_vars, size=family.arity, replace=False))
        cons.append((scope, int(rng.integers(len(family.tables)))))
    return Instance(num_vars, family, tuple(cons))


# ---------------------------------------------------------------------------
# text / JSON formats


def _table_bits(table: Iterable[bool]) -> str:
    return "".join("1" if x else "0" for x in table)


def format_instance(instance: Instance) -> str:
    fam = instance.family
    lines = [f"maxcsp k={fam.arity} sigma={fam.alphabet_size} vars={instance.num_vars} constraints={instance.m}"]
    for name, table in zip(fam.names, fam.tables):
        lines.append(f"pred {name} {_table_bits(table)}")
    for scope, p in instance.constraints:
        lines.append("c " + " ".join([fam.names[p], *map(str, scope)]))
    return "\n".join(lines) + "\n"


def _parse_bits(bits: str) -> tuple[bool, ...]:
    if set(bits) - {"0", "1"}:
        raise CspError(f"bad truth table {bits!r}")
    return tuple(c == "1" for c in bits)


def parse_instance(text: str) -> Instance:
    """Parse the line format, or its JSON mirror when the text starts with '{'."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return instance_from_json(json.loads(stripped))
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or not lines[0].startswith("maxcsp"):
        raise CspError("missing 'maxcsp' header")
    header = {}
    for tok in lines[0].split()[1:]:
        key, _, val = tok.partition("=")
        header[key] = int(val)
    try:
        k, q, n, m = header["k"], header["sigma"], header["vars"], header["constraints"]
    except KeyError as exc:
        raise CspError(f"header lacks {exc}") from None
    names, tables, raw_cons = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "pred" and len(parts) == 3:
            names.append(parts[1])
            tables.append(_parse_bits(parts[2]))
        elif parts[0] == "c":
            raw_cons.append(parts[1:])
        else:
            raise CspError(f"unrecognised line {ln!r}")
    fam = PredicateFamily(k, q, tuple(tables), tuple(names))
    cons = []
    for parts in raw_cons:
        if len(parts) != k + 1:
            raise CspError(f"constraint {parts} does not have {k} variables")
        cons.append((tuple(int(v) for v in parts[1:]), fam.index_of(parts[0])))
    if len(cons) != m:
        raise CspError(f"header declares {m} constraints, found {len(cons)}")
    return Instance(n, fam, tuple(cons))


def instance_to_json(instance: Instance) -> dict:
    fam = instance.family
    return {
        "k": fam.arity,
        "sigma": fam.alphabet_size,
        "vars": instance.num_vars,
        "predicates": [{"name": n, "table": _table_bits(t)} for n, t in zip(fam.names, fam.tables)],
        "constraints": [[fam.names[p], *scope] for scope, p in instance.constraints],
    }


def instance_from_json(obj: dict) -> Instance:
    fam = PredicateFamily(
        obj["k"],
        obj["sigma"],
        tuple(_parse_bits(p["table"]) for p in obj["predicates"]),
        tuple(p["name"] for p in obj["predicates"]),
    )
    cons = tuple((tuple(c[1:]), fam.index_of(c[0])) for c in obj["constraints"])
    return Instance(obj["vars"], fam, cons)


def load_instance(path: str | os.PathLike) -> Instance:
    with open(path) as fh:
        return parse_instance(fh.read())


def save_instance(instance: Instance, path: str | os.PathLike) -> None:
    text = format_instance(instance)
    if str(path).endswith(".json"):
        text = json.dumps(instance_to_json(instance), indent=1) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
