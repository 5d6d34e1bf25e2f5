"""Random bounded-degree instances and a lazy streaming oracle for them.

Every variable v gets ``D * deg(v)`` slots, flattened to ids by prefix sums
in variable order.  In each of ``B`` rounds every constraint is copied once,
and the s-th occurrence of v in that round takes slot ``perm[v, round][s]``,
where the permutation comes from a Philox stream keyed by (seed, v, round).
Taking a prefix of a uniform permutation is the same as drawing slots one at
a time without replacement, and it lets the oracle below rebuild any part of
the instance from the seed alone.

Copy (i, round) of the sampled instance sits at index ``round * m + i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Generator, Sequence

import numpy as np

from .csp import Instance, PredicateFamily, degrees
from .errors import CspError
from .stream import PassHandler, keyed_rng

_PERM_TAG = 0x51A7


@dataclass(frozen=True)
class BlowupParams:
    B: int
    D: int
    epsilon: Fraction | None = None

    def __post_init__(self):
        if self.B < 1 or self.D < 1:
            raise CspError("B and D must be positive")


def choose_params(epsilon: Fraction, family: PredicateFamily) -> BlowupParams:
    """D = ceil(10k/eps) and the smallest B with |S|^(mkD) exp(-mB eps^2/16) <= 0.01 for every m >= 1."""
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise CspError("epsilon must lie in (0, 1)")
    k = family.arity
    D = math.ceil(Fraction(10 * k) / epsilon)
    B = math.ceil(16 * (k * D * math.log(family.alphabet_size) + 6) / float(epsilon) ** 2)
    return BlowupParams(B, D, epsilon)


@dataclass(frozen=True)
class SlotMap:
    D: int
    degs: tuple[int, ...]
    offsets: tuple[int, ...]  # offsets[v] = first slot id of v; last entry = total

    @classmethod
    def build(cls, instance: Instance, D: int) -> "SlotMap":
        degs = tuple(degrees(instance))
        offsets = [0]
        for d in degs:
            offsets.append(offsets[-1] + D * d)
        return cls(D, degs, tuple(offsets))

    @property
    def total(self) -> int:
        return self.offsets[-1]

    def size(self, v: int) -> int:
        return self.D * self.degs[v]

    def flat(self, v: int, j: int) -> int:
        if not 0 <= j < self.size(v):
            raise CspError(f"slot {j} out of range for variable {v}")
        return self.offsets[v] + j

    def owner(self, slot: int) -> tuple[int, int]:
        if not 0 <= slot < self.total:
            raise CspError(f"slot {slot} out of range")
        # rightmost offset <= slot; unused variables share offsets with the next one
        v = int(np.searchsorted(self.offsets, slot, side="right")) - 1
        return v, slot - self.offsets[v]


def slot_permutation(seed: int, v: int, rnd: int, size: int) -> np.ndarray:
    return keyed_rng(seed, _PERM_TAG, v, rnd).permutation(size)


def occurrences(instance: Instance) -> list[list[tuple[int, int]]]:
    """occ[v] lists the (i, t) with v at position t of constraint i, in stream order."""
    occ: list[list[tuple[int, int]]] = [[] for _ in range(instance.num_vars)]
    for i, (scope, _) in enumerate(instance.constraints):
        for t, v in enumerate(scope):
            occ[v].append((i, t))
    return occ


def sample_bounded_instance(instance: Instance, params: BlowupParams, seed: int) -> Instance:
    if instance.m == 0:
        raise CspError("cannot blow up an empty instance")
    smap = SlotMap.build(instance, params.D)
    occ = occurrences(instance)
    m, k = instance.m, instance.k
    cons = []
    for rnd in range(params.B):
        scopes = [[0] * k for _ in range(m)]
        for v, lst in enumerate(occ):
            if not lst:
                continue
            perm = slot_permutation(seed, v, rnd, smap.size(v))
            for s, (i, t) in enumerate(lst):
                scopes[i][t] = smap.offsets[v] + int(perm[s])
        for i, (_, p) in enumerate(instance.constraints):
            cons.append((tuple(scopes[i]), p))
    return Instance(smap.total, instance.family, tuple(cons))


def lift_assignment(instance: Instance, params: BlowupParams, tau: Sequence[int]) -> tuple[int, ...]:
    """Copy tau(v) onto every slot of v."""
    smap = SlotMap.build(instance, params.D)
    out = []
    for v in range(instance.num_vars):
        out.extend([tau[v]] * smap.size(v))
    return tuple(out)


def sidecar(instance: Instance, params: BlowupParams, seed: int) -> str:
    smap = SlotMap.build(instance, params.D)
    return json.dumps({"B": params.B, "D": params.D, "seed": seed, "slot_offsets": list(smap.offsets)})


# ---------------------------------------------------------------------------
# lazy oracle


@dataclass(frozen=True)
class SlotNeighborhood:
    """Slot (v, j) and every constraint copy (i, round, t, predicate) that uses it at position t."""

    var: int
    j: int
    copies: tuple[tuple[int, int, int, int], ...]


@dataclass
class OracleState:
    instance_m: int | None
    params: BlowupParams
    seed: int
    cache: dict = field(default_factory=dict)
    answers: list = field(default_factory=list)  # the list L
    queries_issued: int = 0
    passes_used: int = 0

    def bits(self) -> int:
        # each stored copy costs three indices plus a predicate id
        words = sum(4 * len(a.copies) + 3 for a in self.answers)
        return 64 * words

    def query(self, i: int, rnd: int, t: int, m: int, k: int) -> Generator[PassHandler, None, SlotNeighborhood]:
        """Answer query (i, rnd, t); yields one handler per stream pass."""
        if not (0 <= i < m and 0 <= rnd < self.params.B and 0 <= t < k):
            raise CspError(f"malformed query {(i, rnd, t)}")
        key = (i, rnd, t)
        if key in self.cache:
            return self.cache[key]

        # pass 1: the t-th variable of constraint i
        found = {"pos": 0}

        def fetch(c):
            if found["pos"] == i:
                found["v"] = c[0][t]
            found["pos"] += 1

        yield fetch
        v = found["v"]

        # pass 2: degree of v and the rank of (i, t) among its occurrences
        stats = {"deg": 0, "rank": None, "pos": 0}

        def count(c):
            for tt, u in enumerate(c[0]):
                if u == v:
                    if stats["pos"] == i and tt == t:
                        stats["rank"] = stats["deg"]
                    stats["deg"] += 1
            stats["pos"] += 1

        yield count
        deg, rank = stats["deg"], stats["rank"]
        size = self.params.D * deg
        j = int(slot_permutation(self.seed, v, rnd, size)[rank])

        # pass 3: for each round, which occurrence of v took slot j
        wanted = {}
        for r2 in range(self.params.B):
            inv = int(np.argsort(slot_permutation(self.seed, v, r2, size))[j])
            if inv < deg:
                wanted[inv] = wanted.get(inv, []) + [r2]
        copies = []
        walk = {"deg": 0, "pos": 0}

        def gather(c):
            for tt, u in enumerate(c[0]):
                if u == v:
                    for r2 in wanted.get(walk["deg"], ()):
                        copies.append((walk["pos"], r2, tt, c[1]))
                    walk["deg"] += 1
            walk["pos"] += 1

        yield gather
        ans = SlotNeighborhood(v, j, tuple(sorted(copies, key=lambda c: (c[1], c[0], c[2]))))
        self.cache[key] = ans
        self.answers.append(ans)
        self.queries_issued += 1
        self.passes_used += 3
        return ans


def answer_directly(instance: Instance, state: OracleState, i: int, rnd: int, t: int) -> SlotNeighborhood:
    """Drive one oracle query against an in-memory stream (for tests and tools)."""
    gen = state.query(i, rnd, t, instance.m, instance.k)
    try:
        handler = next(gen)
        while True:
            for c in instance.constraints:
                handler(c)
            handler = gen.send(None)
    except StopIteration as stop:
        return stop.value


def reconstruct_from_oracle(instance: Instance, params: BlowupParams, seed: int) -> tuple[Instance, OracleState]:
    """Query every (i, round, t) and assemble the implied bounded-degree instance.

    Raises CspError if any two answers contradict each other.
    """
    state = OracleState(instance.m, params, seed)
    smap = SlotMap.build(instance, params.D)
    m, k = instance.m, instance.k
    cons = []
    by_slot: dict[tuple[int, int], set] = {}
    for rnd in range(params.B):
        for i, (scope, p) in enumerate(instance.constraints):
            slots = []
            for t in range(k):
                ans = answer_directly(instance, state, i, rnd, t)
                if ans.var != scope[t]:
                    raise CspError("oracle returned a slot of the wrong variable")
                if (i, rnd, t, p) not in ans.copies:
                    raise CspError("oracle answer omits the queried copy")
                prev = by_slot.setdefault((ans.var, ans.j), set(ans.copies))
                if prev != set(ans.copies):
                    raise CspError("inconsistent neighborhoods for one slot")
                slots.append(smap.flat(ans.var, ans.j))
            cons.append((tuple(slots), p))
    rebuilt = Instance(smap.total, instance.family, tuple(cons))
    # every copy listed in any neighborhood must actually use that slot
    for (v, j), copies in by_slot.items():
        for (i2, r2, t2, p2) in copies:
            scope2, q2 = rebuilt.constraints[r2 * m + i2]
            if scope2[t2] != smap.flat(v, j) or q2 != p2:
                raise CspError("neighborhood lists a copy that does not use the slot")
    return rebuilt, state


def check_bounded_instance(instance: Instance, sampled: Instance, params: BlowupParams) -> list[str]:
    """Return a list of violated structural invariants (empty when legal)."""
    problems = []
    smap = SlotMap.build(instance, params.D)
    m = instance.m
    if sampled.num_vars != smap.total:
        problems.append("variable count differs from sum of D*deg(v)")
    if sampled.m != m * params.B:
        problems.append("constraint count differs from m*B")
        return problems
    for rnd in range(params.B):
        used = set()
        for i, (scope, p) in enumerate(instance.constraints):
            s2, p2 = sampled.constraints[rnd * m + i]
            if p2 != p:
                problems.append(f"predicate changed at copy {(i, rnd)}")
            for v, slot in zip(scope, s2):
                if smap.owner(slot)[0] != v:
                    problems.append(f"slot {slot} does not belong to variable {v}")
                if slot in used:
                    problems.append(f"slot {slot} reused in round {rnd}")
                used.add(slot)
    if max(degrees(sampled), default=0) > params.B:
        problems.append("degree exceeds B")
    return problems
