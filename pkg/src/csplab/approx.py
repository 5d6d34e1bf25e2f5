"""Local LP estimation over bounded-degree neighborhoods, ApproxLP and the gap decider.

The local estimator solves the BasicLP of the constraints inside a
neighborhood.  A scope position whose variable lies outside the ball gets a
private variable of its own, so the local program is a relaxation of the
part of the global one that the ball can see.  Constraints are ordered by
identifier and variables numbered by first appearance, which makes the
estimate a deterministic function of the labeled neighborhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Generator, Hashable

from .csp import Instance, PredicateFamily
from .degree import BlowupParams, OracleState
from .errors import CspError
from .lp import solve_basic_lp
from .stream import PassContext, ProgramAlgorithm, StreamRun, int_bits, run_multipass, DEFAULT_PASS_CAP

_SAMPLE_TAG = 0xA11


@dataclass(frozen=True)
class Neighborhood:
    """Ball of radius ``radius`` around constraint ``root`` in the variable/constraint graph.

    ``constraints`` maps constraint ids to predicate indices, ``edges`` maps
    (constraint id, position) to a variable id and ``distance`` records the
    BFS depth of every node, keyed by ("c", id) or ("v", id).
    """

    root: Hashable
    radius: int
    constraints: dict
    edges: dict
    distance: dict

    @property
    def variables(self) -> set:
        return set(self.edges.values())

    def size(self) -> int:
        return len(self.constraints) + len(self.variables) + len(self.edges)


def extract_neighborhood(instance: Instance, i: int, r: int) -> Neighborhood:
    if not 0 <= i < instance.m:
        raise CspError(f"constraint index {i} out of range")
    if r < 1:
        raise CspError("radius must be at least 1")
    incident: dict[int, list[tuple[int, int]]] = {}
    for c, (scope, _) in enumerate(instance.constraints):
        for t, v in enumerate(scope):
            incident.setdefault(v, []).append((c, t))
    dist = {("c", i): 0}
    cons = {i: instance.constraints[i][1]}
    edges = {}
    frontier = [("c", i)]
    for d in range(r):
        nxt = []
        for kind, node in frontier:
            if kind == "c":
                for t, v in enumerate(instance.constraints[node][0]):
                    edges[(node, t)] = v
                    if ("v", v) not in dist:
                        dist[("v", v)] = d + 1
                        nxt.append(("v", v))
            else:
                for c, t in incident[node]:
                    edges[(c, t)] = node
                    if ("c", c) not in dist:
                        dist[("c", c)] = d + 1
                        cons[c] = instance.constraints[c][1]
                        nxt.append(("c", c))
        frontier = nxt
    return Neighborhood(i, r, cons, edges, dist)


def neighborhood_instance(nbhd: Neighborhood, family: PredicateFamily) -> tuple[Instance, int]:
    """Sub-instance seen by the ball and the position of the root in it."""
    k = family.arity
    order = sorted(nbhd.constraints)
    ids: dict = {}
    fresh = 0
    cons = []
    for c in order:
        scope = []
        for t in range(k):
            key = ("v", nbhd.edges[(c, t)]) if (c, t) in nbhd.edges else ("p", c, t)
            if key not in ids:
                ids[key] = fresh
                fresh += 1
            scope.append(ids[key])
        cons.append((tuple(scope), nbhd.constraints[c]))
    return Instance(fresh, family, tuple(cons)), order.index(nbhd.root)


@lru_cache(maxsize=65536)
def _root_block(instance: Instance, pos: int) -> tuple[Fraction, ...]:
    return solve_basic_lp(instance).z[pos]


def local_lp_estimate(nbhd: Neighborhood, family: PredicateFamily) -> tuple[Fraction, ...]:
    """Root constraint's z-block at the exact optimum of the local BasicLP."""
    sub, pos = neighborhood_instance(nbhd, family)
    return _root_block(sub, pos)


def root_mass(nbhd: Neighborhood, family: PredicateFamily) -> Fraction:
    z = local_lp_estimate(nbhd, family)
    table = family.tables[nbhd.constraints[nbhd.root]]
    return sum((z[b] for b, ok in enumerate(table) if ok), Fraction(0))


def local_value(instance: Instance, r: int) -> Fraction:
    """Average root mass over every constraint, i.e. the exact mean ApproxLP targets."""
    total = sum((root_mass(extract_neighborhood(instance, i, r), instance.family) for i in range(instance.m)), Fraction(0))
    return total / instance.m


def queries_for_target(eps0: Fraction) -> int:
    return math.ceil(10 / Fraction(eps0) ** 2)


def _oracle_ball(
    oracle: OracleState, root: tuple[int, int], r: int, m: int, family: PredicateFamily
) -> Generator:
    """BFS through oracle answers.  Constraint ids are (round, i), variable ids (v, j)."""
    k = family.arity
    dist = {("c", root): 0}
    cons = {}
    edges = {}
    frontier = [root]
    d = 0
    while frontier and d < r:
        nxt = []
        for rnd, i in frontier:
            for t in range(k):
                ans = yield from oracle.query(i, rnd, t, m, k)
                var = (ans.var, ans.j)
                edges[((rnd, i), t)] = var
                if (rnd, i) == root:
                    cons[root] = next(p for i2, r2, t2, p in ans.copies if (r2, i2, t2) == (rnd, i, t))
                if ("v", var) not in dist:
                    dist[("v", var)] = d + 1
                if d + 2 <= r:
                    for i2, r2, t2, p2 in ans.copies:
                        cid = (r2, i2)
                        edges[(cid, t2)] = var
                        if ("c", cid) not in dist:
                            dist[("c", cid)] = d + 2
                            cons[cid] = p2
                            nxt.append(cid)
        frontier = nxt
        d += 2
    return Neighborhood((root[0], root[1]), r, cons, edges, dist)


@dataclass(frozen=True)
class ApproxResult:
    estimate: Fraction
    passes: int
    queries: int
    bits: int
    samples: tuple


def approx_lp_program(family: PredicateFamily, params: BlowupParams, Q: int, r: int):
    if Q < 1 or r < 1:
        raise CspError("Q and r must be positive")

    def program(ctx: PassContext):
        counter = {"m": 0}

        def count(c):
            counter["m"] += 1

        yield count
        m = counter["m"]
        ctx.bits = int_bits(m)
        oracle = OracleState(m, params, ctx.seed)
        rng = ctx.rng(_SAMPLE_TAG)
        total = Fraction(0)
        samples = []
        for _ in range(Q):
            i = int(rng.integers(m))
            rnd = int(rng.integers(params.B))
            nbhd = yield from _oracle_ball(oracle, (rnd, i), r, m, family)
            mass = root_mass(nbhd, family)
            total += mass
            samples.append(((i, rnd), mass))
            ctx.bits = int_bits(m) + oracle.bits() + 64
        return ApproxResult(total / Q, 1 + oracle.passes_used, oracle.queries_issued, 0, tuple(samples))

    return program


def approx_lp(
    instance: Instance, params: BlowupParams, Q: int, r: int, seed: int, pass_cap: int = DEFAULT_PASS_CAP
) -> tuple[ApproxResult, StreamRun]:
    alg = ProgramAlgorithm(approx_lp_program(instance.family, params, Q, r))
    run = run_multipass(alg, instance, seed, pass_cap)
    res = run.output
    res = ApproxResult(res.estimate, res.passes, res.queries, run.peak_tracked_bits, res.samples)
    return res, run


def threshold(c: Fraction, epsilon: Fraction) -> Fraction:
    """Midpoint c + eps/2 of the admissible interval [c + 2eps/5, c + 3eps/5]."""
    return Fraction(c) + Fraction(epsilon) / 2


def gap_decider(
    instance: Instance,
    c: Fraction,
    epsilon: Fraction,
    seed: int,
    params: BlowupParams,
    Q: int,
    r: int,
    pass_cap: int = DEFAULT_PASS_CAP,
) -> tuple[int, ApproxResult]:
    c, epsilon = Fraction(c), Fraction(epsilon)
    if not (0 < c < 1 and 0 < epsilon < 1):
        raise CspError("need 0 < c < 1 and 0 < eps < 1")
    res, _ = approx_lp(instance, params, Q, r, seed, pass_cap)
    return int(res.estimate >= threshold(c, epsilon)), res
