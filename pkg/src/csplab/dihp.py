"""Labeled matchings, the masking kernel and hard yes/no input distributions.

Vertex ``(v, l)`` of the blow-up ``V x [n]`` has flat id ``v * n + l``.  The
universe of an edge ``e = (v_1, ..., v_k)`` has parts ``{v_t} x [n]``.
Players are the pairs (edge index, copy) in lexicographic order, and the
reduced instance concatenates their segments in that order, each segment
sorted by edge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .csp import Instance, PredicateFamily, component_brute_force, index_tuple, local_search_value
from .errors import CapExceededError, CspError
from .lp import LpSolution, check_feasible, lp_value
from .stream import keyed_rng

_X_TAG, _PLAYER_TAG, _NO_TAG = 0xD1, 0xD2, 0xD3

Edge = tuple[int, ...]
Label = tuple[int, ...]


@dataclass(frozen=True)
class KUniverse:
    parts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        sizes = {len(p) for p in self.parts}
        if len(sizes) != 1:
            raise CspError("parts must have equal size")
        flat = [v for p in self.parts for v in p]
        if len(set(flat)) != len(flat):
            raise CspError("parts must be disjoint")

    @property
    def k(self) -> int:
        return len(self.parts)

    @property
    def size(self) -> int:
        return len(self.parts[0])

    @classmethod
    def blown_up(cls, edge: Sequence[int], n: int) -> "KUniverse":
        return cls(tuple(tuple(v * n + l for l in range(n)) for v in edge))


@dataclass(frozen=True)
class LabeledMatching:
    """Sorted (edge, label) pairs; the edges form a matching."""

    items: tuple[tuple[Edge, Label], ...]
    N: int

    def __post_init__(self):
        seen = set()
        for e, a in self.items:
            if seen & set(e):
                raise CspError("edges share a vertex")
            seen |= set(e)
            if any(not 0 <= x < self.N for x in a):
                raise CspError("label outside Z_N")

    @property
    def m(self) -> int:
        return len(self.items)

    def as_dict(self) -> dict:
        return dict(self.items)


@dataclass(frozen=True)
class OneWiseDistribution:
    N: int
    k: int
    pmf: tuple[tuple[Label, Fraction], ...]  # sorted, positive weights

    @classmethod
    def from_dict(cls, N: int, k: int, weights: dict) -> "OneWiseDistribution":
        items = tuple(sorted((tuple(a), Fraction(w)) for a, w in weights.items() if w))
        if sum(w for _, w in items) != 1:
            raise CspError("weights must sum to 1")
        return cls(N, k, items)

    @classmethod
    def uniform(cls, N: int, k: int) -> "OneWiseDistribution":
        cells = list(np.ndindex(*([N] * k)))
        return cls.from_dict(N, k, {c: Fraction(1, len(cells)) for c in cells})

    @classmethod
    def diagonal(cls, N: int, k: int) -> "OneWiseDistribution":
        return cls.from_dict(N, k, {(t,) * k: Fraction(1, N) for t in range(N)})

    @classmethod
    def point(cls, N: int, k: int, a: Label) -> "OneWiseDistribution":
        return cls.from_dict(N, k, {tuple(a): 1})

    def sampler(self):
        """Exact sampler: an integer draw against integer cumulative weights."""
        L = math.lcm(*(w.denominator for _, w in self.pmf))
        cum = np.cumsum([int(w * L) for _, w in self.pmf])
        outcomes = [a for a, _ in self.pmf]

        def draw(rng: np.random.Generator) -> Label:
            return outcomes[int(np.searchsorted(cum, rng.integers(L), side="right"))]

        return draw


def check_one_wise_independent(mu: OneWiseDistribution) -> bool:
    target = Fraction(1, mu.N)
    for t in range(mu.k):
        marg = [Fraction(0)] * mu.N
        for a, w in mu.pmf:
            marg[a[t]] += w
        if any(x != target for x in marg):
            return False
    return True


@dataclass(frozen=True)
class IntervalMap:
    """q_v: Z_N -> Sigma, symbol s owning [cum[s], cum[s+1])."""

    cum: tuple[int, ...]

    def __call__(self, a: int) -> int:
        return int(np.searchsorted(self.cum, a, side="right")) - 1

    def preimage(self, s: int) -> range:
        return range(self.cum[s], self.cum[s + 1])


@dataclass(frozen=True)
class DistributionLabeledGraph:
    num_pre_vertices: int
    family: PredicateFamily
    edges: tuple[Edge, ...]
    preds: tuple[int, ...]
    N: int
    mu: tuple[OneWiseDistribution, ...]
    q_maps: tuple[IntervalMap, ...]
    p_star: tuple[Fraction, ...]
    lp_value: Fraction


def build_gap_graph(instance: Instance, sol: LpSolution) -> DistributionLabeledGraph:
    if sol.instance != instance or not check_feasible(sol):
        raise CspError("solution is not a feasible BasicLP point of this instance")
    if sol.objective_value != lp_value(instance):
        raise CspError("solution is not optimal")
    k, q = instance.k, instance.q
    N = math.lcm(*(a.denominator for row in sol.x + sol.z for a in row))
    qmaps = []
    for row in sol.x:
        cum = [0]
        for s in range(q):
            cum.append(cum[-1] + int(row[s] * N))
        qmaps.append(IntervalMap(tuple(cum)))
    mus, pstar = [], []
    tables = instance.family.tables
    for i, (scope, p) in enumerate(instance.constraints):
        weights: dict = {}
        for b, zb in enumerate(sol.z[i]):
            if not zb:
                continue
            bt = index_tuple(b, k, q)
            pre = [qmaps[v].preimage(s) for v, s in zip(scope, bt)]
            cells = list(np.ndindex(*[len(r) for r in pre]))
            for cell in cells:
                a = tuple(pre[t][c] for t, c in enumerate(cell))
                weights[a] = weights.get(a, Fraction(0)) + zb / len(cells)
        mus.append(OneWiseDistribution.from_dict(N, k, weights))
        pstar.append(sum((zb for b, zb in enumerate(sol.z[i]) if tables[p][b]), Fraction(0)))
    return DistributionLabeledGraph(
        instance.num_vars,
        instance.family,
        tuple(scope for scope, _ in instance.constraints),
        tuple(p for _, p in instance.constraints),
        N,
        tuple(mus),
        tuple(qmaps),
        tuple(pstar),
        sol.objective_value,
    )


@dataclass(frozen=True)
class DihpParams:
    n: int
    alpha: Fraction
    K: int
    seed: int = 0
    certified: bool = False

    def __post_init__(self):
        alpha = Fraction(self.alpha)
        object.__setattr__(self, "alpha", alpha)
        if not 0 < alpha < 1:
            raise CspError("alpha must lie in (0, 1)")
        if (alpha * self.n).denominator != 1:
            raise CspError("alpha * n must be an integer")
        if self.K < 1:
            raise CspError("K must be positive")

    @property
    def m(self) -> int:
        return int(self.alpha * self.n)

    def check_certified(self, k: int) -> None:
        if self.certified and self.alpha > Fraction(1, 10**8 * k**3):
            raise CspError("alpha is outside the certified range")


def certified_K(alpha: Fraction, eps: Fraction, N: int, k: int, num_pre_vertices: int, q: int) -> int:
    """Smallest K meeting 100 / (alpha eps^2) * N^(2k) * |V| * log|Sigma|."""
    return math.ceil(100 / (float(alpha) * float(eps) ** 2) * N ** (2 * k) * num_pre_vertices * math.log(q))


def sample_uniform_matching(universe: KUniverse, m: int, rng: np.random.Generator) -> tuple[Edge, ...]:
    """Uniform m-matching: an ordered m-subset of every part, zipped together.

    Each unordered matching arises from exactly m! equally likely outcomes.
    """
    if not 0 <= m <= universe.size:
        raise CspError("matching size out of range")
    cols = [[part[int(c)] for c in rng.choice(universe.size, size=m, replace=False)] for part in universe.parts]
    return tuple(sorted(zip(*cols)))


def markov_sample(
    universe: KUniverse, m: int, mu: OneWiseDistribution, x: Sequence[int], rng: np.random.Generator
) -> LabeledMatching:
    """Label each edge of a uniform matching by x|_e - w_e with w_e ~ mu."""
    if mu.k != universe.k:
        raise CspError("distribution arity differs from the universe")
    top = max(v for p in universe.parts for v in p)
    if len(x) <= top:
        raise CspError("x does not cover the universe")
    edges = sample_uniform_matching(universe, m, rng)
    draw = mu.sampler()
    items = []
    for e in edges:
        w = draw(rng)
        items.append((e, tuple((x[v] - wt) % mu.N for v, wt in zip(e, w))))
    return LabeledMatching(tuple(items), mu.N)


JointInput = tuple[LabeledMatching, ...]


def players(G: DistributionLabeledGraph, params: DihpParams) -> list[tuple[int, int]]:
    return [(i, j) for i in range(len(G.edges)) for j in range(params.K)]


def sample_yes(G: DistributionLabeledGraph, params: DihpParams, seed: int) -> tuple[np.ndarray, JointInput]:
    params.check_certified(G.family.arity)
    x = keyed_rng(seed, _X_TAG).integers(G.N, size=G.num_pre_vertices * params.n)
    ys = []
    for i, j in players(G, params):
        uni = KUniverse.blown_up(G.edges[i], params.n)
        ys.append(markov_sample(uni, params.m, G.mu[i], x, keyed_rng(seed, _PLAYER_TAG, i, j)))
    return x, tuple(ys)


def sample_no(G: DistributionLabeledGraph, params: DihpParams, seed: int) -> JointInput:
    params.check_certified(G.family.arity)
    k = G.family.arity
    ys = []
    for i, j in players(G, params):
        rng = keyed_rng(seed, _NO_TAG, i, j)
        uni = KUniverse.blown_up(G.edges[i], params.n)
        edges = sample_uniform_matching(uni, params.m, rng)
        ys.append(LabeledMatching(tuple((e, tuple(int(a) for a in rng.integers(G.N, size=k))) for e in edges), G.N))
    return tuple(ys)


def reduce_to_instance(Y: JointInput, G: DistributionLabeledGraph, params: DihpParams) -> Instance:
    """Zero-labeled edges become constraints with the edge's predicate."""
    plist = players(G, params)
    if len(Y) != len(plist):
        raise CspError("joint input has the wrong number of players")
    zero = (0,) * G.family.arity
    cons = []
    for (i, _), y in zip(plist, Y):
        for e, a in y.items:  # items are already sorted by edge
            if a == zero:
                cons.append((e, G.preds[i]))
    return Instance(G.num_pre_vertices * params.n, G.family, tuple(cons))


def lifted_assignment(x: Sequence[int], G: DistributionLabeledGraph, n: int) -> tuple[int, ...]:
    return tuple(G.q_maps[u // n](int(a)) for u, a in enumerate(x))


def joint_input_to_json(Y: JointInput, G: DistributionLabeledGraph, params: DihpParams) -> dict:
    return {
        f"{i},{j}": [[list(e), list(a)] for e, a in y.items] for (i, j), y in zip(players(G, params), Y)
    }


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class ExperimentRow:
    seed: int
    case: str
    value_lb: Fraction | None
    value_ub: Fraction | None
    m_Y: int
    decision: int | None
    resamples: int = 0
    lifted_all_satisfied: bool | None = None

    def csv(self) -> str:
        return f"{self.seed},{self.case},{self.value_lb},{self.value_ub},{self.m_Y},{self.decision},{self.resamples}"


CSV_HEADER = "seed,case,value_lb,value_ub,m_Y,decision,resamples"


def value_bounds(instance: Instance, cap: int = 2**20) -> tuple[Fraction, Fraction]:
    """Exact value when brute force fits the cap, else (local search, LP value)."""
    try:
        v, _ = component_brute_force(instance, cap=cap)
        return v, v
    except CapExceededError:
        pass
    lb, _ = local_search_value(instance, restarts=32, seed=0)
    return lb, lp_value(instance)


def run_sample(
    G: DistributionLabeledGraph,
    params: DihpParams,
    case: str,
    seed: int,
    threshold: Fraction,
    max_resamples: int = 100,
    compute_value: bool = True,
) -> ExperimentRow:
    """One yes/no sample; empty reductions are resampled with derived seeds.

    ``decision`` is 1 when the value lower bound reaches ``threshold``.  With
    ``compute_value`` off only the lifted-assignment check is made.
    """
    for attempt in range(max_resamples + 1):
        s = seed if attempt == 0 else int(keyed_rng(seed, 0xEE, attempt).integers(2**62))
        lifted_ok = None
        if case == "yes":
            x, Y = sample_yes(G, params, s)
            inst = reduce_to_instance(Y, G, params)
            if inst.m:
                tau = lifted_assignment(x, G, params.n)
                lifted_ok = all(
                    G.family.evaluate(p, [tau[v] for v in scope]) for scope, p in inst.constraints
                )
        elif case == "no":
            inst = reduce_to_instance(sample_no(G, params, s), G, params)
        else:
            raise CspError(f"unknown case {case!r}")
        if inst.m:
            if not compute_value:
                return ExperimentRow(seed, case, None, None, inst.m, None, attempt, lifted_ok)
            lb, ub = value_bounds(inst)
            return ExperimentRow(seed, case, lb, ub, inst.m, int(lb >= threshold), attempt, lifted_ok)
    raise CapExceededError("every resample produced an empty instance")


def dumps_rows(rows) -> str:
    return json.dumps([r.__dict__ for r in rows], default=str)
