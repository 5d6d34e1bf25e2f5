"""BasicLP relaxation, an exact simplex solver and LP-based rounding.

The solver runs entirely over the integers.  The tableau is kept as an
integer matrix ``T`` together with a positive common denominator ``d`` (the
determinant of the current basis), and pivots use the fraction-free update

    T'[i][j] = (T[i][j] * p - T[i][s] * T[r][j]) // d,     d' = p

where every division is exact.  Entering and leaving variables follow
Bland's rule, so the result is a deterministic vertex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .csp import Instance, connected_components, index_tuple, instance_value, sub_instance
from .errors import CspError, InfeasibleError, UnboundedError

ZERO = Fraction(0)
HALF = Fraction(1, 2)
ONE = Fraction(1)


@dataclass(frozen=True)
class LinearProgram:
    """maximize objective . y  subject to  row . y = rhs,  y >= 0."""

    num_vars: int
    objective: Mapping[int, Fraction]
    eq_constraints: tuple[tuple[Mapping[int, Fraction], Fraction], ...]

    def __post_init__(self):
        for row, _ in self.eq_constraints:
            if any(not 0 <= j < self.num_vars for j in row):
                raise CspError("row references a column out of range")
        if any(not 0 <= j < self.num_vars for j in self.objective):
            raise CspError("objective references a column out of range")


@dataclass(frozen=True)
class LpResult:
    values: tuple[Fraction, ...]
    objective_value: Fraction


def _lcm_den(values) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, Fraction(v).denominator)
    return out


def _pivot(T: np.ndarray, d: int, r: int, s: int) -> int:
    p = T[r, s]
    if p < 0:
        T[r] = -T[r]
        p = -p
    col = T[:, s].copy()
    col[r] = 0
    pivot_row = T[r].copy()
    T *= p
    T -= np.outer(col, pivot_row)
    T //= d
    T[r] = pivot_row
    return p


def _run_simplex(T: np.ndarray, d: int, basis: list[int], ncols: int, obj_row: int) -> int:
    """Bland-rule primal simplex on rows [0, obj_row) with objective row obj_row.

    Columns ``>= ncols`` (other than the rhs, which is the last) are never
    entered.  Returns the final denominator.
    """
    rhs = T.shape[1] - 1
    rows = obj_row
    while True:
        obj = T[obj_row]
        s = next((j for j in range(ncols) if obj[j] < 0), None)
        if s is None:
            return d
        best = None
        for i in range(rows):
            a = T[i, s]
            if a > 0:
                if best is None:
                    best = i
                    continue
                # compare T[i,rhs]/a with T[best,rhs]/T[best,s]
                lhs = T[i, rhs] * T[best, s]
                rgt = T[best, rhs] * a
                if lhs < rgt or (lhs == rgt and basis[i] < basis[best]):
                    best = i
        if best is None:
            raise UnboundedError("objective is unbounded above")
        d = _pivot(T, d, best, s)
        basis[best] = s


def solve_lp_exact(lp: LinearProgram) -> LpResult:
    """Exact rational optimum at a vertex.  Raises on infeasible or unbounded."""
    n = lp.num_vars
    rows = []
    for coeffs, rhs in lp.eq_constraints:
        scale = _lcm_den([*coeffs.values(), rhs])
        row = [0] * (n + 1)
        for j, a in coeffs.items():
            row[j] += int(Fraction(a) * scale)
        row[n] = int(Fraction(rhs) * scale)
        if row[n] < 0:
            row = [-a for a in row]
        if not any(row[:n]):
            if row[n] != 0:
                raise InfeasibleError("row 0 = nonzero")
            continue
        rows.append(row)
    m = len(rows)
    cscale = _lcm_den(lp.objective.values())
    cost = [0] * n
    for j, a in lp.objective.items():
        cost[j] += int(Fraction(a) * cscale)

    # phase 1: columns [0, n) structural, [n, n+m) artificial, last rhs
    T = np.zeros((m + 1, n + m + 1), dtype=object)
    T[:, :] = 0
    for i, row in enumerate(rows):
        T[i, :n] = row[:n]
        T[i, n + i] = 1
        T[i, -1] = row[n]
    for i in range(m):
        T[m] -= T[i]
    T[m, n : n + m] = 0
    basis = [n + i for i in range(m)]
    d = _run_simplex(T, 1, basis, n + m, m)
    if T[m, -1] != 0:
        raise InfeasibleError("no feasible point")

    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = []
    for i in range(m):
        if basis[i] < n:
            keep.append(i)
            continue
        s = next((j for j in range(n) if T[i, j] != 0), None)
        if s is None:
            continue
        d = _pivot(T, d, i, s)
        basis[i] = s
        keep.append(i)
    T = np.vstack([T[keep][:, list(range(n)) + [n + m]], np.zeros((1, n + 1), dtype=object)])
    basis = [basis[i] for i in keep]
    m = len(keep)

    # phase 2 objective row, scaled by d
    T[m, :] = 0
    for j in range(n):
        T[m, j] = -cost[j] * d
    for i, s in enumerate(basis):
        if cost[s]:
            T[m] += cost[s] * T[i]
    d = _run_simplex(T, d, basis, n, m)

    values = [ZERO] * n
    for i, s in enumerate(basis):
        values[s] = Fraction(int(T[i, -1]), int(d))
    objective = sum((Fraction(a) * values[j] for j, a in lp.objective.items()), ZERO)
    return LpResult(tuple(values), objective)


# ---------------------------------------------------------------------------
# BasicLP


@dataclass(frozen=True)
class LpSolution:
    """BasicLP point.  ``x[v][s]`` and ``z[i][b]`` with b a tuple index."""

    instance: Instance
    x: tuple[tuple[Fraction, ...], ...]
    z: tuple[tuple[Fraction, ...], ...]
    objective_value: Fraction


def _x_col(v: int, s: int, q: int) -> int:
    return v * q + s


def _z_col(instance: Instance, i: int, b: int) -> int:
    return instance.num_vars * instance.q + i * instance.family.num_tuples + b


def build_basic_lp(instance: Instance) -> LinearProgram:
    if instance.m == 0:
        raise CspError("BasicLP of an empty instance is undefined")
    q, k, m = instance.q, instance.k, instance.m
    T = instance.family.num_tuples
    tuples = [index_tuple(b, k, q) for b in range(T)]
    rows = []
    for v in range(instance.num_vars):
        rows.append(({_x_col(v, s, q): ONE for s in range(q)}, ONE))
    for i, (scope, _) in enumerate(instance.constraints):
        for j in range(k):
            for s in range(q):
                row = {_z_col(instance, i, b): ONE for b in range(T) if tuples[b][j] == s}
                row[_x_col(scope[j], s, q)] = -ONE
                rows.append((row, ZERO))
    objective = {}
    tables = instance.family.tables
    for i, (_, p) in enumerate(instance.constraints):
        for b in range(T):
            if tables[p][b]:
                objective[_z_col(instance, i, b)] = Fraction(1, m)
    return LinearProgram(instance.num_vars * q + m * T, objective, tuple(rows))


def lp_objective(instance: Instance, z: Sequence[Sequence[Fraction]]) -> Fraction:
    tables = instance.family.tables
    total = sum(
        (z[i][b] for i, (_, p) in enumerate(instance.constraints) for b in range(len(tables[p])) if tables[p][b]),
        ZERO,
    )
    return total / instance.m


def check_feasible(sol: LpSolution) -> bool:
    """Exact check of every BasicLP identity and nonnegativity."""
    inst = sol.instance
    q, k = inst.q, inst.k
    if len(sol.x) != inst.num_vars or len(sol.z) != inst.m:
        return False
    for row in sol.x:
        if len(row) != q or any(a < 0 for a in row) or sum(row) != 1:
            return False
    tuples = [index_tuple(b, k, q) for b in range(inst.family.num_tuples)]
    for i, (scope, _) in enumerate(inst.constraints):
        zi = sol.z[i]
        if len(zi) != len(tuples) or any(a < 0 for a in zi):
            return False
        for j in range(k):
            for s in range(q):
                if sum(zi[b] for b, t in enumerate(tuples) if t[j] == s) != sol.x[scope[j]][s]:
                    return False
    return sol.objective_value == lp_objective(inst, sol.z)


def integral_point(instance: Instance, tau: Sequence[int]) -> LpSolution:
    """The BasicLP point induced by an assignment; its objective is val(tau)."""
    q = instance.q
    x = tuple(tuple(ONE if tau[v] == s else ZERO for s in range(q)) for v in range(instance.num_vars))
    z = []
    for scope, _ in instance.constraints:
        b = 0
        for v in scope:
            b = b * q + tau[v]
        z.append(tuple(ONE if t == b else ZERO for t in range(instance.family.num_tuples)))
    return LpSolution(instance, x, tuple(z), instance_value(instance, tau))


def uniform_point(instance: Instance) -> LpSolution:
    q, T = instance.q, instance.family.num_tuples
    x = tuple(tuple(Fraction(1, q) for _ in range(q)) for _ in range(instance.num_vars))
    z = tuple(tuple(Fraction(1, T) for _ in range(T)) for _ in range(instance.m))
    return LpSolution(instance, x, z, lp_objective(instance, z))


def _solve_connected(instance: Instance) -> LpSolution:
    lp = build_basic_lp(instance)
    res = solve_lp_exact(lp)
    q, T = instance.q, instance.family.num_tuples
    vals = res.values
    x = tuple(tuple(vals[_x_col(v, s, q)] for s in range(q)) for v in range(instance.num_vars))
    z = tuple(tuple(vals[_z_col(instance, i, b)] for b in range(T)) for i in range(instance.m))
    return LpSolution(instance, x, z, res.objective_value)


def solve_basic_lp(instance: Instance) -> LpSolution:
    """Exact BasicLP optimum, solved one connected component at a time.

    The LP separates over components, so gluing component vertices gives a
    vertex of the full polytope.  Variables outside every scope get symbol 0.
    """
    if instance.m == 0:
        raise CspError("BasicLP of an empty instance is undefined")
    q, T = instance.q, instance.family.num_tuples
    x = [tuple(ONE if s == 0 else ZERO for s in range(q)) for _ in range(instance.num_vars)]
    z: list = [None] * instance.m
    for comp in connected_components(instance):
        sub, back = sub_instance(instance, comp)
        part = _solve_connected(sub)
        for new, old in enumerate(back):
            x[old] = part.x[new]
        for pos, i in enumerate(comp):
            z[i] = part.z[pos]
    return LpSolution(instance, tuple(x), tuple(z), lp_objective(instance, z))


def lp_value(instance: Instance) -> Fraction:
    return solve_basic_lp(instance).objective_value


def check_half_integral(sol: LpSolution) -> bool:
    allowed = {ZERO, HALF, ONE}
    return all(a in allowed for row in sol.x for a in row) and all(a in allowed for row in sol.z for a in row)


# ---------------------------------------------------------------------------
# rounding


def rounding_expectation(sol: LpSolution) -> Fraction:
    """Exact expected value when each variable independently takes s w.p. x[v][s]."""
    inst = sol.instance
    k, q = inst.k, inst.q
    tables = inst.family.tables
    total = ZERO
    for scope, p in inst.constraints:
        for b, ok in enumerate(tables[p]):
            if ok:
                prob = ONE
                for v, s in zip(scope, index_tuple(b, k, q)):
                    prob *= sol.x[v][s]
                    if not prob:
                        break
                total += prob
    return total / inst.m


def _independent_round(sol: LpSolution, seed: int) -> tuple[tuple[int, ...], Fraction]:
    inst = sol.instance
    if inst.q != 2 or inst.k != 2:
        raise CspError("rounding is defined for Boolean binary families")
    if not check_half_integral(sol):
        raise CspError("rounding requires a half-integral solution")
    rng = np.random.default_rng(seed)
    u = rng.random(inst.num_vars)
    tau = tuple(int(u[v] < float(sol.x[v][1])) for v in range(inst.num_vars))
    return tau, rounding_expectation(sol)


def round_dicut(sol: LpSolution, seed: int) -> tuple[tuple[int, ...], Fraction]:
    """tau(v) = 1 with probability x[v][1]; returns (tau, exact expectation)."""
    return _independent_round(sol, seed)


def round_2sat(sol: LpSolution, seed: int) -> tuple[tuple[int, ...], Fraction]:
    return _independent_round(sol, seed)


# ---------------------------------------------------------------------------
# serialization


def _frac_json(a: Fraction) -> list[str]:
    return [str(a.numerator), str(a.denominator)]


def solution_to_json(sol: LpSolution) -> dict:
    return {
        "objective": _frac_json(sol.objective_value),
        "x": [[_frac_json(a) for a in row] for row in sol.x],
        "z": [[_frac_json(a) for a in row] for row in sol.z],
    }


def solution_from_json(instance: Instance, obj: dict) -> LpSolution:
    def frac(pair):
        return Fraction(int(pair[0]), int(pair[1]))

    return LpSolution(
        instance,
        tuple(tuple(frac(a) for a in row) for row in obj["x"]),
        tuple(tuple(frac(a) for a in row) for row in obj["z"]),
        frac(obj["objective"]),
    )


def dumps_solution(sol: LpSolution) -> str:
    return json.dumps(solution_to_json(sol))


# ---------------------------------------------------------------------------
# exact optimum beyond brute-force scale


def _milp_witness(instance: Instance) -> tuple[int, ...]:
    """Optimal assignment from the integer version of the BasicLP (HiGHS branch and bound).

    With x integral the marginal rows force every z-block onto a single
    tuple, so the integer program is exactly the Max-CSP.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    lp = build_basic_lp(instance)
    A = lil_matrix((len(lp.eq_constraints), lp.num_vars))
    b = np.zeros(len(lp.eq_constraints))
    for r, (row, rhs) in enumerate(lp.eq_constraints):
        for j, a in row.items():
            A[r, j] = float(a)
        b[r] = float(rhs)
    c = np.zeros(lp.num_vars)
    for j, a in lp.objective.items():
        c[j] = -1.0  # maximize the satisfied count
    integrality = np.zeros(lp.num_vars)
    integrality[: instance.num_vars * instance.q] = 1
    res = milp(
        c,
        constraints=LinearConstraint(A.tocsr(), b, b),
        integrality=integrality,
        bounds=Bounds(0, 1),
        options={"mip_rel_gap": 0.0},
    )
    if not res.success:
        raise CspError(f"integer program failed: {res.message}")
    xs = res.x[: instance.num_vars * instance.q].reshape(instance.num_vars, instance.q)
    return tuple(int(np.argmax(row)) for row in xs)


def exact_value(instance: Instance, brute_limit: int = 2**16) -> tuple[Fraction, tuple[int, ...]]:
    """Exact optimum, component by component.

    Components with at most ``brute_limit`` assignments are enumerated; larger
    ones go to an integer program whose witness is re-evaluated exactly.
    """
    from .csp import brute_force_value, satisfied_count

    if instance.m == 0:
        raise CspError("value of an empty instance is undefined")
    tau = [0] * instance.num_vars
    for comp in connected_components(instance):
        sub, back = sub_instance(instance, comp)
        if sub.q**sub.num_vars <= brute_limit:
            _, w = brute_force_value(sub, cap=brute_limit)
        else:
            w = _milp_witness(sub)
        for new, old in enumerate(back):
            tau[old] = w[new]
    tau = tuple(tau)
    return Fraction(satisfied_count(instance, tau), instance.m), tau
