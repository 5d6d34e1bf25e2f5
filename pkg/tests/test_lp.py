import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from csplab.csp import brute_force_value, complete_dicut, complete_e2sat, dicut_family, opposite_units_2sat, random_instance
from csplab.errors import CspError, InfeasibleError, UnboundedError
from csplab.lp import (
    LinearProgram,
    build_basic_lp,
    check_feasible,
    check_half_integral,
    dumps_solution,
    exact_value,
    integral_point,
    lp_objective,
    lp_value,
    round_2sat,
    round_dicut,
    rounding_expectation,
    solution_from_json,
    solution_to_json,
    solve_basic_lp,
    solve_lp_exact,
    uniform_point,
)

from conftest import families, instances

F = Fraction


def test_small_lp():
    # max x + y, x + 2y + s = 4, 3x + y + t = 6
    lp = LinearProgram(4, {0: F(1), 1: F(1)}, (({0: F(1), 1: F(2), 2: F(1)}, F(4)), ({0: F(3), 1: F(1), 3: F(1)}, F(6))))
    res = solve_lp_exact(lp)
    assert res.objective_value == F(14, 5)
    assert res.values[:2] == (F(8, 5), F(6, 5))


def test_infeasible_and_unbounded():
    with pytest.raises(InfeasibleError):
        solve_lp_exact(LinearProgram(1, {0: F(1)}, (({0: F(1)}, F(-1)),)))
    with pytest.raises(UnboundedError):
        solve_lp_exact(LinearProgram(2, {0: F(1)}, (({0: F(1), 1: F(-1)}, F(0)),)))


def test_redundant_rows():
    lp = LinearProgram(2, {0: F(1)}, (({0: F(1), 1: F(1)}, F(1)), ({0: F(2), 1: F(2)}, F(2))))
    assert solve_lp_exact(lp).objective_value == 1


@settings(max_examples=40, deadline=None)
@given(families(max_k=3, max_q=3), st.integers(0, 2**32 - 1))
def test_basic_lp_matches_float_solver(fam, seed):
    inst = random_instance(fam, fam.arity + 3, 6, np.random.default_rng(seed))
    lp = build_basic_lp(inst)
    n = lp.num_vars
    c = np.zeros(n)
    for j, v in lp.objective.items():
        c[j] = -float(v)
    A = np.zeros((len(lp.eq_constraints), n))
    b = np.zeros(len(lp.eq_constraints))
    for r, (row, rhs) in enumerate(lp.eq_constraints):
        for j, v in row.items():
            A[r, j] = float(v)
        b[r] = float(rhs)
    ref = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    sol = solve_basic_lp(inst)
    assert abs(float(sol.objective_value) + ref.fun) < 1e-9
    assert check_feasible(sol)
    assert sol.objective_value == lp_objective(inst, sol.z)


@settings(max_examples=40, deadline=None)
@given(instances(max_vars=6, max_cons=10))
def test_lp_sandwich(inst):
    v, tau = brute_force_value(inst)
    sol = solve_basic_lp(inst)
    assert v <= sol.objective_value <= 1
    ip = integral_point(inst, tau)
    assert check_feasible(ip) and lp_objective(inst, ip.z) == v
    assert check_feasible(uniform_point(inst))


@pytest.mark.parametrize(
    "inst,lp",
    [(complete_dicut(3), F(1, 2)), (complete_dicut(4), F(1, 2)), (complete_dicut(6), F(1, 2)), (complete_e2sat(4), F(1)), (opposite_units_2sat(), F(1, 2))],
)
def test_known_lp_values(inst, lp):
    assert lp_value(inst) == lp


@settings(max_examples=40, deadline=None)
@given(instances(max_vars=8, max_cons=20))
def test_rounding_bounds(inst):
    sol = solve_basic_lp(inst)
    E = rounding_expectation(sol)
    if inst.family == dicut_family():
        assert E >= F(3, 2) * sol.objective_value - F(1, 2)
    else:
        assert E >= F(1, 2) * sol.objective_value + F(1, 4)
    assert E <= brute_force_value(inst)[0]


def test_round_functions_are_seeded():
    sol = solve_basic_lp(complete_dicut(4))
    assert round_dicut(sol, 3) == round_dicut(sol, 3)
    assert round_dicut(sol, 3)[1] == F(1, 4)
    sol2 = solve_basic_lp(opposite_units_2sat())
    assert round_2sat(sol2, 0)[1] == F(1, 2)


def test_half_integral_dicut():
    assert check_half_integral(solve_basic_lp(complete_dicut(5)))


def test_solution_json_roundtrip():
    inst = complete_dicut(3)
    sol = solve_basic_lp(inst)
    assert solution_from_json(inst, json.loads(dumps_solution(sol))) == sol
    assert solution_from_json(inst, solution_to_json(sol)) == sol


def test_exact_value_uses_milp_for_large_components():
    inst = complete_dicut(6)
    v, tau = exact_value(inst, brute_limit=4)
    assert v == F(3, 10)
