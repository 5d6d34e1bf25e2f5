from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csplab.csp import (
    Instance,
    brute_force_value,
    complete_dicut,
    complete_e2sat,
    component_brute_force,
    connected_components,
    degrees,
    dicut_family,
    format_instance,
    index_tuple,
    instance_from_json,
    instance_to_json,
    instance_value,
    local_search_value,
    max_degree,
    opposite_units_2sat,
    parse_instance,
    random_instance,
    sub_instance,
    tuple_index,
    two_sat_family,
)
from csplab.errors import CapExceededError, CspError

from conftest import families, instances


@given(st.integers(1, 4), st.integers(2, 4), st.data())
def test_tuple_index_roundtrip(k, q, data):
    idx = data.draw(st.integers(0, q**k - 1))
    b = index_tuple(idx, k, q)
    assert tuple_index(b, q) == idx


def test_tuple_order_first_coordinate_most_significant():
    assert tuple_index((1, 0), 2) == 2
    assert index_tuple(1, 2, 2) == (0, 1)


def test_dicut_predicate():
    fam = dicut_family()
    assert [fam.evaluate(0, b) for b in fam.tuples()] == [False, False, True, False]


def test_two_sat_family_tables():
    fam = two_sat_family()
    bits = ["".join("1" if x else "0" for x in t) for t in fam.tables]
    assert bits == ["1100", "0011", "0111", "1011", "1101", "1110"]


@pytest.mark.parametrize(
    "n,value", [(2, Fraction(1, 2)), (3, Fraction(1, 3)), (4, Fraction(1, 3)), (6, Fraction(3, 10))]
)
def test_complete_dicut_values(n, value):
    inst = complete_dicut(n)
    assert inst.m == n * (n - 1)
    assert brute_force_value(inst)[0] == value
    assert value == Fraction((n // 2) * ((n + 1) // 2), 2 * (n * (n - 1) // 2))


def test_e2sat_and_units():
    assert brute_force_value(complete_e2sat(4))[0] == Fraction(3, 4)
    assert complete_e2sat(4).m == 24
    assert brute_force_value(opposite_units_2sat())[0] == Fraction(1, 2)


def test_instance_value_of_cut():
    assert instance_value(complete_dicut(4), (1, 1, 0, 0)) == Fraction(1, 3)


def test_empty_instance_value_rejected():
    with pytest.raises(CspError):
        instance_value(Instance(2, dicut_family(), ()), (0, 0))


@pytest.mark.parametrize("scope", [(0, 0), (0, 5), (0,)])
def test_bad_scopes(scope):
    with pytest.raises(CspError):
        Instance(3, dicut_family(), ((scope, 0),))


def test_cap(monkeypatch):
    inst = complete_dicut(6)
    with pytest.raises(CapExceededError):
        brute_force_value(inst, cap=32)
    monkeypatch.setenv("CSPLAB_CAP_ASSIGNMENTS", "16")
    with pytest.raises(CapExceededError):
        brute_force_value(inst)


def test_cap_counts_used_variables_only():
    inst = Instance(40, dicut_family(), (((0, 1), 0),))
    assert brute_force_value(inst, cap=4)[0] == 1


@settings(max_examples=40, deadline=None)
@given(instances())
def test_text_roundtrip(inst):
    assert parse_instance(format_instance(inst)) == inst


@settings(max_examples=40, deadline=None)
@given(families(), st.integers(0, 2**32 - 1))
def test_json_roundtrip_general_families(fam, seed):
    inst = random_instance(fam, fam.arity + 2, 5, np.random.default_rng(seed))
    assert instance_from_json(instance_to_json(inst)) == inst
    assert parse_instance(format_instance(inst)) == inst


@pytest.mark.parametrize(
    "text",
    [
        "",
        "maxcsp k=2 sigma=2 vars=2\n",
        "maxcsp k=2 sigma=2 vars=2 constraints=1\npred d 001\nc d 0 1\n",
        "maxcsp k=2 sigma=2 vars=2 constraints=2\npred d 0010\nc d 0 1\n",
        "maxcsp k=2 sigma=2 vars=2 constraints=1\npred d 0010\nc e 0 1\n",
    ],
)
def test_parse_errors(text):
    with pytest.raises(CspError):
        parse_instance(text)


@settings(max_examples=30, deadline=None)
@given(instances(max_vars=8, max_cons=8))
def test_witness_attains_value(inst):
    v, tau = brute_force_value(inst)
    assert instance_value(inst, tau) == v
    assert component_brute_force(inst)[0] == v
    assert local_search_value(inst, restarts=4)[0] <= v


@settings(max_examples=30, deadline=None)
@given(instances())
def test_degrees_and_components(inst):
    assert sum(degrees(inst)) == inst.k * inst.m
    assert max_degree(inst) == max(degrees(inst))
    comps = connected_components(inst)
    assert sorted(i for c in comps for i in c) == list(range(inst.m))
    for comp in comps:
        sub, back = sub_instance(inst, comp)
        assert sub.m == len(comp)
        assert [back[v] for v in sub.constraints[0][0]] == list(inst.constraints[comp[0]][0])
