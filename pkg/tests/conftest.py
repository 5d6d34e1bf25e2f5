import numpy as np
from hypothesis import strategies as st

from csplab.csp import PredicateFamily, dicut_family, random_instance, two_sat_family


@st.composite
def instances(draw, family=None, max_vars=6, max_cons=10):
    fam = family or draw(st.sampled_from([dicut_family(), two_sat_family()]))
    n = draw(st.integers(fam.arity, max_vars))
    m = draw(st.integers(1, max_cons))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_instance(fam, n, m, np.random.default_rng(seed))


@st.composite
def families(draw, max_k=3, max_q=3):
    k = draw(st.integers(1, max_k))
    q = draw(st.integers(2, max_q))
    size = q**k
    count = draw(st.integers(1, 3))
    tables = [list(draw(st.lists(st.booleans(), min_size=size, max_size=size))) for _ in range(count)]
    tables[0][draw(st.integers(0, size - 1))] = True  # families need one satisfiable predicate
    tables = tuple(tuple(t) for t in tables)
    return PredicateFamily(k, q, tables, tuple(f"p{i}" for i in range(count)))


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
