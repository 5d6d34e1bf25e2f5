from fractions import Fraction

import pytest

from csplab.curves import (
    CurvePoint,
    check_curve_shape,
    closed_curve,
    empirical_theta_upper,
    grid,
    theta_2sat,
    theta_dicut,
)
from csplab.csp import dicut_family, two_sat_family
from csplab.errors import CspError

F = Fraction


def test_closed_forms():
    assert theta_dicut(F(1, 2)) == F(1, 4)
    assert theta_dicut(1) == 1
    assert theta_2sat(1) == F(3, 4)
    assert theta_2sat(F(1, 2)) == F(1, 2)
    with pytest.raises(CspError):
        theta_dicut(F(3, 2))


@pytest.mark.parametrize("name", ["dicut", "2sat"])
def test_closed_curve_shape(name):
    rep = check_curve_shape(closed_curve(name, 64))
    assert rep["monotone"] and rep["convex"]


def test_identity_violation_detected():
    pts = [CurvePoint(c, theta_dicut(c)) for c in grid(4)]
    pts[2] = CurvePoint(pts[2].c, F(1, 3))
    assert not check_curve_shape(pts, theta_dicut)["identities"]


def test_empirical_upper_bounds():
    p = empirical_theta_upper(dicut_family(), F(1, 2), 5, 0, "dicut")
    assert p.ub == F(2, 7) and p.ub >= theta_dicut(F(1, 2))
    q = empirical_theta_upper(two_sat_family(), 1, 5, 0, "2sat")
    assert q.ub == F(3, 4)


def test_bad_point():
    with pytest.raises(CspError):
        CurvePoint(F(1, 2), None, F(1, 2), F(1, 4))
