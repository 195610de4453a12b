"""The independent oracles agree with each other; their values are frozen."""

import pytest

import oracles

# (s, R, B) -> cycles to D = 1 at gamma = 1e7, p = beta
FROZEN = {
    (0.5, 0.1, 0.0): 67115.1367718161,
    (0.7, 0.5, 0.5): 1413.7402949628668,
    (0.9, 0.1, 1.0): 4.604084849031158,
}


def closed_form(s, R, B, gamma=1e7):
    # constant peak traction: Delta/Delta* = s/(1-D), fatigue ends at D = 1 - s
    E = oracles.endurance(R, B)
    beta = oracles.exponent(E)
    return gamma * (E / s) ** beta * (1.0 - s ** (beta + 1.0))


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_rk4_matches_closed_form_and_frozen_value(key):
    rk = oracles.sn_cycles_rk4(*key, 1e6, 95.0, 107.0, 1.0, 1.0)
    assert rk == pytest.approx(closed_form(*key), rel=1e-8)
    assert closed_form(*key) == pytest.approx(FROZEN[key], rel=1e-12)


def test_frozen_endurance_and_exponent():
    assert oracles.endurance(0.1, 0.0) == pytest.approx(0.3571428571428572, rel=1e-15)
    assert oracles.exponent(0.3571428571428572) == pytest.approx(14.871699788191034, rel=1e-13)


def test_clt_free_single_ply_is_stress_free():
    ply = (161000.0, 11380.0, 5170.0, 0.32, -1e-6, 3e-5)
    for ang in (0, 30, 90):
        sig, _ = oracles.clt_thermal_stresses([ply], [1.0], [ang], -160.0)
        assert abs(sig[0]).max() < 1e-9


def test_clt_cross_ply_frozen_values():
    ply = (161000.0, 11380.0, 5170.0, 0.32, 0.0, 3e-5)
    sig, _ = oracles.clt_thermal_stresses([ply, ply], [0.125, 2.0], [0, 90], -160.0)
    assert sig[0][0] == pytest.approx(-402.064322, rel=1e-8)
    assert sig[1][0] == pytest.approx(25.1290201, rel=1e-8)
    # force balance
    assert sig[0][0] * 0.125 + sig[1][0] * 2.0 == pytest.approx(0.0, abs=1e-9)
