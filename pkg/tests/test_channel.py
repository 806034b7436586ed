"""Channel math against independently evaluated references."""

import math

import pytest
from hypothesis import given, strategies as st

from lawnet_copilot.sim import (
    ChannelParams,
    path_loss,
    los_probability,
    achievable_rate_bps,
    noise_power_dbm,
    friis_reference_loss_db,
    DistanceBelowReferenceError,
    SPEED_OF_LIGHT,
)

PARAMS = ChannelParams()


def friis_oracle_db(distance_m: float, carrier_hz: float) -> float:
    # independent free-space evaluation, written out rather than imported
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return 20.0 * math.log10(4.0 * math.pi * distance_m / wavelength)


def test_reference_loss_matches_friis_at_1m():
    oracle = friis_oracle_db(1.0, 28e9)
    assert abs(PARAMS.ref_loss_db - oracle) < 0.1
    assert abs(friis_reference_loss_db(28e9) - oracle) < 1e-9
    assert abs(path_loss(1.0, True, PARAMS) - oracle) < 0.1


def test_los_loss_at_100m():
    # 61.391 + 21*log10(100) = 61.391 + 42
    expected = PARAMS.ref_loss_db + 10.0 * 2.1 * 2.0
    assert abs(path_loss(100.0, True, PARAMS) - expected) < 1e-12
    assert abs(expected - 103.391) < 0.01


def test_nlos_loss_at_100m():
    expected = PARAMS.ref_loss_db + 10.0 * 3.5 * 2.0
    assert abs(path_loss(100.0, False, PARAMS) - expected) < 1e-12
    assert abs(expected - 131.391) < 0.01


@given(st.floats(min_value=1.0, max_value=5e3))
def test_doubling_distance_slope(d):
    for los, exponent in ((True, 2.1), (False, 3.5)):
        delta = path_loss(2 * d, los, PARAMS) - path_loss(d, los, PARAMS)
        assert abs(delta - 10.0 * exponent * math.log10(2.0)) < 1e-9


def test_below_reference_distance_rejected():
    with pytest.raises(DistanceBelowReferenceError):
        path_loss(0.5, True, PARAMS)


def test_shadowing_term_is_additive():
    base = path_loss(50.0, True, PARAMS)
    assert path_loss(50.0, True, PARAMS, shadowing_db=4.5) == pytest.approx(base + 4.5)


# -- LoS probability ---------------------------------------------------------


def test_los_certain_below_knee():
    assert los_probability(10.0) == 1.0
    assert los_probability(18.0) == 1.0


def test_los_at_double_knee():
    # 18/36 + exp(-1) * (1 - 18/36)
    expected = 0.5 + math.exp(-1.0) * 0.5
    assert los_probability(36.0) == pytest.approx(expected, abs=1e-12)
    assert round(expected, 3) == 0.684


def test_los_decays_monotonically_and_bounded():
    prev = 1.0
    for d in range(19, 2000, 7):
        p = los_probability(float(d))
        assert 0.0 <= p <= 1.0
        assert p <= prev + 1e-12
        prev = p
    assert los_probability(5000.0) < 0.01


# -- rate map -----------------------------------------------------------------


def test_rate_at_0db_is_bandwidth():
    assert achievable_rate_bps(0.0, 4e6) == pytest.approx(4e6)


def test_rate_vanishes_at_minus_inf():
    assert achievable_rate_bps(-math.inf, 1e6) == 0.0
    assert achievable_rate_bps(-200.0, 1e6) < 1.0


def test_rate_at_20db():
    assert achievable_rate_bps(20.0, 1e6) == pytest.approx(1e6 * math.log2(101.0))
    assert achievable_rate_bps(20.0, 1e6) == pytest.approx(6.658e6, rel=1e-3)


def test_noise_power_formula():
    # -174 dBm/Hz + 10log10(B) + NF, evaluated independently
    assert noise_power_dbm(1e6, 7.0) == pytest.approx(-174.0 + 60.0 + 7.0)
    with pytest.raises(ValueError):
        noise_power_dbm(0.0, 7.0)
