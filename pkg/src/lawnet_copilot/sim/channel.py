"""Distance-power-law mmWave channel: path loss, LoS probability, SINR pieces.

Path loss is CI-style: loss at a 1 m reference plus 10*n*log10(d) with the
exponent picked per LoS state, plus optional log-normal shadowing. LoS uses
the urban-micro probability curve (knee at 18 m, exponential decay 36 m).
"""

from __future__ import annotations

import math

from .params import ChannelParams, SPEED_OF_LIGHT, THERMAL_NOISE_DBM_PER_HZ


class DistanceBelowReferenceError(ValueError):
    """Path loss queried below the 1 m reference distance."""


def friis_reference_loss_db(carrier_hz: float, ref_distance_m: float = 1.0) -> float:
    """Free-space loss at the reference distance for a given carrier."""
    return 20.0 * math.log10(4.0 * math.pi * ref_distance_m * carrier_hz / SPEED_OF_LIGHT)


def path_loss(
    distance_3d_m: float,
    los: bool,
    params: ChannelParams,
    shadowing_db: float = 0.0,
) -> float:
    """Large-scale loss in dB at a 3D distance.

    `shadowing_db` is the already-drawn log-normal term for this link; the
    caller owns the draw so the function stays pure and seed-reproducible.
    """
    if distance_3d_m < 1.0:
        raise DistanceBelowReferenceError(
            f"distance {distance_3d_m:.3f} m is below the 1 m reference"
        )
    exponent = params.los_exponent if los else params.nlos_exponent
    return params.ref_loss_db + 10.0 * exponent * math.log10(distance_3d_m) + shadowing_db


def los_probability(distance_2d_m: float) -> float:
    """Urban-micro LoS probability versus ground distance.

    1 below the 18 m knee, then 18/d + exp(-d/36) * (1 - 18/d).
    """
    if distance_2d_m < 0:
        raise ValueError("distance must be >= 0")
    if distance_2d_m <= 18.0:
        return 1.0
    d = distance_2d_m
    return 18.0 / d + math.exp(-d / 36.0) * (1.0 - 18.0 / d)


def noise_power_dbm(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal noise plus receiver noise figure over a bandwidth."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be > 0")
    return THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        return -math.inf
    return 10.0 * math.log10(mw)


def sinr_db(
    signal_dbm: float,
    interference_dbm_list: list[float],
    noise_dbm: float,
) -> float:
    """Combine one signal against co-channel interferers plus noise."""
    denom_mw = dbm_to_mw(noise_dbm) + sum(dbm_to_mw(p) for p in interference_dbm_list)
    return signal_dbm - mw_to_dbm(denom_mw)


def achievable_rate_bps(sinr_db_value: float, allocated_bandwidth_hz: float) -> float:
    """Shannon-capacity map from SINR to bits per second."""
    if allocated_bandwidth_hz <= 0:
        raise ValueError("bandwidth must be > 0")
    if sinr_db_value == -math.inf:
        return 0.0
    return allocated_bandwidth_hz * math.log2(1.0 + 10.0 ** (sinr_db_value / 10.0))
