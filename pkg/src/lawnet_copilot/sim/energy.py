"""Rotary-wing propulsion power curve and endurance arithmetic."""

from __future__ import annotations

import math

from .params import EnergyParams


class ZeroPowerError(ValueError):
    """Endurance queried at non-positive draw."""


def propulsion_power(speed_mps: float, params: EnergyParams) -> float:
    """Forward-flight power in watts at a given airspeed.

    Blade-profile term grows quadratically, induced power falls off with
    speed, parasite drag grows cubically; at hover it collapses to
    blade_profile_w + induced_w.
    """
    if speed_mps < 0:
        raise ValueError("speed must be >= 0")
    v = speed_mps
    v0 = params.mean_rotor_induced_velocity_mps
    blade = params.blade_profile_w * (1.0 + 3.0 * v**2 / params.tip_speed_mps**2)
    induced = params.induced_w * math.sqrt(
        math.sqrt(1.0 + v**4 / (4.0 * v0**4)) - v**2 / (2.0 * v0**2)
    )
    parasite = (
        0.5
        * params.fuselage_drag_ratio
        * params.air_density_kgm3
        * params.rotor_solidity
        * params.rotor_disc_area_m2
        * v**3
    )
    return blade + induced + parasite


def remaining_endurance_s(battery_j: float, current_power_w: float) -> float:
    """Seconds of flight left at the present draw."""
    if current_power_w <= 0:
        raise ZeroPowerError("power draw must be > 0")
    if battery_j <= 0:
        return 0.0
    return battery_j / current_power_w
