"""Declarative configuration scripts: schema validation and twin dry-runs.

Scripts are data, never executable code: radio blocks per UAV, QoS queue
weights, relay link declarations, and an allocation-weights payload. A
script that fails validation is never returned to a caller, and a dry-run
in a forked twin must pass before deployment is proposed.
"""

from __future__ import annotations

import json
from importlib import resources

from ..sim.params import SimConfig
from ..sim.world import WorldState, UavCommand
from ..allocator import IntentWeights, Scheduler, EmptyWorldError
from ..sim.energy import propulsion_power, remaining_endurance_s

TX_POWER_RANGE_DBM = (0.0, 40.0)
DRY_RUN_SLOTS = 50


class ConfigSchemaViolation(ValueError):
    """Names the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}")


class DryRunFailure(RuntimeError):
    pass


def config_script_schema() -> dict:
    with resources.files("lawnet_copilot.data.schemas").joinpath(
        "config_script.schema.json"
    ).open() as fh:
        return json.load(fh)


def validate_config_script(script: dict, config: SimConfig) -> None:
    """Structural and range validation mirroring the shipped JSON schema."""
    if not isinstance(script, dict):
        raise ConfigSchemaViolation("$", "script must be an object")
    if not isinstance(script.get("name", ""), str):
        raise ConfigSchemaViolation("name", "must be a string")
    for i, radio in enumerate(script.get("radio", [])):
        prefix = f"radio[{i}]"
        if "uav_id" not in radio:
            raise ConfigSchemaViolation(f"{prefix}.uav_id", "is required")
        if "tx_power_dbm" in radio:
            tx = radio["tx_power_dbm"]
            if not isinstance(tx, (int, float)) or not (
                TX_POWER_RANGE_DBM[0] <= tx <= TX_POWER_RANGE_DBM[1]
            ):
                raise ConfigSchemaViolation(
                    f"{prefix}.tx_power_dbm",
                    f"must lie in [{TX_POWER_RANGE_DBM[0]}, {TX_POWER_RANGE_DBM[1]}] dBm",
                )
        if "altitude_m" in radio:
            alt = radio["altitude_m"]
            if not isinstance(alt, (int, float)) or not (
                config.min_altitude_m <= alt <= config.max_altitude_m
            ):
                raise ConfigSchemaViolation(
                    f"{prefix}.altitude_m",
                    f"must lie in [{config.min_altitude_m}, {config.max_altitude_m}] m",
                )
    for key, weight in script.get("qos_weights", {}).items():
        if not isinstance(weight, (int, float)) or weight < 0:
            raise ConfigSchemaViolation(f"qos_weights.{key}", "must be >= 0")
    for i, relay in enumerate(script.get("relay_links", [])):
        if "uav_id" not in relay:
            raise ConfigSchemaViolation(f"relay_links[{i}].uav_id", "is required")
        for served in relay.get("serves", []):
            if not isinstance(served, str):
                raise ConfigSchemaViolation(
                    f"relay_links[{i}].serves", "entries must be UAV id strings"
                )
    if "allocation_weights" in script:
        try:
            IntentWeights.from_dict(script["allocation_weights"])
        except (TypeError, ValueError) as exc:
            raise ConfigSchemaViolation("allocation_weights", str(exc)) from exc


def apply_script_to_world(script: dict, world: WorldState) -> None:
    """Enact a validated script directly on a (forked) world."""
    commands: list[UavCommand] = []
    for radio in script.get("radio", []):
        uav = world.uav(radio["uav_id"])
        if "tx_power_dbm" in radio:
            commands.append(UavCommand(uav.id, "tx_power_dbm", radio["tx_power_dbm"]))
        if "altitude_m" in radio:
            commands.append(
                UavCommand(uav.id, "altitude_delta", radio["altitude_m"] - uav.altitude_m)
            )
    for relay in script.get("relay_links", []):
        commands.append(UavCommand(relay["uav_id"], "set_role", "backhaul-relay"))
        for served in relay.get("serves", []):
            commands.append(UavCommand(served, "set_relay", relay["uav_id"]))
    for cmd in commands:
        world._apply_command(cmd)


def dry_run_script(
    script: dict,
    twin: WorldState,
    weights: IntentWeights,
    scheme: str,
    n_slots: int = DRY_RUN_SLOTS,
) -> dict:
    """Run the script on a fork; fail when the endurance floor breaks.

    Returns the dry-run record that gets embedded into the script.
    """
    apply_script_to_world(script, twin)
    sched = Scheduler(scheme)
    eff_weights = (
        IntentWeights.from_dict(script["allocation_weights"])
        if "allocation_weights" in script
        else weights
    )
    reports = []
    for _ in range(n_slots):
        try:
            alloc = sched.allocate(twin, eff_weights)
        except EmptyWorldError:
            from ..sim.world import AllocationDecision

            alloc = AllocationDecision(slot=twin.clock_slot)
        reports.append(twin.step(alloc))

    hover = propulsion_power(0.0, twin.config.energy)
    endurances = [
        remaining_endurance_s(u.battery_j, hover) for u in twin.uavs if u.operational
    ]
    fleet_endurance = sum(endurances) / len(endurances) if endurances else 0.0
    served = sum(u.served_bits for r in reports for u in r.users)
    record = {
        "slots": n_slots,
        "fleet_endurance_s": fleet_endurance,
        "endurance_floor_s": eff_weights.endurance_floor_s,
        "served_bits": served,
        "operational_uavs": sum(1 for u in twin.uavs if u.operational),
    }
    if fleet_endurance < eff_weights.endurance_floor_s:
        raise DryRunFailure(
            f"fleet endurance {fleet_endurance:.0f} s is below the "
            f"{eff_weights.endurance_floor_s:.0f} s floor"
        )
    if record["operational_uavs"] == 0:
        raise DryRunFailure("no operational UAV after dry run")
    record["passed"] = True
    return record
