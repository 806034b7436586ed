"""Tool registry and dispatcher: the only path from plans to the live world.

Side-effecting tools are gated: the calling session must be EXECUTING an
approved plan whose hash matches, and the exact call (by call_id) must be
part of that plan. Violations raise UnauthorizedSideEffectError and are
audited; nothing is executed. Read-only tools run against snapshots at any
time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .copilot.protocol import (
    DialogueSession,
    ProtocolState,
    ToolCall,
    ToolResult,
)
from .runtime import NetworkRuntime
from .sim.channel import dbm_to_mw, mw_to_dbm
from .sim.world import UavCommand, UnknownTargetError
from .allocator import IntentWeights, endurance_guard_ok


class UnknownToolError(KeyError):
    pass


class DuplicateToolError(ValueError):
    pass


class SchemaViolationError(ValueError):
    pass


class UnauthorizedSideEffectError(PermissionError):
    """The safety-violation signal: side effect attempted without approval."""


@dataclass
class ToolSpec:
    name: str
    param_schema: dict  # {"required": [...], "properties": {name: type-string}}
    side_effecting: bool
    description: str
    handler: Callable[[dict], object] = field(repr=False, default=None)


def validate_args(schema: dict, args: dict) -> None:
    """Minimal structural validation: required keys and primitive types."""
    if not isinstance(args, dict):
        raise SchemaViolationError("args must be an object")
    props = schema.get("properties", {})
    for key in schema.get("required", []):
        if key not in args:
            raise SchemaViolationError(f"missing required field {key!r}")
    type_map = {
        "string": str,
        "number": (int, float),
        "integer": int,
        "boolean": bool,
        "object": dict,
        "array": list,
    }
    for key, val in args.items():
        if key not in props:
            raise SchemaViolationError(f"unexpected field {key!r}")
        expected = type_map.get(props[key])
        if expected and not isinstance(val, expected):
            raise SchemaViolationError(
                f"field {key!r} must be {props[key]}, got {type(val).__name__}"
            )


class ToolRegistry:
    """Holds specs, enforces the gate, audits every invocation."""

    def __init__(self, runtime: NetworkRuntime):
        self.runtime = runtime
        self._tools: dict[str, ToolSpec] = {}
        self.invocation_log: list[dict] = []
        self._result_counter = 0

    def register_tool(self, spec: ToolSpec) -> None:
        if spec.name in self._tools:
            raise DuplicateToolError(f"tool {spec.name!r} already registered")
        if not isinstance(spec.param_schema, dict):
            raise SchemaViolationError("param_schema must be an object")
        self._tools[spec.name] = spec

    def list_tools(self) -> list[dict]:
        return [
            {
                "name": s.name,
                "side_effecting": s.side_effecting,
                "description": s.description,
                "param_schema": {
                    k: v for k, v in s.param_schema.items() if k != "handler"
                },
            }
            for s in sorted(self._tools.values(), key=lambda s: s.name)
        ]

    def spec(self, name: str) -> ToolSpec:
        if name not in self._tools:
            raise UnknownToolError(name)
        return self._tools[name]

    def result_by_id(self, result_id: str) -> Optional[dict]:
        for rec in self.invocation_log:
            if rec.get("result_id") == result_id:
                return rec
        return None

    def invoke(self, session: DialogueSession, call: ToolCall) -> ToolResult:
        """Dispatch a call through the gate; every attempt is audited."""
        slot = self.runtime.clock_slot
        try:
            spec = self.spec(call.tool)
        except UnknownToolError:
            self._audit(session, call, slot, "error", error="unknown-tool")
            raise
        try:
            validate_args(spec.param_schema, call.args)
        except SchemaViolationError as exc:
            self._audit(session, call, slot, "error", error=f"schema-violation: {exc}")
            raise
        if spec.side_effecting:
            self._check_gate(session, call, slot)
        try:
            payload = spec.handler(call.args)
        except (UnknownTargetError, ValueError, KeyError) as exc:
            result = ToolResult(
                "error", None, slot, self._next_result_id(), error=str(exc)
            )
            self._audit(session, call, slot, "error", error=str(exc), result_id=result.result_id)
            return result
        result = ToolResult("ok", payload, slot, self._next_result_id())
        self._audit(session, call, slot, "ok", result_id=result.result_id)
        return result

    def _check_gate(self, session: DialogueSession, call: ToolCall, slot: int) -> None:
        plan = session.current_plan
        ok = (
            session.state == ProtocolState.EXECUTING
            and plan is not None
            and plan.status == "executing"
            and session.approved_plan_hash == plan.content_hash()
            and any(
                s.tool_call is not None and s.tool_call.call_id == call.call_id
                for s in plan.steps
            )
        )
        if not ok:
            self._audit(session, call, slot, "blocked", error="unauthorized-side-effect")
            raise UnauthorizedSideEffectError(
                f"side-effecting tool {call.tool!r} blocked in state {session.state.value}"
            )

    def _next_result_id(self) -> str:
        self._result_counter += 1
        return f"tr-{self._result_counter:05d}"

    def _audit(
        self,
        session: DialogueSession,
        call: ToolCall,
        slot: int,
        status: str,
        error: Optional[str] = None,
        result_id: Optional[str] = None,
    ) -> None:
        record = {
            "tool": call.tool,
            "args": call.args,
            "call_id": call.call_id,
            "session_id": session.session_id,
            "plan_id": call.plan_id,
            "status": status,
            "error": error,
            "result_id": result_id,
            "slot": slot,
        }
        self.invocation_log.append(record)
        session.audit("tool_invocation", record, slot)


# --------------------------------------------------------------- built-ins


def build_default_registry(runtime: NetworkRuntime) -> ToolRegistry:
    """Registry with the standard diagnostic/config/actuation tool set."""
    reg = ToolRegistry(runtime)

    def _trace_window(window: int):
        trace = runtime.trace
        if not trace:
            return []
        return trace[-min(window, len(trace)):]

    # -- diagnostics ------------------------------------------------------

    def run_spectrum_analysis(args: dict):
        loc = args["location"]
        world = runtime.world
        if isinstance(loc, str):
            uav = world.uav(loc)
            x, y = uav.position[0], uav.position[1]
        else:
            x, y = float(loc[0]), float(loc[1])
        probe = _nearest_user(world, x, y)
        alloc = getattr(runtime, "last_allocation", None)
        n_prbs = world.config.n_prbs
        interference_mw = [0.0] * n_prbs
        if alloc is not None and probe is not None:
            for a in alloc.assignments:
                uav = world.uav(a.uav_id)
                if not uav.operational:
                    continue
                rx = dbm_to_mw(world.rx_power_dbm(uav, probe))
                for p in a.prbs:
                    interference_mw[p] += rx
        per_prb = [mw_to_dbm(m) if m > 0 else None for m in interference_mw]
        occupied = [p for p in per_prb if p is not None]
        attn = [
            e.to_dict()
            for e in world.active_events()
            if e.kind == "excess_attenuation"
        ]
        return {
            "probe_user": probe.id if probe else None,
            "prb_power_dbm": per_prb,
            "occupied_prbs": len(occupied),
            "mean_occupied_dbm": (sum(occupied) / len(occupied)) if occupied else None,
            "attenuation_events": attn,
        }

    def get_kpi_report(args: dict):
        window = int(args.get("time_window", 100))
        slice_id = args.get("slice_id", "all")
        reports = _trace_window(window)
        if not reports:
            # nothing has run yet: an empty report, not an error
            return {"window_slots": None, "classes": {}, "uavs": {}}
        dt = runtime.scenario.config.slot_duration_s
        out: dict[str, dict] = {}
        for r in reports:
            for u in r.users:
                if slice_id not in ("all", u.group):
                    continue
                agg = out.setdefault(
                    u.group,
                    {
                        "served_bits": 0,
                        "generated_bits": 0,
                        "latency_samples": [],
                        "sinr_samples": [],
                        "deadline_hits": 0,
                        "deadline_misses": 0,
                        "users": set(),
                    },
                )
                agg["served_bits"] += u.served_bits
                agg["generated_bits"] += u.generated_bits
                agg["users"].add(u.user_id)
                if (u.generated_bits + u.served_bits + u.queue_bits) > 0:
                    agg["latency_samples"].append(u.latency_s)
                if u.sinr_db is not None:
                    agg["sinr_samples"].append(u.sinr_db)
                agg["deadline_hits"] += u.deadline_hits
                agg["deadline_misses"] += u.deadline_misses
        horizon = len(reports) * dt
        result = {}
        for cls, a in sorted(out.items()):
            lat = a["latency_samples"]
            sinr = a["sinr_samples"]
            low = sum(1 for s in sinr if s < 3.0)
            result[cls] = {
                "n_users": len(a["users"]),
                "mean_throughput_bps": a["served_bits"] / horizon,
                "offered_bps": a["generated_bits"] / horizon,
                "mean_latency_s": sum(lat) / len(lat) if lat else 0.0,
                "max_latency_s": max(lat) if lat else 0.0,
                "mean_sinr_db": sum(sinr) / len(sinr) if sinr else None,
                "low_sinr_fraction": (low / len(sinr)) if sinr else 0.0,
                "deadline_hits": a["deadline_hits"],
                "deadline_misses": a["deadline_misses"],
            }
        backhaul = {}
        last = reports[-1]
        for v in last.uavs:
            backhaul[v.uav_id] = {
                "utilization": v.backhaul_utilization,
                "latency_s": v.backhaul_latency_s,
                "endurance_s": v.endurance_s,
                "operational": v.operational,
            }
        return {
            "window_slots": [reports[0].slot, reports[-1].slot],
            "classes": result,
            "uavs": backhaul,
        }

    def fetch_event_logs(args: dict):
        node = args["node_id"]
        world = runtime.world
        world.uav(node)  # unknown-target check
        events = [
            e.to_dict()
            for e in world.pending_events
            if e.target.split(":")[0] == node
        ]
        commands = [c for c in runtime.command_log if c.get("uav_id") == node]
        return {"node_id": node, "events": events, "commands": commands}

    def run_traffic_forecast(args: dict):
        area = args.get("area", "all")
        window, n_windows = 10, 10
        reports = _trace_window(window * n_windows)
        if not reports:
            return {"area": area, "forecast_bps": {}, "windows_used": {}}
        dt = runtime.scenario.config.slot_duration_s
        buckets: dict[str, list[float]] = {}
        for i in range(0, len(reports), window):
            chunk = reports[i : i + window]
            per_class: dict[str, int] = {}
            for r in chunk:
                for u in r.users:
                    if area not in ("all", u.sector, u.home_sector):
                        continue
                    per_class[u.group] = per_class.get(u.group, 0) + u.generated_bits
            for cls, bits in per_class.items():
                buckets.setdefault(cls, []).append(bits / (len(chunk) * dt))
        return {
            "area": area,
            "forecast_bps": {
                cls: sum(vals) / len(vals) for cls, vals in sorted(buckets.items())
            },
            "windows_used": {cls: len(vals) for cls, vals in sorted(buckets.items())},
        }

    def simulate_beamforming_pattern(args: dict):
        cfg = args["config"]
        uav_id = cfg.get("uav_id")
        gain = float(cfg.get("gain_delta_db", 3.0))
        horizon = int(cfg.get("horizon_slots", 20))
        world = runtime.world
        world.uav(uav_id)
        base = _fork_rate(runtime, uav_id, None, horizon)
        boosted = _fork_rate(runtime, uav_id, gain, horizon)
        return {
            "uav_id": uav_id,
            "gain_delta_db": gain,
            "mean_rate_bps_baseline": base,
            "mean_rate_bps_with_gain": boosted,
            "rate_delta_bps": boosted - base,
        }

    # -- actuation (side-effecting) --------------------------------------

    def set_flight_altitude(args: dict):
        uav_id = args["uav_id"]
        runtime.world.uav(uav_id)
        if "delta_m" in args:
            delta = float(args["delta_m"])
        else:
            delta = float(args["new_altitude_m"]) - runtime.world.uav(uav_id).altitude_m
        runtime.enqueue_command(
            UavCommand(uav_id, "altitude_delta", delta), origin="set_flight_altitude"
        )
        return {"uav_id": uav_id, "altitude_delta_m": delta, "applied_next_slot": True}

    def update_ran_parameters(args: dict):
        uav_id = args["gnodeb_id"]
        params = args["params"]
        runtime.world.uav(uav_id)
        applied = []
        if "tx_power_dbm" in params:
            tx = float(params["tx_power_dbm"])
            if not 0.0 <= tx <= 40.0:
                raise SchemaViolationError("tx_power_dbm out of range [0, 40]")
            runtime.enqueue_command(
                UavCommand(uav_id, "tx_power_dbm", tx), origin="update_ran_parameters"
            )
            applied.append("tx_power_dbm")
        if "reattach_users" in params:
            runtime.enqueue_command(
                UavCommand(uav_id, "reattach", list(params["reattach_users"])),
                origin="update_ran_parameters",
            )
            applied.append("reattach_users")
        if "role" in params:
            if params["role"] == "backhaul-relay" and not endurance_guard_ok(
                runtime.world, uav_id, runtime.weights
            ):
                raise ValueError(
                    f"{uav_id} endurance below the "
                    f"{runtime.weights.endurance_floor_s:.0f} s floor; relay role refused"
                )
            runtime.enqueue_command(
                UavCommand(uav_id, "set_role", params["role"]),
                origin="update_ran_parameters",
            )
            applied.append("role")
        if not applied:
            raise SchemaViolationError("params carried no recognized parameter")
        return {"gnodeb_id": uav_id, "applied": applied}

    def deploy_network_slice(args: dict):
        from .copilot.configgen import validate_config_script  # local: avoids cycle

        script = args["config_json"]
        if isinstance(script, str):
            script = json.loads(script)
        validate_config_script(script, runtime.scenario.config)
        if "allocation_weights" in script:
            weights = IntentWeights.from_dict(script["allocation_weights"])
            runtime.set_weights(weights, script.get("scheme"))
        for radio in script.get("radio", []):
            if "tx_power_dbm" in radio:
                runtime.enqueue_command(
                    UavCommand(radio["uav_id"], "tx_power_dbm", radio["tx_power_dbm"]),
                    origin="deploy_network_slice",
                )
            if "altitude_m" in radio:
                uav = runtime.world.uav(radio["uav_id"])
                runtime.enqueue_command(
                    UavCommand(
                        radio["uav_id"],
                        "altitude_delta",
                        float(radio["altitude_m"]) - uav.altitude_m,
                    ),
                    origin="deploy_network_slice",
                )
        for relay in script.get("relay_links", []):
            if not endurance_guard_ok(runtime.world, relay["uav_id"], runtime.weights):
                raise ValueError(
                    f"{relay['uav_id']} endurance below the "
                    f"{runtime.weights.endurance_floor_s:.0f} s floor; relay role refused"
                )
            runtime.enqueue_command(
                UavCommand(relay["uav_id"], "set_role", "backhaul-relay"),
                origin="deploy_network_slice",
            )
            for served in relay.get("serves", []):
                runtime.enqueue_command(
                    UavCommand(served, "set_relay", relay["uav_id"]),
                    origin="deploy_network_slice",
                )
        return {"deployed": True, "name": script.get("name", "unnamed")}

    specs = [
        ToolSpec(
            "run_spectrum_analysis",
            {"required": ["location"], "properties": {"location": None}},
            False,
            "Per-PRB received power map near a location, plus active attenuation events.",
            run_spectrum_analysis,
        ),
        ToolSpec(
            "get_kpi_report",
            {
                "required": ["slice_id"],
                "properties": {"slice_id": "string", "time_window": "integer"},
            },
            False,
            "Per-class KPI aggregates over a trailing slot window.",
            get_kpi_report,
        ),
        ToolSpec(
            "fetch_event_logs",
            {"required": ["node_id"], "properties": {"node_id": "string"}},
            False,
            "Scripted events and command history touching one UAV.",
            fetch_event_logs,
        ),
        ToolSpec(
            "deploy_network_slice",
            {"required": ["config_json"], "properties": {"config_json": None}},
            True,
            "Install a validated configuration script (weights, radio, relays).",
            deploy_network_slice,
        ),
        ToolSpec(
            "update_ran_parameters",
            {
                "required": ["gnodeb_id", "params"],
                "properties": {"gnodeb_id": "string", "params": "object"},
            },
            True,
            "Adjust per-UAV radio parameters (tx power, attachment, role).",
            update_ran_parameters,
        ),
        ToolSpec(
            "run_traffic_forecast",
            {"required": [], "properties": {"area": "string"}},
            False,
            "Moving-average per-class offered-load forecast.",
            run_traffic_forecast,
        ),
        ToolSpec(
            "simulate_beamforming_pattern",
            {"required": ["config"], "properties": {"config": "object"}},
            False,
            "Fork-evaluated rate delta for an antenna-gain change.",
            simulate_beamforming_pattern,
        ),
        ToolSpec(
            "set_flight_altitude",
            {
                "required": ["uav_id"],
                "properties": {
                    "uav_id": "string",
                    "delta_m": "number",
                    "new_altitude_m": "number",
                },
            },
            True,
            "Command an altitude change, applied at the next slot.",
            set_flight_altitude,
        ),
    ]
    for s in specs:
        reg.register_tool(s)
    return reg


def _nearest_user(world, x: float, y: float):
    best, best_d = None, math.inf
    for u in world.users:
        d = (u.position[0] - x) ** 2 + (u.position[1] - y) ** 2
        if d < best_d:
            best, best_d = u, d
    return best


def _fork_rate(runtime: NetworkRuntime, uav_id: str, gain_delta_db, horizon: int) -> float:
    from .allocator import Scheduler

    twin = runtime.fork_world(branch_seed=17)
    if gain_delta_db is not None:
        uav = twin.uav(uav_id)
        uav.tx_power_dbm += gain_delta_db  # per-link gain folds into EIRP
    sched = Scheduler(runtime.scheme)
    sched.ema_bps = dict(runtime.scheduler.ema_bps)
    total_bits, n = 0, 0
    for _ in range(horizon):
        alloc = sched.allocate(twin, runtime.weights)
        report = twin.step(alloc)
        for u in report.users:
            if u.serving_uav == uav_id:
                total_bits += u.served_bits
                n += 1
    dt = runtime.scenario.config.slot_duration_s
    return total_bits / (horizon * dt) if horizon else 0.0
