"""Scenario files: SimConfig + intent + scheme + scripted event timeline.

A scenario is one JSON document validated against the schema shipped in
data/schemas/scenario.schema.json. It fully determines a reproducible run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .params import SimConfig, InvalidConfigError
from .world import SimEvent, WorldState, init_world


class ScenarioInvalidError(ValueError):
    """Scenario document does not satisfy the schema."""


@dataclass
class Scenario:
    name: str
    config: SimConfig
    intent_text: str = ""
    scheme: str = "intent_weighted_pf"
    n_slots: int = 2000
    events: list[SimEvent] = field(default_factory=list)
    weights: Optional[dict] = None  # serialized IntentWeights override

    def build_world(self, seed: Optional[int] = None) -> WorldState:
        cfg = self.config
        if seed is not None and seed != cfg.seed:
            cfg = SimConfig.from_dict({**cfg.to_dict(), "seed": seed})
        world = init_world(cfg)
        for ev in self.events:
            world.inject_event(
                SimEvent(
                    kind=ev.kind,
                    target=ev.target,
                    magnitude=ev.magnitude,
                    start_slot=ev.start_slot,
                    end_slot=ev.end_slot,
                    ceiling_m=ev.ceiling_m,
                )
            )
        return world

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "config": self.config.to_dict(),
            "intent_text": self.intent_text,
            "scheme": self.scheme,
            "n_slots": self.n_slots,
            "events": [e.to_dict() for e in self.events],
            "weights": self.weights,
        }


def schema_text(name: str) -> dict:
    with resources.files("lawnet_copilot.data.schemas").joinpath(name).open() as fh:
        return json.load(fh)


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioInvalidError(msg)


def load_scenario(path: str | Path | dict) -> Scenario:
    """Parse and validate a scenario document (path or already-parsed dict)."""
    if isinstance(path, dict):
        raw = path
    else:
        raw = json.loads(Path(path).read_text())
    _check(isinstance(raw, dict), "scenario must be a JSON object")
    _check("name" in raw and isinstance(raw["name"], str), "missing string field 'name'")
    _check("config" in raw and isinstance(raw["config"], dict), "missing object field 'config'")
    try:
        config = SimConfig.from_dict(raw["config"])
    except (InvalidConfigError, TypeError) as exc:
        raise ScenarioInvalidError(f"config: {exc}") from exc
    events = []
    for i, ev in enumerate(raw.get("events", [])):
        try:
            event = SimEvent(
                kind=ev["kind"],
                target=ev["target"],
                magnitude=float(ev.get("magnitude", 0.0)),
                start_slot=int(ev["start_slot"]),
                end_slot=int(ev["end_slot"]),
                ceiling_m=ev.get("ceiling_m"),
            )
            event.validate()
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioInvalidError(f"events[{i}]: {exc}") from exc
        events.append(event)
    n_slots = int(raw.get("n_slots", 2000))
    _check(n_slots >= 1, "n_slots must be >= 1")
    scheme = raw.get("scheme", "intent_weighted_pf")
    return Scenario(
        name=raw["name"],
        config=config,
        intent_text=raw.get("intent_text", ""),
        scheme=scheme,
        n_slots=n_slots,
        events=events,
        weights=raw.get("weights"),
    )


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))


def builtin_scenario_path(name: str) -> Path:
    return Path(str(resources.files("lawnet_copilot.data.scenarios").joinpath(name)))
