"""Run metrics: intent satisfaction rate, energy efficiency, latency stats.

Every number here is recomputable from the raw SlotReport trace; nothing is
accumulated online. Constraint comparisons are inclusive at the bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

from .sim.world import SlotReport, UserSlotStats


class EmptyTraceError(ValueError):
    pass


class ZeroEnergyError(ValueError):
    pass


class UnknownClassError(ValueError):
    pass


@dataclass
class QosConstraint:
    """One per-slot check: aggregate of `metric` over the scope versus bound.

    direction "max": satisfied when value <= bound (latency style);
    direction "min": satisfied when value >= bound (rate/endurance style).
    Scope is a traffic class, optionally pinned to its home sector; the
    endurance metric is fleet-wide and ignores scope.
    """

    metric: str  # latency | throughput | reliability | endurance
    bound: float
    direction: str
    sector: Optional[str] = None
    traffic_class: Optional[str] = None

    METRICS = ("latency", "throughput", "reliability", "endurance")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "QosConstraint":
        return cls(**raw)


def user_in_scope(u: UserSlotStats, c: QosConstraint) -> bool:
    if c.traffic_class is not None and u.group != c.traffic_class:
        return False
    if c.sector is not None and (u.home_sector or u.sector) != c.sector:
        return False
    return True


def user_active(u: UserSlotStats) -> bool:
    return (u.generated_bits + u.served_bits + u.queue_bits) > 0


def constraint_value(
    report: SlotReport, c: QosConstraint, slot_duration_s: float
) -> Optional[float]:
    """Aggregate metric value for one slot; None when the scope is empty."""
    if c.metric == "endurance":
        vals = [v.endurance_s for v in report.uavs if v.operational]
        return sum(vals) / len(vals) if vals else None
    scope = [u for u in report.users if user_in_scope(u, c)]
    if c.metric == "latency":
        samples = [u.latency_s for u in scope if user_active(u)]
        return sum(samples) / len(samples) if samples else None
    if c.metric == "throughput":
        if not scope:
            return None
        return sum(u.served_bits for u in scope) / len(scope) / slot_duration_s
    if c.metric == "reliability":
        hits = sum(u.deadline_hits for u in scope)
        misses = sum(u.deadline_misses for u in scope)
        total = hits + misses
        return hits / total if total else None
    raise ValueError(f"unknown metric {c.metric!r}")


def slot_satisfies(
    report: SlotReport, constraints: list[QosConstraint], slot_duration_s: float
) -> bool:
    for c in constraints:
        value = constraint_value(report, c, slot_duration_s)
        if value is None:
            continue  # vacuously satisfied: nobody in scope this slot
        if c.direction == "max" and value > c.bound:
            return False
        if c.direction == "min" and value < c.bound:
            return False
    return True


def compute_isr(
    trace: list[SlotReport],
    constraints: list[QosConstraint],
    slot_duration_s: float = 0.01,
) -> float:
    """Fraction of slots in which every constraint holds."""
    if not trace:
        raise EmptyTraceError("trace is empty")
    good = sum(
        1 for r in trace if slot_satisfies(r, constraints, slot_duration_s)
    )
    return good / len(trace)


def compute_ee(trace: list[SlotReport]) -> float:
    """Delivered megabits per joule of fleet energy (propulsion + transmit)."""
    if not trace:
        raise EmptyTraceError("trace is empty")
    bits = sum(u.served_bits for r in trace for u in r.users)
    energy = sum(v.propulsion_j + v.tx_j for r in trace for v in r.uavs)
    if energy <= 0:
        raise ZeroEnergyError("total energy is zero")
    return (bits / 1e6) / energy


def latency_stats(
    trace: list[SlotReport],
    traffic_class: str,
    budget_s: Optional[float] = None,
) -> tuple[float, float, float]:
    """(mean, p95, violation_rate) over active user-slot latency samples.

    p95 is nearest-rank on the sorted samples. A sample violates only when
    strictly above the budget; exactly-at-budget counts as satisfied.
    """
    samples = [
        u.latency_s
        for r in trace
        for u in r.users
        if u.group == traffic_class and user_active(u)
    ]
    seen = any(u.group == traffic_class for r in trace for u in r.users)
    if not seen:
        raise UnknownClassError(f"class {traffic_class!r} absent from trace")
    if not samples:
        return (0.0, 0.0, 0.0)
    ordered = sorted(samples)
    mean = sum(ordered) / len(ordered)
    rank = max(1, math.ceil(0.95 * len(ordered)))
    p95 = ordered[rank - 1]
    if budget_s is None:
        violation = 0.0
    else:
        violation = sum(1 for s in ordered if s > budget_s) / len(ordered)
    return (mean, p95, violation)


@dataclass
class MetricsResult:
    """One (scheme, seed) row of an experiment table."""

    scheme: str
    seed: int
    n_slots: int
    isr: float
    ee_mbit_per_joule: float
    latency: dict[str, tuple[float, float, float]] = field(default_factory=dict)

    def to_row(self) -> dict:
        row = {
            "scheme": self.scheme,
            "seed": self.seed,
            "n_slots": self.n_slots,
            "isr": self.isr,
            "ee_mbit_per_joule": self.ee_mbit_per_joule,
        }
        for cls, (mean, p95, viol) in sorted(self.latency.items()):
            row[f"latency_mean_s_{cls}"] = mean
            row[f"latency_p95_s_{cls}"] = p95
            row[f"latency_violation_{cls}"] = viol
        return row


def metrics_for_trace(
    trace: list[SlotReport],
    constraints: list[QosConstraint],
    scheme: str,
    seed: int,
    slot_duration_s: float,
    latency_budgets: Optional[dict[str, float]] = None,
) -> MetricsResult:
    classes = sorted({u.group for r in trace for u in r.users})
    budgets = latency_budgets or {}
    lat = {
        cls: latency_stats(trace, cls, budgets.get(cls)) for cls in classes
    }
    return MetricsResult(
        scheme=scheme,
        seed=seed,
        n_slots=len(trace),
        isr=compute_isr(trace, constraints, slot_duration_s),
        ee_mbit_per_joule=compute_ee(trace),
        latency=lat,
    )
