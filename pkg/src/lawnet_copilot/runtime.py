"""Live-network runtime: one world, one command queue, one trace.

All side effects funnel through `enqueue_command`; queued commands are
handed to the next `advance_slot` call, which is the single writer of the
world. Telemetry snapshots auto-ingest into the knowledge base every
`snapshot_every` slots and after each executed plan.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional

from .sim.scenario import Scenario
from .sim.world import WorldState, SlotReport, AllocationDecision, UavCommand, SimEvent
from .allocator import IntentWeights, Scheduler
from .knowledge import KnowledgeBase, snapshot_telemetry
from .metrics import QosConstraint

SNAPSHOT_EVERY_SLOTS = 100


class NetworkRuntime:
    """Owns the live WorldState and everything that observes it."""

    def __init__(
        self,
        scenario: Scenario,
        seed: Optional[int] = None,
        load_corpus: bool = True,
        snapshot_every: int = SNAPSHOT_EVERY_SLOTS,
    ):
        self.scenario = scenario
        self.world = scenario.build_world(seed)
        self.scheme = scenario.scheme
        self.scheduler = Scheduler(self.scheme)
        self.weights = (
            IntentWeights.from_dict(scenario.weights)
            if scenario.weights
            else IntentWeights()
        )
        self.constraints: list[QosConstraint] = []
        self.kb = KnowledgeBase()
        if load_corpus:
            self.kb.load_builtin_corpus()
        self.trace: list[SlotReport] = []
        self.last_allocation: Optional[AllocationDecision] = None
        self.snapshot_every = snapshot_every
        self.command_queue: list[UavCommand] = []
        self.command_log: list[dict] = []
        self.paused = True  # operator (or script) owns time
        self.on_slot: list[Callable[[SlotReport], None]] = []
        self._lock = threading.RLock()

    # ------------------------------------------------------------- commands

    def enqueue_command(self, cmd: UavCommand, origin: str = "") -> None:
        with self._lock:
            self.command_queue.append(cmd)
            self.command_log.append(
                {"slot": self.world.clock_slot, "origin": origin, **cmd.to_dict()}
            )

    def clear_pending_commands(self) -> int:
        """Drop not-yet-applied commands (rollback on failed execution)."""
        with self._lock:
            n = len(self.command_queue)
            self.command_queue = []
            return n

    def set_weights(self, weights: IntentWeights, scheme: Optional[str] = None) -> None:
        with self._lock:
            self.weights = weights
            if scheme and scheme != self.scheme:
                self.scheme = scheme
                self.scheduler = Scheduler(scheme)

    def set_constraints(self, constraints: list[QosConstraint]) -> None:
        with self._lock:
            self.constraints = list(constraints)

    def inject_event(self, event: SimEvent) -> str:
        with self._lock:
            return self.world.inject_event(event)

    # ----------------------------------------------------------------- time

    def advance_slot(self) -> SlotReport:
        from .allocator import EmptyWorldError

        with self._lock:
            try:
                allocation = self.scheduler.allocate(self.world, self.weights)
            except EmptyWorldError:
                allocation = AllocationDecision(slot=self.world.clock_slot)
            allocation.uav_commands.extend(self.command_queue)
            self.command_queue = []
            report = self.world.step(allocation)
            self.trace.append(report)
            self.last_allocation = allocation
            if self.snapshot_every and len(self.trace) % self.snapshot_every == 0:
                self.ingest_snapshot(self.snapshot_every)
        for cb in self.on_slot:
            cb(report)
        return report

    def advance_slots(self, n: int) -> list[SlotReport]:
        return [self.advance_slot() for _ in range(n)]

    # ------------------------------------------------------------ knowledge

    def ingest_snapshot(self, window: Optional[int] = None) -> Optional[str]:
        if not self.trace:
            return None
        w = min(window or self.snapshot_every, len(self.trace))
        doc = snapshot_telemetry(self.trace, w, self.scenario.config.slot_duration_s)
        return self.kb.ingest(doc)

    # ------------------------------------------------------------ snapshots

    def fork_world(self, branch_seed: int = 0) -> WorldState:
        with self._lock:
            return self.world.fork(branch_seed)

    @property
    def clock_slot(self) -> int:
        return self.world.clock_slot
