"""Typed document store with deterministic lexical retrieval.

Four document kinds mirror what the operator side actually consults:
live telemetry snapshots, technical documentation, historical incidents,
and operator policies. Retrieval is TF-IDF with length normalization and
a total (score, doc_id) order, so identical corpora give identical ranked
lists. An embedding-based retriever can be plugged in via `retriever_hook`
but nothing in the package requires one.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, asdict
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

from .sim.world import SlotReport

DOC_KINDS = ("telemetry", "documentation", "historical", "policy")

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmptyBodyError(ValueError):
    pass


class NoTraceError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class KnowledgeDoc:
    doc_id: str
    kind: str
    title: str
    body: str
    tags: list[str] = field(default_factory=list)
    slot_stamp: Optional[int] = None

    def validate(self) -> None:
        if not self.body.strip():
            raise EmptyBodyError(f"doc {self.doc_id!r} has an empty body")
        if self.kind not in DOC_KINDS:
            raise ValueError(f"doc kind must be one of {DOC_KINDS}, got {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RetrievalResult:
    doc_id: str
    score: float
    matched_terms: list[str]

    def to_dict(self) -> dict:
        return asdict(self)


class KnowledgeBase:
    """In-memory corpus with an atomically rebuilt inverted index."""

    def __init__(self):
        self._docs: dict[str, KnowledgeDoc] = {}
        self._index: dict[str, dict[str, int]] = {}  # term -> doc_id -> tf
        self._doc_len: dict[str, int] = {}
        self.retriever_hook: Optional[Callable[[str, int], list[RetrievalResult]]] = None

    def __len__(self) -> int:
        return len(self._docs)

    def ingest(self, doc: KnowledgeDoc) -> str:
        """Index a document; same doc_id replaces the previous version."""
        doc.validate()
        self._docs[doc.doc_id] = doc
        self._rebuild()
        return doc.doc_id

    def get(self, doc_id: str) -> Optional[KnowledgeDoc]:
        return self._docs.get(doc_id)

    def all_docs(self) -> list[KnowledgeDoc]:
        return [self._docs[k] for k in sorted(self._docs)]

    def _rebuild(self) -> None:
        # build fresh then swap, so concurrent readers never see a partial index
        index: dict[str, dict[str, int]] = {}
        doc_len: dict[str, int] = {}
        for doc_id, doc in self._docs.items():
            terms = tokenize(doc.title + " " + doc.body + " " + " ".join(doc.tags))
            doc_len[doc_id] = len(terms)
            for t in terms:
                index.setdefault(t, {}).setdefault(doc_id, 0)
                index[t][doc_id] += 1
        self._index, self._doc_len = index, doc_len

    def idf(self, term: str) -> float:
        n = len(self._docs)
        df = len(self._index.get(term, {}))
        return math.log((n + 1) / (df + 1)) + 1.0

    def score(self, query_terms: list[str], doc_id: str) -> float:
        length = self._doc_len.get(doc_id, 0)
        if length == 0:
            return 0.0
        total = 0.0
        for t in set(query_terms):
            tf = self._index.get(t, {}).get(doc_id, 0)
            if tf:
                total += tf * self.idf(t)
        return total / math.sqrt(length)

    def retrieve(
        self, query: str, k: int = 5, kind_filter: Optional[str] = None
    ) -> list[RetrievalResult]:
        """Top-k docs by lexical score; deterministic (score desc, id asc)."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.retriever_hook is not None:
            results = self.retriever_hook(query, k)
            if kind_filter:
                results = [
                    r for r in results
                    if (d := self.get(r.doc_id)) and d.kind == kind_filter
                ]
            return results[:k]
        terms = tokenize(query)
        scored = []
        for doc_id, doc in self._docs.items():
            if kind_filter and doc.kind != kind_filter:
                continue
            s = self.score(terms, doc_id)
            if s > 0:
                matched = sorted(
                    t for t in set(terms) if self._index.get(t, {}).get(doc_id)
                )
                scored.append(RetrievalResult(doc_id, s, matched))
        scored.sort(key=lambda r: (-r.score, r.doc_id))
        return scored[:k]

    def load_corpus_dir(self, path: str | Path) -> int:
        n = 0
        for f in sorted(Path(path).glob("*.json")):
            raw = json.loads(f.read_text())
            self.ingest(KnowledgeDoc(**raw))
            n += 1
        return n

    def load_builtin_corpus(self) -> int:
        n = 0
        base = resources.files("lawnet_copilot.data.corpus")
        for entry in sorted(base.iterdir(), key=lambda e: e.name):
            if entry.name.endswith(".json"):
                self.ingest(KnowledgeDoc(**json.loads(entry.read_text())))
                n += 1
        return n


def snapshot_telemetry(
    trace: list[SlotReport], window: int, slot_duration_s: float
) -> KnowledgeDoc:
    """Telemetry-kind doc aggregating per-class KPIs over the trailing window.

    Serialization is canonical JSON, so identical traces snapshot to
    byte-identical bodies.
    """
    if window < 1 or not trace or window > len(trace):
        raise NoTraceError(f"window {window} exceeds available trace {len(trace)}")
    reports = trace[-window:]
    start, end = reports[0].slot, reports[-1].slot

    per_class: dict[str, dict] = {}
    for r in reports:
        for u in r.users:
            agg = per_class.setdefault(
                u.group,
                {
                    "served_bits": 0,
                    "generated_bits": 0,
                    "latency_sum": 0.0,
                    "latency_n": 0,
                    "deadline_hits": 0,
                    "deadline_misses": 0,
                    "sinr_sum": 0.0,
                    "sinr_n": 0,
                    "low_sinr_n": 0,
                },
            )
            agg["served_bits"] += u.served_bits
            agg["generated_bits"] += u.generated_bits
            if (u.generated_bits + u.served_bits + u.queue_bits) > 0:
                agg["latency_sum"] += u.latency_s
                agg["latency_n"] += 1
            agg["deadline_hits"] += u.deadline_hits
            agg["deadline_misses"] += u.deadline_misses
            if u.sinr_db is not None:
                agg["sinr_sum"] += u.sinr_db
                agg["sinr_n"] += 1
                if u.sinr_db < 3.0:
                    agg["low_sinr_n"] += 1

    classes = {}
    horizon_s = window * slot_duration_s
    for cls, a in sorted(per_class.items()):
        classes[cls] = {
            "mean_throughput_bps": a["served_bits"] / horizon_s,
            "offered_bps": a["generated_bits"] / horizon_s,
            "mean_latency_s": (a["latency_sum"] / a["latency_n"]) if a["latency_n"] else 0.0,
            "deadline_hits": a["deadline_hits"],
            "deadline_misses": a["deadline_misses"],
            "mean_sinr_db": (a["sinr_sum"] / a["sinr_n"]) if a["sinr_n"] else None,
            "low_sinr_fraction": (a["low_sinr_n"] / a["sinr_n"]) if a["sinr_n"] else 0.0,
        }

    fleet = {}
    last = reports[-1]
    for v in last.uavs:
        fleet[v.uav_id] = {
            "battery_j": v.battery_j,
            "endurance_s": v.endurance_s,
            "operational": v.operational,
            "altitude_m": v.altitude_m,
            "backhaul_utilization": max(
                r2.uavs[_uav_idx(r2, v.uav_id)].backhaul_utilization for r2 in reports
            ),
            "backhaul_latency_s": max(
                r2.uavs[_uav_idx(r2, v.uav_id)].backhaul_latency_s for r2 in reports
            ),
        }

    events = sorted({e for r in reports for e in r.active_events})
    body = json.dumps(
        {
            "window_slots": [start, end],
            "classes": classes,
            "fleet": fleet,
            "active_events": events,
        },
        sort_keys=True,
    )
    return KnowledgeDoc(
        doc_id=f"telemetry-{start:06d}-{end:06d}",
        kind="telemetry",
        title=f"telemetry window slots {start} to {end}",
        body=body,
        tags=["telemetry", "kpi"] + sorted(per_class),
        slot_stamp=end,
    )


def _uav_idx(report: SlotReport, uav_id: str) -> int:
    for i, v in enumerate(report.uavs):
        if v.uav_id == uav_id:
            return i
    raise KeyError(uav_id)
