"""HTTP + server-sent-events boundary for operator consoles and drivers.

All payloads ride in a versioned envelope {request_id, payload | error}.
The simulation starts paused: time only moves when a client (or the serve
loop started via /sim/start) asks for it, which keeps scripted dialogues
transport-equivalent to in-process runs.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, StreamingResponse

from .sim.scenario import load_scenario, builtin_scenario_path
from .runtime import NetworkRuntime
from .copilot.engine import Copilot, PlanningFailedError
from .copilot.protocol import WrongStateError
from .copilot.intent import ClarifyingQuestion, UnparseableIntentError
from .knowledge import KnowledgeDoc, EmptyBodyError
from .allocator import Scheduler
from .metrics import slot_satisfies

API_VERSION = "v1"


class Gateway:
    """Holds the engine plus the background clock for free-running mode."""

    def __init__(self, copilot: Copilot, slot_wall_time_s: float = 0.02):
        self.copilot = copilot
        self.runtime = copilot.runtime
        self.slot_wall_time_s = slot_wall_time_s
        self._req_counter = 0
        self._clock_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    def next_request_id(self) -> str:
        self._req_counter += 1
        return f"req-{self._req_counter:06d}"

    def start_clock(self) -> None:
        if self._clock_thread and self._clock_thread.is_alive():
            self.runtime.paused = False
            return
        self.runtime.paused = False
        self._stop.clear()

        def loop():
            while not self._stop.is_set():
                if not self.runtime.paused:
                    self.runtime.advance_slot()
                time.sleep(self.slot_wall_time_s)

        self._clock_thread = threading.Thread(target=loop, daemon=True)
        self._clock_thread.start()

    def pause_clock(self) -> None:
        self.runtime.paused = True

    def shutdown(self) -> None:
        self._stop.set()


def _envelope(request_id: str, payload=None, error=None, status: int = 200):
    body = {"request_id": request_id, "version": API_VERSION}
    if error is not None:
        body["error"] = error
    else:
        body["payload"] = payload
    return JSONResponse(body, status_code=status)


def _error(request_id: str, code: str, message: str, status: int):
    return _envelope(request_id, error={"code": code, "message": message}, status=status)


def _world_snapshot(runtime: NetworkRuntime) -> dict:
    world = runtime.world
    users = [
        {
            "id": u.id,
            "x": u.position[0],
            "y": u.position[1],
            "group": u.group,
            "sector": u.sector,
            "serving_uav": u.serving_uav,
            "queue_bits": u.queue_bits,
        }
        for u in world.users
    ]
    uavs = [
        {
            "id": v.id,
            "x": v.position[0],
            "y": v.position[1],
            "altitude_m": v.position[2],
            "battery_j": v.battery_j,
            "tx_power_dbm": v.tx_power_dbm,
            "role": v.role,
            "operational": v.operational,
        }
        for v in world.uavs
    ]
    links = []
    for u in world.users:
        if not u.serving_uav:
            continue
        ls = world.link_state(u.serving_uav, u.id)
        links.append(
            {
                "uav_id": u.serving_uav,
                "user_id": u.id,
                "path_loss_db": round(ls.path_loss_db, 3),
                "excess_attenuation_db": ls.excess_attenuation_db,
                "los": ls.los,
            }
        )
    return {
        "clock_slot": world.clock_slot,
        "paused": runtime.paused,
        "slot_duration_s": world.config.slot_duration_s,
        "area_side_m": world.config.area_side_m,
        "sectors": [
            {
                "name": s.name,
                "x_min": s.x_min,
                "y_min": s.y_min,
                "x_max": s.x_max,
                "y_max": s.y_max,
            }
            for s in world.config.sectors
        ],
        "uavs": uavs,
        "users": users,
        "links": links,
        "active_events": [e.to_dict() for e in world.active_events()],
    }


def _slot_kpis(runtime: NetworkRuntime, report) -> dict:
    """Server-computed per-slot KPIs so clients never re-derive metrics."""
    dt = runtime.scenario.config.slot_duration_s
    per_class: dict[str, dict] = {}
    for u in report.users:
        agg = per_class.setdefault(
            u.group, {"served_bits": 0, "latency": [], "n": 0}
        )
        agg["served_bits"] += u.served_bits
        agg["n"] += 1
        if (u.generated_bits + u.served_bits + u.queue_bits) > 0:
            agg["latency"].append(u.latency_s)
    classes = {
        cls: {
            "throughput_mbps": a["served_bits"] / dt / 1e6,
            "mean_latency_ms": (
                1e3 * sum(a["latency"]) / len(a["latency"]) if a["latency"] else 0.0
            ),
            "n_users": a["n"],
        }
        for cls, a in sorted(per_class.items())
    }
    endur = [v.endurance_s for v in report.uavs if v.operational]
    energy = sum(v.propulsion_j + v.tx_j for v in report.uavs)
    bits = sum(u.served_bits for u in report.users)
    return {
        "slot": report.slot,
        "satisfied": slot_satisfies(report, runtime.constraints, dt),
        "classes": classes,
        "fleet_endurance_s": sum(endur) / len(endur) if endur else 0.0,
        "ee_mbit_per_joule": (bits / 1e6 / energy) if energy > 0 else 0.0,
    }


def make_app(
    scenario_path: Optional[str] = None,
    seed: Optional[int] = None,
    corpus_dir: Optional[str] = None,
    copilot: Optional[Copilot] = None,
    reasoner_mode: str = "rule",
    llm_endpoint: Optional[str] = None,
    llm_api_key: Optional[str] = None,
) -> FastAPI:
    if copilot is None:
        from .copilot.reasoner import make_reasoner, http_chat_completer

        path = scenario_path or str(builtin_scenario_path("seismic_response.json"))
        scenario = load_scenario(path)
        runtime = NetworkRuntime(scenario, seed=seed)
        runtime.scheme = "intent_weighted_pf"
        runtime.scheduler = Scheduler("intent_weighted_pf")
        if corpus_dir:
            runtime.kb.load_corpus_dir(corpus_dir)
        completer = (
            http_chat_completer(llm_endpoint, llm_api_key)
            if (reasoner_mode == "chat" and llm_endpoint)
            else None
        )
        copilot = Copilot(runtime, reasoner=make_reasoner(reasoner_mode, completer))
    gw = Gateway(copilot)
    app = FastAPI(title="lawnet-copilot gateway", version=API_VERSION)
    app.state.gateway = gw
    app.state.copilot = copilot

    runtime = copilot.runtime

    def rid() -> str:
        return gw.next_request_id()

    @app.middleware("http")
    async def cors(request: Request, call_next):
        if request.method == "OPTIONS":
            response = JSONResponse({})
        else:
            response = await call_next(request)
        response.headers["Access-Control-Allow-Origin"] = "*"
        response.headers["Access-Control-Allow-Methods"] = "GET, POST, OPTIONS"
        response.headers["Access-Control-Allow-Headers"] = "Content-Type"
        return response

    # ------------------------------------------------------------ sessions

    @app.post("/sessions", status_code=201)
    async def create_session():
        session = copilot.open_session()
        return {
            "request_id": rid(),
            "version": API_VERSION,
            "payload": {"session_id": session.session_id, "state": session.state.value},
        }

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        return _envelope(r, session.to_dict())

    @app.post("/sessions/{session_id}/intent")
    async def submit_intent(session_id: str, body: dict):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        text = body.get("text", "")
        try:
            outcome = copilot.submit_intent(session, text)
        except UnparseableIntentError as exc:
            return _error(r, "unparseable", str(exc), 422)
        except WrongStateError as exc:
            return _error(r, "wrong-state", str(exc), 409)
        if isinstance(outcome, ClarifyingQuestion):
            return _envelope(
                r,
                {
                    "kind": "question",
                    "question": outcome.to_dict(),
                    "state": session.state.value,
                },
            )
        return _envelope(
            r,
            {
                "kind": "intent",
                "intent": outcome.to_dict(),
                "state": session.state.value,
            },
        )

    @app.post("/sessions/{session_id}/answer")
    async def answer(session_id: str, body: dict):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        try:
            outcome = copilot.answer_elicitation(session, body.get("choice", ""))
        except (WrongStateError, ValueError) as exc:
            return _error(r, "wrong-state", str(exc), 409)
        if isinstance(outcome, ClarifyingQuestion):
            return _envelope(
                r,
                {
                    "kind": "question",
                    "question": outcome.to_dict(),
                    "state": session.state.value,
                },
            )
        return _envelope(
            r,
            {"kind": "intent", "intent": outcome.to_dict(), "state": session.state.value},
        )

    @app.post("/sessions/{session_id}/plan")
    async def propose(session_id: str):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        try:
            plan = copilot.propose_plan(session)
        except WrongStateError as exc:
            return _error(r, "wrong-state", str(exc), 409)
        except PlanningFailedError as exc:
            return _error(r, "planning-failed", str(exc), 422)
        return _envelope(r, {"plan": plan.to_dict(), "state": session.state.value})

    @app.get("/sessions/{session_id}/plan")
    async def get_plan(session_id: str):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        if session.current_plan is None:
            return _error(r, "not-found", "no current plan", 404)
        return _envelope(
            r, {"plan": session.current_plan.to_dict(), "state": session.state.value}
        )

    @app.post("/sessions/{session_id}/verdict")
    async def verdict(session_id: str, body: dict):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        if session.current_plan is None:
            return _error(r, "not-found", "no plan awaiting a verdict", 404)
        v = body.get("verdict", "")
        try:
            outcome = copilot.decide(session, v, body.get("text"))
        except WrongStateError as exc:
            return _error(r, "wrong-state", str(exc), 409)
        except (ValueError, PlanningFailedError) as exc:
            return _error(r, "invalid-verdict", str(exc), 422)
        payload: dict = {"state": session.state.value, "verdict": v}
        if isinstance(outcome, ClarifyingQuestion):
            payload["question"] = outcome.to_dict()
        if v == "approve":
            report = copilot.execute(session)
            payload["execution"] = report.to_dict()
            payload["state"] = session.state.value
            if session.current_plan is not None:
                payload["plan"] = session.current_plan.to_dict()
        elif session.current_plan is not None:
            payload["plan"] = session.current_plan.to_dict()
        return _envelope(r, payload)

    @app.get("/sessions/{session_id}/audit")
    async def audit(session_id: str):
        r = rid()
        try:
            session = copilot.session(session_id)
        except KeyError:
            return _error(r, "not-found", f"no session {session_id}", 404)
        return _envelope(r, {"audit_log": [e.to_dict() for e in session.audit_log]})

    # --------------------------------------------------------------- tools

    @app.get("/tools")
    async def tools():
        return _envelope(rid(), {"tools": copilot.registry.list_tools()})

    # ----------------------------------------------------------- knowledge

    @app.post("/knowledge/docs", status_code=201)
    async def ingest(body: dict):
        r = rid()
        try:
            doc = KnowledgeDoc(**body)
            doc_id = runtime.kb.ingest(doc)
        except (TypeError, ValueError, EmptyBodyError) as exc:
            return _error(r, "invalid-doc", str(exc), 422)
        return {
            "request_id": r,
            "version": API_VERSION,
            "payload": {"doc_id": doc_id},
        }

    @app.get("/knowledge/docs/{doc_id}")
    async def get_doc(doc_id: str):
        r = rid()
        doc = runtime.kb.get(doc_id)
        if doc is None:
            return _error(r, "not-found", f"no document {doc_id}", 404)
        return _envelope(r, doc.to_dict())

    @app.get("/knowledge/search")
    async def search(q: str, k: int = 5, kind: Optional[str] = None):
        results = runtime.kb.retrieve(q, k=k, kind_filter=kind)
        return _envelope(rid(), {"results": [x.to_dict() for x in results]})

    # ------------------------------------------------------------ sim time

    @app.get("/state")
    async def state():
        return _envelope(rid(), _world_snapshot(runtime))

    @app.post("/sim/start")
    async def sim_start():
        gw.start_clock()
        return _envelope(rid(), {"paused": runtime.paused})

    @app.post("/sim/pause")
    async def sim_pause():
        gw.pause_clock()
        return _envelope(rid(), {"paused": runtime.paused})

    @app.post("/sim/step")
    async def sim_step(body: dict | None = None):
        n = int((body or {}).get("slots", 1))
        n = max(1, min(n, 10_000))
        for _ in range(n):
            runtime.advance_slot()
        return _envelope(rid(), {"clock_slot": runtime.clock_slot})

    # ------------------------------------------------------------ streaming

    @app.get("/stream/telemetry")
    async def stream(request: Request, cursor: int = -1, decimation: int = 1, limit: int = 0):
        """SSE feed of SlotReports; resumes after `cursor`, every
        `decimation`-th slot; `limit` > 0 closes after that many events."""
        decim = max(1, decimation)

        async def gen():
            next_idx = 0
            sent = 0
            if cursor >= 0:
                # resume after the given slot
                while (
                    next_idx < len(runtime.trace)
                    and runtime.trace[next_idx].slot <= cursor
                ):
                    next_idx += 1
            idle = 0.0
            while True:
                if next_idx < len(runtime.trace):
                    report = runtime.trace[next_idx]
                    next_idx += 1
                    if report.slot % decim != 0:
                        continue
                    event = {
                        "report": report.to_dict(),
                        "world": _world_snapshot(runtime),
                        "kpis": _slot_kpis(runtime, report),
                    }
                    yield f"id: {report.slot}\ndata: {json.dumps(event)}\n\n"
                    sent += 1
                    idle = 0.0
                    if limit and sent >= limit:
                        return
                else:
                    if await request.is_disconnected():
                        return
                    await asyncio.sleep(0.02)
                    idle += 0.02
                    if idle >= 15.0:
                        yield ": keep-alive\n\n"
                        idle = 0.0

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
