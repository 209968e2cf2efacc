"""Newline-delimited JSON protocol between an external simulator and the engine.

Every message is one line ``{"type": ..., "tick": n, "payload": {...}}``.
The simulator sends ``TrackUpdate`` messages for a tick, then ``Tick``; the
engine answers each ``Tick`` with one ``EngagementOrder`` and one
``EngagementResult``. Malformed input gets an ``Error`` reply and the
session carries on. ``Bye`` or a closed socket ends the session.
"""

from __future__ import annotations

import json
import math
import socket
import socketserver
from dataclasses import dataclass, field
from typing import Any

from ..engine import ScenarioDriver, SimState, TrackUpdate, init_state, step
from ..threat_eval import TrackStatus
from .scenario import ScenarioSpec
from .trace import SimTrace

PROTOCOL_VERSION = 1
MESSAGE_TYPES = ("Hello", "TrackUpdate", "Tick", "EngagementOrder", "EngagementResult", "Error", "Bye")


class ProtocolError(ValueError):
    pass


def encode(msg_type: str, tick: int, payload: dict | None = None) -> str:
    if msg_type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {msg_type!r}")
    body = {"type": msg_type, "tick": tick, "payload": payload or {}}
    return json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def decode(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"not JSON: {exc.msg} at column {exc.colno}") from exc
    if not isinstance(msg, dict):
        raise ProtocolError("message must be an object")
    kind = msg.get("type")
    if kind not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type {kind!r}")
    tick = msg.get("tick", 0)
    if isinstance(tick, bool) or not isinstance(tick, int):
        raise ProtocolError("tick must be an integer")
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object")
    return {"type": kind, "tick": tick, "payload": payload}


def _engagement(e) -> dict:
    return {"seq": e.seq, "ws": e.ws_id, "track": e.track_id, "fire_time": e.fire_time,
            "impact_time": e.impact_time, "sskp": e.sskp, "outcome": e.outcome.value}


@dataclass
class Session:
    """Protocol state for one simulator connection; transport-free."""

    spec: ScenarioSpec
    seed: int | None = None
    state: SimState = field(init=False)
    buffer: list[TrackUpdate] = field(default_factory=list)
    closed: bool = False

    def __post_init__(self) -> None:
        self.state = init_state(self.spec, self.seed, external=True)

    @property
    def trace(self) -> SimTrace:
        return self.state.event_log

    def handle_line(self, line: str) -> list[str]:
        try:
            msg = decode(line)
        except ProtocolError as exc:
            return [encode("Error", self.state.tick, {"reason": str(exc)})]
        return self.handle(msg)

    def handle(self, msg: dict) -> list[str]:
        if self.closed:
            return [encode("Error", self.state.tick, {"reason": "session closed"})]
        kind, payload = msg["type"], msg["payload"]
        try:
            if kind == "Hello":
                return [encode("Hello", self.state.tick, self._hello())]
            if kind == "TrackUpdate":
                self.buffer.extend(self._updates(payload))
                return []
            if kind == "Tick":
                return self._tick(msg["tick"])
            if kind == "Bye":
                self.close()
                return [encode("Bye", self.state.tick, {"metrics": self.state.metrics().to_dict()})]
            raise ProtocolError(f"{kind} is not accepted from a simulator")
        except ProtocolError as exc:
            return [encode("Error", self.state.tick, {"reason": str(exc)})]

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.state.emit("end", {"ticks": self.state.tick})

    def _hello(self) -> dict:
        s = self.state
        return {"version": PROTOCOL_VERSION, "name": self.spec.name, "dt": s.dt, "mode": s.mode.value,
                "das": [d.da_id for d in s.das], "weapons": sorted(s.weapons)}

    def _updates(self, payload: dict) -> list[TrackUpdate]:
        raw = payload.get("tracks", [payload])
        if not isinstance(raw, list):
            raise ProtocolError("tracks must be a list")
        out = []
        for i, d in enumerate(raw):
            try:
                u = TrackUpdate.from_dict(d)
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"bad track update #{i}: {exc!r}") from exc
            if not all(math.isfinite(v) for v in (u.t, u.x, u.y, u.altitude)):
                raise ProtocolError(f"bad track update #{i}: non-finite number")
            out.append(u)
        return out

    def _tick(self, tick: int) -> list[str]:
        s = self.state
        if tick != s.tick + 1:
            raise ProtocolError(f"expected tick {s.tick + 1}, got {tick}")
        updates, self.buffer = self.buffer, []
        step(s, updates)
        order = {
            "fired": [_engagement(e) for e in s.fired],
            "locked": dict(sorted(s.schedule.locked.items())),
            "queued": {w: list(q) for w, q in sorted(s.schedule.queues.items()) if q},
            "assignment": dict(sorted(s.assignment.items())),
            "mode": s.mode.value,
        }
        result = {
            "resolved": [_engagement(e) for e in s.resolved],
            "neutralized": sorted(t for t, tr in s.tracks.items() if tr.status is TrackStatus.NEUTRALIZED),
            "leaked": sorted(t for t, tr in s.tracks.items() if tr.status is TrackStatus.LEAKED),
            "alive": sum(1 for t in s.tracks.values() if t.alive),
            "pending": len(s.pending_engagements),
        }
        return [encode("EngagementOrder", s.tick, order), encode("EngagementResult", s.tick, result)]


class _Handler(socketserver.StreamRequestHandler):
    def setup(self) -> None:
        super().setup()
        # one small reply per request: Nagle plus delayed ACKs would stall every tick
        self.connection.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def handle(self) -> None:
        server: ProtocolServer = self.server  # type: ignore[assignment]
        session = Session(server.spec, server.seed)
        try:
            for raw in self.rfile:
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError:
                    replies = [encode("Error", session.state.tick, {"reason": "not UTF-8"})]
                else:
                    if not line.strip():
                        continue
                    replies = session.handle_line(line)
                for r in replies:
                    self.wfile.write(r.encode("utf-8"))
                self.wfile.flush()
                if session.closed:
                    break
        except (ConnectionError, OSError):
            pass
        finally:
            session.close()
            server.sessions.append(session)


class ProtocolServer(socketserver.TCPServer):
    """Serves one simulator connection at a time. Port 0 picks a free port."""

    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], spec: ScenarioSpec, seed: int | None = None):
        self.spec = spec
        self.seed = seed
        self.sessions: list[Session] = []
        super().__init__(address, _Handler)

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.server_address[:2]
        return host, port

    def serve(self, max_sessions: int | None = None) -> None:
        while max_sessions is None or len(self.sessions) < max_sessions:
            self.handle_request()


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must look like host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def serve_protocol(endpoint: str | tuple[str, int], spec: ScenarioSpec, seed: int | None = None,
                   max_sessions: int | None = None) -> list[Session]:
    address = parse_endpoint(endpoint) if isinstance(endpoint, str) else endpoint
    with ProtocolServer(address, spec, seed) as server:
        server.serve(max_sessions)
        return server.sessions


class ProtocolClient:
    """Minimal blocking simulator-side connection."""

    def __init__(self, address: tuple[str, int], timeout: float = 30.0):
        self.sock = socket.create_connection(address, timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.rfile = self.sock.makefile("r", encoding="utf-8", newline="\n")

    def send(self, msg_type: str, tick: int = 0, payload: dict | None = None) -> None:
        self.sock.sendall(encode(msg_type, tick, payload).encode("utf-8"))

    def send_raw(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8"))

    def recv(self) -> dict:
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return decode(line)

    def close(self) -> None:
        try:
            self.rfile.close()
        finally:
            self.sock.close()

    def __enter__(self) -> "ProtocolClient":
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()


def replay_over_wire(spec: ScenarioSpec, address: tuple[str, int]) -> list[dict]:
    """Act as the simulator for ``spec``'s scripted threats.

    Returns every EngagementOrder payload in tick order.
    """
    driver = ScenarioDriver(spec.threats)
    all_ids = {th.track_id for th in spec.threats}
    max_ticks = math.ceil(spec.max_time / spec.dt - 1e-9)
    seen: set[str] = set()
    gone: set[str] = set()
    orders = []
    with ProtocolClient(address) as client:
        client.send("Hello")
        client.recv()
        alive = pending = 0
        tick = 0
        while tick < max_ticks and not (seen >= all_ids and alive == 0 and pending == 0):
            tick += 1
            updates = driver.updates(tick * spec.dt, gone)
            if updates:
                client.send("TrackUpdate", tick, {"tracks": [u.to_dict() for u in updates]})
            seen.update(u.track_id for u in updates)
            gone.update(u.track_id for u in updates if u.exited)
            client.send("Tick", tick)
            order, result = client.recv(), client.recv()
            if order["type"] != "EngagementOrder" or result["type"] != "EngagementResult":
                raise ProtocolError(f"unexpected replies {order['type']}, {result['type']}")
            orders.append(order["payload"])
            p = result["payload"]
            gone.update(p["neutralized"])
            gone.update(p["leaked"])
            alive, pending = p["alive"], p["pending"]
        client.send("Bye", tick)
        client.recv()
    return orders
