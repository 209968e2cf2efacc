"""Simulation traces as JSON Lines.

Layout: one header line, one line per event, then a footer line carrying the
event count so truncated files are detected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, NamedTuple

TRACE_VERSION = 1


class TraceError(ValueError):
    pass


class VersionMismatch(TraceError):
    pass


class CorruptTrace(TraceError):
    pass


class TraceEvent(NamedTuple):
    tick: int
    seq: int
    kind: str
    payload: dict


@dataclass
class SimTrace:
    header: dict = field(default_factory=lambda: {"version": TRACE_VERSION})
    events: list[TraceEvent] = field(default_factory=list)

    def append(self, tick: int, kind: str, payload: dict) -> TraceEvent:
        ev = TraceEvent(tick, len(self.events), kind, payload)
        self.events.append(ev)
        return ev

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_trace(trace: SimTrace) -> str:
    header = dict(trace.header)
    header["version"] = header.get("version", TRACE_VERSION)
    lines = [_dumps({"header": header})]
    lines.extend(_dumps([e.tick, e.seq, e.kind, e.payload]) for e in trace.events)
    lines.append(_dumps({"end": len(trace.events)}))
    return "\n".join(lines) + "\n"


def read_trace(document: str) -> SimTrace:
    if not document.endswith("\n"):
        raise CorruptTrace("trace does not end with a newline (truncated?)")
    lines = document[:-1].split("\n")
    try:
        first = json.loads(lines[0])
        header = first["header"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptTrace(f"bad header: {exc}") from exc
    if header.get("version") != TRACE_VERSION:
        raise VersionMismatch(f"trace version {header.get('version')!r}, expected {TRACE_VERSION}")
    if len(lines) < 2:
        raise CorruptTrace("missing footer")
    try:
        footer = json.loads(lines[-1])
        count = footer["end"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptTrace("missing footer (truncated?)") from exc
    body = lines[1:-1]
    if count != len(body):
        raise CorruptTrace(f"footer announces {count} events, found {len(body)}")
    events = []
    prev = None
    for n, line in enumerate(body, start=2):
        try:
            tick, seq, kind, payload = json.loads(line)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise CorruptTrace(f"line {n}: {exc}") from exc
        if prev is not None and (tick, seq) <= prev:
            raise CorruptTrace(f"line {n}: events out of order")
        prev = (tick, seq)
        events.append(TraceEvent(tick, seq, kind, payload))
    return SimTrace(header, events)
