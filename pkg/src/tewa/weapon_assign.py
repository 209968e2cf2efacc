"""Weapon assignment: candidate weapons per threat, pair weights, and the
lock/queue proposal procedure.

A weapon holds at most two threats: one locked (being engaged) and one
waiting in its queue. A threat is scheduled on at most one weapon.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

from .config import WeightsConfig
from .geometry import Point2, Sector, SectorCrossing, euclidean_distance, required_elevation, solve_intercept
from .library import Libraries
from .threat_eval import DefendedAsset, TrackState, engageable, track_crossing

MAX_SCHEDULED = 2
QUEUE_LENGTH = MAX_SCHEDULED - 1


class ConstraintViolation(AssertionError):
    """The scheduler produced an infeasible schedule (a bug, not bad input)."""


class WsCondition(enum.Enum):
    UP = "up"
    DOWN = "down"
    DESTROYED = "destroyed"


@dataclass
class WeaponSystem:
    ws_id: str
    da_id: str
    weapon_class: str
    position: Point2
    sector: Sector
    max_elevation: float  # rad
    projectile_speed: float  # km/s
    rate_of_fire: float  # rounds/s
    stabilization_time: float  # s
    lethality_index: float
    condition: WsCondition = WsCondition.UP
    ammo: int = 10
    load: float = 0.0
    shots: int = 1

    def __post_init__(self) -> None:
        if self.sector.circle.center != self.position:
            raise ValueError(f"WS {self.ws_id}: sector must be centred on the weapon")
        if not 0.0 <= self.lethality_index <= 1.0:
            raise ValueError(f"WS {self.ws_id}: lethality_index outside [0, 1]")
        if not 0.0 <= self.load <= 1.0:
            raise ValueError(f"WS {self.ws_id}: load outside [0, 1]")
        if self.projectile_speed <= 0 or self.rate_of_fire <= 0 or self.max_elevation <= 0:
            raise ValueError(f"WS {self.ws_id}: speeds, rate of fire and max elevation must be positive")
        if self.stabilization_time < 0 or self.ammo < 0 or self.shots < 1:
            raise ValueError(f"WS {self.ws_id}: invalid stabilization, ammo or shots")

    @property
    def is_up(self) -> bool:
        return self.condition is WsCondition.UP


class WsFeatures(NamedTuple):
    time_to_ws: float
    required_elevation: float
    max_elevation: float
    lethality_index: float
    stabilization_time: float
    rate_of_fire: float


class WsCandidate(NamedTuple):
    ws_id: str
    entry_time: float
    exit_time: float
    required_elevation: float
    time_to_ws: float
    tof: float
    pair_weight: float


class Violation(NamedTuple):
    kind: str  # capacity | one_weapon | exclusive | gate
    ws_id: str | None
    track_id: str | None
    detail: str


@dataclass
class WsSchedule:
    """Locked and queued threats per weapon.

    ``weights`` remembers the pair weight each slot was won with; queue
    bumping compares against it.
    """

    locked: dict[str, str] = field(default_factory=dict)
    queues: dict[str, list[str]] = field(default_factory=dict)
    weights: dict[tuple[str, str], float] = field(default_factory=dict)
    locked_at: dict[str, float] = field(default_factory=dict)

    def copy(self) -> "WsSchedule":
        return WsSchedule(
            dict(self.locked),
            {ws: list(q) for ws, q in self.queues.items()},
            dict(self.weights),
            dict(self.locked_at),
        )

    def scheduled_pairs(self) -> list[tuple[str, str]]:
        pairs = list(self.locked.items())
        for ws, q in self.queues.items():
            pairs.extend((ws, t) for t in q)
        return sorted(pairs)

    def locked_pairs(self) -> list[tuple[str, str]]:
        """Pairs whose threat is locked and not also waiting at the same weapon."""
        return sorted((ws, t) for ws, t in self.locked.items() if t not in self.queues.get(ws, ()))

    def scheduled_count(self, ws_id: str) -> int:
        return (ws_id in self.locked) + len(self.queues.get(ws_id, ()))

    def ws_of(self, track_id: str) -> str | None:
        for ws, t in self.locked.items():
            if t == track_id:
                return ws
        for ws, q in self.queues.items():
            if track_id in q:
                return ws
        return None

    def is_scheduled(self, track_id: str) -> bool:
        return self.ws_of(track_id) is not None

    def lock(self, ws_id: str, track_id: str, weight: float, when: float = 0.0) -> None:
        self.locked[ws_id] = track_id
        self.weights[(ws_id, track_id)] = weight
        self.locked_at[ws_id] = when

    def enqueue(self, ws_id: str, track_id: str, weight: float) -> None:
        self.queues.setdefault(ws_id, []).append(track_id)
        self.weights[(ws_id, track_id)] = weight

    def clear_queues(self) -> list[str]:
        dropped = [t for ws in sorted(self.queues) for t in self.queues[ws]]
        for ws in self.queues:
            for t in self.queues[ws]:
                self.weights.pop((ws, t), None)
        self.queues.clear()
        return dropped

    def release(self, track_id: str, when: float = 0.0) -> list[tuple[str, str]]:
        """Drop a threat everywhere; a freed lock goes to the queue head.

        Returns ``(ws_id, promoted_track)`` for each promotion.
        """
        promoted = []
        for ws, q in self.queues.items():
            if track_id in q:
                q.remove(track_id)
                self.weights.pop((ws, track_id), None)
        for ws in [w for w, t in self.locked.items() if t == track_id]:
            del self.locked[ws]
            self.locked_at.pop(ws, None)
            self.weights.pop((ws, track_id), None)
            q = self.queues.get(ws)
            if q:
                nxt = q.pop(0)
                w = self.weights.get((ws, nxt), 0.0)
                self.lock(ws, nxt, w, when)
                promoted.append((ws, nxt))
        self.queues = {ws: q for ws, q in self.queues.items() if q}
        return promoted

    def total_weight(self) -> float:
        return math.fsum(self.weights.get(p, 0.0) for p in self.scheduled_pairs())


def ws_pair_weight(features: WsFeatures, weights: WeightsConfig) -> float:
    f = features
    time_s = math.exp(-f.time_to_ws / weights.ws_time_scale)
    margin = (f.max_elevation - f.required_elevation) / f.max_elevation
    margin = min(1.0, max(0.0, margin))
    stab = math.exp(-f.stabilization_time / weights.stabilization_scale)
    rof = min(1.0, max(0.0, f.rate_of_fire / weights.reference_rof))
    return (
        weights.ws_time * time_s
        + weights.ws_elevation * margin
        + weights.ws_lethality * f.lethality_index
        + weights.ws_stabilization * stab
        + weights.ws_rate_of_fire * rof
    )


def evaluate_candidate(
    track: TrackState,
    ws: WeaponSystem,
    libs: Libraries,
    weights: WeightsConfig,
    clock: float,
    crossing: SectorCrossing | None,
) -> WsCandidate | None:
    if not engageable(ws):
        return None
    if libs.effectiveness(ws.weapon_class, track.threat_class) < weights.capability_threshold:
        return None
    if crossing is None:
        return None
    t0 = track.last_time
    if t0 + crossing.exit_time < clock:
        return None
    elevation = required_elevation(track.altitude, euclidean_distance(ws.position, crossing.entry))
    if elevation > ws.max_elevation:
        return None
    est = track.velocity()
    vel = est[0] if est is not None else Point2(0.0, 0.0)
    shot = solve_intercept(crossing.entry, vel, ws.position, ws.projectile_speed)
    if shot is None:
        return None
    time_to_ws = max(0.0, t0 + crossing.entry_time - clock)
    feats = WsFeatures(time_to_ws, elevation, ws.max_elevation, ws.lethality_index,
                       ws.stabilization_time, ws.rate_of_fire)
    return WsCandidate(
        ws.ws_id,
        t0 + crossing.entry_time,
        t0 + crossing.exit_time,
        elevation,
        time_to_ws,
        shot.time_of_flight,
        ws_pair_weight(feats, weights),
    )


def candidate_ws(
    track: TrackState,
    da: DefendedAsset,
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    clock: float = 0.0,
    crossings: Mapping[tuple[str, str], SectorCrossing | None] | None = None,
) -> list[WsCandidate]:
    """Weapons of ``da`` that can engage ``track`` now or later, best first."""
    out = []
    for ws_id in da.weapon_ids:
        ws = weapons.get(ws_id)
        if ws is None:
            continue
        key = (track.track_id, ws_id)
        if crossings is not None and key in crossings:
            crossing = crossings[key]
        else:
            crossing = track_crossing(track, ws.sector)
        cand = evaluate_candidate(track, ws, libs, weights, clock, crossing)
        if cand is not None:
            out.append(cand)
    out.sort(key=lambda c: (-c.pair_weight, c.ws_id))
    return out


def assign_threats_to_ws(
    ranked_threats: Sequence[str],
    candidates: Mapping[str, Sequence[WsCandidate]],
    schedule: WsSchedule,
    *,
    clock: float = 0.0,
    log: list | None = None,
) -> WsSchedule:
    """Run the proposal procedure in rank order and return a new schedule.

    Each unscheduled threat proposes down its candidate list. A weapon
    accepts as a lock when it has none, else into an empty queue; a full
    queue is won only by a strictly heavier proposal, and the bumped threat
    resumes from its next candidate. Locks are never bumped.
    """
    sched = schedule.copy()
    cursor: dict[str, int] = {}
    pending: list[str] = [t for t in reversed(ranked_threats) if not sched.is_scheduled(t)]

    def emit(**event) -> None:
        if log is not None:
            log.append(event)

    while pending:
        t = pending.pop()
        cands = candidates.get(t, ())
        i = cursor.get(t, 0)
        placed = False
        while i < len(cands):
            c = cands[i]
            i += 1
            ws = c.ws_id
            if ws not in sched.locked:
                sched.lock(ws, t, c.pair_weight, clock)
                emit(action="lock", track=t, ws=ws, weight=c.pair_weight)
                placed = True
            elif len(sched.queues.get(ws, ())) < QUEUE_LENGTH:
                sched.enqueue(ws, t, c.pair_weight)
                emit(action="queue", track=t, ws=ws, weight=c.pair_weight)
                placed = True
            else:
                waiting = sched.queues[ws][-1]
                if c.pair_weight > sched.weights[(ws, waiting)]:
                    sched.queues[ws].remove(waiting)
                    sched.weights.pop((ws, waiting), None)
                    sched.enqueue(ws, t, c.pair_weight)
                    emit(action="bump", track=t, ws=ws, weight=c.pair_weight, bumped=waiting)
                    pending.append(waiting)
                    placed = True
                else:
                    emit(action="reject", track=t, ws=ws, weight=c.pair_weight)
            if placed:
                break
        cursor[t] = i

    violations = check_constraints(sched)
    if violations:
        raise ConstraintViolation(f"scheduler broke constraints: {violations}")
    return sched


def check_constraints(
    schedule: WsSchedule,
    feasible: Callable[[str, str], bool] | None = None,
) -> list[Violation]:
    """Every violated per-weapon capacity, single-lock, exclusivity, or gate."""
    out: list[Violation] = []
    weapons = sorted(set(schedule.locked) | set(schedule.queues))
    for ws in weapons:
        n = schedule.scheduled_count(ws)
        if n > MAX_SCHEDULED:
            out.append(Violation("capacity", ws, None, f"{n} threats scheduled (max {MAX_SCHEDULED})"))
        lt = schedule.locked.get(ws)
        if lt is not None and lt in schedule.queues.get(ws, ()):
            out.append(Violation("exclusive", ws, lt, "threat both locked and queued"))

    seen: dict[str, list[str]] = {}
    for ws, t in schedule.scheduled_pairs():
        seen.setdefault(t, []).append(ws)
    locks: dict[str, list[str]] = {}
    for ws, t in schedule.locked.items():
        locks.setdefault(t, []).append(ws)
    for t in sorted(seen):
        if len(locks.get(t, ())) > 1:
            out.append(Violation("one_weapon", None, t, f"locked at {sorted(locks[t])}"))
        elif len(set(seen[t])) > 1:
            out.append(Violation("one_weapon", None, t, f"scheduled at {sorted(set(seen[t]))}"))
    if feasible is not None:
        for ws, t in schedule.scheduled_pairs():
            if not feasible(ws, t):
                out.append(Violation("gate", ws, t, "pair fails the capability gate"))
    return out


def refresh_loads(weapons: Iterable[WeaponSystem], schedule: WsSchedule) -> None:
    for ws in weapons:
        ws.load = min(1.0, schedule.scheduled_count(ws.ws_id) / MAX_SCHEDULED)
