"""Discrete-time simulation around the two-stage assignment.

Each tick runs observe (move tracks, resolve due engagements, detect exits
and leaks), orient/decide (mode selection, threat-asset pairing, weapon
scheduling) and act (fire locked weapons that are ready). Every stochastic
draw comes from one seeded ``random.Random`` stream in a fixed order, so a
(scenario, seed) pair always yields the same trace.
"""

from __future__ import annotations

import copy
import dataclasses
import enum
import math
import random
import time
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .config import Mode, WeightsConfig
from .geometry import Point2, Sample, euclidean_distance, required_elevation, solve_intercept
from .io.scenario import ScenarioSpec, ThreatSpec
from .io.trace import TRACE_VERSION, SimTrace
from .library import Libraries
from .pipeline import two_stage_assign
from .threat_eval import (
    DefendedAsset,
    KillTerm,
    TrackState,
    TrackStatus,
    da_load,
    kill_probability,
    arrival_horizon,
    track_crossing,
)
from .weapon_assign import (
    ConstraintViolation,
    WeaponSystem,
    WsSchedule,
    check_constraints,
    refresh_loads,
)

HISTORY = 3  # samples kept per track; velocity needs two


class Outcome(enum.Enum):
    PENDING = "pending"
    KILL = "kill"
    MISS = "miss"


@dataclass
class EngagementEvent:
    ws_id: str
    track_id: str
    fire_time: float
    impact_time: float
    sskp: float
    outcome: Outcome = Outcome.PENDING
    seq: int = 0

    def __post_init__(self) -> None:
        if not self.impact_time > self.fire_time:
            raise ValueError("impact must come after firing")
        if not 0.0 <= self.sskp <= 1.0:
            raise ValueError("sskp outside [0, 1]")


class TrackUpdate(NamedTuple):
    """One observed position, as fed by the kinematics driver or the wire."""

    track_id: str
    t: float
    x: float
    y: float
    threat_class: str
    altitude: float = 0.0
    value: float | None = None
    exited: bool = False

    def to_dict(self) -> dict:
        return self._asdict()

    @classmethod
    def from_dict(cls, d: dict) -> "TrackUpdate":
        return cls(
            str(d["track_id"]), float(d["t"]), float(d["x"]), float(d["y"]), str(d["threat_class"]),
            float(d.get("altitude", 0.0)),
            None if d.get("value") is None else float(d["value"]),
            bool(d.get("exited", False)),
        )


class ScenarioDriver:
    """Moves scripted threats along their waypoints (ground truth)."""

    def __init__(self, threats: Iterable[ThreatSpec]):
        self.threats = sorted(threats, key=lambda t: t.track_id)

    def updates(self, clock: float, skip: Iterable[str] = ()) -> list[TrackUpdate]:
        skip = set(skip)
        out = []
        for th in self.threats:
            if th.spawn_time > clock or th.track_id in skip:
                continue
            pos, done = th.position_at(clock - th.spawn_time)
            out.append(TrackUpdate(th.track_id, clock, pos.x, pos.y, th.threat_class,
                                   th.altitude, th.value, done))
        return out

    def all_spawned(self, clock: float) -> bool:
        return all(th.spawn_time <= clock for th in self.threats)


@dataclass
class Metrics:
    threats_total: int = 0
    threats_neutralized: int = 0
    leakers: int = 0
    exited: int = 0
    alive: int = 0
    surviving_da_value: float = 0.0
    surviving_threat_value: float = 0.0
    ammo_spent: int = 0
    mean_time_to_neutralize: float | None = None
    threats_allocated: int = 0
    threats_scheduled: int = 0
    max_scheduled_per_ws: int = 0
    idle_weapons: list[str] = field(default_factory=list)
    da_load: dict[str, int] = field(default_factory=dict)
    engaged_mode: str | None = None
    final_mode: str | None = None
    ticks: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class SimState:
    clock: float
    tick: int
    dt: float
    tracks: dict[str, TrackState]
    das: list[DefendedAsset]
    weapons: dict[str, WeaponSystem]
    libs: Libraries
    weights: WeightsConfig
    schedule: WsSchedule
    pending_engagements: list[EngagementEvent]
    mode: Mode
    rng: random.Random
    ammo_spent: int
    event_log: SimTrace
    driver: ScenarioDriver | None = None
    threat_values: dict[str, float] = field(default_factory=dict)
    spawned_at: dict[str, float] = field(default_factory=dict)
    kill_times: dict[str, float] = field(default_factory=dict)
    last_fire: dict[str, float] = field(default_factory=dict)
    assignment: dict[str, str] = field(default_factory=dict)
    allocated: dict[str, set] = field(default_factory=dict)
    scheduled_ever: set = field(default_factory=set)
    weapons_used: set = field(default_factory=set)
    max_scheduled: int = 0
    engaged_mode: Mode | None = None
    fire_seq: int = 0
    fired: list[EngagementEvent] = field(default_factory=list)
    resolved: list[EngagementEvent] = field(default_factory=list)
    decision_ms: list[float] = field(default_factory=list)
    _last_schedule: tuple = ()

    def emit(self, kind: str, payload: dict) -> None:
        self.event_log.append(self.tick, kind, payload)

    def live_tracks(self) -> list[TrackState]:
        return [self.tracks[t] for t in sorted(self.tracks) if self.tracks[t].alive]

    def count(self, status: TrackStatus) -> int:
        return sum(1 for t in self.tracks.values() if t.status is status)

    def finished(self) -> bool:
        if self.pending_engagements or any(t.alive for t in self.tracks.values()):
            return False
        return self.driver is None or all(th.track_id in self.tracks for th in self.driver.threats)

    def metrics(self) -> Metrics:
        total = len(self.threat_values)
        neutralized = self.count(TrackStatus.NEUTRALIZED)
        leakers = self.count(TrackStatus.LEAKED)
        exited = self.count(TrackStatus.EXITED)
        durations = [self.kill_times[t] - self.spawned_at[t] for t in sorted(self.kill_times)]
        return Metrics(
            threats_total=total,
            threats_neutralized=neutralized,
            leakers=leakers,
            exited=exited,
            alive=total - neutralized - leakers - exited,
            surviving_da_value=math.fsum(d.priority for d in self.das if not d.damaged),
            surviving_threat_value=math.fsum(
                v for t, v in self.threat_values.items() if t not in self.kill_times
            ),
            ammo_spent=self.ammo_spent,
            mean_time_to_neutralize=math.fsum(durations) / len(durations) if durations else None,
            threats_allocated=len(set().union(*self.allocated.values())) if self.allocated else 0,
            threats_scheduled=len(self.scheduled_ever),
            max_scheduled_per_ws=self.max_scheduled,
            idle_weapons=sorted(set(self.weapons) - self.weapons_used),
            da_load={d: len(ts) for d, ts in sorted(self.allocated.items())},
            engaged_mode=self.engaged_mode.value if self.engaged_mode else None,
            final_mode=self.mode.value,
            ticks=self.tick,
        )


def select_mode(num_alive_threats: int, num_up_ws: int, weights: WeightsConfig | None = None) -> Mode | None:
    """Subtractive when weapons outnumber threats, preferential when threats
    outnumber weapons, None (keep the current mode) on a tie."""
    if weights is not None and weights.mode_override is not None:
        return weights.mode_override
    if num_alive_threats < num_up_ws:
        return Mode.SUBTRACTIVE
    if num_alive_threats > num_up_ws:
        return Mode.PREFERENTIAL
    return None


def apply_mode(mode: Mode, weights: WeightsConfig) -> WeightsConfig:
    """Point the objective at DA priority (preferential) or threat value
    (subtractive)."""
    if mode is Mode.PREFERENTIAL:
        return dataclasses.replace(weights, objective_da_priority=1.0, objective_threat_value=0.0)
    return dataclasses.replace(weights, objective_da_priority=0.0, objective_threat_value=1.0)


def single_shot_kill_probability(ws: WeaponSystem, threat_class: str, libs: Libraries) -> float:
    p = ws.lethality_index * libs.effectiveness(ws.weapon_class, threat_class)
    return min(1.0, max(0.0, p))


def resolve_engagement(event: EngagementEvent, rng: random.Random) -> Outcome:
    """Bernoulli draw against the shot's kill probability."""
    return Outcome.KILL if rng.random() < event.sskp else Outcome.MISS


def snapshot(spec: ScenarioSpec) -> tuple[list[TrackState], float]:
    """Every scripted threat as a two-sample track, one tick after t=0.

    Spawn times are ignored so the whole raid is visible at once.
    """
    tracks = []
    for th in sorted(spec.threats, key=lambda t: t.track_id):
        p0, _ = th.position_at(0.0)
        p1, _ = th.position_at(spec.dt)
        value = th.value if th.value is not None else spec.libraries.threat(th.threat_class).value
        tracks.append(TrackState(th.track_id, [Sample(0.0, p0), Sample(spec.dt, p1)], th.altitude,
                                 th.threat_class, value=value))
    return tracks, spec.dt


def init_state(spec: ScenarioSpec, seed: int | None = None, *, external: bool = False) -> SimState:
    """Fresh state for ``spec``; ``external`` expects tracks from the wire."""
    seed = spec.seed if seed is None else seed
    libs = spec.libraries
    das = sorted(copy.deepcopy(spec.das), key=lambda d: d.da_id)
    weapons = {w.ws_id: w for w in sorted(copy.deepcopy(spec.weapons), key=lambda w: w.ws_id)}
    threat_values = {}
    if not external:
        for th in spec.threats:
            threat_values[th.track_id] = th.value if th.value is not None else libs.threat(th.threat_class).value
    header = {
        "version": TRACE_VERSION,
        "seed": seed,
        "spec_hash": spec.spec_hash(),
        "name": spec.name,
        "dt": spec.dt,
        "initial_mode": spec.initial_mode.value,
        "das": {d.da_id: d.priority for d in das},
        "weapons": sorted(weapons),
        "threats": dict(sorted(threat_values.items())),
    }
    return SimState(
        clock=0.0,
        tick=0,
        dt=spec.dt,
        tracks={},
        das=das,
        weapons=weapons,
        libs=libs,
        weights=spec.weights,
        schedule=WsSchedule(),
        pending_engagements=[],
        mode=spec.initial_mode,
        rng=random.Random(seed),
        ammo_spent=0,
        event_log=SimTrace(header, []),
        driver=None if external else ScenarioDriver(spec.threats),
        threat_values=threat_values,
    )


def _release(state: SimState, track_id: str, reason: str) -> None:
    ws = state.schedule.ws_of(track_id)
    promoted = state.schedule.release(track_id, state.clock)
    if ws is not None:
        state.emit("release", {"track": track_id, "ws": ws, "reason": reason})
    for ws_id, nxt in promoted:
        state.emit("promote", {"track": nxt, "ws": ws_id})


def _observe(state: SimState, updates: Sequence[TrackUpdate]) -> list[str]:
    exited = []
    for u in sorted(updates, key=lambda u: u.track_id):
        pos = Point2(u.x, u.y)
        track = state.tracks.get(u.track_id)
        if track is None:
            value = u.value if u.value is not None else state.libs.threat(u.threat_class).value
            track = TrackState(u.track_id, [Sample(u.t, pos)], u.altitude, u.threat_class, value=value)
            state.tracks[u.track_id] = track
            state.spawned_at[u.track_id] = state.clock
            state.threat_values.setdefault(u.track_id, value)
            state.emit("spawn", {"track": u.track_id, "class": u.threat_class, "altitude": u.altitude,
                                 "value": value, "x": u.x, "y": u.y})
        elif not track.alive:
            continue
        elif u.t > track.last_time:
            track.samples.append(Sample(u.t, pos))
            if len(track.samples) > HISTORY:
                del track.samples[:-HISTORY]
        if u.exited:
            exited.append(u.track_id)
    live = state.live_tracks()
    if live:
        state.emit("tracks", {t.track_id: [t.position.x, t.position.y] for t in live})
    return exited


def _resolve_due(state: SimState) -> None:
    due = [e for e in state.pending_engagements if e.impact_time <= state.clock + 1e-9]
    if not due:
        return
    state.pending_engagements = [e for e in state.pending_engagements if e.impact_time > state.clock + 1e-9]
    for e in sorted(due, key=lambda e: (e.impact_time, e.seq)):
        track = state.tracks[e.track_id]
        if track.alive:
            e.outcome = resolve_engagement(e, state.rng)
            reason = None
        else:
            e.outcome = Outcome.MISS
            reason = "target_gone"
        state.resolved.append(e)
        payload = {"seq": e.seq, "ws": e.ws_id, "track": e.track_id, "outcome": e.outcome.value, "sskp": e.sskp}
        if reason:
            payload["reason"] = reason
        state.emit("resolve", payload)
        if e.outcome is Outcome.KILL:
            track.status = TrackStatus.NEUTRALIZED
            state.kill_times[e.track_id] = state.clock
            _release(state, e.track_id, "killed")


def _check_exits_and_leaks(state: SimState, exited: Sequence[str]) -> None:
    for tid in sorted(exited):
        track = state.tracks[tid]
        if track.alive:
            track.status = TrackStatus.EXITED
            state.emit("exit", {"track": tid})
            _release(state, tid, "exited")
    for track in state.live_tracks():
        for da in state.das:
            if da.footprint.contains(track.position):
                track.status = TrackStatus.LEAKED
                hit = state.rng.random() < da.vulnerability
                da.damaged = da.damaged or hit
                state.emit("leak", {"track": track.track_id, "da": da.da_id, "damaged": hit})
                _release(state, track.track_id, "leaked")
                break


def _update_mode(state: SimState) -> None:
    k = sum(1 for t in state.tracks.values() if t.alive)
    if k == 0:
        return
    j = sum(1 for w in state.weapons.values() if w.is_up)
    choice = select_mode(k, j, state.weights)
    if choice is not None and choice is not state.mode:
        state.emit("mode", {"mode": choice.value, "from": state.mode.value, "threats": k, "weapons": j})
        state.mode = choice


def _da_kill_probabilities(state: SimState, matching) -> dict[str, float]:
    by_da: dict[str, list[KillTerm]] = {}
    weapons = state.weapons
    for tid, d_id in sorted(matching.assignment.items()):
        da = next(d for d in state.das if d.da_id == d_id)
        track = state.tracks[tid]
        arms = [weapons[w] for w in da.weapon_ids if weapons[w].is_up]
        c = max((state.libs.effectiveness(w.weapon_class, track.threat_class) for w in arms), default=0.0)
        shots = max((w.shots for w in arms), default=1)
        idx = matching.indices[(tid, d_id)]
        by_da.setdefault(d_id, []).append(KillTerm(idx.intent, idx.capability, da_load(da, weapons), c, shots))
    return {d: kill_probability(terms, state.weights) for d, terms in sorted(by_da.items())}


def _decide(state: SimState) -> None:
    live = state.live_tracks()
    weights = apply_mode(state.mode, state.weights)
    started = time.perf_counter()
    decision = two_stage_assign(live, state.das, state.weapons, state.libs, weights,
                                clock=state.clock, schedule=state.schedule)
    state.decision_ms.append(1000.0 * (time.perf_counter() - started))

    assignment = dict(sorted(decision.matching.assignment.items()))
    if assignment != state.assignment:
        state.emit("te", {
            "assignment": assignment,
            "ranked": decision.ranked,
            "kill_probability": _da_kill_probabilities(state, decision.matching),
        })
        state.assignment = assignment
    for tid, d_id in assignment.items():
        state.allocated.setdefault(d_id, set()).add(tid)
    for ev in decision.log:
        state.emit("wa", ev)
    state.schedule = decision.schedule


def _act(state: SimState) -> None:
    busy = {e.ws_id for e in state.pending_engagements}
    for ws_id in sorted(state.schedule.locked):
        tid = state.schedule.locked.get(ws_id)
        if tid is None or ws_id in busy:
            continue
        ws = state.weapons[ws_id]
        track = state.tracks[tid]
        if ws.ammo <= 0:
            _release(state, tid, "no_ammo")
            continue
        if track_crossing(track, ws.sector, arrival_horizon(track, state.das)) is None:
            _release(state, tid, "out_of_sector")
            continue
        if state.clock - state.schedule.locked_at.get(ws_id, 0.0) < ws.stabilization_time - 1e-9:
            continue
        last = state.last_fire.get(ws_id)
        if last is not None and state.clock - last < 1.0 / ws.rate_of_fire - 1e-9:
            continue
        if not ws.sector.contains(track.position):
            continue
        est = track.velocity()
        vel = est[0] if est is not None else Point2(0.0, 0.0)
        shot = solve_intercept(track.position, vel, ws.position, ws.projectile_speed)
        if shot is None or not ws.sector.contains(shot.impact_point):
            continue
        if required_elevation(track.altitude, euclidean_distance(ws.position, shot.impact_point)) > ws.max_elevation:
            continue
        sskp = single_shot_kill_probability(ws, track.threat_class, state.libs)
        state.fire_seq += 1
        event = EngagementEvent(ws_id, tid, state.clock, state.clock + shot.time_of_flight, sskp,
                                seq=state.fire_seq)
        state.pending_engagements.append(event)
        state.fired.append(event)
        ws.ammo -= 1
        state.ammo_spent += 1
        state.last_fire[ws_id] = state.clock
        state.emit("fire", {
            "seq": event.seq, "ws": ws_id, "track": tid, "fire_time": event.fire_time,
            "impact_time": event.impact_time, "sskp": sskp,
            "impact": [shot.impact_point.x, shot.impact_point.y],
        })


def _gate(state: SimState):
    def feasible(ws_id: str, track_id: str) -> bool:
        ws = state.weapons[ws_id]
        c = state.libs.effectiveness(ws.weapon_class, state.tracks[track_id].threat_class)
        return c >= state.weights.capability_threshold
    return feasible


def step(state: SimState, updates: Sequence[TrackUpdate] | None = None) -> SimState:
    """Advance one tick. ``updates`` overrides the internal kinematics."""
    state.tick += 1
    state.clock = state.tick * state.dt
    state.fired = []
    state.resolved = []
    if updates is None:
        if state.driver is None:
            updates = []
        else:
            gone = [t for t, tr in state.tracks.items() if not tr.alive]
            updates = state.driver.updates(state.clock, gone)

    exited = _observe(state, updates)
    had_tracks = any(t.alive for t in state.tracks.values())
    _resolve_due(state)
    _check_exits_and_leaks(state, exited)
    if any(t.alive for t in state.tracks.values()):
        _update_mode(state)
        _decide(state)
        _act(state)
    elif state.assignment:
        state.emit("te", {"assignment": {}, "ranked": [], "kill_probability": {}})
        state.assignment = {}

    refresh_loads(state.weapons.values(), state.schedule)
    snapshot = (
        tuple(sorted(state.schedule.locked.items())),
        tuple(sorted((w, tuple(q)) for w, q in state.schedule.queues.items() if q)),
    )
    if snapshot != state._last_schedule:
        state.emit("schedule", {"locked": dict(snapshot[0]), "queued": {w: list(q) for w, q in snapshot[1]}})
        state._last_schedule = snapshot
    for ws, t in state.schedule.scheduled_pairs():
        state.scheduled_ever.add(t)
        state.weapons_used.add(ws)
    for ws in state.weapons:
        state.max_scheduled = max(state.max_scheduled, state.schedule.scheduled_count(ws))

    if had_tracks and state.engaged_mode is None:
        state.engaged_mode = state.mode

    violations = check_constraints(state.schedule, _gate(state))
    if violations:
        raise ConstraintViolation(f"tick {state.tick}: {violations}")
    return state


def run_scenario(spec: ScenarioSpec, seed: int | None = None) -> tuple[SimTrace, Metrics]:
    state = run_state(spec, seed)
    return state.event_log, state.metrics()


def run_state(spec: ScenarioSpec, seed: int | None = None) -> SimState:
    """Like :func:`run_scenario` but hands back the final state."""
    state = init_state(spec, seed)
    max_ticks = math.ceil(spec.max_time / spec.dt - 1e-9)
    while state.tick < max_ticks and not state.finished():
        step(state)
    state.emit("end", {"ticks": state.tick})
    return state


def metrics_from_trace(trace: SimTrace) -> Metrics:
    """Rebuild the run's metrics from its event log alone."""
    h = trace.header
    values = dict(h.get("threats", {}))
    status: dict[str, str] = {}
    spawned: dict[str, float] = {}
    killed: dict[str, float] = {}
    damaged: set[str] = set()
    allocated: dict[str, set] = {}
    scheduled: set[str] = set()
    used: set[str] = set()
    max_sched = 0
    ammo = 0
    mode = h.get("initial_mode")
    engaged = None
    ticks = 0
    dt = h.get("dt", 0.0)
    first_tracks_tick = None
    for ev in trace.events:
        ticks = max(ticks, ev.tick)
        if engaged is None and first_tracks_tick is not None and ev.tick > first_tracks_tick:
            engaged = mode
        p = ev.payload
        clock = ev.tick * dt
        if ev.kind == "tracks" and first_tracks_tick is None:
            first_tracks_tick = ev.tick
        elif ev.kind == "end":
            ticks = p["ticks"]
        elif ev.kind == "spawn":
            spawned[p["track"]] = clock
            values.setdefault(p["track"], p["value"])
        elif ev.kind == "resolve" and p["outcome"] == "kill":
            killed[p["track"]] = clock
            status[p["track"]] = "neutralized"
        elif ev.kind == "leak":
            status[p["track"]] = "leaked"
            if p["damaged"]:
                damaged.add(p["da"])
        elif ev.kind == "exit":
            status[p["track"]] = "exited"
        elif ev.kind == "mode":
            mode = p["mode"]
        elif ev.kind == "te":
            for tid, d in p["assignment"].items():
                allocated.setdefault(d, set()).add(tid)
        elif ev.kind == "fire":
            ammo += 1
        elif ev.kind == "schedule":
            counts: dict[str, int] = {}
            for ws, t in p["locked"].items():
                scheduled.add(t)
                used.add(ws)
                counts[ws] = counts.get(ws, 0) + 1
            for ws, q in p["queued"].items():
                scheduled.update(q)
                used.add(ws)
                counts[ws] = counts.get(ws, 0) + len(q)
            max_sched = max([max_sched, *counts.values()])
    if engaged is None and first_tracks_tick is not None:
        engaged = mode
    neutralized = sum(1 for s in status.values() if s == "neutralized")
    leakers = sum(1 for s in status.values() if s == "leaked")
    exited = sum(1 for s in status.values() if s == "exited")
    durations = [killed[t] - spawned[t] for t in sorted(killed)]
    return Metrics(
        threats_total=len(values),
        threats_neutralized=neutralized,
        leakers=leakers,
        exited=exited,
        alive=len(values) - neutralized - leakers - exited,
        surviving_da_value=math.fsum(pr for d, pr in h.get("das", {}).items() if d not in damaged),
        surviving_threat_value=math.fsum(v for t, v in values.items() if t not in killed),
        ammo_spent=ammo,
        mean_time_to_neutralize=math.fsum(durations) / len(durations) if durations else None,
        threats_allocated=len(set().union(*allocated.values())) if allocated else 0,
        threats_scheduled=len(scheduled),
        max_scheduled_per_ws=max_sched,
        idle_weapons=sorted(set(h.get("weapons", [])) - used),
        da_load={d: len(ts) for d, ts in sorted(allocated.items())},
        engaged_mode=engaged,
        final_mode=mode,
        ticks=ticks,
    )
