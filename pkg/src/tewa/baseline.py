"""Comparators for the two-stage assignment.

``greedy_assign`` is the target-by-target heuristic: threats are taken in
descending opportunity and each grabs the best free (DA, weapon) slot,
never revisiting earlier choices. ``exhaustive_oracle`` enumerates every
capacity-feasible schedule and returns the one with the largest total pair
weight.
"""

from __future__ import annotations

from typing import Mapping, Sequence

from .config import WeightsConfig
from .library import Libraries
from .pipeline import crossing_table, two_stage_assign
from .threat_eval import (
    DaStatus,
    DefendedAsset,
    ThreatDaMatching,
    TrackState,
    capability_index,
    da_kill_capability,
    threat_indices,
)
from .weapon_assign import MAX_SCHEDULED, WeaponSystem, WsSchedule, candidate_ws, evaluate_candidate

ORACLE_LIMIT = 8


class InstanceTooLarge(ValueError):
    pass


def greedy_assign(
    tracks: Sequence[TrackState],
    das: Sequence[DefendedAsset],
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    clock: float = 0.0,
) -> tuple[ThreatDaMatching, WsSchedule]:
    live = [t for t in tracks if t.alive]
    crossings = crossing_table(live, weapons, das)
    matching = ThreatDaMatching()
    schedule = WsSchedule()
    used = {d.da_id: 0 for d in das}

    order = []
    for track in live:
        cap = capability_index(track, libs)
        best = 0.0
        for d in das:
            idx = threat_indices(track, d, libs, weights, cap)
            matching.indices[(track.track_id, d.da_id)] = idx
            best = max(best, idx.opportunity)
        order.append((-best, track.track_id, track))
    order.sort(key=lambda k: (k[0], k[1]))

    for neg_opp, tid, track in order:
        if -neg_opp <= weights.capability_threshold:
            matching.unassigned.add(tid)
            continue
        best_slot = None
        for d in das:
            if d.status is not DaStatus.FREE_TO_FIRE or used[d.da_id] >= d.quota:
                continue
            kc = da_kill_capability(track, d, weapons, libs, crossings)
            if kc <= 0.0 or kc < weights.capability_threshold:
                continue
            for c in candidate_ws(track, d, weapons, libs, weights, clock, crossings):
                if schedule.scheduled_count(c.ws_id) >= MAX_SCHEDULED:
                    continue
                key = (c.pair_weight, d.da_id, c.ws_id)
                if best_slot is None or (key[0], _neg(key[1]), _neg(key[2])) > (
                    best_slot[0], _neg(best_slot[1]), _neg(best_slot[2])
                ):
                    best_slot = key
        if best_slot is None:
            matching.unassigned.add(tid)
            continue
        w, d_id, ws_id = best_slot
        if ws_id in schedule.locked:
            schedule.enqueue(ws_id, tid, w)
        else:
            schedule.lock(ws_id, tid, w, clock)
        matching.assignment[tid] = d_id
        used[d_id] += 1
    return matching, schedule


def _neg(s: str) -> tuple:
    # orders identifiers descending so that max() prefers the smaller id
    return tuple(-ord(ch) for ch in s) + (0,)


def feasible_pair_weights(
    tracks: Sequence[TrackState],
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    clock: float = 0.0,
) -> dict[tuple[str, str], float]:
    """Pair weight of every (track, weapon) pair that could be scheduled,
    ignoring which asset the weapon belongs to."""
    live = [t for t in tracks if t.alive]
    crossings = crossing_table(live, weapons)
    out = {}
    for track in live:
        for ws_id, ws in weapons.items():
            c = evaluate_candidate(track, ws, libs, weights, clock, crossings[(track.track_id, ws_id)])
            if c is not None:
                out[(track.track_id, ws_id)] = c.pair_weight
    return out


def best_schedule(pair_weights: Mapping[tuple[str, str], float]) -> tuple[float, dict[str, str]]:
    """Maximum-weight assignment with at most two threats per weapon.

    Depth-first enumeration over threats with an optimistic bound (each
    remaining threat at its best weight). Returns (value, threat -> weapon).
    """
    options: dict[str, list[tuple[float, str]]] = {}
    for (t, ws), w in pair_weights.items():
        options.setdefault(t, []).append((w, ws))
    threats = sorted(options, key=lambda t: (-max(w for w, _ in options[t]), t))
    for t in threats:
        options[t].sort(key=lambda o: (-o[0], o[1]))
    optimistic = [0.0] * (len(threats) + 1)
    for i in range(len(threats) - 1, -1, -1):
        optimistic[i] = optimistic[i + 1] + max(0.0, options[threats[i]][0][0])

    load: dict[str, int] = {}
    best_value = 0.0
    best: dict[str, str] = {}
    chosen: dict[str, str] = {}

    def search(i: int, value: float) -> None:
        nonlocal best_value, best
        if value > best_value:
            best_value, best = value, dict(chosen)
        if i == len(threats) or value + optimistic[i] <= best_value:
            return
        t = threats[i]
        for w, ws in options[t]:
            if load.get(ws, 0) >= MAX_SCHEDULED:
                continue
            load[ws] = load.get(ws, 0) + 1
            chosen[t] = ws
            search(i + 1, value + w)
            del chosen[t]
            load[ws] -= 1
        search(i + 1, value)

    search(0, 0.0)
    return best_value, best


def exhaustive_oracle(
    tracks: Sequence[TrackState],
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    clock: float = 0.0,
) -> tuple[WsSchedule, float]:
    live = [t for t in tracks if t.alive]
    if len(live) > ORACLE_LIMIT or len(weapons) > ORACLE_LIMIT:
        raise InstanceTooLarge(f"{len(live)} threats x {len(weapons)} weapons exceeds {ORACLE_LIMIT}x{ORACLE_LIMIT}")
    pw = feasible_pair_weights(live, weapons, libs, weights, clock)
    value, choice = best_schedule(pw)
    schedule = WsSchedule()
    by_ws: dict[str, list[str]] = {}
    for t, ws in choice.items():
        by_ws.setdefault(ws, []).append(t)
    for ws in sorted(by_ws):
        ts = sorted(by_ws[ws], key=lambda t: (-pw[(t, ws)], t))
        schedule.lock(ws, ts[0], pw[(ts[0], ws)], clock)
        for t in ts[1:]:
            schedule.enqueue(ws, t, pw[(t, ws)])
    return schedule, value


def schedule_report(matching: ThreatDaMatching, schedule: WsSchedule) -> dict:
    return {
        "assignment": dict(sorted(matching.assignment.items())),
        "unassigned": sorted(matching.unassigned),
        "locked": dict(sorted(schedule.locked.items())),
        "queued": {w: list(q) for w, q in sorted(schedule.queues.items()) if q},
        "scheduled": len(schedule.scheduled_pairs()),
        "value": schedule.total_weight(),
    }


def compare_methods(
    tracks: Sequence[TrackState],
    das: Sequence[DefendedAsset],
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    clock: float = 0.0,
) -> dict:
    """Two-stage, greedy and (when small enough) exhaustive results side by side."""
    decision = two_stage_assign(tracks, das, weapons, libs, weights, clock=clock)
    report = {"two_stage": schedule_report(decision.matching, decision.schedule)}
    report["greedy"] = schedule_report(*greedy_assign(tracks, das, weapons, libs, weights, clock))
    try:
        sched, value = exhaustive_oracle(tracks, weapons, libs, weights, clock)
    except InstanceTooLarge as exc:
        report["oracle"] = {"skipped": str(exc)}
    else:
        report["oracle"] = {
            "locked": dict(sorted(sched.locked.items())),
            "queued": {w: list(q) for w, q in sorted(sched.queues.items()) if q},
            "scheduled": len(sched.scheduled_pairs()),
            "value": value,
        }
    return report
