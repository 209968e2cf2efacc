"""One threat-evaluation plus weapon-assignment decision cycle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .config import WeightsConfig
from .geometry import SectorCrossing
from .library import Libraries
from .threat_eval import (
    DefendedAsset,
    ThreatDaMatching,
    TrackState,
    arrival_horizon,
    assign_threats_to_das,
    rank_threats,
    track_crossing,
)
from .weapon_assign import WeaponSystem, WsCandidate, WsSchedule, assign_threats_to_ws, candidate_ws


@dataclass
class Decision:
    matching: ThreatDaMatching
    ranked: list[str]
    candidates: dict[str, list[WsCandidate]]
    schedule: WsSchedule
    log: list[dict] = field(default_factory=list)


def crossing_table(
    tracks: Sequence[TrackState],
    weapons: Mapping[str, WeaponSystem],
    das: Sequence[DefendedAsset] = (),
) -> dict[tuple[str, str], SectorCrossing | None]:
    """Sector crossings for every live (track, weapon) pair, computed once.

    Crossings are cut off where the track first reaches one of ``das``.
    """
    table = {}
    for track in tracks:
        if not track.alive:
            continue
        horizon = arrival_horizon(track, das)
        for ws_id, ws in weapons.items():
            table[(track.track_id, ws_id)] = track_crossing(track, ws.sector, horizon)
    return table


def two_stage_assign(
    tracks: Sequence[TrackState],
    das: Sequence[DefendedAsset],
    weapons: Mapping[str, WeaponSystem],
    libs: Libraries,
    weights: WeightsConfig,
    *,
    clock: float = 0.0,
    schedule: WsSchedule | None = None,
) -> Decision:
    """Pair threats with assets, rank them, then schedule them on weapons.

    Threats holding a lock in ``schedule`` stay with their weapon's asset;
    queued threats give up their slot and are reconsidered.
    """
    schedule = schedule.copy() if schedule is not None else WsSchedule()
    schedule.clear_queues()
    live = [t for t in tracks if t.alive]
    pinned = {t: weapons[ws].da_id for ws, t in schedule.locked.items()}
    crossings = crossing_table([t for t in live if t.track_id not in pinned], weapons, das)
    matching = assign_threats_to_das(live, das, weapons, libs, weights, pinned=pinned, crossings=crossings)

    by_track = {t.track_id: t for t in live}
    da_by_id = {d.da_id: d for d in das}
    ranked = rank_threats(matching, da_by_id, by_track, libs, weights)
    candidates = {}
    for tid in ranked:
        if tid in pinned:
            continue
        da = da_by_id[matching.assignment[tid]]
        candidates[tid] = candidate_ws(by_track[tid], da, weapons, libs, weights, clock, crossings)
    log: list[dict] = []
    new_schedule = assign_threats_to_ws(ranked, candidates, schedule, clock=clock, log=log)
    return Decision(matching, ranked, candidates, new_schedule, log)
