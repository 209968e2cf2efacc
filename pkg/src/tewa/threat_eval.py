"""Threat evaluation: intent, capability and opportunity indices, asset kill
probability, and the weighted deferred-acceptance pairing of threats with
defended assets."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, NamedTuple, Sequence

from .config import WeightsConfig
from .geometry import (
    Circle,
    Point2,
    Ray,
    Sample,
    Sector,
    SectorCrossing,
    circle_line_poi,
    estimate_velocity,
    euclidean_distance,
    sector_intercept,
    time_to_point,
)
from .library import Libraries

if TYPE_CHECKING:
    from .weapon_assign import WeaponSystem


class TrackStatus(enum.Enum):
    ALIVE = "alive"
    NEUTRALIZED = "neutralized"
    EXITED = "exited"
    LEAKED = "leaked"


class DaStatus(enum.Enum):
    FREE_TO_FIRE = "free_to_fire"
    ON_HOLD = "on_hold"
    TIGHT = "tight"


@dataclass
class TrackState:
    track_id: str
    samples: list[Sample]
    altitude: float
    threat_class: str
    status: TrackStatus = TrackStatus.ALIVE
    value: float | None = None
    _kin: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError(f"track {self.track_id} needs at least one sample")
        for a, b in zip(self.samples, self.samples[1:]):
            if not b.t > a.t:
                raise ValueError(f"track {self.track_id} sample times must increase")

    @property
    def position(self) -> Point2:
        return self.samples[-1].pos

    @property
    def last_time(self) -> float:
        return self.samples[-1].t

    @property
    def alive(self) -> bool:
        return self.status is TrackStatus.ALIVE

    def _kinematics(self) -> tuple:
        # samples only ever grow at the tail, so the last sample keys the cache
        key = (len(self.samples), self.samples[-1])
        if self._kin is None or self._kin[0] != key:
            if len(self.samples) < 2:
                est, ray = None, None
            else:
                est = estimate_velocity(self.samples)
                ray = None if est[1] == 0.0 else Ray.from_velocity(self.position, est[0])
            self._kin = (key, est, ray, {})
        return self._kin

    def velocity(self) -> tuple[Point2, float] | None:
        """Finite-difference velocity, or None with a single sample."""
        return self._kinematics()[1]

    def ray(self) -> Ray | None:
        return self._kinematics()[2]


@dataclass
class DefendedAsset:
    da_id: str
    footprint: Circle
    priority: float
    vulnerability: float
    status: DaStatus = DaStatus.FREE_TO_FIRE
    weapon_ids: tuple[str, ...] = ()
    quota: int | None = None
    damaged: bool = False

    def __post_init__(self) -> None:
        if not self.footprint.radius > 0:
            raise ValueError(f"DA {self.da_id} radius must be positive")
        for name in ("priority", "vulnerability"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"DA {self.da_id} {name} outside [0, 1]")
        self.weapon_ids = tuple(self.weapon_ids)
        if self.quota is None:
            self.quota = max(1, 2 * len(self.weapon_ids))
        if self.quota < 1:
            raise ValueError(f"DA {self.da_id} quota must be >= 1")


class ThreatIndices(NamedTuple):
    intent: float
    capability: float
    opportunity: float
    time_to_da: float | None  # None: the threat is not closing on this DA
    poi: Point2 | None


class KillTerm(NamedTuple):
    """One threat's contribution to an asset's kill probability."""

    intent: float
    capability: float
    load: float
    effectiveness: float
    shots: int = 1


@dataclass
class ThreatDaMatching:
    assignment: dict[str, str] = field(default_factory=dict)
    unassigned: set[str] = field(default_factory=set)
    indices: dict[tuple[str, str], ThreatIndices] = field(default_factory=dict)
    pair_weights: dict[tuple[str, str], float] = field(default_factory=dict)


def _clamp(x: float, lo: float = 0.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


def time_score(t: float | None, scale: float) -> float:
    if t is None:
        return 0.0
    return math.exp(-t / scale)


def closing_geometry(track: TrackState, circle: Circle) -> tuple[float | None, Point2 | None]:
    """Time until the track reaches ``circle`` and the point where it does.

    A track already inside reports zero time at its own position.
    """
    memo = track._kinematics()[3]
    hit = memo.get(circle)
    if hit is None:
        hit = memo[circle] = _closing_geometry(track, circle)
    return hit


def _closing_geometry(track: TrackState, circle: Circle) -> tuple[float | None, Point2 | None]:
    pos = track.position
    if circle.contains(pos):
        return 0.0, pos
    ray = track.ray()
    if ray is None:
        return None, None
    ahead = [p for p in circle_line_poi(circle, ray) if p.t >= 0.0]
    if not ahead:
        return None, None
    poi = ahead[0].point
    return time_to_point(euclidean_distance(pos, poi), track.velocity()[1]), poi


def _intent(track: TrackState, da: DefendedAsset, weights: WeightsConfig) -> tuple[float, float | None, Point2 | None]:
    center = da.footprint.center
    pos = track.position
    est = track.velocity()
    tdist = euclidean_distance(pos, center)
    if est is None or est[1] == 0.0:
        heading = 0.5
        closing = 0.0
    else:
        (vx, vy), speed = est
        if tdist == 0.0:
            cos_theta, radial = 1.0, speed
        else:
            radial = (vx * (center.x - pos.x) + vy * (center.y - pos.y)) / tdist
            cos_theta = _clamp(radial / speed, -1.0, 1.0)
        heading = 0.5 * (1.0 + cos_theta)
        closing = _clamp(radial / weights.reference_speed)
    ttd, poi = closing_geometry(track, da.footprint)
    intent = (
        weights.intent_heading * heading
        + weights.intent_closing * closing
        + weights.intent_time * time_score(ttd, weights.time_scale)
    )
    return _clamp(intent), ttd, poi


def intent_index(track: TrackState, da: DefendedAsset, weights: WeightsConfig) -> float:
    """Weighted heading, closing-speed and time-to-DA scores."""
    return _intent(track, da, weights)[0]


def capability_index(track: TrackState, libs: Libraries) -> float:
    rec = libs.threat(track.threat_class)
    est = track.velocity()
    scale = 1.0 if est is None else _clamp(est[1] / rec.base_speed, 0.5, 1.5)
    return _clamp(rec.base_capability * scale)


def opportunity_index(intent: float, capability: float, weights: WeightsConfig) -> float:
    total = weights.w_intent + weights.w_capability
    if total == 0.0:
        return 0.5 * (intent + capability)
    return _clamp((weights.w_intent * intent + weights.w_capability * capability) / total)


def threat_indices(
    track: TrackState, da: DefendedAsset, libs: Libraries, weights: WeightsConfig,
    capability: float | None = None,
) -> ThreatIndices:
    intent, ttd, poi = _intent(track, da, weights)
    if capability is None:
        capability = capability_index(track, libs)
    return ThreatIndices(intent, capability, opportunity_index(intent, capability, weights), ttd, poi)


def kill_probability(terms: Iterable[KillTerm], weights: WeightsConfig) -> float:
    """Product over assigned threats of ``1 - ((W_I*II + W_CI*CI + W_L*Load) * C) ** B``."""
    result = 1.0
    for term in terms:
        inner = (
            weights.w_intent * term.intent
            + weights.w_capability * term.capability
            + weights.w_load * term.load
        ) * term.effectiveness
        result *= 1.0 - inner ** term.shots
    return _clamp(result)


def da_pair_weight(
    kill_capability: float, indices: ThreatIndices, current_load: float, weights: WeightsConfig
) -> float:
    return (
        weights.da_kill_capability * kill_capability
        + weights.da_time * time_score(indices.time_to_da, weights.time_scale)
        + weights.da_load * (1.0 - current_load)
    )


def arrival_horizon(track: TrackState, das: Sequence[DefendedAsset]) -> float:
    """Seconds until the track's path first enters any asset circle.

    Zero when it is already inside one, infinite when it never arrives.
    """
    first = math.inf
    for d in das:
        t = closing_geometry(track, d.footprint)[0]
        if t is not None and t < first:
            first = t
    return first


def track_crossing(track: TrackState, sector: Sector, horizon: float = math.inf) -> SectorCrossing | None:
    """Where the track's extrapolated path runs through ``sector``.

    Times are relative to the track's latest sample. A track without usable
    motion only counts if it already sits inside the sector. The part of the
    path past ``horizon`` seconds is ignored: by then the threat has reached
    an asset and engaging it is moot.
    """
    ray = track.ray()
    if ray is None:
        pos = track.position
        if sector.contains(pos):
            return SectorCrossing(pos, pos, 0.0, math.inf)
        return None
    speed = track.velocity()[1]
    crossing = sector_intercept(sector, ray, speed)
    if crossing is None or crossing.exit_time <= horizon:
        return crossing
    if crossing.entry_time >= horizon:
        return None
    return crossing._replace(exit=ray.at(horizon * speed), exit_time=horizon)


def engageable(ws: "WeaponSystem") -> bool:
    return ws.is_up and ws.ammo > 0


def da_kill_capability(
    track: TrackState,
    da: DefendedAsset,
    weapons: Mapping[str, "WeaponSystem"],
    libs: Libraries,
    crossings: Mapping[tuple[str, str], SectorCrossing | None] | None = None,
) -> float:
    """Best effectiveness among the DA's weapons that will see the track."""
    best = 0.0
    for ws_id in da.weapon_ids:
        ws = weapons.get(ws_id)
        if ws is None or not engageable(ws):
            continue
        c = libs.effectiveness(ws.weapon_class, track.threat_class)
        if c <= best:
            continue
        if crossings is not None and (track.track_id, ws_id) in crossings:
            crossing = crossings[(track.track_id, ws_id)]
        else:
            crossing = track_crossing(track, ws.sector)
        if crossing is not None:
            best = c
    return best


def da_load(da: DefendedAsset, weapons: Mapping[str, "WeaponSystem"]) -> float:
    loads = [weapons[w].load for w in da.weapon_ids if w in weapons]
    return sum(loads) / len(loads) if loads else 1.0


def deferred_acceptance(
    pair_weights: Mapping[tuple[str, str], float],
    quotas: Mapping[str, int],
) -> dict[str, str]:
    """Threat-proposing deferred acceptance with asset quotas.

    ``pair_weights[(threat, da)]`` lists every acceptable pair; both sides rank
    by it. Ties go to the smaller identifier. Returns threat -> DA.
    """
    prefs: dict[str, list[str]] = {}
    for (t, d) in pair_weights:
        prefs.setdefault(t, []).append(d)
    for t, ds in prefs.items():
        ds.sort(key=lambda d: (-pair_weights[(t, d)], d))

    def da_key(d: str, t: str) -> tuple[float, str]:
        # smaller is better for the asset
        return (-pair_weights[(t, d)], t)

    held: dict[str, list[str]] = {d: [] for d in quotas}
    nxt = {t: 0 for t in prefs}
    free = deque(sorted(prefs))
    while free:
        t = free.popleft()
        if nxt[t] >= len(prefs[t]):
            continue
        d = prefs[t][nxt[t]]
        nxt[t] += 1
        bucket = held.setdefault(d, [])
        bucket.append(t)
        if len(bucket) > quotas.get(d, 0):
            worst = max(bucket, key=lambda x: da_key(d, x))
            bucket.remove(worst)
            free.appendleft(worst)
        assert len(bucket) <= quotas.get(d, 0), "quota exceeded"
    return {t: d for d, ts in held.items() for t in ts}


def assign_threats_to_das(
    tracks: Iterable[TrackState],
    das: Sequence[DefendedAsset],
    weapons: Mapping[str, "WeaponSystem"],
    libs: Libraries,
    weights: WeightsConfig,
    *,
    pinned: Mapping[str, str] | None = None,
    crossings: Mapping[tuple[str, str], SectorCrossing | None] | None = None,
) -> ThreatDaMatching:
    """Pair live threats with defended assets.

    ``pinned`` maps threats already engaged by a weapon to their asset; they
    keep it and consume its quota. A threat only proposes to assets that are
    free to fire and own a weapon able to reach and kill it, and only once its
    best opportunity index clears ``capability_threshold``.
    """
    pinned = dict(pinned or {})
    da_by_id = {d.da_id: d for d in das}
    matching = ThreatDaMatching()
    loads = {d.da_id: da_load(d, weapons) for d in das}

    pair_weights: dict[tuple[str, str], float] = {}
    free_ids: list[str] = []
    for track in tracks:
        if not track.alive:
            continue
        tid = track.track_id
        cap = capability_index(track, libs)
        value = track.value if track.value is not None else libs.threat(track.threat_class).value
        if tid in pinned:
            d = da_by_id[pinned[tid]]
            matching.indices[(tid, d.da_id)] = threat_indices(track, d, libs, weights, cap)
            continue
        best_opp = 0.0
        candidates = []
        for d in das:
            idx = threat_indices(track, d, libs, weights, cap)
            matching.indices[(tid, d.da_id)] = idx
            best_opp = max(best_opp, idx.opportunity)
            if d.status is not DaStatus.FREE_TO_FIRE:
                continue
            kc = da_kill_capability(track, d, weapons, libs, crossings)
            if kc <= 0.0 or kc < weights.capability_threshold:
                continue
            w = da_pair_weight(kc, idx, loads[d.da_id], weights)
            candidates.append((d.da_id, w * weights.objective_factor(d.priority, value)))
        free_ids.append(tid)
        if best_opp <= weights.capability_threshold:
            continue
        for d_id, w in candidates:
            pair_weights[(tid, d_id)] = w

    used = {d_id: 0 for d_id in da_by_id}
    for tid, d_id in pinned.items():
        used[d_id] = used.get(d_id, 0) + 1
    quotas = {d.da_id: max(0, d.quota - used[d.da_id]) for d in das}

    result = deferred_acceptance(pair_weights, quotas)
    matching.pair_weights = pair_weights
    matching.assignment = {**pinned, **result}
    matching.unassigned = {t for t in free_ids if t not in result}
    return matching


def rank_threats(
    matching: ThreatDaMatching,
    das: Mapping[str, DefendedAsset],
    tracks: Mapping[str, TrackState],
    libs: Libraries,
    weights: WeightsConfig,
) -> list[str]:
    """Order assigned threats by refined index, highest first.

    refined = opportunity * objective factor of (DA priority, threat value);
    with the default weights that is opportunity * DA priority.
    """
    keyed = []
    for tid, d_id in matching.assignment.items():
        idx = matching.indices[(tid, d_id)]
        track = tracks[tid]
        value = track.value if track.value is not None else libs.threat(track.threat_class).value
        refined = idx.opportunity * weights.objective_factor(das[d_id].priority, value)
        ttd = math.inf if idx.time_to_da is None else idx.time_to_da
        keyed.append((-refined, ttd, tid))
    keyed.sort()
    return [k[2] for k in keyed]
