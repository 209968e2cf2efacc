"""Seeded random TEWA instances shared by the property and acceptance tests."""

from __future__ import annotations

import math
import random

from tewa.config import Mode, WeightsConfig
from tewa.engine import apply_mode, select_mode
from tewa.geometry import Circle, Point2, Sample, Sector
from tewa.library import sample_libraries
from tewa.threat_eval import DefendedAsset, TrackState
from tewa.weapon_assign import WeaponSystem

LIBS = sample_libraries()
THREAT_CLASSES = sorted(LIBS.threats)
WEAPON_CLASSES = ["cannon", "rocket", "ground_missile", "smart_bomb"]


def random_instance(seed: int, max_threats: int = 8, max_ws: int = 8):
    """Assets with weapons nearby and threats flying roughly at an asset."""
    rng = random.Random(seed)
    n_da = rng.randint(2, 4)
    n_ws = rng.randint(n_da, max_ws)
    n_threats = rng.randint(2, max_threats)
    centers = [Point2(rng.uniform(-25, 25), rng.uniform(-25, 25)) for _ in range(n_da)]
    owners = list(range(n_da)) + [rng.randrange(n_da) for _ in range(n_ws - n_da)]
    weapons = {}
    for j, i in enumerate(owners):
        c = centers[i]
        pos = Point2(c.x + rng.uniform(-3, 3), c.y + rng.uniform(-3, 3))
        sweep = 2 * math.pi if rng.random() < 0.5 else rng.uniform(math.pi / 2, 2 * math.pi)
        wclass = rng.choice(WEAPON_CLASSES)
        ws = WeaponSystem(
            ws_id=f"w{j}", da_id=f"d{i}", weapon_class=wclass, position=pos,
            sector=Sector(Circle(pos, rng.uniform(8, 15)), rng.uniform(0, 2 * math.pi), sweep),
            max_elevation=math.radians(80), projectile_speed=rng.uniform(0.6, 1.2),
            rate_of_fire=rng.uniform(0.2, 2.0), stabilization_time=rng.uniform(0, 4),
            lethality_index=LIBS.weapons[wclass].lethality_index,
        )
        weapons[ws.ws_id] = ws
    das = [
        DefendedAsset(f"d{i}", Circle(centers[i], rng.uniform(1.5, 2.5)), rng.uniform(0.2, 1.0),
                      rng.uniform(0.2, 0.8), weapon_ids=tuple(w for w, ws in weapons.items() if ws.da_id == f"d{i}"))
        for i in range(n_da)
    ]
    tracks = []
    for k in range(n_threats):
        target = rng.choice(centers)
        bearing = rng.uniform(0, 2 * math.pi)
        dist = rng.uniform(18, 40)
        start = Point2(target.x + dist * math.cos(bearing), target.y + dist * math.sin(bearing))
        heading = math.atan2(target.y - start.y, target.x - start.x) + math.radians(rng.uniform(-8, 8))
        speed = rng.uniform(0.15, 0.4)
        nxt = Point2(start.x + speed * math.cos(heading), start.y + speed * math.sin(heading))
        tclass = rng.choice(THREAT_CLASSES)
        tracks.append(TrackState(f"t{k}", [Sample(0.0, start), Sample(1.0, nxt)], rng.uniform(0.3, 3.0), tclass,
                                 value=LIBS.threats[tclass].value))
    return tracks, das, weapons


def mode_weights(tracks, weapons, base: WeightsConfig | None = None) -> WeightsConfig:
    base = base or WeightsConfig()
    mode = select_mode(len(tracks), sum(1 for w in weapons.values() if w.is_up), base) or Mode.PREFERENTIAL
    return apply_mode(mode, base)


def straight_track(track_id: str, start: tuple[float, float], velocity: tuple[float, float],
                   threat_class: str = "fighter", altitude: float = 1.0, t0: float = 0.0, value=None) -> TrackState:
    """Two samples one second apart along a constant velocity."""
    p0 = Point2(*start)
    p1 = Point2(start[0] + velocity[0], start[1] + velocity[1])
    return TrackState(track_id, [Sample(t0, p0), Sample(t0 + 1.0, p1)], altitude, threat_class, value=value)


def weapon(ws_id: str, da_id: str, position: tuple[float, float], weapon_class: str = "ground_missile",
           radius: float = 12.0, start: float = 0.0, sweep: float = 2 * math.pi, **kw) -> WeaponSystem:
    pos = Point2(*position)
    args = dict(max_elevation=math.radians(80), projectile_speed=1.0, rate_of_fire=0.5,
                stabilization_time=1.0, lethality_index=LIBS.weapons[weapon_class].lethality_index)
    args.update(kw)
    return WeaponSystem(ws_id, da_id, weapon_class, pos, Sector(Circle(pos, radius), start, sweep), **args)


def asset(da_id: str, center: tuple[float, float], weapon_ids=(), priority: float = 0.8,
          radius: float = 2.0, **kw) -> DefendedAsset:
    return DefendedAsset(da_id, Circle(Point2(*center), radius), priority, 0.5, weapon_ids=tuple(weapon_ids), **kw)


def duel_doc(effectiveness: float, lethality: float = 1.0, ammo: int = 10, threats: int = 1) -> dict:
    """One asset, one missile battery and ``threats`` fighters flying straight at it.

    The single-shot kill probability is ``lethality * effectiveness``.
    """
    library = {
        "threat_classes": [{"class_id": "fighter", "base_capability": 0.8, "base_speed": 0.3, "value": 0.8}],
        "weapon_classes": [{"class_id": "sam", "lethality_index": lethality, "priority": 1.0}],
        "correlation": [{"weapon": "sam", "threat": "fighter", "c": effectiveness},
                        {"weapon": "sam", "threat": "unknown", "c": effectiveness}],
    }
    return {
        "version": 1, "name": "duel", "seed": 5, "dt": 0.5, "max_time": 300.0, "libraries": library,
        "weights": {"capability_threshold": 0.0},
        "das": [{"da_id": "base", "center": [0.0, 0.0], "radius": 2.0, "priority": 0.8, "vulnerability": 1.0}],
        "weapons": [{"ws_id": "sam1", "da_id": "base", "weapon_class": "sam", "position": [0.0, 0.0],
                     "range": 15.0, "projectile_speed": 1.0, "rate_of_fire": 1.0, "ammo": ammo}],
        "threats": [{"track_id": f"t{i}", "threat_class": "fighter", "waypoints": [[3.0 * i, 30.0], [0.0, 0.0]],
                     "speeds": [0.3], "altitude": 1.0} for i in range(threats)],
    }


def random_scenario_doc(seed: int) -> dict:
    """A runnable scenario built from :func:`random_instance`; threats fly on for 300 s."""
    tracks, das, weapons = random_instance(seed)
    return {
        "version": 1, "name": f"random-{seed}", "seed": seed, "dt": 0.5, "max_time": 200.0,
        "das": [{"da_id": d.da_id, "center": list(d.footprint.center), "radius": d.footprint.radius,
                 "priority": d.priority, "vulnerability": d.vulnerability} for d in das],
        "weapons": [{"ws_id": w.ws_id, "da_id": w.da_id, "weapon_class": w.weapon_class,
                     "position": list(w.position), "range": w.sector.circle.radius,
                     "start_angle": w.sector.start_angle % (2 * math.pi), "sweep_angle": w.sector.sweep_angle,
                     "max_elevation": w.max_elevation, "projectile_speed": w.projectile_speed,
                     "rate_of_fire": w.rate_of_fire, "stabilization_time": w.stabilization_time}
                    for w in weapons.values()],
        "threats": [{"track_id": t.track_id, "threat_class": t.threat_class,
                     "waypoints": [list(t.samples[0].pos),
                                   [t.samples[0].pos.x + 300 * (t.position.x - t.samples[0].pos.x),
                                    t.samples[0].pos.y + 300 * (t.position.y - t.samples[0].pos.y)]],
                     "speeds": [t.velocity()[1]], "altitude": t.altitude, "value": t.value,
                     "spawn_time": float(i % 3) * 5.0}
                    for i, t in enumerate(tracks)],
    }
