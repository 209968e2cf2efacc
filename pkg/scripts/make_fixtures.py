"""Regenerate the bundled scenario fixtures under src/tewa/data/scenarios.

The raid fixtures share one deployment: ten assets in two staggered rows
with one weapon each. Threats fly straight south toward their target asset.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "tewa" / "data" / "scenarios"

WEAPON_KINDS = {
    # class: (range km, projectile km/s, rounds/s, stabilization s, ammo)
    "ground_missile": (12.0, 1.0, 0.2, 2.0, 20),
    "rocket": (10.0, 0.8, 0.5, 1.0, 24),
    "cannon": (7.0, 1.0, 2.0, 0.5, 60),
}

DEPLOYMENT = [
    # da_id, center, priority, weapon class, sector (start, sweep) or None
    ("da01", (-40.0, 0.0), 0.90, "ground_missile", None),
    ("da02", (-20.0, 0.0), 0.60, "rocket", None),
    ("da03", (0.0, 0.0), 0.95, "ground_missile", None),
    ("da04", (20.0, 0.0), 0.50, "cannon", None),
    ("da05", (40.0, 0.0), 0.80, "rocket", (0.0, math.pi)),
    ("da06", (-30.0, -25.0), 0.70, "rocket", None),
    ("da07", (-10.0, -25.0), 0.85, "ground_missile", None),
    ("da08", (10.0, -25.0), 0.40, "cannon", None),
    ("da09", (30.0, -25.0), 0.75, "ground_missile", (0.0, math.pi)),
    ("da10", (50.0, -25.0), 0.30, "rocket", None),
]

CLASSES = ["fighter", "ground_attack", "interceptor", "transport", "reconnaissance"]
SPEEDS = {"fighter": 0.3, "ground_attack": 0.25, "interceptor": 0.35, "transport": 0.18, "reconnaissance": 0.2}
VALUES = {"fighter": 0.8, "ground_attack": 0.9, "interceptor": 0.7, "transport": 0.6, "reconnaissance": 0.4}


def deployment() -> tuple[list, list]:
    das, weapons = [], []
    for i, (da_id, center, priority, wclass, sector) in enumerate(DEPLOYMENT):
        das.append({"da_id": da_id, "center": list(center), "radius": 2.0, "priority": priority,
                    "vulnerability": 0.5})
        rng, proj, rof, stab, ammo = WEAPON_KINDS[wclass]
        ws = {"ws_id": f"ws{i + 1:02d}", "da_id": da_id, "weapon_class": wclass, "position": list(center),
              "range": rng, "projectile_speed": proj, "rate_of_fire": rof, "stabilization_time": stab,
              "max_elevation": math.radians(80.0), "ammo": ammo}
        if sector is not None:
            ws["start_angle"], ws["sweep_angle"] = sector
        weapons.append(ws)
    return das, weapons


def threat(track_id: str, target: tuple[float, float], distance: float, k: int, dx: float = 0.0) -> dict:
    tclass = CLASSES[k % len(CLASSES)]
    start = [target[0] + dx, target[1] + distance]
    return {"track_id": track_id, "threat_class": tclass, "waypoints": [start, list(target)],
            "speeds": [SPEEDS[tclass]], "spawn_time": 0.0, "altitude": 1.0 + 0.5 * (k % 4),
            "value": VALUES[tclass]}


def raid(name: str, threats: list, dt: float, max_time: float, initial_mode: str = "preferential") -> dict:
    das, weapons = deployment()
    return {"version": 1, "name": name, "seed": 7, "dt": dt, "max_time": max_time,
            "initial_mode": initial_mode, "libraries": "builtin", "das": das, "weapons": weapons,
            "threats": threats}


def raid_k5() -> dict:
    targets = ["da01", "da03", "da05", "da07", "da09"]
    centers = {d[0]: d[1] for d in DEPLOYMENT}
    threats = [threat(f"t{k + 1:02d}", centers[da], 40.0 + 4.0 * k, k, dx=3.0) for k, da in enumerate(targets)]
    return raid("raid-k5", threats, dt=0.1, max_time=300.0)


def raid_k50() -> dict:
    threats = []
    n = 0
    for wave in range(5):
        for i, (da_id, center, *_rest) in enumerate(DEPLOYMENT):
            threats.append(threat(f"t{n + 1:02d}", center, 30.0 + 22.0 * wave + 1.5 * i, n, dx=2.0))
            n += 1
    return raid("raid-k50", threats, dt=1.0, max_time=900.0)


def raid_k10() -> dict:
    threats = [threat(f"t{i + 1:02d}", center, 35.0 + 2.0 * i, i, dx=2.5)
               for i, (da_id, center, *_rest) in enumerate(DEPLOYMENT)]
    return raid("raid-k10", threats, dt=0.1, max_time=400.0)


def minimal() -> dict:
    return {
        "version": 1, "name": "minimal", "seed": 1, "dt": 0.5, "max_time": 200.0,
        "das": [{"da_id": "base", "center": [0.0, 0.0], "radius": 2.0, "priority": 0.8}],
        "weapons": [{"ws_id": "sam", "da_id": "base", "weapon_class": "ground_missile", "position": [0.0, 0.0],
                     "range": 12.0, "projectile_speed": 1.0, "rate_of_fire": 0.5}],
        "threats": [{"track_id": "bandit", "threat_class": "fighter", "waypoints": [[0.0, 30.0], [0.0, 0.0]],
                     "speeds": [0.3], "altitude": 1.0, "value": 0.8}],
    }


def gap() -> dict:
    # t1 can be served by either asset but prefers north; t2 can only be
    # served by north, which ranks t2 above t1. Greedy hands north to t1.
    return {
        "version": 1, "name": "gap", "seed": 3, "dt": 0.5, "max_time": 200.0,
        "weights": {"capability_threshold": 0.32},
        "das": [
            {"da_id": "north", "center": [0.0, 0.0], "radius": 2.0, "priority": 0.8, "quota": 1},
            {"da_id": "east", "center": [12.0, 0.0], "radius": 2.0, "priority": 0.8, "quota": 1},
        ],
        "weapons": [
            {"ws_id": "ws_north", "da_id": "north", "weapon_class": "ground_missile", "position": [0.0, 0.0],
             "range": 12.0, "projectile_speed": 1.0, "rate_of_fire": 0.5},
            {"ws_id": "ws_east", "da_id": "east", "weapon_class": "smart_bomb", "position": [12.0, 0.0],
             "range": 14.0, "projectile_speed": 0.8, "rate_of_fire": 0.5, "start_angle": 0.0,
             "sweep_angle": math.pi},
        ],
        "threats": [
            {"track_id": "t1", "threat_class": "fighter", "waypoints": [[0.0, 30.0], [0.0, 0.0]],
             "speeds": [0.35], "altitude": 1.0, "value": 0.8},
            {"track_id": "t2", "threat_class": "interceptor", "waypoints": [[-15.0, 0.0], [0.0, 0.0]],
             "speeds": [0.3], "altitude": 1.0, "value": 0.7},
        ],
    }


FIXTURES = {
    "minimal.json": minimal,
    "raid_k5.json": raid_k5,
    "raid_k50.json": raid_k50,
    "raid_k10.json": raid_k10,
    "gap.json": gap,
}


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name, build in FIXTURES.items():
        (OUT / name).write_text(json.dumps(build(), indent=1) + "\n", encoding="utf-8")
        print("wrote", OUT / name)


if __name__ == "__main__":
    main()
