"""Scenario documents: JSON text <-> :class:`ScenarioSpec`."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..config import Mode, WeightsConfig
from ..geometry import TWO_PI, Circle, Point2, Sector
from ..library import LibraryError, Libraries, libraries_from_dict, load_libraries, sample_library_dict
from ..threat_eval import DaStatus, DefendedAsset
from ..weapon_assign import WeaponSystem, WsCondition

FORMAT_VERSION = 1


class ScenarioError(ValueError):
    pass


ScenarioInvalid = ScenarioError


class ParseError(ScenarioError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}, column {column}")
        if path:
            where.append(f"field {path}")
        super().__init__(f"{message} ({'; '.join(where)})" if where else message)
        self.line = line
        self.column = column
        self.path = path


class ValidationError(ScenarioError):
    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class ThreatSpec:
    """Ground truth for one threat: a piecewise-linear flight path."""

    track_id: str
    threat_class: str
    waypoints: tuple[Point2, ...]
    speeds: tuple[float, ...]  # km/s per leg
    spawn_time: float = 0.0
    altitude: float = 0.0
    value: float | None = None

    @property
    def duration(self) -> float:
        if len(self.waypoints) < 2:
            return math.inf
        return sum(
            math.hypot(b.x - a.x, b.y - a.y) / s
            for a, b, s in zip(self.waypoints, self.waypoints[1:], self.speeds)
        )

    def position_at(self, elapsed: float) -> tuple[Point2, bool]:
        """Position ``elapsed`` seconds after spawn, and whether the path is done."""
        if len(self.waypoints) < 2:
            return self.waypoints[0], False
        remaining = max(0.0, elapsed)
        for a, b, s in zip(self.waypoints, self.waypoints[1:], self.speeds):
            length = math.hypot(b.x - a.x, b.y - a.y)
            leg_time = length / s
            if remaining < leg_time:
                f = remaining / leg_time
                return Point2(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)), False
            remaining -= leg_time
        return self.waypoints[-1], True


@dataclass
class ScenarioSpec:
    libraries: Libraries
    das: list[DefendedAsset]
    weapons: list[WeaponSystem]
    threats: list[ThreatSpec]
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    dt: float = 0.1
    max_time: float = 600.0
    seed: int = 0
    initial_mode: Mode = Mode.PREFERENTIAL
    name: str = ""

    def spec_hash(self) -> str:
        return hashlib.sha256(to_document(self).encode("utf-8")).hexdigest()


# -- parsing helpers ---------------------------------------------------------

_MISSING = object()


def _get(obj: Any, key: str, path: str, kind: Any = None, default: Any = _MISSING) -> Any:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", path=path)
    if key not in obj:
        if default is _MISSING:
            raise ParseError(f"missing field {key!r}", path=path)
        return default
    value = obj[key]
    here = f"{path}.{key}" if path else key
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ParseError("expected a finite number", path=here)
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParseError("expected an integer", path=here)
        return value
    if kind is str:
        if not isinstance(value, str) or not value:
            raise ParseError("expected a non-empty string", path=here)
        return value
    if kind is list and not isinstance(value, list):
        raise ParseError("expected an array", path=here)
    return value


def _point(value: Any, path: str) -> Point2:
    if (
        not isinstance(value, list)
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in value)
    ):
        raise ParseError("expected [x, y]", path=path)
    return Point2(float(value[0]), float(value[1]))


def _unit(value: float, path: str) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{value} outside [0, 1]", path)
    return value


def _enum(enum_cls, value: Any, path: str):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise ValidationError(f"{value!r} is not one of {allowed}", path) from None


def _libraries(raw: Any, base_dir: Path | None) -> tuple[Libraries, Any]:
    try:
        if raw == "builtin":
            return libraries_from_dict(sample_library_dict())[0], raw
        if isinstance(raw, dict) and "files" in raw:
            files = raw["files"]
            base = base_dir or Path(".")
            texts = [(base / files[k]).read_text(encoding="utf-8") for k in ("threats", "weapons", "correlation")]
            return load_libraries(*texts)[0], raw
        if isinstance(raw, dict):
            return libraries_from_dict(raw)[0], raw
    except (LibraryError, KeyError, OSError) as exc:
        raise ValidationError(str(exc), "libraries") from exc
    raise ParseError("expected 'builtin', an inline library object or {files: ...}", path="libraries")


def parse_scenario(document: str, base_dir: str | Path | None = None) -> ScenarioSpec:
    """Parse and fully validate a scenario document."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ParseError("scenario must be a JSON object")
    return scenario_from_dict(doc, Path(base_dir) if base_dir is not None else None)


def scenario_from_dict(doc: dict, base_dir: Path | None = None) -> ScenarioSpec:
    version = _get(doc, "version", "", int)
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported version {version}", "version")
    libs, _ = _libraries(_get(doc, "libraries", "", default="builtin"), base_dir)

    try:
        weights = WeightsConfig.from_dict(_get(doc, "weights", "", dict, {}) or {})
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc), "weights") from exc

    das: list[DefendedAsset] = []
    da_ids: set[str] = set()
    raw_das = _get(doc, "das", "", list)
    raw_weapons = _get(doc, "weapons", "", list, [])
    owned: dict[str, list[str]] = {}
    for i, w in enumerate(raw_weapons):
        owned.setdefault(_get(w, "da_id", f"weapons[{i}]", str), []).append(_get(w, "ws_id", f"weapons[{i}]", str))

    for i, d in enumerate(raw_das):
        p = f"das[{i}]"
        da_id = _get(d, "da_id", p, str)
        if da_id in da_ids:
            raise ValidationError(f"duplicate DA id {da_id!r}", p)
        da_ids.add(da_id)
        radius = _get(d, "radius", p, float)
        if radius <= 0:
            raise ValidationError("radius must be positive", f"{p}.radius")
        quota = _get(d, "quota", p, int, None) if d.get("quota") is not None else None
        if quota is not None and quota < 1:
            raise ValidationError("quota must be >= 1", f"{p}.quota")
        das.append(DefendedAsset(
            da_id=da_id,
            footprint=Circle(_point(_get(d, "center", p), f"{p}.center"), radius),
            priority=_unit(_get(d, "priority", p, float), f"{p}.priority"),
            vulnerability=_unit(_get(d, "vulnerability", p, float, 0.5), f"{p}.vulnerability"),
            status=_enum(DaStatus, _get(d, "status", p, str, DaStatus.FREE_TO_FIRE.value), f"{p}.status"),
            weapon_ids=tuple(owned.get(da_id, ())),
            quota=quota,
        ))

    weapons: list[WeaponSystem] = []
    ws_ids: set[str] = set()
    for i, w in enumerate(raw_weapons):
        p = f"weapons[{i}]"
        ws_id = _get(w, "ws_id", p, str)
        if ws_id in ws_ids:
            raise ValidationError(f"duplicate weapon id {ws_id!r}", p)
        ws_ids.add(ws_id)
        da_id = _get(w, "da_id", p, str)
        if da_id not in da_ids:
            raise ValidationError(f"references unknown DA {da_id!r}", f"{p}.da_id")
        wclass = _get(w, "weapon_class", p, str)
        if wclass not in libs.weapons:
            raise ValidationError(f"unknown weapon class {wclass!r}", f"{p}.weapon_class")
        pos = _point(_get(w, "position", p), f"{p}.position")
        rng = _get(w, "range", p, float)
        start = _get(w, "start_angle", p, float, 0.0)
        sweep = _get(w, "sweep_angle", p, float, TWO_PI)
        if rng <= 0:
            raise ValidationError("range must be positive", f"{p}.range")
        if not 0.0 <= start < TWO_PI:
            raise ValidationError("start_angle must lie in [0, 2*pi)", f"{p}.start_angle")
        if not 0.0 < sweep <= TWO_PI:
            raise ValidationError("sweep_angle must lie in (0, 2*pi]", f"{p}.sweep_angle")
        lethality = _get(w, "lethality_index", p, float, libs.weapons[wclass].lethality_index)
        ammo = _get(w, "ammo", p, int, 10)
        shots = _get(w, "shots", p, int, 1)
        try:
            weapons.append(WeaponSystem(
                ws_id=ws_id,
                da_id=da_id,
                weapon_class=wclass,
                position=pos,
                sector=Sector(Circle(pos, rng), start, sweep),
                max_elevation=_get(w, "max_elevation", p, float, math.radians(85.0)),
                projectile_speed=_get(w, "projectile_speed", p, float),
                rate_of_fire=_get(w, "rate_of_fire", p, float),
                stabilization_time=_get(w, "stabilization_time", p, float, 0.0),
                lethality_index=_unit(lethality, f"{p}.lethality_index"),
                condition=_enum(WsCondition, _get(w, "condition", p, str, "up"), f"{p}.condition"),
                ammo=ammo,
                shots=shots,
            ))
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ValidationError(str(exc), p) from exc

    threats: list[ThreatSpec] = []
    t_ids: set[str] = set()
    for i, t in enumerate(_get(doc, "threats", "", list, [])):
        p = f"threats[{i}]"
        tid = _get(t, "track_id", p, str)
        if tid in t_ids:
            raise ValidationError(f"duplicate track id {tid!r}", p)
        t_ids.add(tid)
        tclass = _get(t, "threat_class", p, str)
        wps = tuple(_point(v, f"{p}.waypoints[{j}]") for j, v in enumerate(_get(t, "waypoints", p, list)))
        if not wps:
            raise ValidationError("needs at least one waypoint", f"{p}.waypoints")
        speeds_raw = _get(t, "speeds", p, list, [])
        speeds = []
        for j, s in enumerate(speeds_raw):
            if isinstance(s, bool) or not isinstance(s, (int, float)) or not s > 0:
                raise ValidationError("leg speeds must be positive numbers", f"{p}.speeds[{j}]")
            speeds.append(float(s))
        if len(speeds) != len(wps) - 1:
            raise ValidationError("need one speed per leg", f"{p}.speeds")
        altitude = _get(t, "altitude", p, float, 0.0)
        if altitude < 0:
            raise ValidationError("altitude must be non-negative", f"{p}.altitude")
        spawn = _get(t, "spawn_time", p, float, 0.0)
        if spawn < 0:
            raise ValidationError("spawn_time must be non-negative", f"{p}.spawn_time")
        value = t.get("value")
        if value is not None:
            value = _unit(_get(t, "value", p, float), f"{p}.value")
        threats.append(ThreatSpec(tid, tclass, wps, tuple(speeds), spawn, altitude, value))

    dt = _get(doc, "dt", "", float, 0.1)
    max_time = _get(doc, "max_time", "", float, 600.0)
    if dt <= 0:
        raise ValidationError("must be positive", "dt")
    if max_time <= 0:
        raise ValidationError("must be positive", "max_time")
    return ScenarioSpec(
        libraries=libs,
        das=das,
        weapons=weapons,
        threats=threats,
        weights=weights,
        dt=dt,
        max_time=max_time,
        seed=_get(doc, "seed", "", int, 0),
        initial_mode=_enum(Mode, _get(doc, "initial_mode", "", str, Mode.PREFERENTIAL.value), "initial_mode"),
        name=_get(doc, "name", "", None, ""),
    )


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "version": FORMAT_VERSION,
        "name": spec.name,
        "seed": spec.seed,
        "dt": spec.dt,
        "max_time": spec.max_time,
        "initial_mode": spec.initial_mode.value,
        "libraries": spec.libraries.to_dict(),
        "weights": spec.weights.to_dict(),
        "das": [
            {
                "da_id": d.da_id,
                "center": list(d.footprint.center),
                "radius": d.footprint.radius,
                "priority": d.priority,
                "vulnerability": d.vulnerability,
                "status": d.status.value,
                "quota": d.quota,
            }
            for d in spec.das
        ],
        "weapons": [
            {
                "ws_id": w.ws_id,
                "da_id": w.da_id,
                "weapon_class": w.weapon_class,
                "position": list(w.position),
                "range": w.sector.circle.radius,
                "start_angle": w.sector.start_angle,
                "sweep_angle": w.sector.sweep_angle,
                "max_elevation": w.max_elevation,
                "projectile_speed": w.projectile_speed,
                "rate_of_fire": w.rate_of_fire,
                "stabilization_time": w.stabilization_time,
                "lethality_index": w.lethality_index,
                "condition": w.condition.value,
                "ammo": w.ammo,
                "shots": w.shots,
            }
            for w in spec.weapons
        ],
        "threats": [
            {
                "track_id": t.track_id,
                "threat_class": t.threat_class,
                "waypoints": [list(p) for p in t.waypoints],
                "speeds": list(t.speeds),
                "spawn_time": t.spawn_time,
                "altitude": t.altitude,
                "value": t.value,
            }
            for t in spec.threats
        ],
    }


def to_document(spec: ScenarioSpec) -> str:
    return json.dumps(scenario_to_dict(spec), indent=1, sort_keys=True) + "\n"


def load_scenario(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)
