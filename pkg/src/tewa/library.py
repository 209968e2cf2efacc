"""Threat and weapon class libraries and their effectiveness correlation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Mapping

UNKNOWN = "unknown"


class LibraryError(ValueError):
    pass


class OutOfRangeValue(LibraryError):
    pass


class MissingCorrelation(LibraryError):
    pass


class DuplicateClass(LibraryError):
    pass


class UnknownWeaponClass(LibraryError, KeyError):
    pass


@dataclass(frozen=True)
class ThreatClassRecord:
    class_id: str
    name: str
    base_capability: float
    base_speed: float  # km/s
    value: float

    def __post_init__(self) -> None:
        _unit(self.base_capability, f"threat {self.class_id} base_capability")
        _unit(self.value, f"threat {self.class_id} value")
        if not self.base_speed > 0:
            raise OutOfRangeValue(f"threat {self.class_id} base_speed must be positive")


@dataclass(frozen=True)
class WeaponClassRecord:
    class_id: str
    name: str
    lethality_index: float
    priority: float

    def __post_init__(self) -> None:
        _unit(self.lethality_index, f"weapon {self.class_id} lethality_index")
        _unit(self.priority, f"weapon {self.class_id} priority")


def _unit(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
        raise OutOfRangeValue(f"{what} = {value!r} is outside [0, 1]")
    return float(value)


# Fallback for threats the library has never seen: assume a capable, valuable
# threat rather than a harmless one.
DEFAULT_UNKNOWN_THREAT = ThreatClassRecord(UNKNOWN, "unknown", 0.9, 0.3, 1.0)


@dataclass(frozen=True)
class CorrelationTable:
    """Effectiveness C of each weapon class against each threat class."""

    effectiveness_map: Mapping[tuple[str, str], float]
    unknown_row: Mapping[str, float]

    def effectiveness(self, weapon_class: str, threat_class: str) -> float:
        if weapon_class not in self.unknown_row:
            raise UnknownWeaponClass(weapon_class)
        c = self.effectiveness_map.get((weapon_class, threat_class))
        if c is None:
            return self.unknown_row[weapon_class]
        return c


@dataclass(frozen=True)
class Libraries:
    threats: Mapping[str, ThreatClassRecord]
    weapons: Mapping[str, WeaponClassRecord]
    correlation: CorrelationTable
    unknown_threat: ThreatClassRecord = DEFAULT_UNKNOWN_THREAT
    _preferences: dict = field(default_factory=dict, compare=False, repr=False)

    def threat(self, class_id: str) -> ThreatClassRecord:
        return self.threats.get(class_id, self.unknown_threat)

    def is_known_threat(self, class_id: str) -> bool:
        return class_id in self.threats

    def effectiveness(self, weapon_class: str, threat_class: str) -> float:
        return self.correlation.effectiveness(weapon_class, threat_class)

    def preferred_weapons(self, threat_class: str) -> list[str]:
        """Weapon classes best-first: effectiveness, then priority, then id."""
        cached = self._preferences.get(threat_class)
        if cached is None:
            cached = sorted(
                self.weapons,
                key=lambda w: (
                    -self.effectiveness(w, threat_class),
                    -self.weapons[w].priority,
                    w,
                ),
            )
            self._preferences[threat_class] = cached
        return list(cached)

    def to_dict(self) -> dict:
        threat_classes = [
            {"class_id": r.class_id, "name": r.name, "base_capability": r.base_capability,
             "base_speed": r.base_speed, "value": r.value}
            for r in self.threats.values()
        ]
        if self.unknown_threat != DEFAULT_UNKNOWN_THREAT:
            r = self.unknown_threat
            threat_classes.append(
                {"class_id": UNKNOWN, "name": r.name, "base_capability": r.base_capability,
                 "base_speed": r.base_speed, "value": r.value}
            )
        correlation = [
            {"weapon": w, "threat": t, "c": c}
            for (w, t), c in sorted(self.correlation.effectiveness_map.items())
        ]
        correlation += [
            {"weapon": w, "threat": UNKNOWN, "c": c}
            for w, c in sorted(self.correlation.unknown_row.items())
        ]
        return {
            "threat_classes": threat_classes,
            "weapon_classes": [
                {"class_id": r.class_id, "name": r.name,
                 "lethality_index": r.lethality_index, "priority": r.priority}
                for r in self.weapons.values()
            ],
            "correlation": correlation,
        }


def _require(entry: Mapping, key: str, where: str) -> Any:
    try:
        return entry[key]
    except (KeyError, TypeError):
        raise LibraryError(f"{where}: missing field {key!r}") from None


def build_libraries(
    threat_entries: list, weapon_entries: list, correlation_entries: list
) -> tuple[Libraries, CorrelationTable]:
    threats: dict[str, ThreatClassRecord] = {}
    unknown_threat = DEFAULT_UNKNOWN_THREAT
    for i, e in enumerate(threat_entries):
        where = f"threat_classes[{i}]"
        cid = str(_require(e, "class_id", where))
        rec = ThreatClassRecord(
            cid,
            str(e.get("name", cid)),
            _require(e, "base_capability", where),
            _require(e, "base_speed", where),
            _require(e, "value", where),
        )
        if cid == UNKNOWN:
            unknown_threat = rec
            continue
        if cid in threats:
            raise DuplicateClass(f"duplicate threat class {cid!r}")
        threats[cid] = rec

    weapons: dict[str, WeaponClassRecord] = {}
    for i, e in enumerate(weapon_entries):
        where = f"weapon_classes[{i}]"
        cid = str(_require(e, "class_id", where))
        if cid in weapons:
            raise DuplicateClass(f"duplicate weapon class {cid!r}")
        weapons[cid] = WeaponClassRecord(
            cid,
            str(e.get("name", cid)),
            _require(e, "lethality_index", where),
            _require(e, "priority", where),
        )

    table: dict[tuple[str, str], float] = {}
    unknown_row: dict[str, float] = {}
    for i, e in enumerate(correlation_entries):
        where = f"correlation[{i}]"
        w = str(_require(e, "weapon", where))
        t = str(_require(e, "threat", where))
        c = _unit(_require(e, "c", where), f"{where} c")
        if w not in weapons:
            raise MissingCorrelation(f"{where} references undeclared weapon class {w!r}")
        if t == UNKNOWN:
            if w in unknown_row:
                raise DuplicateClass(f"duplicate unknown-threat entry for {w!r}")
            unknown_row[w] = c
            continue
        if t not in threats:
            raise MissingCorrelation(f"{where} references undeclared threat class {t!r}")
        if (w, t) in table:
            raise DuplicateClass(f"duplicate correlation entry ({w!r}, {t!r})")
        table[(w, t)] = c

    for w in weapons:
        if w not in unknown_row:
            raise MissingCorrelation(f"weapon class {w!r} has no unknown-threat entry")

    corr = CorrelationTable(table, unknown_row)
    return Libraries(threats, weapons, corr, unknown_threat), corr


def libraries_from_dict(doc: Mapping) -> tuple[Libraries, CorrelationTable]:
    return build_libraries(
        list(doc.get("threat_classes", [])),
        list(doc.get("weapon_classes", [])),
        list(doc.get("correlation", [])),
    )


def _parse(text: str, key: str) -> list:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError(f"invalid library document: {exc}") from exc
    if isinstance(doc, list):
        return doc
    if not isinstance(doc, dict):
        raise LibraryError("library document must be an object or array")
    return list(doc.get(key, []))


def load_libraries(threat_doc: str, weapon_doc: str, correlation_doc: str) -> tuple[Libraries, CorrelationTable]:
    """Parse the three JSON library documents and cross-validate them."""
    return build_libraries(
        _parse(threat_doc, "threat_classes"),
        _parse(weapon_doc, "weapon_classes"),
        _parse(correlation_doc, "correlation"),
    )


def sample_library_dict() -> dict:
    text = resources.files("tewa.data").joinpath("libraries.json").read_text(encoding="utf-8")
    return json.loads(text)


def sample_libraries() -> Libraries:
    """The bundled synthetic library (illustrative numbers, not real data)."""
    libs, _ = libraries_from_dict(sample_library_dict())
    return libs
