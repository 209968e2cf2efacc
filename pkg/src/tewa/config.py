"""Tunable weights and thresholds.

Every score in the pipeline is a fuzzy value in [0, 1] built as a weighted
sum; the weights live here so they can be tuned per scenario.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, fields


class Mode(enum.Enum):
    PREFERENTIAL = "preferential"
    SUBTRACTIVE = "subtractive"


# Weight groups that must each sum to one.
WEIGHT_GROUPS: dict[str, tuple[str, ...]] = {
    "kill_probability": ("w_intent", "w_capability", "w_load"),
    "intent": ("intent_heading", "intent_closing", "intent_time"),
    "da_pair": ("da_kill_capability", "da_time", "da_load"),
    "ws_pair": ("ws_time", "ws_elevation", "ws_lethality", "ws_stabilization", "ws_rate_of_fire"),
    "objective": ("objective_da_priority", "objective_threat_value"),
}

_SCALES = ("reference_speed", "time_scale", "ws_time_scale", "stabilization_scale", "reference_rof")


@dataclass(frozen=True)
class WeightsConfig:
    w_intent: float = 0.4
    w_capability: float = 0.4
    w_load: float = 0.2

    intent_heading: float = 0.4
    intent_closing: float = 0.3
    intent_time: float = 0.3

    da_kill_capability: float = 0.5
    da_time: float = 0.3
    da_load: float = 0.2

    ws_time: float = 0.35
    ws_elevation: float = 0.1
    ws_lethality: float = 0.3
    ws_stabilization: float = 0.1
    ws_rate_of_fire: float = 0.15

    # Multiplier applied to DA-pair weights and the refined threat index:
    # objective_da_priority * DA priority + objective_threat_value * threat value.
    objective_da_priority: float = 1.0
    objective_threat_value: float = 0.0

    capability_threshold: float = 0.3

    reference_speed: float = 0.3  # km/s, closing speed scoring 1
    time_scale: float = 60.0  # s, decay of the time-to-DA score
    ws_time_scale: float = 60.0  # s, decay of the time-to-WS score
    stabilization_scale: float = 5.0  # s
    reference_rof: float = 1.0  # rounds/s scoring 1

    mode_override: Mode | None = None

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name == "mode_override":
                continue
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{f.name} must be a finite number")
            if f.name in _SCALES:
                if value <= 0:
                    raise ValueError(f"{f.name} must be positive")
            elif not 0.0 <= value <= 1.0:
                raise ValueError(f"{f.name}={value} outside [0, 1]")
        for group, names in WEIGHT_GROUPS.items():
            total = math.fsum(getattr(self, n) for n in names)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"{group} weights sum to {total}, expected 1")
        if self.mode_override is not None and not isinstance(self.mode_override, Mode):
            object.__setattr__(self, "mode_override", Mode(self.mode_override))

    def objective_factor(self, da_priority: float, threat_value: float) -> float:
        return self.objective_da_priority * da_priority + self.objective_threat_value * threat_value

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode_override"] = self.mode_override.value if self.mode_override else None
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "WeightsConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown weight fields: {sorted(unknown)}")
        kwargs = dict(data)
        if kwargs.get("mode_override") is not None:
            kwargs["mode_override"] = Mode(kwargs["mode_override"])
        return cls(**kwargs)
