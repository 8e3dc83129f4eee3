"""Versioned class profiles shipped as JSON data files."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

PROFILE_FORMAT = "gazekit.profile"
PROFILE_VERSION = 1


@dataclass(frozen=True)
class MeasureDist:
    """Target per-event distribution of one base measure."""

    mean: float
    std: float
    min: float
    max: float

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if self.min > self.max:
            raise ValueError("min exceeds max")


@dataclass(frozen=True)
class ClassProfile:
    name: str
    class_label: str | None
    measures: dict[str, MeasureDist]
    frequencies_hz: dict = field(default_factory=dict)
    pursuit_fraction: float = 0.35
    px_per_degree: float = 120.0
    velocity_threshold_dps: float = 50.0
    pursuit_threshold_px: float = 100.0
    subject_offset_sigma: float = 0.0
    pupil_baseline_mm: float = 3.5
    pupil_noise_mm: float = 0.03
    confusion_dilation: float = 0.0
    saccade_rate_scale: float = 1.0
    version: int = PROFILE_VERSION

    def __post_init__(self):
        if not 0.0 <= self.pursuit_fraction <= 1.0:
            raise ValueError("pursuit_fraction must lie in [0, 1]")
        if self.saccade_rate_scale < 0:
            raise ValueError("saccade_rate_scale must be >= 0")

    def with_changes(self, **kw) -> "ClassProfile":
        d = {**self.__dict__, **kw}
        return ClassProfile(**d)

    def to_json(self) -> dict:
        d = asdict(self)
        d["format"] = PROFILE_FORMAT
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ClassProfile":
        if d.get("format", PROFILE_FORMAT) != PROFILE_FORMAT:
            raise ValueError("not a class profile")
        if d.get("version", PROFILE_VERSION) != PROFILE_VERSION:
            raise ValueError(f"unsupported profile version {d.get('version')}")
        keys = set(cls.__dataclass_fields__) - {"measures"}
        kw = {k: v for k, v in d.items() if k in keys}
        kw["measures"] = {k: MeasureDist(**v) for k, v in d["measures"].items()}
        return cls(**kw)


def _profile_dir():
    return resources.files("gazekit.synth") / "profiles"


def available_profiles() -> list[str]:
    return sorted(p.name[:-5] for p in _profile_dir().iterdir() if p.name.endswith(".json"))


def load_profile_data(name_or_path) -> dict:
    """Raw JSON of a bundled profile (by name) or of a profile file."""
    p = Path(str(name_or_path))
    if p.suffix == ".json" and p.exists():
        return json.loads(p.read_text())
    res = _profile_dir() / f"{name_or_path}.json"
    if not res.is_file():
        raise FileNotFoundError(f"no bundled profile {name_or_path!r}; have {available_profiles()}")
    return json.loads(res.read_text())


def load_class_profile(name_or_path) -> ClassProfile:
    return ClassProfile.from_json(load_profile_data(name_or_path))


def soccer_profiles() -> dict[str, ClassProfile]:
    """The three soccer class profiles keyed by class label."""
    out = {}
    for key in ("novice", "intermediate", "expert"):
        p = load_class_profile(f"soccer_{key}")
        out[p.class_label] = p
    return out
