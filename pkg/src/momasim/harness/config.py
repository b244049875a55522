"""Scenario documents: strict JSON ingestion, serialisation and hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from ..channel import PROFILES, TapDelayProfile, get_profile
from ..errors import ConfigError
from ..scenario import ClassPlan, ClassSpec, SystemConfig

SECTIONS = ("system", "classes", "channel", "placement", "run", "sweep")
BUILTIN = ("full", "desk")


@dataclass(frozen=True)
class ChannelSpec:
    profile: str = "EPA"
    combiner: str = "mrc"
    common: bool = False
    taps: Optional[tuple] = None

    def resolve(self) -> TapDelayProfile:
        if self.taps is not None:
            return TapDelayProfile.from_taps(self.profile, self.taps)
        return get_profile(self.profile)


@dataclass(frozen=True)
class PlacementSpec:
    min_m: float = 25.0
    max_m: float = 100.0
    unit_gain: bool = False


@dataclass(frozen=True)
class RunSpec:
    trials: int = 20
    seed: int = 0
    detector: str = "auto"
    rho: float = 0.5
    sic_recompute: bool = True
    decision_directed: bool = False
    include_sic: bool = False
    symbols: str = "qpsk"
    combining: str = "sign"
    redraw: str = "all"
    theorem: bool = False
    instance: int = 0
    workers: int = 1


@dataclass(frozen=True)
class SweepSpec:
    rate_grid: tuple = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0)
    ld_loads: tuple = (0, 40, 80, 120, 160)
    profiles: tuple = ("EPA", "EVA")
    gain_policy: str = "mean"
    reserved_scs: int = 72
    spatial_gain: int = 8
    lora_spatial_gain: int = 8
    narrowband_power_dbm: float = 23.0
    m_grid: tuple = (8, 32, 128)
    alpha: Optional[float] = None
    verify: bool = False


@dataclass(frozen=True)
class Scenario:
    system: SystemConfig = field(default_factory=SystemConfig)
    plan: ClassPlan = field(default_factory=lambda: ClassPlan((
        ClassSpec("HD", 28, 224), ClassSpec("LD", 4, 120, level=1, target_rate=1.0))))
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    placement: PlacementSpec = field(default_factory=PlacementSpec)
    run: RunSpec = field(default_factory=RunSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def __post_init__(self):
        self.plan.validate(self.system.spreading_length)
        if self.channel.taps is None and self.channel.profile.upper() not in PROFILES:
            raise ConfigError(f"unknown channel profile {self.channel.profile!r}")
        if self.run.trials < 1:
            raise ConfigError("run.trials must be >= 1")

    def to_dict(self) -> dict:
        return {
            "system": dataclasses.asdict(self.system),
            "classes": [dataclasses.asdict(c) for c in self.plan.classes],
            "channel": _plain(dataclasses.asdict(self.channel)),
            "placement": dataclasses.asdict(self.placement),
            "run": dataclasses.asdict(self.run),
            "sweep": _plain(dataclasses.asdict(self.sweep)),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        if not isinstance(data, dict):
            raise ConfigError("scenario document must be a JSON object")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown scenario sections: {sorted(unknown)}")
        classes = data.get("classes")
        if classes is None:
            plan = cls().plan
        else:
            if not isinstance(classes, list):
                raise ConfigError("'classes' must be a list")
            plan = ClassPlan(tuple(_build(ClassSpec, c, "classes[]") for c in classes))
        return cls(
            system=_build(SystemConfig, data.get("system", {}), "system"),
            plan=plan,
            channel=_build(ChannelSpec, data.get("channel", {}), "channel"),
            placement=_build(PlacementSpec, data.get("placement", {}), "placement"),
            run=_build(RunSpec, data.get("run", {}), "run"),
            sweep=_build(SweepSpec, data.get("sweep", {}), "sweep"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical document; the worker count is excluded
        since it never changes results."""
        d = self.to_dict()
        d["run"].pop("workers")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def replace(self, **sections) -> "Scenario":
        return dataclasses.replace(self, **sections)

    def with_run(self, **kw) -> "Scenario":
        return dataclasses.replace(self, run=dataclasses.replace(self.run, **kw))

    def with_channel(self, **kw) -> "Scenario":
        return dataclasses.replace(self, channel=dataclasses.replace(self.channel, **kw))

    def with_system(self, **kw) -> "Scenario":
        return dataclasses.replace(self, system=dataclasses.replace(self.system, **kw))

    def with_ld_users(self, count: int, level: int = 1) -> "Scenario":
        classes = tuple(dataclasses.replace(c, user_count=count) if c.level == level else c
                        for c in self.plan.classes)
        return dataclasses.replace(self, plan=ClassPlan(classes))

    def with_hd_users(self, count: int) -> "Scenario":
        classes = tuple(dataclasses.replace(c, user_count=count) if c.kind == "HD" else c
                        for c in self.plan.classes)
        return dataclasses.replace(self, plan=ClassPlan(classes))


def _plain(d: dict) -> dict:
    # tuples -> lists so the JSON form round-trips through _build
    return {k: ([list(x) if isinstance(x, tuple) else x for x in v] if isinstance(v, tuple) else v)
            for k, v in d.items()}


def _build(kind, data, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    names = {f.name for f in dataclasses.fields(kind)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    kwargs = {k: (tuple(tuple(x) if isinstance(x, list) else x for x in v) if isinstance(v, list) else v)
              for k, v in data.items()}
    try:
        return kind(**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad value in {section!r}: {e}") from e


def load_scenario(source: Union[str, Path, None] = None) -> Scenario:
    """Load a scenario from a JSON path or a built-in name (``full``, ``desk``)."""
    if source is None:
        source = "desk"
    if str(source) in BUILTIN:
        text = resources.files("momasim.scenarios").joinpath(f"{source}.json").read_text()
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read scenario {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {source}: {e}") from e
    return Scenario.from_dict(data)
