"""Run configuration: one JSON document with a section per module.

Every section is a frozen dataclass whose defaults are the reference settings. Loading
rejects unknown keys and rebuilds nested dataclasses and tuples, so a configuration
round-trips through ``to_dict``/``from_dict`` unchanged and hashes stably.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .compute import ComputeConfig
from .control.aco import AcoParams
from .control.env import BudgetLink, MissionConfig
from .control.rl import RlConfig
from .control.rrt import RrtParams
from .sar import OccupancyParams, SarConfig, SarGrid, SurveyConfig
from .scene import Scene, generate_scene
from .waveform.ber import SCHEMES, BerSetup
from .waveform.modem import ModemConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SceneParams:
    seed: int = 7
    n_buildings: int = 12
    bounds: tuple[float, float] = (1000.0, 1000.0)
    n_users: int = 10
    demanded_bits: float = 10e6
    size_range: tuple[float, float] = (60.0, 140.0)
    height_range: tuple[float, float] = (20.0, 100.0)
    street_gap: float = 30.0
    edge_clearance: float = 40.0

    def build(self) -> Scene:
        return generate_scene(
            self.seed,
            self.n_buildings,
            self.bounds,
            n_users=self.n_users,
            demanded_bits=self.demanded_bits,
            size_range=self.size_range,
            height_range=self.height_range,
            street_gap=self.street_gap,
            edge_clearance=self.edge_clearance,
        )


# 128 m patch with three low blocks, imaged on a 256 x 256 grid of 0.5 m pixels
REFERENCE_PATCH = SceneParams(
    seed=1,
    n_buildings=3,
    bounds=(128.0, 128.0),
    n_users=0,
    size_range=(20.0, 36.0),
    height_range=(8.0, 20.0),
    street_gap=10.0,
    edge_clearance=10.0,
)


@dataclass(frozen=True)
class BerSection:
    schemes: tuple[str, ...] = SCHEMES
    snr_db: tuple[float, ...] = (5.0, 10.0, 15.0)
    speed: float = 40.0
    frames: int = 100  # 100 frames x 30 symbols x 256 bits = 768000 bits per point (>= 1e5)
    setup: BerSetup = BerSetup()


@dataclass(frozen=True)
class SarSection:
    patch: SceneParams = REFERENCE_PATCH
    radar: SarConfig = SarConfig(
        aperture_length=180.0,
        pri=0.25 / 40.0,
        grid=SarGrid(x0=0.25, y0=0.25, nx=256, ny=256, pixel=0.5),
        antenna_length=1.0,
    )
    pass_center: tuple[float, float, float] = (64.0, -60.0, 30.0)
    scatterer_spacing: float = 0.5
    jitter: float = 1.0
    occupancy: OccupancyParams = OccupancyParams()
    point_slant_range: float = 100.0
    point_altitude: float = 30.0
    point_azimuth_res: float = 0.5
    point_pixel: float = 0.05
    point_pixels: int = 161


@dataclass(frozen=True)
class MissionSection:
    mission: MissionConfig = MissionConfig()
    link: BudgetLink = field(default_factory=BudgetLink)
    rl: RlConfig = RlConfig()
    rrt: RrtParams = RrtParams()
    aco: AcoParams = AcoParams()
    planner_map: str = "truth"  # or "sar": baselines plan on the survey map
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.planner_map not in ("truth", "sar"):
            raise ConfigError(f"planner_map must be 'truth' or 'sar', got {self.planner_map!r}")
        if not self.seeds:
            raise ConfigError("mission.seeds is empty")


@dataclass(frozen=True)
class LoopSection:
    tick: float = 0.25  # s
    compute_mode: str = "pando"  # local, pando, relay, or auto (fastest per choose_mode)
    map_source: str = "sar"  # or "truth"
    sensing_radius: float = 150.0  # m of survey map revealed around each sensing position
    clearance_altitude: float = 110.0  # m; the shield trusts the a-priori height cap above this
    predict: bool = True  # compensate the command delay by flying the snapshot through in-flight commands
    wideband: ModemConfig = ModemConfig(n_subcarriers=1200, subcarrier_spacing=120e3, cp_len=150)
    narrowband: ModemConfig = ModemConfig(n_subcarriers=128, subcarrier_spacing=120e3, cp_len=16)
    narrowband_offset: int = 1208  # first narrowband subcarrier index (8-subcarrier guard)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self):
        if self.compute_mode not in ("local", "pando", "relay", "auto"):
            raise ConfigError(f"unknown compute_mode {self.compute_mode!r}")
        if self.map_source not in ("truth", "sar"):
            raise ConfigError(f"map_source must be 'truth' or 'sar', got {self.map_source!r}")
        if self.tick <= 0:
            raise ConfigError("tick must be positive")


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    scene: SceneParams = SceneParams()
    ber: BerSection = BerSection()
    sar: SarSection = SarSection()
    latency: ComputeConfig = ComputeConfig()
    mission: MissionSection = MissionSection()
    survey: SurveyConfig = SurveyConfig()
    loop: LoopSection = LoopSection()

    def to_dict(self) -> dict:
        return _to_plain(self)

    @classmethod
    def from_dict(cls, doc: dict) -> SimConfig:
        return _build(cls, doc, "config")

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> SimConfig:
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


def _fields(cls):
    return [f for f in dataclasses.fields(cls) if not f.name.startswith("_")]


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in _fields(type(obj))}
    if isinstance(obj, (tuple, list)):
        return [_to_plain(v) for v in obj]
    return obj


def _convert(tp, value, where: str):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return _convert(inner[0], value, where)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected an object")
        return _build(tp, value, where)
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_convert(args[0], v, f"{where}[{i}]") for i, v in enumerate(value))
        if len(args) != len(value):
            raise ConfigError(f"{where}: expected {len(args)} items, got {len(value)}")
        return tuple(_convert(a, v, f"{where}[{i}]") for i, (a, v) in enumerate(zip(args, value)))
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    return value


def _build(cls, doc: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in _fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _convert(hints[k], v, f"{where}.{k}") for k, v in doc.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc
