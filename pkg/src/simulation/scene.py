"""
JSON scene files for the simulator
"""

import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.constants import c as SPEED_OF_LIGHT

from src.core.exceptions import ConfigError
from src.core.models import SystemConfig
from src.simulation.channel import DynamicScatterer, ImpairmentModel, Scene, StaticPath, make_walker
from src.simulation.trajectories import WaypointTrajectory, make_walk


class StaticPathSpec(BaseModel):
    """Static path; omitted delay/aoa default to the direct Tx path"""
    model_config = ConfigDict(extra="forbid")

    amplitude: float = Field(1.0, ge=0)
    path_length: Optional[float] = Field(None, gt=0)
    aoa_deg: Optional[float] = Field(None, ge=-90, le=90)

    def build(self, cfg: SystemConfig) -> StaticPath:
        delay = cfg.tx_delay if self.path_length is None else self.path_length / SPEED_OF_LIGHT
        aoa = cfg.tx_aoa if self.aoa_deg is None else math.radians(self.aoa_deg)
        return StaticPath(amplitude=self.amplitude, delay=delay, aoa=aoa)


class WalkSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: Literal["linear", "vshape", "rectangle"] = "linear"
    speed: float = Field(1.0, gt=0)
    anchor: Tuple[float, float] = (0.0, 5.0)


class WalkerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    limb_amplitude: float = Field(0.3, ge=0)
    limb_ratio: float = Field(0.3, ge=0)
    stride_period: float = Field(1.0, gt=0)


class ScattererSpec(BaseModel):
    """Moving scatterer: explicit [t, x, y] waypoints or a generated walk"""
    model_config = ConfigDict(extra="forbid")

    amplitude: float = Field(0.3, ge=0)
    waypoints: Optional[List[Tuple[float, float, float]]] = None
    walk: Optional[WalkSpec] = None
    walker: Optional[WalkerSpec] = None

    @model_validator(mode="after")
    def _one_source(self) -> "ScattererSpec":
        if (self.waypoints is None) == (self.walk is None):
            raise ValueError("give exactly one of 'waypoints' or 'walk'")
        return self

    def build(self, duration: float) -> List[DynamicScatterer]:
        if self.waypoints is not None:
            trajectory = WaypointTrajectory([w[0] for w in self.waypoints], [(w[1], w[2]) for w in self.waypoints])
        else:
            trajectory = make_walk(self.walk.shape, self.walk.speed, duration, self.walk.anchor)
        if self.walker is None:
            return [DynamicScatterer(self.amplitude, trajectory)]
        return make_walker(trajectory, self.amplitude, self.walker.limb_amplitude,
                           self.walker.limb_ratio, self.walker.stride_period)


class ImpairmentSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    timing_offset_max: float = Field(1e-7, ge=0)
    cfo_hz: float = 2.5e3
    hw_phase: bool = True
    noise_std: float = Field(0.05, ge=0)
    power_cycle: Optional[float] = Field(None, gt=0)


class SceneSpec(BaseModel):
    """Validated content of a scene file"""
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    duration: float = Field(30.0, gt=0)
    static_paths: List[StaticPathSpec] = Field(default_factory=lambda: [StaticPathSpec()])
    scatterers: List[ScattererSpec] = Field(default_factory=list)
    impairments: ImpairmentSpec = Field(default_factory=ImpairmentSpec)

    def build(self, cfg: SystemConfig, seed: Optional[int] = None) -> Scene:
        """Instantiate the scene; seed overrides the file's seed"""
        imp = self.impairments
        scatterers: List[DynamicScatterer] = []
        for spec in self.scatterers:
            scatterers.extend(spec.build(self.duration))
        return Scene(
            static_paths=[p.build(cfg) for p in self.static_paths],
            scatterers=scatterers,
            impairments=ImpairmentModel(
                timing_offset_max=imp.timing_offset_max,
                cfo_hz=imp.cfo_hz,
                hw_phase=imp.hw_phase,
                noise_std=imp.noise_std,
                rng_seed=self.seed if seed is None else seed,
                power_cycle=imp.power_cycle,
            ),
        )


def default_scene_spec(shape: str = "linear", duration: float = 30.0, seed: int = 0,
                       walker: bool = False) -> SceneSpec:
    """One person walking in front of the link, direct path amplitude 1"""
    return SceneSpec(
        seed=seed,
        duration=duration,
        scatterers=[ScattererSpec(walk=WalkSpec(shape=shape), walker=WalkerSpec() if walker else None)],
    )


def load_scene(path: Union[str, Path]) -> SceneSpec:
    """Read and validate a JSON scene file"""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"Scene file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Scene file {path} is not valid JSON: {e}") from e

    try:
        spec = SceneSpec.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid scene file {path}: {e}") from e

    logger.info(f"Loaded scene {path}: {len(spec.static_paths)} static paths, {len(spec.scatterers)} scatterers")
    return spec
