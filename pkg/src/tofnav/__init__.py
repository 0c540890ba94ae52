"""Obstacle avoidance for a nano-drone with an 8x8 multi-zone ToF sensor."""

from . import sim  # noqa: F401  (imported before config to fix module init order)
from .config import RunConfig
from .perception import ObjectGroup, PerceptionConfig, group, group_features, threshold
from .policy import Command, DeadEndHistory, PolicyConfig, decide
from .sensor import DepthFrame, NoiseConfig, SensorConfig, apply_noise, raycast_frame
from .world import DroneState, World

__version__ = "0.1.0"
