"""Image-based guidance: pixel errors to body-frame references plus the
tracking/holding/searching mode logic."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .core import BoundingBox, CameraIntrinsics, ConfigError
from .sensors import Detection


class SpeedLaw(enum.Enum):
    """Reference-speed policy while range information is available."""

    PAPER_CLAMPED = "paper_clamped"  # u_max * d / D, clamped into [0, u_max]
    STOP_AT_D = "stop_at_d"  # ramp to zero exactly at the standoff distance


class GuidanceMode(enum.Enum):
    TRACKING = "tracking"
    HOLDING = "holding"
    SEARCHING = "searching"


@dataclass(frozen=True)
class PixelError:
    ex: float  # px, +left of image center
    ey: float  # px, +above image center


@dataclass(frozen=True)
class GuidanceCommand:
    mode: GuidanceMode
    u_ref: float  # m/s
    e_psi: float  # rad, + steers to port
    e_d: float  # m, standoff minus measured range (0 when out of range)


@dataclass(frozen=True)
class GuidanceConfig:
    standoff: float = 5.0  # m, desired following distance D
    lidar_max_range: float = 50.0  # m
    u_max: float = 1.5  # m/s
    lost_frames_threshold: int = 10  # consecutive misses tolerated before searching
    search_yaw_bias: float = 0.3  # rad, fixed heading error while searching
    speed_law: SpeedLaw = SpeedLaw.PAPER_CLAMPED
    holding_decay: float = 0.9  # per-frame speed decay while holding

    def __post_init__(self) -> None:
        if not 0.0 < self.standoff < self.lidar_max_range:
            raise ConfigError("need 0 < standoff < lidar_max_range")
        if not self.u_max > 0.0:
            raise ConfigError("u_max must be > 0")
        if self.lost_frames_threshold < 0:
            raise ConfigError("lost_frames_threshold must be >= 0")
        if not 0.0 <= self.holding_decay <= 1.0:
            raise ConfigError("holding_decay must lie in [0, 1]")


def pixel_error(box: BoundingBox, cam: CameraIntrinsics) -> PixelError:
    """Offset of the box center from the image center, positive left/up."""
    cx, cy = box.center()
    if not (0.0 <= cx <= cam.width and 0.0 <= cy <= cam.height):
        raise ValueError(f"box center ({cx}, {cy}) lies outside the image")
    return PixelError(ex=cam.cx - cx, ey=cam.cy - cy)


def pixel_to_body(err: PixelError, cam: CameraIntrinsics) -> float:
    """Horizontal pixel error as a body-frame bearing error (rad, + to port)."""
    return math.atan2(err.ex, cam.fx)


def distance_error(range_m: float, cfg: GuidanceConfig) -> float:
    """Standoff tracking error D - d; positive when inside the standoff."""
    return cfg.standoff - range_m


def reference_speed(range_m: float | None, cfg: GuidanceConfig) -> float:
    """Forward speed command for the measured range (None = beyond LiDAR)."""
    if range_m is None:
        return cfg.u_max
    if cfg.speed_law is SpeedLaw.PAPER_CLAMPED:
        return min(max(cfg.u_max * range_m / cfg.standoff, 0.0), cfg.u_max)
    span = cfg.lidar_max_range - cfg.standoff
    frac = min(max((range_m - cfg.standoff) / span, 0.0), 1.0)
    return cfg.u_max * frac


@dataclass
class GuidanceState:
    """FSM memory: the lost-frame counter plus what HOLDING/SEARCHING replay.

    HOLDING repeats the last command with decaying speed and SEARCHING yaws
    toward the side the target was last seen, so the counter alone is not
    enough memory.
    """

    lost_count: int = 0
    last_command: GuidanceCommand = GuidanceCommand(GuidanceMode.HOLDING, 0.0, 0.0, 0.0)
    last_seen_sign: float = 1.0

    def reset(self) -> None:
        self.__dict__.update(GuidanceState().__dict__)


def guidance_step(
    det: Detection,
    range_m: float | None,
    cfg: GuidanceConfig,
    cam: CameraIntrinsics,
    state: GuidanceState,
) -> GuidanceCommand:
    """One step of the tracking/holding/searching guidance FSM.

    A valid detection gives TRACKING with fresh errors; short dropouts give
    HOLDING (last command with decaying speed); past the lost threshold the
    loop SEARCHES by yawing toward the side the target was last seen.
    """
    if det.valid and det.box is not None:
        state.lost_count = 0
        err = pixel_error(det.box, cam)
        e_psi = pixel_to_body(err, cam)
        if e_psi != 0.0:
            state.last_seen_sign = math.copysign(1.0, e_psi)
        e_d = distance_error(range_m, cfg) if range_m is not None else 0.0
        cmd = GuidanceCommand(
            mode=GuidanceMode.TRACKING,
            u_ref=reference_speed(range_m, cfg),
            e_psi=e_psi,
            e_d=e_d,
        )
    else:
        state.lost_count += 1
        if state.lost_count <= cfg.lost_frames_threshold:
            prev = state.last_command
            cmd = GuidanceCommand(
                mode=GuidanceMode.HOLDING,
                u_ref=prev.u_ref * cfg.holding_decay,
                e_psi=prev.e_psi,
                e_d=prev.e_d,
            )
        else:
            cmd = GuidanceCommand(
                mode=GuidanceMode.SEARCHING,
                u_ref=0.0,
                e_psi=cfg.search_yaw_bias * state.last_seen_sign,
                e_d=0.0,
            )
    state.last_command = cmd
    return cmd
