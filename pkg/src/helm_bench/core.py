"""Shared geometry types, vessel parameters and angle utilities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TAU = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid configuration value or malformed scenario file."""


class EvaluationError(ValueError):
    """Benchmark input that cannot be evaluated (bad boxes, ragged files)."""


class IntegrationError(ArithmeticError):
    """Plant state left the finite domain during integration."""


class NumericalError(ArithmeticError):
    """Iterative solver failed to converge."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle in radians onto (-pi, pi].

    Raises ValueError for non-finite input.
    """
    if not math.isfinite(theta):
        raise ValueError(f"cannot wrap non-finite angle: {theta!r}")
    wrapped = math.remainder(theta, TAU)
    # IEEE remainder lands on [-pi, pi]; fold the open edge onto +pi.
    if wrapped <= -math.pi:
        wrapped = math.pi
    return wrapped


@dataclass
class Pose2D:
    """Planar pose in the world frame. psi is stored wrapped onto (-pi, pi]."""

    x: float = 0.0  # m
    y: float = 0.0  # m
    psi: float = 0.0  # rad, CCW from +x

    def __post_init__(self) -> None:
        self.psi = wrap_angle(self.psi)


@dataclass
class BodyState:
    """Reduced 3-DOF state: pose plus surge speed and yaw rate.

    Velocity caps (UsvParams.u_abs_cap / r_abs_cap) are enforced by the
    integrator, not assumed of arbitrary inputs.
    """

    pose: Pose2D = field(default_factory=Pose2D)
    u: float = 0.0  # m/s, surge
    r: float = 0.0  # rad/s, yaw rate


@dataclass
class BoundingBox:
    """Axis-aligned pixel box, top-left origin."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w < 0.0 or self.h < 0.0:
            raise ValueError(f"box size must be non-negative: w={self.w}, h={self.h}")

    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; principal point and FOV derive from width/height/fx."""

    width: int = 640  # px
    height: int = 480  # px
    fx: float = 500.0  # px
    cx: float = field(init=False)
    cy: float = field(init=False)
    hfov: float = field(init=False)  # rad

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0 or not self.fx > 0.0:
            raise ConfigError("camera needs positive width, height and fx")
        object.__setattr__(self, "cx", self.width / 2.0)
        object.__setattr__(self, "cy", self.height / 2.0)
        object.__setattr__(self, "hfov", 2.0 * math.atan(self.width / (2.0 * self.fx)))


@dataclass(frozen=True)
class UsvParams:
    """Rigid-body and actuator limits of the differential-thrust vessel."""

    m: float = 20.0  # kg
    Izz: float = 3.2  # kg m^2
    l: float = 0.4  # m, thruster moment arm
    u_max: float = 1.5  # m/s, commanded speed ceiling
    udot_max: float = 10.0  # m/s^2, surge acceleration cap
    rdot_max: float = math.radians(50.0)  # rad/s^2, yaw acceleration cap
    thrust_min: float = -100.0  # N, per thruster
    thrust_max: float = 100.0  # N, per thruster
    u_abs_cap: float = 5.0  # m/s, hard integrator speed cap
    r_abs_cap: float = 2.0  # rad/s, hard integrator rate cap

    def __post_init__(self) -> None:
        positive = {
            "m": self.m,
            "Izz": self.Izz,
            "l": self.l,
            "u_max": self.u_max,
            "udot_max": self.udot_max,
            "rdot_max": self.rdot_max,
            "thrust_max": self.thrust_max,
            "u_abs_cap": self.u_abs_cap,
            "r_abs_cap": self.r_abs_cap,
        }
        for name, value in positive.items():
            if not value > 0.0:
                raise ConfigError(f"UsvParams.{name} must be > 0, got {value}")
        if not self.thrust_min < self.thrust_max:
            raise ConfigError("thrust_min must be below thrust_max")
