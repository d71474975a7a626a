"""Differential-thrust 3-DOF plant: thrust mixing, sea disturbance, RK4 step."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import BodyState, IntegrationError, Pose2D, UsvParams, wrap_angle


@dataclass(frozen=True)
class ThrustPair:
    """Per-thruster forces."""

    left: float = 0.0  # N
    right: float = 0.0  # N


@dataclass(frozen=True)
class GeneralizedThrust:
    """Surge/yaw channel commands: T1 drives surge, T2 the yaw couple."""

    T1: float = 0.0  # N
    T2: float = 0.0  # N (differential force; moment is T2 * l)


@dataclass(frozen=True)
class SeaState:
    """Wave forcing and wind drift knobs plus optical visibility."""

    wave_gain: float = 0.0  # dimensionless scale on both wave channels
    wave_period: float = 5.0  # s
    wave_phase: float = 0.0  # rad
    wave_force_amp: float = 10.0  # N, surge forcing at gain 1
    wave_torque_amp: float = 2.0  # N m, yaw forcing at gain 1
    wind_velocity: tuple[float, float] = (0.0, 0.0)  # m/s, world frame
    wind_drag_coeff: float = 2.0  # N s/m
    visibility: float = 1.0  # in [0, 1]

    def __post_init__(self) -> None:
        if not self.wave_period > 0.0:
            raise ValueError("wave_period must be > 0")
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")


CALM = SeaState()


@dataclass(frozen=True)
class Disturbance:
    """Environmental forcing resolved for one instant."""

    f_surge: float = 0.0  # N
    tau_yaw: float = 0.0  # N m
    drift: tuple[float, float] = (0.0, 0.0)  # m/s, world frame


@dataclass(frozen=True)
class StateDerivative:
    dx: float
    dy: float
    dpsi: float
    du: float
    dr: float


def mix(gen: GeneralizedThrust) -> ThrustPair:
    """Split channel commands onto the two thrusters."""
    return ThrustPair(left=gen.T1 / 2.0 - gen.T2 / 2.0, right=gen.T1 / 2.0 + gen.T2 / 2.0)


def unmix(pair: ThrustPair) -> GeneralizedThrust:
    """Exact inverse of mix()."""
    return GeneralizedThrust(T1=pair.left + pair.right, T2=pair.right - pair.left)


def saturate(pair: ThrustPair, params: UsvParams) -> ThrustPair:
    """Clamp each thruster to its force limits."""
    lo, hi = params.thrust_min, params.thrust_max
    return ThrustPair(left=min(max(pair.left, lo), hi), right=min(max(pair.right, lo), hi))


def disturbance_at(t: float, sea: SeaState, state: BodyState, params: UsvParams) -> Disturbance:
    """Wave forcing and wind drift at time t for the given vessel state.

    Waves force surge and yaw as phase-offset sinusoids; wind enters as a
    kinematic drift proportional to the relative wind over the hull. A calm
    sea (zero wave gain, zero wind) is exactly disturbance-free whatever the
    vessel is doing — the relative-wind drag applies only once wind or waves
    are switched on.
    """
    if sea.wave_gain == 0.0 and sea.wind_velocity == (0.0, 0.0):
        return Disturbance()
    arg = 2.0 * math.pi * t / sea.wave_period + sea.wave_phase
    f_surge = sea.wave_gain * sea.wave_force_amp * math.sin(arg)
    tau_yaw = sea.wave_gain * sea.wave_torque_amp * math.sin(arg + math.pi / 2.0)
    vx = state.u * math.cos(state.pose.psi)
    vy = state.u * math.sin(state.pose.psi)
    scale = sea.wind_drag_coeff / params.m
    drift = (
        scale * (sea.wind_velocity[0] - vx),
        scale * (sea.wind_velocity[1] - vy),
    )
    return Disturbance(f_surge=f_surge, tau_yaw=tau_yaw, drift=drift)


def derivatives(
    state: BodyState, pair: ThrustPair, dist: Disturbance, params: UsvParams
) -> StateDerivative:
    """Reduced 3-DOF rates; accelerations clamp at the actuator caps."""
    du = (pair.left + pair.right + dist.f_surge) / params.m
    du = min(max(du, -params.udot_max), params.udot_max)
    dr = ((pair.right - pair.left) * params.l + dist.tau_yaw) / params.Izz
    dr = min(max(dr, -params.rdot_max), params.rdot_max)
    return StateDerivative(
        dx=state.u * math.cos(state.pose.psi) + dist.drift[0],
        dy=state.u * math.sin(state.pose.psi) + dist.drift[1],
        dpsi=state.r,
        du=du,
        dr=dr,
    )


def _deriv_vec(
    vec: tuple[float, float, float, float, float],
    pair: ThrustPair,
    dist: Disturbance,
    params: UsvParams,
) -> tuple[float, float, float, float, float]:
    x, y, psi, u, r = vec
    d = derivatives(BodyState(Pose2D(x, y, psi), u, r), pair, dist, params)
    return (d.dx, d.dy, d.dpsi, d.du, d.dr)


def step(
    state: BodyState,
    pair: ThrustPair,
    sea: SeaState,
    t: float,
    dt: float,
    params: UsvParams,
) -> BodyState:
    """Advance one fixed RK4 step.

    The disturbance is evaluated once at the step start and held constant
    across the four stages, keeping the step deterministic in t.
    """
    if not 0.0 < dt <= 0.1:
        raise ValueError(f"dt must lie in (0, 0.1], got {dt}")
    dist = disturbance_at(t, sea, state, params)

    v0 = (state.pose.x, state.pose.y, state.pose.psi, state.u, state.r)
    k1 = _deriv_vec(v0, pair, dist, params)
    k2 = _deriv_vec(tuple(a + 0.5 * dt * b for a, b in zip(v0, k1)), pair, dist, params)
    k3 = _deriv_vec(tuple(a + 0.5 * dt * b for a, b in zip(v0, k2)), pair, dist, params)
    k4 = _deriv_vec(tuple(a + dt * b for a, b in zip(v0, k3)), pair, dist, params)
    out = [
        a + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(v0, k1, k2, k3, k4)
    ]
    if not all(math.isfinite(v) for v in out):
        raise IntegrationError(f"non-finite state after step at t={t}: {out}")

    x, y, psi, u, r = out
    u = min(max(u, -params.u_abs_cap), params.u_abs_cap)
    r = min(max(r, -params.r_abs_cap), params.r_abs_cap)
    return BodyState(Pose2D(x, y, wrap_angle(psi)), u, r)
