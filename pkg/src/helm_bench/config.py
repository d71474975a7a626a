"""Scenario files: INI-style sections with a strict key schema.

Unknown sections or keys are hard errors; every key is optional and falls
back to the library defaults.
"""

from __future__ import annotations

import configparser
from pathlib import Path

import numpy as np

from . import control, dynamics, guidance, metrics, sensors, sim
from .core import BodyState, CameraIntrinsics, ConfigError, Pose2D, UsvParams


def _parse_float(s: str) -> float:
    return float(s)


def _parse_int(s: str) -> int:
    return int(s)


def _parse_str(s: str) -> str:
    return s.strip()


def _parse_speed_law(s: str) -> guidance.SpeedLaw:
    try:
        return guidance.SpeedLaw(s.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown speed_law {s!r}") from None


def _parse_target_kind(s: str) -> sim.TrajectoryKind:
    try:
        return sim.TrajectoryKind(s.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown target kind {s!r}") from None


def _parse_tracker_kind(s: str) -> sim.TrackerKind:
    try:
        return sim.TrackerKind(s.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown tracker kind {s!r}") from None


def _parse_controller_kind(s: str) -> sim.ControllerKind:
    try:
        return sim.ControllerKind(s.strip().lower())
    except ValueError:
        raise ConfigError(f"unknown controller kind {s!r}") from None


def _parse_floats(s: str, n: int) -> tuple[float, ...]:
    parts = [p for p in s.replace(",", " ").split() if p]
    if len(parts) != n:
        raise ConfigError(f"expected {n} comma-separated numbers, got {s!r}")
    return tuple(float(p) for p in parts)


def _parse_vertices(s: str) -> tuple[tuple[float, float], ...]:
    groups = [g for g in s.split(";") if g.strip()]
    if len(groups) != 3:
        raise ConfigError(f"vertices needs 3 'x,y' pairs separated by ';', got {s!r}")
    return tuple((lambda xy: (xy[0], xy[1]))(_parse_floats(g, 2)) for g in groups)


def _parse_halfwidth(s: str) -> int | None:
    s = s.strip().lower()
    if s in ("auto", "none", ""):
        return None
    return int(s)


_SCHEMA: dict[str, dict[str, object]] = {
    "run": {"name": _parse_str, "duration": _parse_float, "dt": _parse_float, "seed": _parse_int},
    "usv": {
        "m": _parse_float,
        "izz": _parse_float,
        "l": _parse_float,
        "u_max": _parse_float,
        "udot_max": _parse_float,
        "rdot_max": _parse_float,
        "thrust_min": _parse_float,
        "thrust_max": _parse_float,
        "u_abs_cap": _parse_float,
        "r_abs_cap": _parse_float,
        "x0": _parse_float,
        "y0": _parse_float,
        "psi0": _parse_float,
        "u0": _parse_float,
        "r0": _parse_float,
    },
    "camera": {"width": _parse_int, "height": _parse_int, "fx": _parse_float},
    "sea": {
        "wave_gain": _parse_float,
        "wave_period": _parse_float,
        "wave_phase": _parse_float,
        "wave_force_amp": _parse_float,
        "wave_torque_amp": _parse_float,
        "wind_x": _parse_float,
        "wind_y": _parse_float,
        "wind_drag_coeff": _parse_float,
        "visibility": _parse_float,
    },
    "guidance": {
        "standoff": _parse_float,
        "lidar_max_range": _parse_float,
        "u_max": _parse_float,
        "lost_frames_threshold": _parse_int,
        "search_yaw_bias": _parse_float,
        "speed_law": _parse_speed_law,
        "holding_decay": _parse_float,
    },
    "sensors": {
        "lidar_sigma": _parse_float,
        "u_sigma": _parse_float,
        "psi_sigma": _parse_float,
        "r_sigma": _parse_float,
        "frame_stride": _parse_int,
    },
    "target": {
        "kind": _parse_target_kind,
        "x0": _parse_float,
        "y0": _parse_float,
        "psi0": _parse_float,
        "speed": _parse_float,
        "extent": _parse_float,
        "vertices": _parse_vertices,
        "triangle_center": lambda s: _parse_floats(s, 2),
        "triangle_side": _parse_float,
    },
    "tracker": {
        "kind": _parse_tracker_kind,
        "sigma_center_px": _parse_float,
        "sigma_scale": _parse_float,
        "p_drop_base": _parse_float,
        "ncc_peak_threshold": _parse_float,
        "ncc_search_halfwidth": _parse_halfwidth,
        "ncc_context_margin": _parse_float,
        "render_noise_sigma": _parse_float,
    },
    "controller": {
        "kind": _parse_controller_kind,
        "pid_kp_u": _parse_float,
        "pid_ki_u": _parse_float,
        "pid_kd_u": _parse_float,
        "pid_kp_psi": _parse_float,
        "pid_ki_psi": _parse_float,
        "pid_kd_psi": _parse_float,
        "pid_integral_limit": _parse_float,
        "pid_derivative_filter_tau": _parse_float,
        "smc_lambda_u": _parse_float,
        "smc_eta_u": _parse_float,
        "smc_lambda_psi": _parse_float,
        "smc_eta_psi": _parse_float,
        "smc_phi": _parse_float,
        "smc_ref_filter_tau": _parse_float,
        "lqr_q": lambda s: _parse_floats(s, 3),
        "lqr_r": lambda s: _parse_floats(s, 2),
    },
    "cost": {
        "q_pixel": lambda s: _parse_floats(s, 2),
        "q_distance": _parse_float,
        "r_effort": lambda s: _parse_floats(s, 2),
    },
}


def parse_scenario(text: str, default_name: str = "scenario") -> sim.Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower  # type: ignore[assignment]
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario file: {exc}") from None

    values: dict[str, dict[str, object]] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            parser = _SCHEMA[section][key]
            try:
                values[section][key] = parser(raw)  # type: ignore[operator]
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None

    def sec(name: str) -> dict[str, object]:
        return values.get(name, {})

    def pick(section: dict[str, object], mapping: dict[str, str]) -> dict[str, object]:
        return {dst: section[src] for src, dst in mapping.items() if src in section}

    try:
        return _build_scenario(sec, pick, default_name)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _build_scenario(sec, pick, default_name: str) -> sim.Scenario:
    run = sec("run")
    usv = sec("usv")
    params_kwargs = pick(
        usv,
        {
            "m": "m",
            "izz": "Izz",
            "l": "l",
            "u_max": "u_max",
            "udot_max": "udot_max",
            "rdot_max": "rdot_max",
            "thrust_min": "thrust_min",
            "thrust_max": "thrust_max",
            "u_abs_cap": "u_abs_cap",
            "r_abs_cap": "r_abs_cap",
        },
    )
    params = UsvParams(**params_kwargs)  # type: ignore[arg-type]
    initial = BodyState(
        pose=Pose2D(
            x=float(usv.get("x0", 0.0)),
            y=float(usv.get("y0", 0.0)),
            psi=float(usv.get("psi0", 0.0)),
        ),
        u=float(usv.get("u0", 0.0)),
        r=float(usv.get("r0", 0.0)),
    )

    cam_sec = sec("camera")
    camera = CameraIntrinsics(
        width=int(cam_sec.get("width", 640)),
        height=int(cam_sec.get("height", 480)),
        fx=float(cam_sec.get("fx", 500.0)),
    )

    sea_sec = dict(sec("sea"))
    wind = (float(sea_sec.pop("wind_x", 0.0)), float(sea_sec.pop("wind_y", 0.0)))
    sea = dynamics.SeaState(wind_velocity=wind, **sea_sec)  # type: ignore[arg-type]

    gcfg = guidance.GuidanceConfig(**sec("guidance"))  # type: ignore[arg-type]
    noise = sim.SensorNoise(**sec("sensors"))  # type: ignore[arg-type]

    tgt = sec("target")
    kind = tgt.get("kind", sim.TrajectoryKind.LINE)
    vertices = tgt.get("vertices")
    if kind is sim.TrajectoryKind.TRIANGLE and vertices is None:
        center = tgt.get("triangle_center", (40.0, 0.0))
        side = float(tgt.get("triangle_side", 20.0))
        vertices = sim.default_triangle(tuple(center), side)  # type: ignore[arg-type]
    target = sim.TrajectorySpec(
        kind=kind,  # type: ignore[arg-type]
        origin=Pose2D(
            x=float(tgt.get("x0", 0.0)),
            y=float(tgt.get("y0", 0.0)),
            psi=float(tgt.get("psi0", 0.0)),
        ),
        speed=float(tgt.get("speed", 1.0)),
        vertices=vertices,  # type: ignore[arg-type]
        extent=float(tgt.get("extent", 2.0)),
    )

    trk = sec("tracker")
    noise_kwargs = pick(
        trk,
        {
            "sigma_center_px": "sigma_center_px",
            "sigma_scale": "sigma_scale",
            "p_drop_base": "p_drop_base",
        },
    )
    tracker = sim.TrackerSpec(
        kind=trk.get("kind", sim.TrackerKind.EMULATOR),  # type: ignore[arg-type]
        noise=sensors.TrackerNoiseConfig(**noise_kwargs),  # type: ignore[arg-type]
        ncc_peak_threshold=float(trk.get("ncc_peak_threshold", 0.2)),
        ncc_search_halfwidth=trk.get("ncc_search_halfwidth"),  # type: ignore[arg-type]
        ncc_context_margin=float(trk.get("ncc_context_margin", 0.35)),
        render_noise_sigma=float(trk.get("render_noise_sigma", 0.02)),
    )

    ctl = sec("controller")
    pid_kwargs = {
        k.removeprefix("pid_"): v for k, v in ctl.items() if k.startswith("pid_")
    }
    smc_kwargs = {
        k.removeprefix("smc_"): v for k, v in ctl.items() if k.startswith("smc_")
    }
    lqr_kwargs = {}
    if "lqr_q" in ctl:
        lqr_kwargs["Q"] = np.diag(ctl["lqr_q"])  # type: ignore[arg-type]
    if "lqr_r" in ctl:
        lqr_kwargs["R"] = np.diag(ctl["lqr_r"])  # type: ignore[arg-type]
    controller = sim.ControllerSpec(
        kind=ctl.get("kind", sim.ControllerKind.LQR),  # type: ignore[arg-type]
        pid=control.PidGains(**pid_kwargs),  # type: ignore[arg-type]
        smc=control.SmcGains(**smc_kwargs),  # type: ignore[arg-type]
        lqr=control.LqrWeights(**lqr_kwargs),
    )

    cost_sec = sec("cost")
    cost_kwargs = {}
    if "q_pixel" in cost_sec:
        cost_kwargs["Q_pixel"] = np.diag(cost_sec["q_pixel"])  # type: ignore[arg-type]
    if "r_effort" in cost_sec:
        cost_kwargs["R_effort"] = np.diag(cost_sec["r_effort"])  # type: ignore[arg-type]
    if "q_distance" in cost_sec:
        cost_kwargs["Q_distance"] = float(cost_sec["q_distance"])  # type: ignore[arg-type]
    cost = metrics.CostWeights(**cost_kwargs)

    return sim.Scenario(
        name=str(run.get("name", default_name)),
        duration=float(run.get("duration", 30.0)),
        dt=float(run.get("dt", 0.02)),
        seed=int(run.get("seed", 0)),
        params=params,
        initial=initial,
        target=target,
        sea=sea,
        camera=camera,
        guidance_cfg=gcfg,
        tracker=tracker,
        controller=controller,
        cost=cost,
        sensor_noise=noise,
    )


def load_scenario(path) -> sim.Scenario:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_scenario(path.read_text(), default_name=path.stem)
