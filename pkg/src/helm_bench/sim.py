"""Scenario definitions, target trajectories, the closed-loop driver,
structured run logs and parameter sweeps."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import control, dynamics, guidance, metrics, sensors
from .core import (
    BodyState,
    BoundingBox,
    CameraIntrinsics,
    ConfigError,
    IntegrationError,
    Pose2D,
    UsvParams,
    wrap_angle,
)
from .seeding import stream


class TrajectoryKind(enum.Enum):
    LINE = "line"
    TRIANGLE = "triangle"
    STATIONARY = "stationary"


@dataclass(frozen=True)
class TrajectorySpec:
    """Target motion plus its physical extent (meters) for projection."""

    kind: TrajectoryKind = TrajectoryKind.LINE
    origin: Pose2D = field(default_factory=Pose2D)
    speed: float = 1.0  # m/s along the path
    vertices: tuple[tuple[float, float], ...] | None = None  # TRIANGLE only
    extent: float = 2.0  # m, target size seen by the camera

    def __post_init__(self) -> None:
        if self.speed < 0.0:
            raise ConfigError("target speed must be >= 0")
        if not self.extent > 0.0:
            raise ConfigError("target extent must be > 0")
        if self.kind is TrajectoryKind.TRIANGLE:
            if self.vertices is None or len(self.vertices) != 3:
                raise ConfigError("TRIANGLE needs exactly 3 vertices")
            for i in range(3):
                ax, ay = self.vertices[i]
                bx, by = self.vertices[(i + 1) % 3]
                if math.hypot(bx - ax, by - ay) <= 0.0:
                    raise ConfigError("triangle edges must have positive length")


def default_triangle(center: tuple[float, float] = (40.0, 0.0), side: float = 20.0):
    """Equilateral vertex set, first vertex straight above the centroid."""
    radius = side / math.sqrt(3.0)
    return tuple(
        (
            center[0] + radius * math.cos(math.pi / 2.0 + 2.0 * math.pi * k / 3.0),
            center[1] + radius * math.sin(math.pi / 2.0 + 2.0 * math.pi * k / 3.0),
        )
        for k in range(3)
    )


def target_pose(spec: TrajectorySpec, t: float) -> Pose2D:
    """Pose of the target at time t (>= 0); triangles loop at constant speed.

    Exactly at a vertex the heading already points along the next edge.
    """
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if spec.kind is TrajectoryKind.STATIONARY:
        return spec.origin
    if spec.kind is TrajectoryKind.LINE:
        return Pose2D(
            x=spec.origin.x + spec.speed * t * math.cos(spec.origin.psi),
            y=spec.origin.y + spec.speed * t * math.sin(spec.origin.psi),
            psi=spec.origin.psi,
        )
    assert spec.vertices is not None
    edges = []
    for i in range(3):
        ax, ay = spec.vertices[i]
        bx, by = spec.vertices[(i + 1) % 3]
        edges.append((ax, ay, bx - ax, by - ay, math.hypot(bx - ax, by - ay)))
    perimeter = sum(e[4] for e in edges)
    s = math.fmod(spec.speed * t, perimeter)
    for ax, ay, ex, ey, length in edges:
        if s < length:
            f = s / length
            return Pose2D(x=ax + f * ex, y=ay + f * ey, psi=math.atan2(ey, ex))
        s -= length
    # fmod rounding can land exactly on the perimeter: wrap to the first vertex.
    ax, ay, ex, ey, _ = edges[0]
    return Pose2D(x=ax, y=ay, psi=math.atan2(ey, ex))


class ControllerKind(enum.Enum):
    PID = "pid"
    SMC = "smc"
    LQR = "lqr"


@dataclass(frozen=True)
class ControllerSpec:
    kind: ControllerKind = ControllerKind.LQR
    pid: control.PidGains = field(default_factory=control.PidGains)
    smc: control.SmcGains = field(default_factory=control.SmcGains)
    lqr: control.LqrWeights = field(default_factory=control.LqrWeights)


class TrackerKind(enum.Enum):
    EMULATOR = "emulator"
    NCC = "ncc"


@dataclass(frozen=True)
class TrackerSpec:
    kind: TrackerKind = TrackerKind.EMULATOR
    noise: sensors.TrackerNoiseConfig = field(default_factory=sensors.TrackerNoiseConfig)
    ncc_peak_threshold: float = 0.2
    ncc_search_halfwidth: int | None = None
    ncc_context_margin: float = 0.35
    render_noise_sigma: float = 0.02


@dataclass(frozen=True)
class SensorNoise:
    """Measurement-channel sigmas and the camera frame stride."""

    lidar_sigma: float = 0.0  # m
    u_sigma: float = 0.0  # m/s
    psi_sigma: float = 0.0  # rad
    r_sigma: float = 0.0  # rad/s
    frame_stride: int = 1  # detections refresh every N control steps

    def __post_init__(self) -> None:
        if self.frame_stride < 1:
            raise ConfigError("frame_stride must be >= 1")
        if min(self.lidar_sigma, self.u_sigma, self.psi_sigma, self.r_sigma) < 0.0:
            raise ConfigError("sensor sigmas must be >= 0")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    duration: float = 30.0  # s
    dt: float = 0.02  # s
    seed: int = 0
    params: UsvParams = field(default_factory=UsvParams)
    initial: BodyState = field(default_factory=BodyState)
    target: TrajectorySpec = field(default_factory=TrajectorySpec)
    sea: dynamics.SeaState = field(default_factory=dynamics.SeaState)
    camera: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    guidance_cfg: guidance.GuidanceConfig = field(default_factory=guidance.GuidanceConfig)
    tracker: TrackerSpec = field(default_factory=TrackerSpec)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    cost: metrics.CostWeights = field(default_factory=metrics.CostWeights)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)

    def __post_init__(self) -> None:
        if not self.duration > 0.0:
            raise ConfigError("duration must be > 0")
        if not 0.0 < self.dt <= 0.1:
            raise ConfigError("dt must lie in (0, 0.1]")
        if self.duration / self.dt > 1e7:
            raise ConfigError("scenario too long: duration/dt exceeds 1e7 steps")


_LOG_FLOAT_COLUMNS = (
    "t",
    "x",
    "y",
    "psi",
    "u",
    "r",
    "target_x",
    "target_y",
    "target_psi",
    "det_x",
    "det_y",
    "det_w",
    "det_h",
    "lidar",
    "u_ref",
    "e_psi",
    "e_d",
    "e_y",
    "T1",
    "T2",
    "TL",
    "TR",
    "gt_x",
    "gt_y",
    "gt_w",
    "gt_h",
)

LOG_COLUMNS = (
    "t",
    "x",
    "y",
    "psi",
    "u",
    "r",
    "target_x",
    "target_y",
    "target_psi",
    "det_valid",
    "det_x",
    "det_y",
    "det_w",
    "det_h",
    "lidar",
    "mode",
    "u_ref",
    "e_psi",
    "e_d",
    "e_y",
    "T1",
    "T2",
    "TL",
    "TR",
    "gt_x",
    "gt_y",
    "gt_w",
    "gt_h",
)


@dataclass
class RunLog:
    """Column-oriented run record; exact CSV layout in docs/logformat.md."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    r: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray
    target_psi: np.ndarray
    det_valid: np.ndarray  # 0/1
    det_x: np.ndarray
    det_y: np.ndarray
    det_w: np.ndarray
    det_h: np.ndarray
    lidar: np.ndarray  # nan when out of range
    mode: list[str]
    u_ref: np.ndarray
    e_psi: np.ndarray
    e_d: np.ndarray
    e_y: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    TL: np.ndarray
    TR: np.ndarray
    gt_x: np.ndarray
    gt_y: np.ndarray
    gt_w: np.ndarray
    gt_h: np.ndarray
    error: str | None = None

    def __len__(self) -> int:
        return len(self.t)

    def _boxes(self, prefix: str) -> list[BoundingBox | None]:
        xs = getattr(self, prefix + "_x")
        ys = getattr(self, prefix + "_y")
        ws = getattr(self, prefix + "_w")
        hs = getattr(self, prefix + "_h")
        out: list[BoundingBox | None] = []
        for x, y, w, h in zip(xs, ys, ws, hs):
            if math.isnan(x):
                out.append(None)
            else:
                out.append(BoundingBox(x, y, w, h))
        return out

    def gt_boxes(self) -> list[BoundingBox | None]:
        return self._boxes("gt")

    def pred_boxes(self) -> list[BoundingBox | None]:
        return self._boxes("det")

    def to_csv(self) -> str:
        """Deterministic CSV: shortest round-trip float formatting."""
        lines = [",".join(LOG_COLUMNS)]
        if self.error is not None:
            lines.insert(0, f"# error: {self.error}")
        n = len(self.t)
        cols = {name: getattr(self, name) for name in LOG_COLUMNS}
        for i in range(n):
            cells = []
            for name in LOG_COLUMNS:
                if name == "mode":
                    cells.append(self.mode[i])
                elif name == "det_valid":
                    cells.append(str(int(cols[name][i])))
                else:
                    cells.append(repr(float(cols[name][i])))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "RunLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        error = None
        if lines and lines[0].startswith("# error:"):
            error = lines[0][len("# error:") :].strip()
            lines = lines[1:]
        header = lines[0].split(",")
        if tuple(header) != LOG_COLUMNS:
            raise ConfigError("unrecognized run-log header")
        raw: dict[str, list] = {name: [] for name in LOG_COLUMNS}
        for ln in lines[1:]:
            for name, cell in zip(LOG_COLUMNS, ln.split(",")):
                raw[name].append(cell)
        data = {}
        for name in LOG_COLUMNS:
            if name == "mode":
                data[name] = raw[name]
            elif name == "det_valid":
                data[name] = np.array([int(v) for v in raw[name]])
            else:
                data[name] = np.array([float(v) for v in raw[name]])
        return cls(**data, error=error)


class _Controller:
    """Uniform stepping facade over the three control laws."""

    def __init__(self, spec: ControllerSpec, params: UsvParams) -> None:
        self.spec = spec
        self.params = params
        self.state = control.ControllerState()
        self.lqr = control.lqr_gain(params, spec.lqr) if spec.kind is ControllerKind.LQR else None

    def reset(self) -> None:
        self.state.reset()

    def step(
        self, meas: sensors.StateMeasurement, cmd: guidance.GuidanceCommand, t: float, dt: float
    ) -> dynamics.GeneralizedThrust:
        psi_ref = wrap_angle(meas.psi + cmd.e_psi)
        if self.spec.kind is ControllerKind.PID:
            out = control.pid_step(self.state, cmd.u_ref - meas.u, cmd.e_psi, dt, self.spec.pid)
        elif self.spec.kind is ControllerKind.SMC:
            refs = control.smc_refs(self.state, cmd.u_ref, psi_ref, meas.u, dt, self.spec.smc)
            out = control.smc_step(self.state, refs, meas, self.spec.smc, self.params)
        else:
            assert self.lqr is not None
            out = control.lqr_step(self.lqr, meas, (cmd.u_ref, psi_ref))
        self.state.prev_t = t
        return out


def run_scenario(sc: Scenario) -> RunLog:
    """Drive the closed loop and return the structured log.

    One record per control step at t = k*dt for k = 0..floor(duration/dt);
    the state advance after the last record is not logged. Identical
    (scenario, seed) pairs produce bit-identical logs. If the plant leaves
    the finite domain the log is truncated and carries an error note.
    """
    n_steps = int(math.floor(sc.duration / sc.dt + 1e-9))
    params = sc.params
    cam = sc.camera

    tracker_rng = stream(sc.seed, "tracker")
    lidar_rng = stream(sc.seed, "lidar")
    imu_rng = stream(sc.seed, "imu")
    render_rng = stream(sc.seed, "render")

    gstate = guidance.GuidanceState()
    ctrl = _Controller(sc.controller, params)
    ncc = (
        sensors.NccTracker(
            peak_threshold=sc.tracker.ncc_peak_threshold,
            search_halfwidth=sc.tracker.ncc_search_halfwidth,
            context_margin=sc.tracker.ncc_context_margin,
        )
        if sc.tracker.kind is TrackerKind.NCC
        else None
    )

    cols: dict[str, list] = {name: [] for name in LOG_COLUMNS}
    state = sc.initial
    det = sensors.Detection(valid=False)
    e_y = 0.0
    error: str | None = None

    for k in range(n_steps + 1):
        t = k * sc.dt
        target = target_pose(sc.target, t)
        gt_box = sensors.project_target(state.pose, target, sc.target.extent, cam)

        if k % sc.sensor_noise.frame_stride == 0:
            if sc.tracker.kind is TrackerKind.EMULATOR:
                det = sensors.emulate_tracker(gt_box, sc.sea.visibility, sc.tracker.noise, tracker_rng)
            else:
                assert ncc is not None
                frame = sensors.render_frame(
                    state.pose,
                    target,
                    sc.target.extent,
                    cam,
                    sc.sea.visibility,
                    render_rng,
                    noise_sigma=sc.tracker.render_noise_sigma,
                )
                if not ncc.initialized:
                    if gt_box is not None and gt_box.w >= 1.0 and gt_box.h >= 1.0:
                        ncc.initialize(frame, gt_box)
                        det = sensors.Detection(valid=True, box=gt_box, score=1.0)
                    else:
                        det = sensors.Detection(valid=False)
                else:
                    det = ncc.track(frame)

        rng_range = sensors.lidar_range(
            state.pose, target, sc.guidance_cfg.lidar_max_range, sc.sensor_noise.lidar_sigma, lidar_rng
        )
        meas = sensors.measure_state(
            state, sc.sensor_noise.u_sigma, sc.sensor_noise.psi_sigma, sc.sensor_noise.r_sigma, imu_rng
        )
        cmd = guidance.guidance_step(det, rng_range, sc.guidance_cfg, cam, gstate)
        if det.valid and det.box is not None:
            e_y = (cam.cy - det.box.center()[1]) / cam.fx

        gen = ctrl.step(meas, cmd, t, sc.dt)
        pair = dynamics.saturate(dynamics.mix(gen), params)
        eff = dynamics.unmix(pair)

        cols["t"].append(t)
        cols["x"].append(state.pose.x)
        cols["y"].append(state.pose.y)
        cols["psi"].append(state.pose.psi)
        cols["u"].append(state.u)
        cols["r"].append(state.r)
        cols["target_x"].append(target.x)
        cols["target_y"].append(target.y)
        cols["target_psi"].append(target.psi)
        cols["det_valid"].append(1 if det.valid else 0)
        for name, v in zip(
            ("det_x", "det_y", "det_w", "det_h"),
            (det.box.x, det.box.y, det.box.w, det.box.h) if det.valid and det.box else (math.nan,) * 4,
        ):
            cols[name].append(v)
        cols["lidar"].append(math.nan if rng_range is None else rng_range)
        cols["mode"].append(cmd.mode.value)
        cols["u_ref"].append(cmd.u_ref)
        cols["e_psi"].append(cmd.e_psi)
        cols["e_d"].append(cmd.e_d)
        cols["e_y"].append(e_y)
        cols["T1"].append(eff.T1)
        cols["T2"].append(eff.T2)
        cols["TL"].append(pair.left)
        cols["TR"].append(pair.right)
        for name, v in zip(
            ("gt_x", "gt_y", "gt_w", "gt_h"),
            (gt_box.x, gt_box.y, gt_box.w, gt_box.h) if gt_box is not None else (math.nan,) * 4,
        ):
            cols[name].append(v)

        if k < n_steps:
            try:
                state = dynamics.step(state, pair, sc.sea, t, sc.dt, params)
            except IntegrationError as exc:
                error = str(exc)
                break

    data = {}
    for name in LOG_COLUMNS:
        if name == "mode":
            data[name] = cols[name]
        elif name == "det_valid":
            data[name] = np.array(cols[name], dtype=int)
        else:
            data[name] = np.array(cols[name], dtype=float)
    return RunLog(**data, error=error)


# --- run summaries and sweeps -------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    """Step-response style figures of merit for one closed-loop run."""

    settling_time: float  # s until |e_psi| stays within 0.05 rad; inf if never
    overshoot_pct: float  # % of the initial |e_psi| crossed past zero
    rms_e_psi_ss: float  # rad, RMS over the last quarter of the run
    tv_left: float  # N, total variation of the left thruster
    tv_right: float
    tv_total: float
    cost: float  # tracking cost J


SETTLE_BAND = 0.05  # rad


def summarize(log: RunLog, w: metrics.CostWeights) -> RunSummary:
    e = np.asarray(log.e_psi, dtype=float)
    t = np.asarray(log.t, dtype=float)

    inside = np.abs(e) <= SETTLE_BAND
    settling = math.inf
    # last index from which the band holds through the end
    holds_from = len(e)
    for i in range(len(e) - 1, -1, -1):
        if inside[i]:
            holds_from = i
        else:
            break
    if holds_from < len(e):
        settling = float(t[holds_from])

    e0 = e[0]
    if e0 == 0.0:
        overshoot = 0.0
    else:
        past_zero = np.maximum(-np.sign(e0) * e, 0.0)
        overshoot = float(100.0 * past_zero.max() / abs(e0))

    tail = e[3 * len(e) // 4 :]
    rms_ss = float(np.sqrt(np.mean(tail**2)))

    tv_left = float(np.abs(np.diff(log.TL)).sum())
    tv_right = float(np.abs(np.diff(log.TR)).sum())
    return RunSummary(
        settling_time=settling,
        overshoot_pct=overshoot,
        rms_e_psi_ss=rms_ss,
        tv_left=tv_left,
        tv_right=tv_right,
        tv_total=tv_left + tv_right,
        cost=metrics.tracking_cost(log, w),
    )


def derived_seed(seed: int, label: str) -> int:
    """Stable sub-seed for a named variant of a base seed."""
    return int(stream(seed, label).integers(0, 2**62))


def _set_by_path(sc: Scenario, path: str, value):
    """Replace a nested scenario field addressed by a dotted path."""
    parts = path.split(".")
    chain = [sc]
    for p in parts[:-1]:
        if not dataclasses.is_dataclass(chain[-1]) or not hasattr(chain[-1], p):
            raise ConfigError(f"unknown sweep path: {path}")
        chain.append(getattr(chain[-1], p))
    if not hasattr(chain[-1], parts[-1]):
        raise ConfigError(f"unknown sweep path: {path}")
    current = getattr(chain[-1], parts[-1])
    rebuilt = _coerce_like(current, value, path)
    for obj, name in zip(chain[::-1], parts[::-1]):
        rebuilt = dataclasses.replace(obj, **{name: rebuilt})
    return rebuilt


def _coerce_like(current, value, path: str):
    """Parse a sweep value (usually a string) to the type of the current field."""
    if isinstance(value, str):
        if isinstance(current, enum.Enum):
            try:
                return type(current)(value.lower())
            except ValueError:
                raise ConfigError(f"{path}: unknown value {value!r}") from None
        if isinstance(current, bool):
            return value.lower() in ("1", "true", "yes")
        if isinstance(current, int) and not isinstance(current, bool):
            return int(value)
        if isinstance(current, float):
            return float(value)
        return value
    if isinstance(current, enum.Enum) and not isinstance(value, enum.Enum):
        return type(current)(value)
    if isinstance(current, float):
        return float(value)
    return value


def sweep_variant(base: Scenario, axis: str, value, index: int) -> Scenario:
    """Materialize one sweep point with its derived seed and name."""
    sc = _set_by_path(base, axis, value)
    sc = dataclasses.replace(
        sc,
        seed=derived_seed(base.seed, f"sweep:{index}"),
        name=f"{base.name}[{axis}={_format_value(value)}]",
    )
    return sc


def _format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    return str(value)


SWEEP_COLUMNS = (
    "axis",
    "value",
    "settling_time_s",
    "overshoot_pct",
    "rms_e_psi_ss",
    "tv_left",
    "tv_right",
    "tv_total",
    "cost_J",
)


def sweep(base: Scenario, axis: str, values: list, max_workers: int = 1) -> list[tuple[object, RunSummary]]:
    """Run one variant per value (independent derived seeds), in input order."""
    from concurrent.futures import ThreadPoolExecutor

    variants = [sweep_variant(base, axis, v, i) for i, v in enumerate(values)]

    def one(sc: Scenario) -> RunSummary:
        return summarize(run_scenario(sc), sc.cost)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            summaries = list(pool.map(one, variants))
    else:
        summaries = [one(sc) for sc in variants]
    return list(zip(values, summaries))


def run_sweep(base: Scenario, axis: str, values: list, max_workers: int = 1) -> str:
    """Run every variant and render the summary CSV (rows in input order)."""
    lines = [",".join(SWEEP_COLUMNS)]
    for value, summary in sweep(base, axis, values, max_workers=max_workers):
        lines.append(
            ",".join(
                [
                    axis,
                    _format_value(value),
                    repr(float(summary.settling_time)),
                    repr(float(summary.overshoot_pct)),
                    repr(float(summary.rms_e_psi_ss)),
                    repr(float(summary.tv_left)),
                    repr(float(summary.tv_right)),
                    repr(float(summary.tv_total)),
                    repr(float(summary.cost)),
                ]
            )
        )
    return "\n".join(lines) + "\n"
