"""Sensing chain: camera projection, tracker emulation, frame rendering,
a template NCC tracker, ranging and state measurement.

Every stochastic operation draws from a caller-supplied numpy Generator so
identical seeds give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BodyState, BoundingBox, CameraIntrinsics, ConfigError, Pose2D, wrap_angle

_MIN_PROJECT_RANGE = 0.1  # m, closer targets are behind/inside the hull


@dataclass(frozen=True)
class Detection:
    """Single tracker output; box is meaningless when valid is False."""

    valid: bool
    box: BoundingBox | None = None
    score: float = 0.0


@dataclass(frozen=True)
class TrackerNoiseConfig:
    """Degradation knobs for the ground-truth tracker emulator."""

    sigma_center_px: float = 2.0  # px at visibility 1
    sigma_scale: float = 0.05  # relative size jitter
    p_drop_base: float = 0.05  # dropout probability at visibility 1

    def __post_init__(self) -> None:
        if self.sigma_center_px < 0.0 or self.sigma_scale < 0.0:
            raise ConfigError("noise sigmas must be >= 0")
        if not 0.0 <= self.p_drop_base < 1.0:
            raise ConfigError("p_drop_base must lie in [0, 1)")


@dataclass(frozen=True)
class StateMeasurement:
    """Noisy onboard estimate of the own-ship state."""

    u: float  # m/s
    psi: float  # rad, wrapped
    r: float  # rad/s


def project_target(
    usv: Pose2D, target: Pose2D, extent: float, cam: CameraIntrinsics
) -> BoundingBox | None:
    """Pinhole image of a target of the given world extent, or None if out of view.

    The box is clipped to the image; a target to port always lands left of
    the principal point.
    """
    if not extent > 0.0:
        raise ConfigError("target extent must be > 0")
    dx = target.x - usv.x
    dy = target.y - usv.y
    d = math.hypot(dx, dy)
    beta = wrap_angle(math.atan2(dy, dx) - usv.psi)
    if abs(beta) >= cam.hfov / 2.0 or d <= _MIN_PROJECT_RANGE:
        return None
    center_x = cam.cx - cam.fx * math.tan(beta)
    center_y = cam.cy
    size = cam.fx * extent / d
    left = max(center_x - size / 2.0, 0.0)
    right = min(center_x + size / 2.0, float(cam.width))
    top = max(center_y - size / 2.0, 0.0)
    bottom = min(center_y + size / 2.0, float(cam.height))
    return BoundingBox(x=left, y=top, w=right - left, h=bottom - top)


def emulate_tracker(
    truth: BoundingBox | None,
    visibility: float,
    noise: TrackerNoiseConfig,
    rng: np.random.Generator,
) -> Detection:
    """Degrade a ground-truth box the way a real tracker would.

    Draw order per call: one uniform for dropout, then (if kept) two normals
    for the center and one for the size. Dropout probability is
    1 - (1 - p_drop_base) * visibility; center jitter scales with
    1 / visibility.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ConfigError("visibility must lie in [0, 1]")
    if truth is None:
        return Detection(valid=False)
    p_drop = 1.0 - (1.0 - noise.p_drop_base) * visibility
    if rng.uniform() < p_drop:
        return Detection(valid=False)
    cx, cy = truth.center()
    sigma_c = noise.sigma_center_px / visibility
    cx += rng.normal(0.0, sigma_c)
    cy += rng.normal(0.0, sigma_c)
    scale = max(1.0 + rng.normal(0.0, noise.sigma_scale), 0.0)
    w = truth.w * scale
    h = truth.h * scale
    return Detection(valid=True, box=BoundingBox(cx - w / 2.0, cy - h / 2.0, w, h), score=1.0)


def render_frame(
    usv: Pose2D,
    target: Pose2D,
    extent: float,
    cam: CameraIntrinsics,
    visibility: float,
    rng: np.random.Generator,
    noise_sigma: float = 0.02,
) -> np.ndarray:
    """Grayscale frame: sea at 0.3, target rectangle at 0.8, haze toward 0.6.

    Haze blends the scene with weight (1 - visibility); sensor noise of the
    given sigma is added after the blend, then intensities clip to [0, 1].
    Returns a (height, width) float array.
    """
    if not 0.0 <= visibility <= 1.0:
        raise ConfigError("visibility must lie in [0, 1]")
    frame = np.full((cam.height, cam.width), 0.3)
    box = project_target(usv, target, extent, cam)
    if box is not None and box.w > 0.0 and box.h > 0.0:
        x0 = int(math.floor(box.x))
        y0 = int(math.floor(box.y))
        x1 = int(math.ceil(box.x + box.w))
        y1 = int(math.ceil(box.y + box.h))
        frame[max(y0, 0) : min(y1, cam.height), max(x0, 0) : min(x1, cam.width)] = 0.8
    frame = visibility * frame + (1.0 - visibility) * 0.6
    if noise_sigma > 0.0:
        frame = frame + rng.normal(0.0, noise_sigma, size=frame.shape)
    return np.clip(frame, 0.0, 1.0)


def zncc_scores(window: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Zero-normalized cross-correlation of template over every placement.

    Returns an array of scores indexed by the template's top-left corner
    within the window; placements with a flat patch score 0. Raises
    ValueError on a zero-variance template.
    """
    th, tw = template.shape
    t0 = template - template.mean()
    t_energy = float(np.sum(t0 * t0))
    if t_energy <= 0.0:
        raise ValueError("degenerate template with zero variance")
    patches = np.lib.stride_tricks.sliding_window_view(window, (th, tw))
    n = th * tw
    cross = np.einsum("ijkl,kl->ij", patches, t0)
    sums = np.einsum("ijkl->ij", patches)
    sq_sums = np.einsum("ijkl,ijkl->ij", patches, patches)
    w_energy = sq_sums - sums * sums / n
    w_energy = np.maximum(w_energy, 0.0)
    denom = np.sqrt(w_energy * t_energy)
    scores = np.zeros_like(cross)
    np.divide(cross, denom, out=scores, where=denom > 0.0)
    return scores


def ncc_track(
    frame: np.ndarray,
    template: np.ndarray,
    search_window: tuple[tuple[float, float], float],
    peak_threshold: float = 0.2,
) -> Detection:
    """Best ZNCC placement of template inside frame near a previous center.

    search_window is ((cx, cy), halfwidth): the template slides over every
    placement whose center stays within ±halfwidth pixels of (cx, cy), and
    the first row-major maximum wins. The detection box has the template's
    size; a peak below peak_threshold (or a window too small to search)
    comes back with valid=False.
    """
    (cx, cy), halfwidth = search_window
    th, tw = template.shape
    fh, fw = frame.shape
    if th > fh or tw > fw:
        return Detection(valid=False)
    # Top-left template placement that would recenter on the previous hit.
    base_x = cx - tw / 2.0
    base_y = cy - th / 2.0
    x0 = max(int(math.floor(base_x - halfwidth)), 0)
    y0 = max(int(math.floor(base_y - halfwidth)), 0)
    x1 = min(int(math.ceil(base_x + halfwidth)) + tw, fw)
    y1 = min(int(math.ceil(base_y + halfwidth)) + th, fh)
    if x1 - x0 < tw or y1 - y0 < th:
        return Detection(valid=False)
    window = frame[y0:y1, x0:x1]
    try:
        scores = zncc_scores(window, template)
    except ValueError:
        return Detection(valid=False)
    flat = int(np.argmax(scores))  # first maximum in row-major order
    py, px = divmod(flat, scores.shape[1])
    peak = float(scores[py, px])
    box = BoundingBox(float(x0 + px), float(y0 + py), float(tw), float(th))
    if peak < peak_threshold:
        return Detection(valid=False, score=peak)
    return Detection(valid=True, box=box, score=peak)


class NccTracker:
    """Template tracker: frame-0 crop matched by ZNCC inside a search window.

    The template is the ground-truth box grown by a context margin so the
    object boundary carries structure; reported boxes keep the original box
    size centered on the match. A peak below the threshold flags the frame
    as lost and the search stays around the last confident location.
    """

    def __init__(
        self,
        peak_threshold: float = 0.2,
        search_halfwidth: int | None = None,
        context_margin: float = 0.35,
    ) -> None:
        if not 0.0 <= peak_threshold <= 1.0:
            raise ConfigError("peak_threshold must lie in [0, 1]")
        if context_margin < 0.0:
            raise ConfigError("context_margin must be >= 0")
        self.peak_threshold = peak_threshold
        self.search_halfwidth = search_halfwidth
        self.context_margin = context_margin
        self.reset()

    def reset(self) -> None:
        self._template: np.ndarray | None = None
        self._box_size: tuple[float, float] | None = None
        self._center: tuple[float, float] | None = None

    def initialize(self, frame: np.ndarray, truth: BoundingBox) -> None:
        """Crop the template around the frame-0 ground-truth box."""
        h, w = frame.shape
        mx = self.context_margin * truth.w
        my = self.context_margin * truth.h
        x0 = int(math.floor(max(truth.x - mx, 0.0)))
        y0 = int(math.floor(max(truth.y - my, 0.0)))
        x1 = int(math.ceil(min(truth.x + truth.w + mx, w)))
        y1 = int(math.ceil(min(truth.y + truth.h + my, h)))
        if x1 - x0 < 1 or y1 - y0 < 1:
            raise ConfigError("ground-truth box lies outside the frame")
        self._template = frame[y0:y1, x0:x1].copy()
        self._box_size = (truth.w, truth.h)
        self._center = truth.center()

    @property
    def initialized(self) -> bool:
        return self._template is not None

    def track(self, frame: np.ndarray) -> Detection:
        """Match the template near the previous location; lost below threshold."""
        if self._template is None or self._center is None or self._box_size is None:
            raise RuntimeError("tracker used before initialize()")
        halfwidth = (
            self.search_halfwidth
            if self.search_halfwidth is not None
            else self._template.shape[1]
        )
        det = ncc_track(frame, self._template, (self._center, halfwidth), self.peak_threshold)
        if not det.valid or det.box is None:
            return Detection(valid=False, score=det.score)
        match_cx, match_cy = det.box.center()
        self._center = (match_cx, match_cy)
        bw, bh = self._box_size
        box = BoundingBox(match_cx - bw / 2.0, match_cy - bh / 2.0, bw, bh)
        return Detection(valid=True, box=box, score=det.score)


def lidar_range(
    usv: Pose2D,
    target: Pose2D,
    max_range: float,
    sigma: float,
    rng: np.random.Generator,
) -> float | None:
    """Range to the target with Gaussian noise, None beyond max_range."""
    if not max_range > 0.0 or sigma < 0.0:
        raise ConfigError("max_range must be > 0 and sigma >= 0")
    d = math.hypot(target.x - usv.x, target.y - usv.y)
    if d > max_range:
        return None
    return max(d + rng.normal(0.0, sigma), 0.0)


def measure_state(
    state: BodyState,
    sigma_u: float,
    sigma_psi: float,
    sigma_r: float,
    rng: np.random.Generator,
) -> StateMeasurement:
    """Additive-Gaussian state measurement; heading re-wrapped after noise.

    Three normals are drawn per call regardless of the sigmas, so the
    stream stays aligned across noise configurations.
    """
    if sigma_u < 0.0 or sigma_psi < 0.0 or sigma_r < 0.0:
        raise ConfigError("measurement sigmas must be >= 0")
    u = state.u + rng.normal(0.0, sigma_u)
    psi = state.pose.psi + rng.normal(0.0, sigma_psi)
    r = state.r + rng.normal(0.0, sigma_r)
    return StateMeasurement(u=u, psi=wrap_angle(psi), r=r)
