"""Offline benchmark metrics for box tracking plus the closed-loop cost.

Conventions: success uses IoU >= threshold over 101 thresholds k/100; AUC is
the mean of that curve (percent). Precision counts center errors <= 20 px;
normalized precision scales the center error by the ground-truth box size
with threshold 0.2. Missing predictions score IoU 0 and center error inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BoundingBox, ConfigError, EvaluationError

SUCCESS_THRESHOLDS = np.array([k / 100.0 for k in range(101)])
PRECISION_THRESHOLDS = np.array([float(k) for k in range(51)])  # px
NORM_PRECISION_THRESHOLDS = np.array([k / 100.0 for k in range(51)])

REPORT_COLUMNS = ("sequence", "auc", "op50", "op75", "precision", "norm_precision", "n_frames")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes; 0 when the union is empty."""
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def success_curve(ious: np.ndarray) -> np.ndarray:
    """Percent of frames with IoU >= tau for the 101 standard thresholds."""
    ious = np.asarray(ious, dtype=float)
    if ious.size == 0:
        raise EvaluationError("cannot evaluate an empty sequence")
    return np.array([100.0 * np.mean(ious >= tau) for tau in SUCCESS_THRESHOLDS])


def success_auc(ious: np.ndarray) -> tuple[np.ndarray, float]:
    """Success curve plus its area: the mean over the 101 thresholds, in percent."""
    curve = success_curve(ious)
    return curve, float(np.mean(curve))


def op_at(ious: np.ndarray, tau: float) -> float:
    """Overlap precision: percent of frames with IoU >= tau."""
    ious = np.asarray(ious, dtype=float)
    if ious.size == 0:
        raise EvaluationError("cannot evaluate an empty sequence")
    return float(100.0 * np.mean(ious >= tau))


def precision_at(center_errors: np.ndarray, tau_px: float = 20.0) -> float:
    """Percent of frames with center error <= tau_px (inf never counts)."""
    errors = np.asarray(center_errors, dtype=float)
    if errors.size == 0:
        raise EvaluationError("cannot evaluate an empty sequence")
    return float(100.0 * np.mean(errors <= tau_px))


def norm_center_errors(
    gt: list[BoundingBox | None], pred: list[BoundingBox | None]
) -> np.ndarray:
    """Center errors scaled per-axis by the ground-truth box size.

    Missing predictions give inf. A ground-truth box with zero width or
    height cannot normalize and raises EvaluationError.
    """
    out = np.empty(len(gt))
    for k, (g, p) in enumerate(zip(gt, pred)):
        if g is None:
            raise EvaluationError(f"frame {k}: missing ground truth cannot be normalized")
        if g.w <= 0.0 or g.h <= 0.0:
            raise EvaluationError(f"frame {k}: degenerate ground-truth box {g}")
        if p is None:
            out[k] = math.inf
            continue
        gcx, gcy = g.center()
        pcx, pcy = p.center()
        out[k] = math.hypot((pcx - gcx) / g.w, (pcy - gcy) / g.h)
    return out


def norm_precision_at(
    gt: list[BoundingBox | None],
    pred: list[BoundingBox | None],
    tau: float = 0.2,
) -> tuple[float, np.ndarray]:
    """Normalized precision at tau plus its 51-point curve over [0, 0.5]."""
    errors = norm_center_errors(gt, pred)
    if errors.size == 0:
        raise EvaluationError("cannot evaluate an empty sequence")
    curve = np.array([100.0 * np.mean(errors <= t) for t in NORM_PRECISION_THRESHOLDS])
    return float(100.0 * np.mean(errors <= tau)), curve


@dataclass(frozen=True)
class CostWeights:
    """Weights of the closed-loop tracking cost integrand."""

    Q_pixel: np.ndarray = field(default_factory=lambda: np.eye(2))  # on (e_psi, e_y)
    Q_distance: float = 0.04  # on e_d^2
    R_effort: np.ndarray = field(default_factory=lambda: 1e-4 * np.eye(2))  # on (T1, T2)

    def __post_init__(self) -> None:
        Qp = np.asarray(self.Q_pixel, dtype=float)
        Re = np.asarray(self.R_effort, dtype=float)
        object.__setattr__(self, "Q_pixel", Qp)
        object.__setattr__(self, "R_effort", Re)
        if Qp.shape != (2, 2) or Re.shape != (2, 2):
            raise ConfigError("Q_pixel and R_effort must be 2x2")
        if not np.allclose(Qp, Qp.T) or np.linalg.eigvalsh(Qp).min() < -1e-12:
            raise ConfigError("Q_pixel must be symmetric PSD")
        if not np.allclose(Re, Re.T) or np.linalg.eigvalsh(Re).min() <= 0.0:
            raise ConfigError("R_effort must be symmetric PD")
        if self.Q_distance < 0.0:
            raise ConfigError("Q_distance must be >= 0")


def tracking_cost(log, w: CostWeights) -> float:
    """Trapezoidal integral of the weighted error/effort quadratic over a run.

    `log` must expose uniformly sampled arrays t, e_psi, e_y, e_d, T1, T2
    (a RunLog does). Non-uniform timestamps raise EvaluationError.
    """
    t = np.asarray(log.t, dtype=float)
    if t.size < 2:
        raise EvaluationError("cost needs at least two samples")
    dts = np.diff(t)
    dt = dts[0]
    if not dt > 0.0 or np.any(np.abs(dts - dt) > 1e-9 * max(1.0, abs(dt))):
        raise EvaluationError("cost needs uniformly increasing timestamps")

    e_body = np.stack([np.asarray(log.e_psi, float), np.asarray(log.e_y, float)])
    effort = np.stack([np.asarray(log.T1, float), np.asarray(log.T2, float)])
    integrand = (
        np.einsum("it,ij,jt->t", e_body, w.Q_pixel, e_body)
        + w.Q_distance * np.asarray(log.e_d, float) ** 2
        + np.einsum("it,ij,jt->t", effort, w.R_effort, effort)
    )
    return float(dt * (integrand[0] / 2.0 + integrand[1:-1].sum() + integrand[-1] / 2.0))


@dataclass
class MetricReport:
    """Scalar metrics plus the curves behind them for one evaluation unit."""

    auc: float
    op50: float
    op75: float
    precision: float
    norm_precision: float
    n_frames: int
    success_curve: np.ndarray
    precision_curve: np.ndarray
    norm_precision_curve: np.ndarray


def evaluate_boxes(
    gt: list[BoundingBox | None], pred: list[BoundingBox | None]
) -> MetricReport:
    """Score one sequence of predictions against ground truth.

    Lengths must match. Frames with missing ground truth (target out of
    view) are excluded from scoring; missing predictions on scored frames
    count as IoU 0 / center error inf.
    """
    if len(gt) != len(pred):
        raise EvaluationError(f"frame count mismatch: gt {len(gt)} vs pred {len(pred)}")
    pairs = [(g, p) for g, p in zip(gt, pred) if g is not None]
    if not pairs:
        raise EvaluationError("no frames with ground truth to evaluate")
    kept_gt = [g for g, _ in pairs]
    kept_pred = [p for _, p in pairs]

    ious = np.array([0.0 if p is None else iou(g, p) for g, p in pairs])
    center_err = np.empty(len(pairs))
    for k, (g, p) in enumerate(pairs):
        if p is None:
            center_err[k] = math.inf
        else:
            gcx, gcy = g.center()
            pcx, pcy = p.center()
            center_err[k] = math.hypot(pcx - gcx, pcy - gcy)

    s_curve, auc = success_auc(ious)
    p_curve = np.array([100.0 * np.mean(center_err <= t) for t in PRECISION_THRESHOLDS])
    norm_prec, np_curve = norm_precision_at(kept_gt, kept_pred)
    return MetricReport(
        auc=auc,
        op50=op_at(ious, 0.5),
        op75=op_at(ious, 0.75),
        precision=precision_at(center_err),
        norm_precision=norm_prec,
        n_frames=len(pairs),
        success_curve=s_curve,
        precision_curve=p_curve,
        norm_precision_curve=np_curve,
    )


def aggregate_reports(reports: list[MetricReport]) -> MetricReport:
    """Unweighted mean of per-sequence metrics (curves included)."""
    if not reports:
        raise EvaluationError("nothing to aggregate")
    return MetricReport(
        auc=float(np.mean([r.auc for r in reports])),
        op50=float(np.mean([r.op50 for r in reports])),
        op75=float(np.mean([r.op75 for r in reports])),
        precision=float(np.mean([r.precision for r in reports])),
        norm_precision=float(np.mean([r.norm_precision for r in reports])),
        n_frames=int(sum(r.n_frames for r in reports)),
        success_curve=np.mean([r.success_curve for r in reports], axis=0),
        precision_curve=np.mean([r.precision_curve for r in reports], axis=0),
        norm_precision_curve=np.mean([r.norm_precision_curve for r in reports], axis=0),
    )


# --- box-file and report IO ---------------------------------------------


def load_boxes(path) -> list[BoundingBox | None]:
    """Read one box per line (`x,y,w,h`; `nan,nan,nan,nan` marks a miss)."""
    boxes: list[BoundingBox | None] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.replace(",", " ").replace("\t", " ").split()
            if len(fields) != 4:
                raise EvaluationError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                values = [float(v) for v in fields]
            except ValueError as exc:
                raise EvaluationError(f"{path}:{lineno}: {exc}") from None
            nans = [math.isnan(v) for v in values]
            if all(nans):
                boxes.append(None)
            elif any(nans):
                raise EvaluationError(f"{path}:{lineno}: partial nan box")
            else:
                try:
                    boxes.append(BoundingBox(*values))
                except ValueError as exc:
                    raise EvaluationError(f"{path}:{lineno}: {exc}") from None
    if not boxes:
        raise EvaluationError(f"{path}: no boxes found")
    return boxes


def format_boxes(boxes: list[BoundingBox | None]) -> str:
    lines = []
    for b in boxes:
        if b is None:
            lines.append("nan,nan,nan,nan")
        else:
            lines.append(f"{b.x:.6f},{b.y:.6f},{b.w:.6f},{b.h:.6f}")
    return "\n".join(lines) + "\n"


def evaluate_sequence(gt_path, pred_path) -> MetricReport:
    """Score a prediction file against a ground-truth file."""
    return evaluate_boxes(load_boxes(gt_path), load_boxes(pred_path))


def format_report(rows: list[tuple[str, MetricReport]], extra: dict[str, list[float]] | None = None) -> str:
    """Render report rows as CSV in the fixed column order.

    `extra` maps an additional column name to per-row values (used for the
    relative-to-best aggregate column).
    """
    header = list(REPORT_COLUMNS)
    extra = extra or {}
    for name in extra:
        header.append(name)
    lines = [",".join(header)]
    for idx, (name, r) in enumerate(rows):
        cells = [
            name,
            f"{r.auc:.4f}",
            f"{r.op50:.4f}",
            f"{r.op75:.4f}",
            f"{r.precision:.4f}",
            f"{r.norm_precision:.4f}",
            str(r.n_frames),
        ]
        for col in extra:
            cells.append(f"{extra[col][idx]:.4f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def format_curves(rows: list[tuple[str, MetricReport]]) -> str:
    """Long-form CSV of the success/precision/normalized-precision curves."""
    lines = ["sequence,curve,threshold,value"]
    for name, r in rows:
        for tau, v in zip(SUCCESS_THRESHOLDS, r.success_curve):
            lines.append(f"{name},success,{tau:.2f},{v:.4f}")
        for tau, v in zip(PRECISION_THRESHOLDS, r.precision_curve):
            lines.append(f"{name},precision,{tau:.0f},{v:.4f}")
        for tau, v in zip(NORM_PRECISION_THRESHOLDS, r.norm_precision_curve):
            lines.append(f"{name},norm_precision,{tau:.2f},{v:.4f}")
    return "\n".join(lines) + "\n"
