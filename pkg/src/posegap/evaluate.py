"""Pose scoring: 2D corner re-projection error, 3D translation error and
geodesic rotation angle, aggregated into fixed-width report tables, CSV
and bar-chart figures.

Means are taken over detected samples only; undetected samples enter the
detection rate but never the error means. Angles are raw geodesic
distances with no symmetry handling.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .annotations import Annotation
from .geometry import (ControlPoints2D, ControlPoints3D, Pose,
                       project_control_points, rotation_angle_deg,
                       rotation_from_quaternion)


class EvaluationError(ValueError):
    pass


class LengthMismatch(EvaluationError):
    pass


class UnknownSampleId(EvaluationError):
    pass


class DuplicateId(EvaluationError):
    pass


@dataclass(frozen=True)
class Prediction:
    """A model's output for one sample; pose None means no detection."""

    sample_id: str
    pose: Pose | None = None
    control_points_2d: ControlPoints2D | None = None

    @property
    def detected(self) -> bool:
        return self.pose is not None or self.control_points_2d is not None


@dataclass(frozen=True)
class SampleResult:
    sample_id: str
    detected: bool
    reprojection_px: float | None
    translation_cm: float | None
    angle_deg: float | None


@dataclass(frozen=True)
class MetricsReport:
    mean_reprojection_px: float
    mean_translation_cm: float
    mean_angle_deg: float
    detection_rate: float
    sample_count: int
    rows: tuple = ()


def reprojection_error_px(pred: ControlPoints2D, gt: ControlPoints2D) -> float:
    """Mean Euclidean distance over the 9 corresponding control points."""
    a = pred.points
    b = gt.points
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, axis=1).mean())


def translation_error_cm(t_pred, t_gt) -> float:
    a = np.asarray(t_pred, dtype=np.float64).reshape(3)
    b = np.asarray(t_gt, dtype=np.float64).reshape(3)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise EvaluationError("translations must be finite")
    return float(np.linalg.norm(a - b) * 100.0)


def aggregate(preds, gts: dict, cp3d) -> MetricsReport:
    """Score predictions against ground-truth annotations.

    gts maps sample_id -> Annotation; cp3d is a ControlPoints3D or a dict
    object_id -> ControlPoints3D for multi-object ground truth. Predictions
    carrying only a pose get their 2D points by re-projection.
    """
    seen = set()
    rows = []
    pred_by_id = {}
    for pred in preds:
        if pred.sample_id in pred_by_id:
            raise DuplicateId(f"prediction for {pred.sample_id} listed twice")
        if pred.sample_id not in gts:
            raise UnknownSampleId(pred.sample_id)
        pred_by_id[pred.sample_id] = pred

    for sample_id in gts:
        gt = gts[sample_id]
        pred = pred_by_id.get(sample_id)
        if pred is None or not pred.detected:
            rows.append(SampleResult(sample_id, False, None, None, None))
            continue
        points = cp3d[gt.object_id] if isinstance(cp3d, dict) else cp3d
        gt_2d = gt.control_points_2d
        pred_2d = pred.control_points_2d
        if pred_2d is None:
            pred_2d = project_control_points(points, pred.pose, gt.intrinsics)
        reproj = reprojection_error_px(pred_2d, gt_2d)
        if pred.pose is not None:
            trans = translation_error_cm(pred.pose.translation,
                                         gt.pose.translation)
            angle = rotation_angle_deg(pred.pose.rotation, gt.pose.rotation)
        else:
            trans = None
            angle = None
        rows.append(SampleResult(sample_id, True, reproj, trans, angle))

    detected = [r for r in rows if r.detected]

    def mean(values):
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else float("nan")

    return MetricsReport(
        mean_reprojection_px=mean([r.reprojection_px for r in detected]),
        mean_translation_cm=mean([r.translation_cm for r in detected]),
        mean_angle_deg=mean([r.angle_deg for r in detected]),
        detection_rate=len(detected) / len(rows) if rows else 0.0,
        sample_count=len(rows),
        rows=tuple(rows),
    )


def load_predictions(path) -> list:
    """JSON-lines predictions: one record per line, same schema as the
    annotation minus intrinsics. A record with neither rotation/quaternion
    nor control points counts as a missed detection."""
    preds = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EvaluationError(f"{path}:{line_no}: {exc}") from exc
            sample_id = str(d["sample_id"]) if "sample_id" in d else str(d["id"])
            pose = None
            if "quaternion" in d:
                pose = Pose(rotation_from_quaternion(d["quaternion"]),
                            d["translation"])
            elif "rotation" in d:
                pose = Pose(np.asarray(d["rotation"]), d["translation"])
            cp2d = None
            if d.get("control_points_2d") is not None:
                cp2d = ControlPoints2D(np.asarray(d["control_points_2d"]))
            preds.append(Prediction(sample_id=sample_id, pose=pose,
                                    control_points_2d=cp2d))
    return preds


def predictions_from_annotations(gts: dict) -> list:
    """Self-predictions (ground truth echoed back), for harness checks."""
    return [Prediction(sample_id=sid, pose=ann.pose,
                       control_points_2d=ann.control_points_2d)
            for sid, ann in gts.items()]


def _trim(value: float) -> str:
    text = f"{value:.1f}"
    return text[:-2] if text.endswith(".0") else text


def format_px(value: float) -> str:
    return f"{_trim(value)} px"


def format_cm(value: float) -> str:
    return f"{_trim(value)} cm"


def format_deg(value: float) -> str:
    return f"{value:.1f}\N{DEGREE SIGN}"


def render_table(rows) -> str:
    """Fixed-width report: label, re-projection (px), translation (cm),
    angle (deg), one line per labeled MetricsReport."""
    if not rows:
        raise EvaluationError("need at least one report row")
    cells = [("method / translation", "re-projection", "translation", "angle")]
    for label, report in rows:
        cells.append((label if label else "-",
                      format_px(report.mean_reprojection_px),
                      format_cm(report.mean_translation_cm),
                      format_deg(report.mean_angle_deg)))
    widths = [max(len(row[c]) for row in cells) for c in range(4)]
    lines = []
    for i, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(width)
                               for cell, width in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("-" * (sum(widths) + 6))
    return "\n".join(lines)


def write_csv(rows, path) -> None:
    """Delimited version of the report table plus detection rate."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "mean_reprojection_px", "mean_translation_cm",
                         "mean_angle_deg", "detection_rate", "sample_count"])
        for label, report in rows:
            writer.writerow([label, f"{report.mean_reprojection_px:.6g}",
                             f"{report.mean_translation_cm:.6g}",
                             f"{report.mean_angle_deg:.6g}",
                             f"{report.detection_rate:.6g}",
                             report.sample_count])


def save_figures(rows, out_dir) -> list:
    """One bar chart per metric, written as PNG files; returns the paths."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = [label if label else "-" for label, _ in rows]
    metrics = [
        ("reprojection", "Mean re-projection error (px)",
         [r.mean_reprojection_px for _, r in rows]),
        ("translation", "Mean translation error (cm)",
         [r.mean_translation_cm for _, r in rows]),
        ("angle", "Mean rotation angle error (deg)",
         [r.mean_angle_deg for _, r in rows]),
    ]
    paths = []
    for name, title, values in metrics:
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.bar(range(len(values)), values, color="#4878a8")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel(title)
        ax.grid(axis="y", alpha=0.3)
        fig.tight_layout()
        path = out / f"{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
