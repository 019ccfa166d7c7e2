"""Benchmark metrics for multi-person motion prediction.

Position metrics (global, root-aligned, final-root) are Euclidean distances
in millimeters, reported per evaluation timestamp. Power-spectrum metrics
compare frequency distributions of 1-second windows and target long-horizon
behavior where pointwise errors stop being meaningful.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, FormatError
from .frequency import power_spectrum

SHORT_TERM_MS = (80, 160, 320, 400)
LONG_TERM_MS = (560, 720, 1000)
SCHEDULED_MS = SHORT_TERM_MS + LONG_TERM_MS
ULTRA_WINDOW_MS = (1000, 2000)

PS_WINDOW_FRAMES = 25  # 1 second at 25 fps
_KLD_EPS = 1e-8

REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FrameSchedule:
    """Evaluation instants in milliseconds mapped to 1-based frame indices."""

    fps: float = 25.0
    short_ms: tuple[int, ...] = SHORT_TERM_MS
    long_ms: tuple[int, ...] = LONG_TERM_MS

    @property
    def all_ms(self) -> tuple[int, ...]:
        return tuple(self.short_ms) + tuple(self.long_ms)

    def frame_index(self, ms: float) -> int:
        """1-based frame index for a timestamp, e.g. 80 ms -> 2 at 25 fps."""
        idx = int(round(ms * self.fps / 1000.0))
        if idx < 1:
            raise ValueError(f"{ms} ms precedes the first predicted frame")
        return idx


def _check_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"pred/gt shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim != 4 or pred.shape[-1] != 3:
        raise DimensionError(f"expected [P,N,J,3] arrays, got {pred.shape}")
    return pred, gt


def gjpe(pred: np.ndarray, gt: np.ndarray, frame: int) -> float:
    """Mean joint position error in world coordinates at one predicted frame.

    `frame` is 1-based; covers both pose and trajectory error.
    """
    pred, gt = _check_pair(pred, gt)
    if not 1 <= frame <= pred.shape[1]:
        raise DimensionError(f"frame {frame} outside 1..{pred.shape[1]}")
    diff = pred[:, frame - 1] - gt[:, frame - 1]
    return float(np.linalg.norm(diff, axis=-1).mean())


def ajpe(pred: np.ndarray, gt: np.ndarray, root_index: int, frame: int) -> float:
    """Joint position error after removing each person's root position."""
    pred, gt = _check_pair(pred, gt)
    if not 1 <= frame <= pred.shape[1]:
        raise DimensionError(f"frame {frame} outside 1..{pred.shape[1]}")
    p = pred[:, frame - 1]
    g = gt[:, frame - 1]
    p_al = p - p[:, root_index : root_index + 1, :]
    g_al = g - g[:, root_index : root_index + 1, :]
    return float(np.linalg.norm(p_al - g_al, axis=-1).mean())


def rfde(pred: np.ndarray, gt: np.ndarray, root_index: int) -> float:
    """Final-frame root position error, averaged over persons."""
    pred, gt = _check_pair(pred, gt)
    diff = pred[:, -1, root_index, :] - gt[:, -1, root_index, :]
    return float(np.linalg.norm(diff, axis=-1).mean())


def _as_window_array(windows) -> np.ndarray:
    arr = np.asarray(windows, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise DimensionError(f"expected windows [n, features, L], got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty window set")
    return arr


def pose_windows(poses: np.ndarray, length: int = PS_WINDOW_FRAMES, stride: int = 1) -> np.ndarray:
    """All length-`length` feature windows of a pose block [P, T, J, 3].

    Every coordinate of every joint becomes one feature row; returns
    [n_windows, P*J*3, length] with windows taken per person jointly.
    """
    poses = np.asarray(poses, dtype=np.float64)
    if poses.ndim != 4 or poses.shape[-1] != 3:
        raise DimensionError(f"expected [P,T,J,3], got {poses.shape}")
    p, t, j, _ = poses.shape
    if t < length:
        return np.zeros((0, p * j * 3, length))
    feats = poses.transpose(1, 0, 2, 3).reshape(t, p * j * 3).T  # [F, T]
    starts = range(0, t - length + 1, stride)
    return np.stack([feats[:, s : s + length] for s in starts])


def ps_entropy(windows) -> float:
    """Mean Shannon entropy (nats) of per-feature power distributions."""
    arr = _as_window_array(windows)
    total = 0.0
    for w in arr:
        dist = power_spectrum(w).normalized
        total += float((-dist * np.log(dist)).sum(axis=1).mean())
    return total / arr.shape[0]


def _aggregate_distribution(arr: np.ndarray) -> np.ndarray:
    """Per-feature frequency distribution averaged over windows: [F, bins]."""
    acc = None
    for w in arr:
        dist = power_spectrum(w).normalized
        acc = dist if acc is None else acc + dist
    return acc / arr.shape[0]


def _smooth(dist: np.ndarray) -> np.ndarray:
    s = dist + _KLD_EPS
    return s / s.sum(axis=1, keepdims=True)


def extract_second(windows, t: int) -> np.ndarray:
    """Second-`t` slice (frames [25t, 25t+25)) of longer prediction windows."""
    arr = _as_window_array(windows)
    lo, hi = PS_WINDOW_FRAMES * t, PS_WINDOW_FRAMES * (t + 1)
    if hi > arr.shape[2]:
        raise DimensionError(
            f"second {t} needs {hi} frames, prediction windows have {arr.shape[2]}"
        )
    return arr[:, :, lo:hi]


def ps_kld(reference, predictions, t: int | None = None) -> float:
    """Symmetric KL divergence between reference and prediction spectra.

    Both sides are aggregated per feature (mean of normalized spectra over
    their window sets) before comparison, then the divergence is averaged
    over features. When `t` is given, predictions may be longer sequences
    from which the 1-second window at second `t` is extracted first.
    """
    ref = _as_window_array(reference)
    pred = _as_window_array(predictions)
    if t is not None and pred.shape[2] != PS_WINDOW_FRAMES:
        pred = extract_second(pred, t)
    if ref.shape[1] != pred.shape[1]:
        raise DimensionError(
            f"feature counts differ: {ref.shape[1]} vs {pred.shape[1]}"
        )
    g = _smooth(_aggregate_distribution(ref))
    p = _smooth(_aggregate_distribution(pred))
    forward = (g * np.log(g / p)).sum(axis=1)
    backward = (p * np.log(p / g)).sum(axis=1)
    return float(0.5 * (forward + backward).mean())


def baseline_zero_velocity(observed: np.ndarray, n: int) -> np.ndarray:
    """Repeat the last observed pose n times: [P, n, J, 3]."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 4 or observed.shape[1] < 1:
        raise DimensionError(f"expected non-empty [P,T,J,3], got {observed.shape}")
    return np.repeat(observed[:, -1:], n, axis=1)


def baseline_constant_velocity(observed: np.ndarray, n: int) -> np.ndarray:
    """Extrapolate the last frame-to-frame displacement linearly."""
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 4 or observed.shape[1] < 2:
        raise DimensionError("constant-velocity baseline needs at least 2 observed frames")
    last = observed[:, -1:]
    vel = observed[:, -1:] - observed[:, -2:-1]
    steps = np.arange(1, n + 1).reshape(1, n, 1, 1)
    return last + vel * steps


@dataclass
class MetricReport:
    """Per-scene metric values at the scheduled timestamps plus PS curves.

    values: predictor -> scene -> metric -> {time_ms: value};
    ps_curves: predictor -> scene -> metric -> {second: value}.
    """

    metadata: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    ps_curves: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def add_value(self, predictor: str, scene: str, metric: str, time_ms: int, value: float):
        self.values.setdefault(predictor, {}).setdefault(scene, {}).setdefault(metric, {})[
            str(time_ms)
        ] = float(value)

    def add_ps(self, predictor: str, scene: str, metric: str, second: int, value: float):
        self.ps_curves.setdefault(predictor, {}).setdefault(scene, {}).setdefault(metric, {})[
            str(second)
        ] = float(value)

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "metadata": self.metadata,
            "values": self.values,
            "ps_curves": self.ps_curves,
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        doc = json.loads(text)
        version = doc.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise FormatError(
                f"report schema version {version} unsupported (expected {REPORT_SCHEMA_VERSION})"
            )
        return cls(
            metadata=doc.get("metadata", {}),
            values=doc.get("values", {}),
            ps_curves=doc.get("ps_curves", {}),
            schema_version=version,
        )

    def to_csv(self) -> str:
        """Flat rows: predictor, scene, metric, time_ms, value (fixed order)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["predictor", "scene", "metric", "time_ms", "value"])
        for predictor in sorted(self.values):
            scenes = self.values[predictor]
            for scene in sorted(scenes):
                for metric in sorted(scenes[scene]):
                    series = scenes[scene][metric]
                    for time_ms in sorted(series, key=int):
                        writer.writerow([predictor, scene, metric, time_ms, repr(series[time_ms])])
        return buf.getvalue()

    def ps_curve_csv(self) -> str:
        """Rows: predictor, scene, metric, second, value (one per prediction second)."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["predictor", "scene", "metric", "second", "value"])
        for predictor in sorted(self.ps_curves):
            scenes = self.ps_curves[predictor]
            for scene in sorted(scenes):
                for metric in sorted(scenes[scene]):
                    series = scenes[scene][metric]
                    for second in sorted(series, key=int):
                        writer.writerow([predictor, scene, metric, second, repr(series[second])])
        return buf.getvalue()


def merge_reports(reports: Iterable[MetricReport]) -> MetricReport:
    merged = MetricReport()
    versions = set()
    for rep in reports:
        versions.add(rep.schema_version)
        if rep.schema_version != REPORT_SCHEMA_VERSION:
            raise FormatError(f"cannot merge schema version {rep.schema_version}")
        for predictor, scenes in rep.values.items():
            for scene, metrics_ in scenes.items():
                for metric, series in metrics_.items():
                    for time_ms, value in series.items():
                        merged.add_value(predictor, scene, metric, int(time_ms), value)
        for predictor, scenes in rep.ps_curves.items():
            for scene, metrics_ in scenes.items():
                for metric, series in metrics_.items():
                    for second, value in series.items():
                        merged.add_ps(predictor, scene, metric, int(second), value)
        for key, val in rep.metadata.items():
            merged.metadata.setdefault(key, val)
    return merged
