"""Data model, file IO, and preprocessing for multi-person motion sequences.

Arrays follow the layout [P persons, T frames, J joints, 3 coords] with
coordinates in millimeters. The canonical skeleton has 18 joints; raw engine
exports carry 20 and are reduced via :func:`select_joints`.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError, StructuralError

SCENES = ("Park", "Street", "Indoor", "SpecialLocations", "ComplexCrowd")
SYNTH_SCENE = "Synthetic"
ALL_SCENE_LABELS = SCENES + (SYNTH_SCENE,)

JOINT_NAMES = (
    "Head",
    "Neck",
    "RightShoulder",
    "RightElbow",
    "RightWrist",
    "LeftShoulder",
    "LeftElbow",
    "LeftWrist",
    "Spine1",
    "Spine2",
    "Spine3",
    "Spine4",
    "RightHip",
    "RightKnee",
    "RightHeel",
    "LeftHip",
    "LeftKnee",
    "LeftHeel",
)

# Raw 20-joint engine export order: the canonical joints plus two hand
# end-effectors that are dropped during joint selection.
RAW_JOINT_NAMES = (
    "Head",
    "Neck",
    "RightShoulder",
    "RightElbow",
    "RightWrist",
    "RightHand",
    "LeftShoulder",
    "LeftElbow",
    "LeftWrist",
    "LeftHand",
    "Spine1",
    "Spine2",
    "Spine3",
    "Spine4",
    "RightHip",
    "RightKnee",
    "RightHeel",
    "LeftHip",
    "LeftKnee",
    "LeftHeel",
)

# Indices into the raw 20-joint layout that survive selection, in canonical
# 18-joint order (drops RightHand=5 and LeftHand=9).
DEFAULT_JOINT_MAP = (0, 1, 2, 3, 4, 6, 7, 8, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19)

ROOT_JOINT = "Spine1"


@dataclass(frozen=True)
class Skeleton:
    """Fixed 18-joint body layout with a rooted bone tree."""

    joint_names: tuple[str, ...]
    root_index: int
    bone_edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = len(self.joint_names)
        if n != 18:
            raise DimensionError(f"skeleton must have 18 joints, got {n}")
        if not 0 <= self.root_index < n:
            raise ValueError(f"root_index {self.root_index} out of range")
        if len(self.bone_edges) != n - 1:
            raise StructuralError("bone_edges must form a spanning tree")
        # Connectivity check: union every edge and verify a single component.
        comp = list(range(n))

        def find(i):
            while comp[i] != i:
                comp[i] = comp[comp[i]]
                i = comp[i]
            return i

        for a, b in self.bone_edges:
            ra, rb = find(a), find(b)
            if ra == rb:
                raise StructuralError(f"bone edge ({a},{b}) creates a cycle")
            comp[ra] = rb
        if len({find(i) for i in range(n)}) != 1:
            raise StructuralError("bone_edges do not connect all joints")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    def parents(self) -> list[int]:
        """Parent index per joint (root's parent is -1), derived from the edges."""
        adj: dict[int, list[int]] = {i: [] for i in range(self.n_joints)}
        for a, b in self.bone_edges:
            adj[a].append(b)
            adj[b].append(a)
        parent = [-1] * self.n_joints
        seen = {self.root_index}
        stack = [self.root_index]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in seen:
                    parent[nxt] = cur
                    seen.add(nxt)
                    stack.append(nxt)
        return parent


_BONE_EDGES = (
    (8, 9),  # Spine1 -> Spine2
    (9, 10),  # Spine2 -> Spine3
    (10, 11),  # Spine3 -> Spine4
    (11, 1),  # Spine4 -> Neck
    (1, 0),  # Neck -> Head
    (11, 2),  # Spine4 -> RightShoulder
    (2, 3),  # RightShoulder -> RightElbow
    (3, 4),  # RightElbow -> RightWrist
    (11, 5),  # Spine4 -> LeftShoulder
    (5, 6),  # LeftShoulder -> LeftElbow
    (6, 7),  # LeftElbow -> LeftWrist
    (8, 12),  # Spine1 -> RightHip
    (12, 13),  # RightHip -> RightKnee
    (13, 14),  # RightKnee -> RightHeel
    (8, 15),  # Spine1 -> LeftHip
    (15, 16),  # LeftHip -> LeftKnee
    (16, 17),  # LeftKnee -> LeftHeel
)


def default_skeleton() -> Skeleton:
    return Skeleton(JOINT_NAMES, JOINT_NAMES.index(ROOT_JOINT), _BONE_EDGES)


def _check_motion_array(data: np.ndarray, n_joints: int | None = None) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 4 or data.shape[-1] != 3:
        raise DimensionError(f"motion data must be [P,T,J,3], got {data.shape}")
    p, t, j, _ = data.shape
    if p < 1:
        raise DimensionError("need at least one person")
    if t < 2:
        raise DimensionError(f"need at least 2 frames, got {t}")
    if n_joints is not None and j != n_joints:
        raise DimensionError(f"expected {n_joints} joints, got {j}")
    if not np.all(np.isfinite(data)):
        raise ValueError("motion data contains non-finite coordinates")
    return data


@dataclass
class MotionSample:
    """One scene's joint positions: [P, T, 18, 3] in millimeters."""

    scene: str
    fps: float
    data: np.ndarray
    sample_id: str = ""

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        self.data = _check_motion_array(self.data, n_joints=18)

    @property
    def n_persons(self) -> int:
        return self.data.shape[0]

    @property
    def n_frames(self) -> int:
        return self.data.shape[1]


@dataclass
class RawMotionSample:
    """Staging form straight off a scene export; joint count not yet canonical."""

    scene: str
    fps: float
    data: np.ndarray
    sample_id: str = ""

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        self.data = _check_motion_array(self.data)

    @property
    def n_joints(self) -> int:
        return self.data.shape[2]


@dataclass
class DisplacementSequence:
    """Frame-to-frame pose differences plus the final pose used as anchor.

    data: [P, T-1, J, 3] mm/frame; anchor: [P, J, 3] mm (last source frame).
    """

    data: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.anchor = np.asarray(self.anchor, dtype=np.float64)
        if self.data.ndim != 4 or self.anchor.ndim != 3:
            raise DimensionError("displacement data must be [P,N,J,3], anchor [P,J,3]")
        if self.data.shape[0] != self.anchor.shape[0] or self.data.shape[2:] != self.anchor.shape[1:]:
            raise DimensionError(
                f"displacement/anchor shapes disagree: {self.data.shape} vs {self.anchor.shape}"
            )


@dataclass
class TrainingWindow:
    """One supervised example: contiguous observed and target frames."""

    input: np.ndarray  # [P, in_len, J, 3]
    target: np.ndarray  # [P, out_len, J, 3]
    scene: str
    sample_id: str
    start: int

    def __post_init__(self):
        self.input = np.asarray(self.input, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.float64)
        if self.input.shape[0] != self.target.shape[0] or self.input.shape[2:] != self.target.shape[2:]:
            raise DimensionError("input/target person or joint axes disagree")


@dataclass
class DatasetSplit:
    train: list[MotionSample]
    test: list[MotionSample]
    rule: str


@dataclass
class WindowingResult:
    windows: list[TrainingWindow]
    skipped: int


def load_scene_json(path) -> RawMotionSample:
    """Read a raw scene export.

    Schema: {"fps": number, "scene": str?, "persons": [{"id": ..., "frames":
    [[[x, y, z] * J] * T]}]}. All persons must share T and J. Coordinates are
    kept exactly as stored (millimeters).
    """
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "fps" not in doc or "persons" not in doc:
        raise StructuralError(f"{path}: expected top-level object with 'fps' and 'persons'")
    persons = doc["persons"]
    if not isinstance(persons, list) or not persons:
        raise StructuralError(f"{path}: 'persons' must be a non-empty list")
    frames_per_person = []
    for entry in persons:
        if not isinstance(entry, dict) or "frames" not in entry:
            raise StructuralError(f"{path}: each person needs a 'frames' list")
        frames_per_person.append(entry["frames"])
    t0 = len(frames_per_person[0])
    if any(len(fr) != t0 for fr in frames_per_person):
        raise StructuralError(f"{path}: persons disagree on frame count")
    try:
        data = np.asarray(frames_per_person, dtype=np.float64)
    except ValueError as exc:
        raise StructuralError(f"{path}: ragged joint arrays across frames") from exc
    if data.ndim != 4 or data.shape[-1] != 3:
        raise StructuralError(f"{path}: frames must be [T][J][3], got array shape {data.shape}")
    if data.shape[1] < 2:
        raise DimensionError(f"{path}: need at least 2 frames, got {data.shape[1]}")
    return RawMotionSample(
        scene=doc.get("scene", SYNTH_SCENE),
        fps=float(doc["fps"]),
        data=data,
        sample_id=str(doc.get("id", path.stem)),
    )


def write_scene_json(sample: RawMotionSample | MotionSample, path) -> None:
    """Serialize to the ingestion schema. Float round-trip is exact."""
    doc = {
        "fps": sample.fps,
        "scene": sample.scene,
        "id": sample.sample_id,
        "persons": [
            {"id": p, "frames": sample.data[p].tolist()} for p in range(sample.data.shape[0])
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def select_joints(raw: RawMotionSample, mapping: Sequence[int] = DEFAULT_JOINT_MAP) -> MotionSample:
    """Reduce a 20-joint raw sample to the canonical 18-joint layout."""
    if raw.n_joints != 20:
        raise DimensionError(f"joint selection expects 20 raw joints, got {raw.n_joints}")
    mapping = tuple(mapping)
    if len(mapping) != 18 or len(set(mapping)) != 18 or not all(0 <= m < 20 for m in mapping):
        raise ValueError(f"mapping must be 18 distinct indices into [0,20), got {mapping}")
    return MotionSample(
        scene=raw.scene,
        fps=raw.fps,
        data=raw.data[:, :, mapping, :],
        sample_id=raw.sample_id,
    )


def downsample(sample: MotionSample, factor: int = 3) -> MotionSample:
    """Keep every factor-th frame starting at frame 0 and divide fps."""
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor > sample.n_frames:
        raise DimensionError(
            f"factor {factor} exceeds frame count {sample.n_frames}: output would be empty"
        )
    kept = sample.data[:, ::factor]
    if kept.shape[1] < 2:
        raise DimensionError(f"downsampling by {factor} leaves {kept.shape[1]} frame(s)")
    return MotionSample(
        scene=sample.scene,
        fps=sample.fps / factor,
        data=kept.copy(),
        sample_id=sample.sample_id,
    )


def to_displacements(sample: MotionSample) -> DisplacementSequence:
    """Differences between consecutive frames; anchor is the final frame."""
    if sample.n_frames < 2:
        raise DimensionError("need at least 2 frames to form displacements")
    return DisplacementSequence(
        data=np.diff(sample.data, axis=1),
        anchor=sample.data[:, -1].copy(),
    )


def reconstruct(anchor: np.ndarray, disp: np.ndarray) -> np.ndarray:
    """Absolute poses from an anchor pose and forward displacements.

    pose[k] = anchor + sum(disp[0..k]); output shape matches disp [P,N,J,3].
    """
    anchor = np.asarray(anchor, dtype=np.float64)
    disp = np.asarray(disp, dtype=np.float64)
    if disp.ndim != 4 or anchor.ndim != 3:
        raise DimensionError("reconstruct expects disp [P,N,J,3] and anchor [P,J,3]")
    if disp.shape[0] != anchor.shape[0] or disp.shape[2:] != anchor.shape[1:]:
        raise DimensionError(f"shape mismatch: disp {disp.shape} vs anchor {anchor.shape}")
    return anchor[:, None] + np.cumsum(disp, axis=1)


def window_samples(
    samples: Iterable[MotionSample],
    in_len: int = 25,
    out_len: int = 25,
    stride: int | None = None,
) -> WindowingResult:
    """Cut sliding supervised windows from each sample.

    Samples shorter than in_len + out_len are skipped and counted. Default
    stride is in_len + out_len (non-overlapping windows).
    """
    if in_len < 1 or out_len < 1:
        raise ValueError("window lengths must be positive")
    if stride is None:
        stride = in_len + out_len
    if stride < 1:
        raise ValueError("stride must be positive")
    windows: list[TrainingWindow] = []
    skipped = 0
    for sample in samples:
        total = in_len + out_len
        if sample.n_frames < total:
            skipped += 1
            continue
        for start in range(0, sample.n_frames - total + 1, stride):
            windows.append(
                TrainingWindow(
                    input=sample.data[:, start : start + in_len].copy(),
                    target=sample.data[:, start + in_len : start + total].copy(),
                    scene=sample.scene,
                    sample_id=sample.sample_id,
                    start=start,
                )
            )
    return WindowingResult(windows=windows, skipped=skipped)


def split_dataset(
    samples: Sequence[MotionSample],
    train_fraction: float = 0.8,
    seed: int = 0,
) -> DatasetSplit:
    """Deterministic per-scene train/test split; ComplexCrowd is test-only.

    Within each non-crowd scene, sample ids are sorted, shuffled with a seeded
    counter-based generator, and the first floor(train_fraction * n) go to
    train. Input order never affects the outcome.
    """
    by_scene: dict[str, list[MotionSample]] = {}
    for s in samples:
        if not s.sample_id:
            raise ValueError("split_dataset requires non-empty sample ids")
        by_scene.setdefault(s.scene, []).append(s)
    train: list[MotionSample] = []
    test: list[MotionSample] = []
    for scene in sorted(by_scene):
        group = sorted(by_scene[scene], key=lambda s: s.sample_id)
        if scene == "ComplexCrowd":
            test.extend(group)
            continue
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        order = rng.permutation(len(group))
        n_train = int(np.floor(train_fraction * len(group)))
        chosen = sorted(order[:n_train])
        chosen_set = set(int(i) for i in chosen)
        for i, s in enumerate(group):
            (train if i in chosen_set else test).append(s)
    rule = f"per-scene {train_fraction:.0%} by sorted id (seed {seed}); ComplexCrowd all test"
    return DatasetSplit(train=train, test=test, rule=rule)


def sample_filename(sample: MotionSample) -> str:
    return f"{sample.scene}_{sample.sample_id}.npy"


def save_sample_npy(sample: MotionSample, directory) -> Path:
    """Write the sample array as little-endian float64 NPY v1.0."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / sample_filename(sample)
    with open(path, "wb") as fh:
        np.lib.format.write_array(
            fh, np.ascontiguousarray(sample.data, dtype="<f8"), version=(1, 0)
        )
    return path


def load_sample_npy(path, scene: str, sample_id: str, fps: float = 25.0) -> MotionSample:
    try:
        data = np.load(path)
    except (ValueError, OSError, EOFError) as exc:
        raise ParseError(f"{path}: not a readable NPY array: {exc}") from exc
    return MotionSample(scene=scene, fps=fps, data=data, sample_id=sample_id)


_MANIFEST_HEADER = "# mfk manifest v1"
_KV_RE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


@dataclass
class ManifestEntry:
    sample_id: str
    scene: str
    split: str  # "train" | "test" | "unassigned"
    file: str
    fps: float
    persons: int
    frames: int


def write_manifest(entries: Sequence[ManifestEntry], path) -> None:
    """Key-value text manifest, one [section] per sample, stable ordering."""
    lines = [_MANIFEST_HEADER]
    for e in entries:
        lines.append(f"[{e.sample_id}]")
        lines.append(f"scene = {e.scene}")
        lines.append(f"split = {e.split}")
        lines.append(f"file = {e.file}")
        lines.append(f"fps = {e.fps!r}")
        lines.append(f"persons = {e.persons}")
        lines.append(f"frames = {e.frames}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"manifest not found: {path}")
    entries: list[ManifestEntry] = []
    current: dict[str, str] | None = None

    def flush(block):
        if block is None:
            return
        try:
            entries.append(
                ManifestEntry(
                    sample_id=block["__id__"],
                    scene=block["scene"],
                    split=block.get("split", "unassigned"),
                    file=block["file"],
                    fps=float(block["fps"]),
                    persons=int(block["persons"]),
                    frames=int(block["frames"]),
                )
            )
        except (KeyError, ValueError) as exc:
            raise ParseError(f"{path}: bad manifest block for {block.get('__id__')}: {exc}") from exc

    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            flush(current)
            current = {"__id__": stripped[1:-1]}
            continue
        m = _KV_RE.match(line)
        if m is None:
            raise ParseError(f"{path}: line {lineno}: expected 'key = value', got {line!r}")
        if current is None:
            raise ParseError(f"{path}: line {lineno}: key-value pair outside a sample section")
        current[m.group(1)] = m.group(2)
    flush(current)
    return entries


def load_manifest_samples(manifest_path, data_dir=None, split: str | None = None) -> list[MotionSample]:
    """Materialize samples listed in a manifest, optionally one split only."""
    manifest_path = Path(manifest_path)
    base = Path(data_dir) if data_dir is not None else manifest_path.parent
    out = []
    for e in read_manifest(manifest_path):
        if split is not None and e.split != split:
            continue
        out.append(load_sample_npy(base / e.file, scene=e.scene, sample_id=e.sample_id, fps=e.fps))
    return out
