"""Seeded synthetic multi-person scene generator.

Scenes are built from closed-form trajectories so they are smooth,
band-limited, deterministic per seed, and cheap to collision-check:

* roots sit on a circle whose radius ramps with the interaction level
  (high shrinks toward the shared centroid, low widens), on top of a
  linear drift and low-frequency sinusoid wander;
* local pose comes from forward kinematics over the canonical bone tree
  with phase-locked sinusoidal joint angles, so bone lengths are exact.

Coordinates are millimeters, z up, 25 fps unless stated otherwise.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import GenerationError
from .motion_data import (
    ALL_SCENE_LABELS,
    MotionSample,
    RawMotionSample,
    Skeleton,
    default_skeleton,
)

INTERACTION_LEVELS = ("high", "mixed", "low")

# Final circle-radius scale per interaction level (1.0 at the first frame).
_LEVEL_END_SCALE = {"high": 0.55, "mixed": 0.9, "low": 1.45}

_MAX_ATTEMPTS = 1000
_ROOT_HEIGHT = 950.0  # mm above ground for the rest pose root

# Rest offsets parent->child in mm, indexed by child joint.
_REST_OFFSETS = {
    9: (0.0, 0.0, 120.0),  # Spine2
    10: (0.0, 0.0, 120.0),  # Spine3
    11: (0.0, 0.0, 120.0),  # Spine4
    1: (0.0, 0.0, 110.0),  # Neck
    0: (0.0, 0.0, 160.0),  # Head
    2: (185.0, 0.0, 35.0),  # RightShoulder
    3: (25.0, 0.0, -280.0),  # RightElbow
    4: (10.0, 0.0, -250.0),  # RightWrist
    5: (-185.0, 0.0, 35.0),  # LeftShoulder
    6: (-25.0, 0.0, -280.0),  # LeftElbow
    7: (-10.0, 0.0, -250.0),  # LeftWrist
    12: (95.0, 0.0, -60.0),  # RightHip
    13: (0.0, 0.0, -420.0),  # RightKnee
    14: (0.0, -40.0, -400.0),  # RightHeel
    15: (-95.0, 0.0, -60.0),  # LeftHip
    16: (0.0, 0.0, -420.0),  # LeftKnee
    17: (0.0, -40.0, -400.0),  # LeftHeel
}

# Sinusoidal swing amplitude cap (radians) per joint; rotations at a joint
# move its subtree, so caps keep every joint within 150 mm of rest.
_SWING_AMPLITUDE = {
    1: 0.05,  # Neck
    2: 0.10,
    3: 0.12,  # right arm
    5: 0.10,
    6: 0.12,  # left arm
    9: 0.03,
    10: 0.03,
    11: 0.03,  # spine
    12: 0.10,
    13: 0.12,  # right leg
    15: 0.10,
    16: 0.12,  # left leg
}


@dataclass(frozen=True)
class SynthConfig:
    persons: int = 3
    frames: int = 75
    interaction_level: str = "mixed"
    arena_extent: float = 3000.0
    min_separation: float = 500.0
    seed: int = 0

    def __post_init__(self):
        if not 3 <= self.persons <= 6:
            raise ValueError(f"persons must be in [3, 6], got {self.persons}")
        if self.frames < 2:
            raise ValueError(f"need at least 2 frames, got {self.frames}")
        if self.interaction_level not in INTERACTION_LEVELS:
            raise ValueError(f"unknown interaction level {self.interaction_level!r}")
        if self.min_separation <= 0:
            raise ValueError("min_separation must be positive")
        if self.arena_extent <= self.min_separation:
            raise ValueError("arena_extent must exceed min_separation")


def rest_pose(skeleton: Skeleton | None = None) -> np.ndarray:
    """Rest joint positions [18, 3] relative to the root joint."""
    skeleton = skeleton or default_skeleton()
    parents = skeleton.parents()
    pose = np.zeros((skeleton.n_joints, 3))
    order = _tree_order(parents, skeleton.root_index)
    for j in order:
        if parents[j] >= 0:
            pose[j] = pose[parents[j]] + np.asarray(_REST_OFFSETS[j])
    return pose


def _tree_order(parents: list[int], root: int) -> list[int]:
    order = [root]
    remaining = [j for j in range(len(parents)) if j != root]
    while remaining:
        progressed = [j for j in remaining if parents[j] in order]
        order.extend(progressed)
        remaining = [j for j in remaining if j not in order]
    return order


def _rodrigues(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rotation matrices [T, 3, 3] about a fixed unit axis by per-frame angles."""
    kx, ky, kz = axis
    k_cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    outer = np.outer(axis, axis)
    c = np.cos(angles)[:, None, None]
    s = np.sin(angles)[:, None, None]
    return c * np.eye(3) + s * k_cross + (1.0 - c) * outer


def _draw_person_params(rng: np.random.Generator) -> dict:
    """All per-person randomness; independent of frame count and level."""
    return {
        "wander_amp": rng.uniform(30.0, 110.0),
        "wander_freq": rng.uniform(0.1, 0.5),
        "wander_phase": rng.uniform(0.0, 2 * np.pi, size=2),
        "bob_amp": rng.uniform(5.0, 25.0),
        "bob_freq": rng.uniform(0.3, 1.0),
        "bob_phase": rng.uniform(0.0, 2 * np.pi),
        "yaw_amp": rng.uniform(0.02, 0.15),
        "pose_freq": rng.uniform(0.3, 1.0),
        "pose_phase": rng.uniform(0.0, 2 * np.pi),
        "swing_axes": rng.normal(size=(18, 3)),
        "swing_scale": rng.uniform(0.4, 1.0, size=18),
        "facing": rng.uniform(0.0, 2 * np.pi),
    }


def _draw_scene_params(cfg: SynthConfig, rng: np.random.Generator) -> dict:
    p = cfg.persons
    drift_dir = rng.uniform(0.0, 2 * np.pi)
    drift_speed = rng.uniform(200.0, 1200.0)  # mm/s, well under the 2000 cap
    return {
        "angle_jitter": rng.uniform(-0.15, 0.15, size=p),
        "drift": drift_speed * np.array([np.cos(drift_dir), np.sin(drift_dir)]),
        "centroid_amp": rng.uniform(50.0, 300.0, size=2),
        "centroid_freq": rng.uniform(0.05, 0.4, size=2),
        "centroid_phase": rng.uniform(0.0, 2 * np.pi, size=2),
        "persons": [_draw_person_params(rng) for _ in range(p)],
    }


def _wander_cap(cfg: SynthConfig) -> float:
    return min(0.1 * cfg.min_separation, 120.0)


def _circle_radius(cfg: SynthConfig) -> float:
    """Base radius guaranteeing pairwise separation at maximum shrink."""
    s_min = min(_LEVEL_END_SCALE.values())
    gap = 2 * np.pi / cfg.persons - 0.3  # worst-case angular gap after jitter
    margin = 1.02 * cfg.min_separation / 2.0 + _wander_cap(cfg)
    return margin / (s_min * np.sin(gap / 2.0))


def _root_paths(cfg: SynthConfig, params: dict, times: np.ndarray) -> np.ndarray:
    """Root trajectories [P, T, 3] in mm."""
    p, t_count = cfg.persons, times.size
    duration = max(times[-1], 1e-9)
    radius = _circle_radius(cfg)
    s_end = _LEVEL_END_SCALE[cfg.interaction_level]
    # Half-cosine ramp from 1 to s_end over the scene (a low-frequency sinusoid).
    scale = 1.0 + (s_end - 1.0) * 0.5 * (1.0 - np.cos(np.pi * times / duration))
    centroid = np.zeros((t_count, 2))
    for axis in range(2):
        centroid[:, axis] = params["centroid_amp"][axis] * np.sin(
            2 * np.pi * params["centroid_freq"][axis] * times + params["centroid_phase"][axis]
        )
    centroid += params["drift"][None, :] * times[:, None]
    roots = np.zeros((p, t_count, 3))
    wander_cap = _wander_cap(cfg)
    for i in range(p):
        person = params["persons"][i]
        angle = 2 * np.pi * i / p + params["angle_jitter"][i]
        radial = np.array([np.cos(angle), np.sin(angle)])
        wander_amp = min(person["wander_amp"], wander_cap)
        wander = wander_amp * np.sin(
            2 * np.pi * person["wander_freq"] * times[:, None] + person["wander_phase"][None, :]
        )
        roots[i, :, :2] = centroid + (radius * scale)[:, None] * radial[None, :] + wander
        roots[i, :, 2] = _ROOT_HEIGHT + person["bob_amp"] * np.sin(
            2 * np.pi * person["bob_freq"] * times + person["bob_phase"]
        )
    return roots


def _local_poses(person: dict, times: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    """Joint positions [T, 18, 3] relative to the root via forward kinematics."""
    t_count = times.size
    parents = skeleton.parents()
    order = _tree_order(parents, skeleton.root_index)
    phase = 2 * np.pi * person["pose_freq"] * times + person["pose_phase"]
    osc = np.sin(phase)

    global_rot = np.zeros((18, t_count, 3, 3))
    yaw = person["yaw_amp"] * osc + person["facing"]
    global_rot[skeleton.root_index] = _rodrigues(np.array([0.0, 0.0, 1.0]), yaw)

    pos = np.zeros((18, t_count, 3))
    for j in order:
        par = parents[j]
        if par < 0:
            continue
        amp = _SWING_AMPLITUDE.get(j, 0.0) * person["swing_scale"][j]
        if amp > 0.0:
            axis = person["swing_axes"][j]
            axis = axis / np.linalg.norm(axis)
            local = _rodrigues(axis, amp * osc)
            global_rot[j] = global_rot[par] @ local
        else:
            global_rot[j] = global_rot[par]
        offset = np.asarray(_REST_OFFSETS[j])
        pos[j] = pos[par] + (global_rot[par] @ offset)
    return pos.transpose(1, 0, 2)


def _evaluate(cfg: SynthConfig, params: dict, times: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    roots = _root_paths(cfg, params, times)
    data = np.zeros((cfg.persons, times.size, 18, 3))
    for i in range(cfg.persons):
        local = _local_poses(params["persons"][i], times, skeleton)
        data[i] = roots[i][:, None, :] + local
    return data


def min_root_distance(data: np.ndarray, root_index: int) -> float:
    """Smallest pairwise root distance over all frames of [P, T, J, 3] data."""
    roots = data[:, :, root_index, :]
    p = roots.shape[0]
    best = np.inf
    for i in range(p):
        for j in range(i + 1, p):
            d = np.linalg.norm(roots[i] - roots[j], axis=-1).min()
            best = min(best, float(d))
    return best


def generate_scene(cfg: SynthConfig, fps: float = 25.0) -> MotionSample:
    """Generate one scene; bit-identical for identical (cfg, fps)."""
    skeleton = default_skeleton()
    if _circle_radius(cfg) > cfg.arena_extent:
        raise GenerationError(
            f"cannot place {cfg.persons} persons with min_separation "
            f"{cfg.min_separation} inside arena_extent {cfg.arena_extent}"
        )
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.seed)))
    times = np.arange(cfg.frames) / fps
    for _ in range(_MAX_ATTEMPTS):
        params = _draw_scene_params(cfg, rng)
        data = _evaluate(cfg, params, times, skeleton)
        if min_root_distance(data, skeleton.root_index) >= cfg.min_separation:
            return MotionSample(scene="Synthetic", fps=fps, data=data)
    raise GenerationError(
        f"no valid placement found in {_MAX_ATTEMPTS} attempts for seed {cfg.seed}"
    )


def generate_raw_scene(cfg: SynthConfig) -> RawMotionSample:
    """Engine-export flavor: 75 fps, 20 joints (adds the two hand joints).

    Sampled from the same continuous trajectories as :func:`generate_scene`,
    so selecting the canonical joints and downsampling by 3 reproduces the
    25 fps scene exactly.
    """
    scene = generate_scene(dataclasses.replace(cfg, frames=cfg.frames * 3), fps=75.0)
    data18 = scene.data
    p, t = data18.shape[:2]
    raw = np.zeros((p, t, 20, 3))
    # Canonical joints occupy their raw slots; hands extend past the wrists.
    from .motion_data import DEFAULT_JOINT_MAP

    raw[:, :, list(DEFAULT_JOINT_MAP), :] = data18
    raw[:, :, 5, :] = data18[:, :, 4] + 0.6 * (data18[:, :, 4] - data18[:, :, 3])
    raw[:, :, 9, :] = data18[:, :, 7] + 0.6 * (data18[:, :, 7] - data18[:, :, 6])
    return RawMotionSample(scene=scene.scene, fps=75.0, data=raw, sample_id=scene.sample_id)


def generate_dataset(cfgs: list[SynthConfig], seed: int = 0) -> list[MotionSample]:
    """One sample per config with derived seeds and round-robin scene labels."""
    if not cfgs:
        raise ValueError("need at least one config")
    samples = []
    for i, cfg in enumerate(cfgs):
        derived = dataclasses.replace(cfg, seed=seed + i)
        sample = generate_scene(derived)
        sample.scene = ALL_SCENE_LABELS[i % len(ALL_SCENE_LABELS)]
        sample.sample_id = f"{i:04d}"
        samples.append(sample)
    return samples
