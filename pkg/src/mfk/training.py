"""Losses, optimizer, gradient verification, and the training loop.

The displacement loss is a mean squared Euclidean error over predicted
frame-to-frame displacements; the pose constraint is a root-aligned joint
position error on the reconstructed absolute poses (the cumulative sum back
to pose space sits inside the differentiated graph). Total objective:
joint = rec + alpha * pose.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError, NumericError
from .model import (
    ModelConfig,
    SocialTGCNModel,
    backward_from_disp,
    build_model,
    forward_full,
)
from .motion_data import DatasetSplit, TrainingWindow, window_samples

_NORM_FLOOR = 1e-12


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 3e-4
    alpha: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    grad_clip: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainHistory:
    rec: list[float] = field(default_factory=list)
    pose: list[float] = field(default_factory=list)
    joint: list[float] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)
    steps: int = 0


def loss_rec(pred_disp: np.ndarray, gt_disp: np.ndarray) -> float:
    """Mean over persons/frames/joints of squared displacement error (mm^2)."""
    pred_disp = np.asarray(pred_disp, dtype=np.float64)
    gt_disp = np.asarray(gt_disp, dtype=np.float64)
    if pred_disp.shape != gt_disp.shape:
        raise DimensionError(f"shape mismatch: {pred_disp.shape} vs {gt_disp.shape}")
    diff = pred_disp - gt_disp
    return float((diff**2).sum(axis=-1).mean())


def _loss_rec_grad(pred_disp, gt_disp):
    n = pred_disp.shape[0] * pred_disp.shape[1] * pred_disp.shape[2]
    return 2.0 * (pred_disp - gt_disp) / n


def loss_pose(pred_poses: np.ndarray, gt_poses: np.ndarray, root_index: int) -> float:
    """Root-aligned joint error in mm, averaged over persons, frames, joints."""
    pred_poses = np.asarray(pred_poses, dtype=np.float64)
    gt_poses = np.asarray(gt_poses, dtype=np.float64)
    if pred_poses.shape != gt_poses.shape:
        raise DimensionError(f"shape mismatch: {pred_poses.shape} vs {gt_poses.shape}")
    v = _aligned_diff(pred_poses, gt_poses, root_index)
    return float(np.linalg.norm(v, axis=-1).mean())


def _aligned_diff(pred, gt, root_index):
    p_al = pred - pred[:, :, root_index : root_index + 1, :]
    g_al = gt - gt[:, :, root_index : root_index + 1, :]
    return p_al - g_al


def _loss_pose_grad(pred_poses, gt_poses, root_index):
    v = _aligned_diff(pred_poses, gt_poses, root_index)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    unit = np.where(norms > _NORM_FLOOR, v / np.maximum(norms, _NORM_FLOOR), 0.0)
    n = v.shape[0] * v.shape[1] * v.shape[2]
    dv = unit / n
    dpred = dv.copy()
    dpred[:, :, root_index, :] -= dv.sum(axis=2)
    return dpred


def loss_joint(rec: float, pose: float, alpha: float) -> float:
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    return rec + alpha * pose


def window_gt_displacements(window: TrainingWindow) -> np.ndarray:
    """Target displacements, anchored at the last observed frame."""
    full = np.concatenate([window.input[:, -1:], window.target], axis=1)
    return np.diff(full, axis=1)


def backward(model: SocialTGCNModel, windows: Sequence[TrainingWindow], alpha: float = 0.1):
    """Mean loss and parameter gradients of the joint objective over a batch.

    Returns (losses, grads) where losses = (rec, pose, joint). Windows are
    processed in order and gradients accumulated with a fixed summation
    order, so results are deterministic.
    """
    if not windows:
        raise ValueError("empty batch")
    grads = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    rec_total = pose_total = 0.0
    root = model.cfg.root_index
    for window in windows:
        poses, disp_mm, cache = forward_full(model, window.input)
        gt_disp = window_gt_displacements(window)
        if gt_disp.shape != disp_mm.shape:
            raise DimensionError(
                f"window target shape {window.target.shape} incompatible with "
                f"out_frames {model.cfg.out_frames}"
            )
        rec = loss_rec(disp_mm, gt_disp)
        pose = loss_pose(poses, window.target, root)
        if not np.isfinite(rec) or not np.isfinite(pose):
            raise NumericError("non-finite loss in stage 'loss'")
        rec_total += rec
        pose_total += pose

        ddisp = _loss_rec_grad(disp_mm, gt_disp)
        dposes = alpha * _loss_pose_grad(poses, window.target, root)
        # poses = anchor + cumsum(disp): reverse-accumulate pose gradients.
        ddisp = ddisp + np.cumsum(dposes[:, ::-1], axis=1)[:, ::-1]
        for name, g in backward_from_disp(model, cache, ddisp).items():
            grads[name] += g
    b = float(len(windows))
    for name in grads:
        grads[name] /= b
    rec_mean = rec_total / b
    pose_mean = pose_total / b
    return (rec_mean, pose_mean, loss_joint(rec_mean, pose_mean, alpha)), grads


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_model(cls, model: SocialTGCNModel) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in model.params.items()},
            v={k: np.zeros_like(p) for k, p in model.params.items()},
        )


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    total = np.sqrt(sum(float((g**2).sum()) for g in grads.values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def adam_step(
    model: SocialTGCNModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> None:
    """In-place Adam update with bias correction; clips first when configured."""
    for g in grads.values():
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient passed to optimizer")
    if cfg.grad_clip is not None:
        grads = clip_gradients(grads, cfg.grad_clip)
    state.t += 1
    b1t = 1.0 - cfg.beta1**state.t
    b2t = 1.0 - cfg.beta2**state.t
    for name, p in model.params.items():
        g = grads[name]
        state.m[name] = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        state.v[name] = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * g**2
        m_hat = state.m[name] / b1t
        v_hat = state.v[name] / b2t
        p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)


def train(
    model: SocialTGCNModel,
    data: DatasetSplit | Sequence[TrainingWindow],
    cfg: TrainConfig,
    window_stride: int | None = None,
) -> tuple[SocialTGCNModel, TrainHistory]:
    """Seeded mini-batch training on the joint objective.

    Accepts either prepared windows or a dataset split (train side gets
    windowed with the model's frame counts).
    """
    if isinstance(data, DatasetSplit):
        windows = window_samples(
            data.train,
            in_len=model.cfg.in_frames,
            out_len=model.cfg.out_frames,
            stride=window_stride,
        ).windows
    else:
        windows = list(data)
    if cfg.epochs > 0 and not windows:
        raise ValueError("no training windows")
    history = TrainHistory()
    state = AdamState.for_model(model)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(cfg.seed)))
    for epoch in range(cfg.epochs):
        start = time.perf_counter()
        order = rng.permutation(len(windows))
        rec_sum = pose_sum = joint_sum = 0.0
        n_batches = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [windows[i] for i in order[lo : lo + cfg.batch_size]]
            try:
                (rec, pose, joint), grads = backward(model, batch, alpha=cfg.alpha)
                adam_step(model, grads, state, cfg)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch}, step {n_batches}: {exc}") from exc
            rec_sum += rec
            pose_sum += pose
            joint_sum += joint
            n_batches += 1
        for p in model.params.values():
            if not np.isfinite(p).all():
                raise NumericError(f"non-finite parameters after epoch {epoch}")
        history.rec.append(rec_sum / max(n_batches, 1))
        history.pose.append(pose_sum / max(n_batches, 1))
        history.joint.append(joint_sum / max(n_batches, 1))
        history.seconds.append(time.perf_counter() - start)
        history.steps += n_batches
    return model, history


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    step: float
    truncation_suspect: bool
    per_param: dict[str, float]


def micro_config(**overrides) -> ModelConfig:
    """Small configuration suitable for exhaustive finite-difference sweeps.

    disp_scale is lowered so unit activations sit far from the leaky-relu
    kinks relative to the difference step.
    """
    base = dict(
        in_frames=12,
        out_frames=6,
        joints=4,
        psm_kernel=4,
        psm_gcn_layers=3,
        psm_hidden=8,
        encoder_layers=2,
        encoder_hidden=10,
        decoder_tcn_layers=2,
        root_index=0,
        disp_scale=100.0,
    )
    base.update(overrides)
    return ModelConfig(**base)


def _synthetic_window(cfg: ModelConfig, rng: np.random.Generator, persons: int = 2) -> TrainingWindow:
    total = cfg.in_frames + cfg.out_frames
    walk = np.cumsum(rng.normal(scale=60.0, size=(persons, total, cfg.joints, 3)), axis=1)
    walk += rng.uniform(-500.0, 500.0, size=(persons, 1, 1, 3))
    return TrainingWindow(
        input=walk[:, : cfg.in_frames],
        target=walk[:, cfg.in_frames :],
        scene="Synthetic",
        sample_id="gradcheck",
        start=0,
    )


def grad_check(
    model_cfg: ModelConfig,
    seed: int,
    step: float = 1e-5,
    alpha: float = 0.1,
    persons: int = 2,
) -> GradCheckReport:
    """Central finite differences against the analytic gradient, per parameter."""
    model = build_model(model_cfg, seed)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed + 1)))
    window = _synthetic_window(model_cfg, rng, persons=persons)

    def total_loss() -> float:
        poses, disp_mm, _ = forward_full(model, window.input)
        rec = loss_rec(disp_mm, window_gt_displacements(window))
        pose = loss_pose(poses, window.target, model_cfg.root_index)
        return loss_joint(rec, pose, alpha)

    _, grads = backward(model, [window], alpha=alpha)
    per_param: dict[str, float] = {}
    worst = ("", 0.0)
    for name, arr in model.params.items():
        analytic = grads[name]
        flat = arr.reshape(-1)
        worst_here = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = total_loss()
            flat[i] = orig - step
            down = total_loss()
            flat[i] = orig
            numeric = (up - down) / (2.0 * step)
            a = analytic.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            rel = abs(a - numeric) / denom
            worst_here = max(worst_here, rel)
        per_param[name] = worst_here
        if worst_here >= worst[1]:
            worst = (name, worst_here)
    return GradCheckReport(
        max_rel_error=worst[1],
        worst_param=worst[0],
        step=step,
        truncation_suspect=step >= 1e-2 and worst[1] > 1e-6,
        per_param=per_param,
    )
