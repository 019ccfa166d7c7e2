"""Convolutional graph network for multi-person displacement forecasting.

Pipeline: frame displacements -> temporal conv downsampling + stacked
skeletal GCNs (per person) -> person-graph GCN/TCN encoder with a
distance-weighted adjacency -> stacked TCN decoder -> cosine-basis
coefficients -> inverse transform -> displacements -> absolute poses.

Forward and backward passes are written out explicitly over numpy arrays;
gradients are verified against central finite differences in the test
suite. Parameters live in an ordered name -> array dict so the optimizer
and checkpoint code can treat the model generically.

Shape conventions: P persons, T observed frames, J joints, C = 3J stacked
coordinates, N predicted frames, Tc = T - psm_kernel downsampled steps.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NumericError, FormatError
from .frequency import dct_basis
from .motion_data import Skeleton, default_skeleton

CHECKPOINT_MAGIC = b"MFKCKPT1"


@dataclass(frozen=True)
class ModelConfig:
    in_frames: int = 25
    out_frames: int = 25
    joints: int = 18
    psm_kernel: int = 10
    psm_stride: int = 1
    psm_gcn_layers: int = 12
    psm_hidden: int = 256
    encoder_layers: int = 3
    encoder_hidden: int = 512
    decoder_tcn_layers: int = 5
    tcn_kernel: int = 3
    theta: float = 1.0
    leaky_slope: float = 0.01
    root_index: int = 8
    disp_scale: float = 1000.0
    adjacency_frames: str = "last"  # "last" | "mean"
    psm_activation: str = "tanh"  # "tanh" | "identity"
    output_baseline: str = "mean_disp"  # "mean_disp" | "none"

    def __post_init__(self):
        if self.in_frames < 2 or self.out_frames < 1:
            raise ConfigError("in_frames must be >= 2 and out_frames >= 1")
        if self.joints < 2:
            raise ConfigError("need at least 2 joints")
        if self.psm_stride != 1:
            raise ConfigError("only psm_stride == 1 is supported")
        if self.psm_kernel < 1 or self.in_frames - 1 < self.psm_kernel:
            raise ConfigError(
                f"psm_kernel {self.psm_kernel} too large for {self.in_frames} input frames"
            )
        for name in ("psm_gcn_layers", "psm_hidden", "encoder_layers", "encoder_hidden",
                     "decoder_tcn_layers", "tcn_kernel"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.theta <= 0:
            raise ConfigError("theta must be positive")
        if self.leaky_slope <= 0:
            raise ConfigError("leaky_slope must be positive")
        if not 0 <= self.root_index < self.joints:
            raise ConfigError(f"root_index {self.root_index} outside [0, {self.joints})")
        if self.disp_scale <= 0:
            raise ConfigError("disp_scale must be positive")
        if self.adjacency_frames not in ("last", "mean"):
            raise ConfigError(f"unknown adjacency_frames {self.adjacency_frames!r}")
        if self.psm_activation not in ("tanh", "identity"):
            raise ConfigError(f"unknown psm_activation {self.psm_activation!r}")
        if self.output_baseline not in ("mean_disp", "none"):
            raise ConfigError(f"unknown output_baseline {self.output_baseline!r}")

    @property
    def coords(self) -> int:
        return 3 * self.joints

    @property
    def down_steps(self) -> int:
        """Temporal steps after the downsampling conv: (T-1) - kernel + 1."""
        return self.in_frames - self.psm_kernel


@dataclass(frozen=True)
class SpatialAdjacency:
    matrix: np.ndarray  # [P, P], symmetric, diagonal 1/theta


def spatial_adjacency(roots_mm: np.ndarray, theta: float) -> SpatialAdjacency:
    """Person-graph weights exp(-distance in meters) / theta."""
    roots = np.asarray(roots_mm, dtype=np.float64)
    if roots.ndim != 2 or roots.shape[1] != 3:
        raise DimensionError(f"roots must be [P, 3], got {roots.shape}")
    if not np.all(np.isfinite(roots)):
        raise NumericError("non-finite root positions in spatial adjacency")
    dist_m = np.linalg.norm(roots[:, None, :] - roots[None, :, :], axis=-1) / 1000.0
    return SpatialAdjacency(matrix=np.exp(-dist_m) / theta)


class SocialTGCNModel:
    """Parameter container plus the config and skeleton it was built for."""

    def __init__(self, cfg: ModelConfig, params: dict[str, np.ndarray], skeleton: Skeleton | None = None):
        self.cfg = cfg
        self.params = params
        self.skeleton = skeleton

    def copy(self) -> "SocialTGCNModel":
        return SocialTGCNModel(self.cfg, {k: v.copy() for k, v in self.params.items()}, self.skeleton)


def _psm_layer_dims(cfg: ModelConfig) -> list[tuple[int, int]]:
    tc, fh, layers = cfg.down_steps, cfg.psm_hidden, cfg.psm_gcn_layers
    if layers == 1:
        return [(tc, tc)]
    return [(tc, fh)] + [(fh, fh)] * (layers - 2) + [(fh, tc)]


def _decoder_channels(cfg: ModelConfig) -> list[tuple[int, int]]:
    c, fe = cfg.coords, cfg.encoder_hidden
    return [(fe if l == 0 else c, c) for l in range(cfg.decoder_tcn_layers)]


def _chain_skeleton_adjacency(n_joints: int) -> np.ndarray:
    adj = np.zeros((n_joints, n_joints))
    for j in range(n_joints - 1):
        adj[j, j + 1] = adj[j + 1, j] = 1.0
    return adj


def _normalized_bone_adjacency(cfg: ModelConfig, skeleton: Skeleton | None) -> np.ndarray:
    """Symmetric-normalized joint graph expanded to per-coordinate nodes."""
    j = cfg.joints
    adj = np.zeros((j, j))
    if skeleton is not None and skeleton.n_joints == j:
        for a, b in skeleton.bone_edges:
            adj[a, b] = adj[b, a] = 1.0
    else:
        adj = _chain_skeleton_adjacency(j)
    adj += np.eye(j)
    deg = adj.sum(axis=1)
    norm = adj / np.sqrt(np.outer(deg, deg))
    return np.kron(norm, np.eye(3))


def build_model(cfg: ModelConfig, seed: int, skeleton: Skeleton | None = None) -> SocialTGCNModel:
    """Seeded uniform fan-in initialization; biases start at zero."""
    if skeleton is None and cfg.joints == 18:
        skeleton = default_skeleton()
    if skeleton is not None and cfg.root_index >= cfg.joints:
        raise ConfigError("root_index incompatible with joint count")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    c, k = cfg.coords, cfg.tcn_kernel
    params: dict[str, np.ndarray] = {}

    def uniform(shape, fan_in, gain=1.0):
        # Variance-preserving uniform bound; gain 2 compensates leaky-relu.
        bound = np.sqrt(3.0 * gain / fan_in)
        return rng.uniform(-bound, bound, size=shape)

    params["psm_conv_w"] = uniform((c, c, cfg.psm_kernel), c * cfg.psm_kernel)
    params["psm_conv_b"] = np.zeros(c)
    a_base = _normalized_bone_adjacency(cfg, skeleton)
    for l, (fin, fout) in enumerate(_psm_layer_dims(cfg)):
        params[f"psm_a{l}"] = a_base + rng.uniform(-0.01, 0.01, size=(c, c))
        params[f"psm_w{l}"] = uniform((fin, fout), fin)
        params[f"psm_b{l}"] = np.zeros(fout)
    fe = cfg.encoder_hidden
    for l in range(cfg.encoder_layers):
        fin = c if l == 0 else fe
        params[f"enc_w{l}"] = uniform((fin, fe), fin, gain=2.0)
        params[f"enc_b{l}"] = np.zeros(fe)
        params[f"enc_tw{l}"] = uniform((fe, fe, k), fe * k, gain=2.0)
        params[f"enc_tb{l}"] = np.zeros(fe)
    for l, (cin, cout) in enumerate(_decoder_channels(cfg)):
        params[f"dec_tw{l}"] = uniform((cout, cin, k), cin * k, gain=2.0)
        params[f"dec_tb{l}"] = np.zeros(cout)
    # Per-coordinate temporal expansion head, attenuated so that initial
    # predictions sit at the output baseline and the head learns corrections.
    params["head_w"] = uniform((cfg.out_frames, cfg.down_steps, c), cfg.down_steps, gain=1e-6)
    params["head_b"] = np.zeros((cfg.out_frames, c))
    return SocialTGCNModel(cfg, params, skeleton)


def param_count(model: SocialTGCNModel) -> int:
    return int(sum(p.size for p in model.params.values()))


# ---------------------------------------------------------------------------
# Layer primitives (explicit forward/backward pairs)
# ---------------------------------------------------------------------------


def conv1d_valid(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x [P, T, Cin], w [Cout, Cin, K] -> [P, T-K+1, Cout]."""
    k = w.shape[2]
    t_out = x.shape[1] - k + 1
    if t_out < 1:
        raise DimensionError(f"kernel {k} longer than sequence {x.shape[1]}")
    y = np.broadcast_to(b, (x.shape[0], t_out, w.shape[0])).copy()
    for i in range(k):
        y += x[:, i : i + t_out, :] @ w[:, :, i].T
    return y


def conv1d_valid_backward(x, w, dy):
    k = w.shape[2]
    t_out = dy.shape[1]
    dx = np.zeros_like(x)
    dw = np.zeros_like(w)
    for i in range(k):
        dw[:, :, i] = np.einsum("pto,pti->oi", dy, x[:, i : i + t_out, :])
        dx[:, i : i + t_out, :] += dy @ w[:, :, i]
    db = dy.sum(axis=(0, 1))
    return dx, dw, db


def _pad_causal(z: np.ndarray, k: int) -> np.ndarray:
    pad = np.zeros((k - 1,) + z.shape[1:])
    return np.concatenate([pad, z], axis=0)


def causal_conv(z: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Temporal conv on [T, P, Cin] with left zero padding -> [T, P, Cout]."""
    zp = _pad_causal(z, w.shape[2]).transpose(1, 0, 2)
    return conv1d_valid(zp, w, b).transpose(1, 0, 2)


def causal_conv_backward(z, w, dy):
    zp = _pad_causal(z, w.shape[2]).transpose(1, 0, 2)
    dxp, dw, db = conv1d_valid_backward(zp, w, dy.transpose(1, 0, 2))
    dz = dxp.transpose(1, 0, 2)[w.shape[2] - 1 :]
    return dz, dw, db


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def _leaky_grad(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, 1.0, slope)


def person_mix(a: np.ndarray, m: np.ndarray) -> np.ndarray:
    """out[t, p, f] = sum_q a[p, q] * m[t, q, f], accumulated in sorted order.

    Sorting the addends before reduction makes the sum independent of person
    ordering, which keeps predictions bit-exact under person permutation.
    """
    terms = a[None, :, :, None] * m[:, None, :, :]  # [T, Pout, Pin, F]
    return np.sort(terms, axis=2).sum(axis=2)


def person_mix_backward(a: np.ndarray, dout: np.ndarray) -> np.ndarray:
    return np.einsum("pq,tpg->tqg", a, dout)


# ---------------------------------------------------------------------------
# Full network forward/backward
# ---------------------------------------------------------------------------


def _psm_act(cfg: ModelConfig, pre: np.ndarray) -> np.ndarray:
    return np.tanh(pre) if cfg.psm_activation == "tanh" else pre


def adjacency_for(model: SocialTGCNModel, observed: np.ndarray) -> SpatialAdjacency:
    cfg = model.cfg
    roots = observed[:, :, cfg.root_index, :]
    if cfg.adjacency_frames == "last":
        return spatial_adjacency(roots[:, -1], cfg.theta)
    per_frame = [spatial_adjacency(roots[:, t], cfg.theta).matrix for t in range(roots.shape[1])]
    return SpatialAdjacency(matrix=np.mean(per_frame, axis=0))


def forward_full(model: SocialTGCNModel, observed: np.ndarray):
    """Run the whole pipeline.

    observed: [P, in_frames, J, 3] mm. Returns (poses [P, N, J, 3] mm,
    disp_mm [P, N, J, 3], cache) where cache holds every intermediate the
    backward pass needs.
    """
    cfg = model.cfg
    prm = model.params
    observed = np.asarray(observed, dtype=np.float64)
    if observed.ndim != 4 or observed.shape[1] != cfg.in_frames or observed.shape[2] != cfg.joints:
        raise DimensionError(
            f"expected observed [P, {cfg.in_frames}, {cfg.joints}, 3], got {observed.shape}"
        )
    p = observed.shape[0]
    c = cfg.coords
    cache: dict = {"observed": observed}

    disp_mm = np.diff(observed, axis=1)  # [P, T-1, J, 3]
    x = disp_mm.reshape(p, cfg.in_frames - 1, c) / cfg.disp_scale
    cache["x"] = x

    conv_out = conv1d_valid(x, prm["psm_conv_w"], prm["psm_conv_b"])  # [P, Tc, C]
    cache["conv_out"] = conv_out

    h = conv_out.transpose(0, 2, 1)  # [P, C, Tc]: nodes are coordinates
    layers = []
    dims = _psm_layer_dims(cfg)
    for l in range(len(dims)):
        a, w, b = prm[f"psm_a{l}"], prm[f"psm_w{l}"], prm[f"psm_b{l}"]
        m = h @ w
        pre = a[None] @ m + b
        out = _psm_act(cfg, pre)
        residual = 0 < l < len(dims) - 1
        layers.append({"h": h, "m": m, "out": out, "residual": residual})
        h = h + out if residual else out
    cache["psm_layers"] = layers
    z = h.transpose(2, 0, 1)  # [Tc, P, C]
    cache["z_psm"] = z

    a_spa = adjacency_for(model, observed).matrix
    cache["a_spa"] = a_spa

    enc_layers = []
    for l in range(cfg.encoder_layers):
        w, b = prm[f"enc_w{l}"], prm[f"enc_b{l}"]
        tw, tb = prm[f"enc_tw{l}"], prm[f"enc_tb{l}"]
        m = z @ w
        pre_g = person_mix(a_spa, m) + b
        g = _leaky(pre_g, cfg.leaky_slope)
        pre_t = causal_conv(g, tw, tb)
        # Residual temporal block (channel counts always match here).
        out = _leaky(pre_t, cfg.leaky_slope) + g
        enc_layers.append({"z": z, "pre_g": pre_g, "g": g, "pre_t": pre_t})
        z = out
    cache["enc_layers"] = enc_layers

    dec_layers = []
    for l in range(cfg.decoder_tcn_layers):
        tw, tb = prm[f"dec_tw{l}"], prm[f"dec_tb{l}"]
        pre = causal_conv(z, tw, tb)
        residual = pre.shape == z.shape
        dec_layers.append({"z": z, "pre": pre, "residual": residual})
        z = _leaky(pre, cfg.leaky_slope) + (z if residual else 0.0)
    cache["dec_layers"] = dec_layers
    cache["z_dec"] = z  # [Tc, P, C]

    coeffs = np.einsum("ntc,tpc->pnc", prm["head_w"], z) + prm["head_b"][None]
    cache["coeffs"] = coeffs

    binv = dct_basis(cfg.out_frames).inverse_matrix
    disp_scaled = np.einsum("tl,plc->ptc", binv, coeffs)  # [P, N, C]
    disp_pred_mm = (disp_scaled * cfg.disp_scale).reshape(p, cfg.out_frames, cfg.joints, 3)
    if cfg.output_baseline == "mean_disp":
        # Data-path residual: the net predicts deviations around each person's
        # mean observed displacement (parameter-free, so backward is untouched).
        disp_pred_mm = disp_pred_mm + disp_mm.mean(axis=1, keepdims=True)
    anchor = observed[:, -1]
    poses = anchor[:, None] + np.cumsum(disp_pred_mm, axis=1)
    cache["anchor"] = anchor

    if not np.isfinite(poses).all():
        raise NumericError(f"non-finite values in stage '{_first_bad_stage(cache)}'")
    return poses, disp_pred_mm, cache


def _first_bad_stage(cache: dict) -> str:
    checks = [
        ("input", cache["x"]),
        ("psm_conv", cache["conv_out"]),
        ("psm_gcn", cache["z_psm"]),
        ("spatial_adjacency", cache["a_spa"]),
    ]
    for l, layer in enumerate(cache.get("enc_layers", [])):
        checks.append((f"encoder_{l}", layer["pre_t"]))
    for l, layer in enumerate(cache.get("dec_layers", [])):
        checks.append((f"decoder_{l}", layer["pre"]))
    checks.append(("head", cache.get("coeffs", np.zeros(1))))
    for name, arr in checks:
        if not np.isfinite(arr).all():
            return name
    return "reconstruction"


def backward_from_disp(model: SocialTGCNModel, cache: dict, ddisp_mm: np.ndarray) -> dict[str, np.ndarray]:
    """Parameter gradients given dLoss/d(predicted mm displacements)."""
    cfg = model.cfg
    prm = model.params
    p = ddisp_mm.shape[0]
    c = cfg.coords
    grads = {name: np.zeros_like(arr) for name, arr in prm.items()}

    dcoeffs_from_disp = ddisp_mm.reshape(p, cfg.out_frames, c) * cfg.disp_scale
    binv = dct_basis(cfg.out_frames).inverse_matrix
    dcoeffs = np.einsum("tl,ptc->plc", binv, dcoeffs_from_disp)

    z_dec = cache["z_dec"]
    grads["head_w"] = np.einsum("pnc,tpc->ntc", dcoeffs, z_dec)
    grads["head_b"] = dcoeffs.sum(axis=0)
    dz = np.einsum("ntc,pnc->tpc", prm["head_w"], dcoeffs)

    for l in range(cfg.decoder_tcn_layers - 1, -1, -1):
        layer = cache["dec_layers"][l]
        dpre = dz * _leaky_grad(layer["pre"], cfg.leaky_slope)
        dskip = dz if layer["residual"] else 0.0
        dz, dw, db = causal_conv_backward(layer["z"], prm[f"dec_tw{l}"], dpre)
        dz = dz + dskip
        grads[f"dec_tw{l}"] = dw
        grads[f"dec_tb{l}"] = db

    a_spa = cache["a_spa"]
    for l in range(cfg.encoder_layers - 1, -1, -1):
        layer = cache["enc_layers"][l]
        dpre_t = dz * _leaky_grad(layer["pre_t"], cfg.leaky_slope)
        dg, dtw, dtb = causal_conv_backward(layer["g"], prm[f"enc_tw{l}"], dpre_t)
        dg = dg + dz  # residual skip around the temporal block
        grads[f"enc_tw{l}"] = dtw
        grads[f"enc_tb{l}"] = dtb
        dpre_g = dg * _leaky_grad(layer["pre_g"], cfg.leaky_slope)
        dm = person_mix_backward(a_spa, dpre_g)
        grads[f"enc_w{l}"] = np.einsum("tpf,tpg->fg", layer["z"], dm)
        grads[f"enc_b{l}"] = dpre_g.sum(axis=(0, 1))
        dz = dm @ prm[f"enc_w{l}"].T

    dh = dz.transpose(1, 2, 0)  # [P, C, Tc]
    for l in range(len(cache["psm_layers"]) - 1, -1, -1):
        layer = cache["psm_layers"][l]
        a, w = prm[f"psm_a{l}"], prm[f"psm_w{l}"]
        if cfg.psm_activation == "tanh":
            dpre = dh * (1.0 - layer["out"] ** 2)
        else:
            dpre = dh
        grads[f"psm_a{l}"] = np.einsum("png,pmg->nm", dpre, layer["m"])
        grads[f"psm_b{l}"] = dpre.sum(axis=(0, 1))
        dm = a.T[None] @ dpre
        grads[f"psm_w{l}"] = np.einsum("pnf,png->fg", layer["h"], dm)
        dh_next = dm @ w.T
        if layer["residual"]:
            dh_next = dh_next + dh
        dh = dh_next

    dconv_out = dh.transpose(0, 2, 1)  # [P, Tc, C]
    _, dw, db = conv1d_valid_backward(cache["x"], prm["psm_conv_w"], dconv_out)
    grads["psm_conv_w"] = dw
    grads["psm_conv_b"] = db
    return grads


# ---------------------------------------------------------------------------
# Prediction entry points and spec'd sub-forwards
# ---------------------------------------------------------------------------


def predict(model: SocialTGCNModel, observed: np.ndarray) -> np.ndarray:
    """Forecast out_frames of absolute poses [P, N, J, 3] in mm."""
    poses, _, _ = forward_full(model, observed)
    return poses


def predict_autoregressive(model: SocialTGCNModel, observed: np.ndarray, steps: int) -> np.ndarray:
    """Chain predictions, feeding the last in_frames back in: [P, steps*N, J, 3]."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    cfg = model.cfg
    if cfg.out_frames < cfg.in_frames and steps > 1:
        raise ConfigError(
            "autoregressive prediction needs out_frames >= in_frames to re-feed output"
        )
    chunks = []
    current = np.asarray(observed, dtype=np.float64)
    for _ in range(steps):
        pred = predict(model, current)
        chunks.append(pred)
        current = pred[:, -cfg.in_frames :]
    return np.concatenate(chunks, axis=1)


def psm_forward(model: SocialTGCNModel, disp: np.ndarray) -> np.ndarray:
    """Per-person refinement: [P, T-1, C] displacements -> [P, Tc, C] features."""
    cfg = model.cfg
    disp = np.asarray(disp, dtype=np.float64)
    if disp.ndim != 3 or disp.shape[1] != cfg.in_frames - 1 or disp.shape[2] != cfg.coords:
        raise DimensionError(
            f"expected [P, {cfg.in_frames - 1}, {cfg.coords}], got {disp.shape}"
        )
    conv_out = conv1d_valid(disp, model.params["psm_conv_w"], model.params["psm_conv_b"])
    h = conv_out.transpose(0, 2, 1)
    dims = _psm_layer_dims(cfg)
    for l in range(len(dims)):
        a, w, b = model.params[f"psm_a{l}"], model.params[f"psm_w{l}"], model.params[f"psm_b{l}"]
        out = _psm_act(cfg, a[None] @ (h @ w) + b)
        h = h + out if 0 < l < len(dims) - 1 else out
    return h.transpose(0, 2, 1)  # [P, Tc, C]


def encoder_forward(model: SocialTGCNModel, features: np.ndarray, a_spa: SpatialAdjacency | np.ndarray) -> np.ndarray:
    """Social encoding: [Tc, P, C] features -> [Tc, P, encoder_hidden]."""
    cfg = model.cfg
    z = np.asarray(features, dtype=np.float64)
    a = a_spa.matrix if isinstance(a_spa, SpatialAdjacency) else np.asarray(a_spa)
    if a.shape != (z.shape[1], z.shape[1]):
        raise DimensionError(f"adjacency {a.shape} does not match {z.shape[1]} persons")
    for l in range(cfg.encoder_layers):
        g = _leaky(
            person_mix(a, z @ model.params[f"enc_w{l}"]) + model.params[f"enc_b{l}"],
            cfg.leaky_slope,
        )
        z = _leaky(
            causal_conv(g, model.params[f"enc_tw{l}"], model.params[f"enc_tb{l}"]),
            cfg.leaky_slope,
        ) + g
    return z


def decoder_forward(model: SocialTGCNModel, embedding: np.ndarray) -> np.ndarray:
    """Decode to per-coordinate coefficient stacks: [P, N, C]."""
    cfg = model.cfg
    z = np.asarray(embedding, dtype=np.float64)
    for l in range(cfg.decoder_tcn_layers):
        pre = causal_conv(z, model.params[f"dec_tw{l}"], model.params[f"dec_tb{l}"])
        z = _leaky(pre, cfg.leaky_slope) + (z if pre.shape == z.shape else 0.0)
    return np.einsum("ntc,tpc->pnc", model.params["head_w"], z) + model.params["head_b"][None]


# ---------------------------------------------------------------------------
# Checkpoint container
# ---------------------------------------------------------------------------


def save_checkpoint(model: SocialTGCNModel, path) -> None:
    """Binary container: magic, JSON header (config + names/shapes), LE float64 blob."""
    header = {
        "config": dataclasses.asdict(model.cfg),
        "params": [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        for arr in model.params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> SocialTGCNModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: bad checkpoint magic {magic!r}")
        header_len = int.from_bytes(fh.read(8), "little")
        try:
            header = json.loads(fh.read(header_len))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: corrupt checkpoint header") from exc
        cfg = ModelConfig(**header["config"])
        params: dict[str, np.ndarray] = {}
        for spec in header["params"]:
            shape = tuple(spec["shape"])
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise FormatError(f"{path}: truncated parameter {spec['name']}")
            params[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    skeleton = default_skeleton() if cfg.joints == 18 else None
    return SocialTGCNModel(cfg, params, skeleton)
