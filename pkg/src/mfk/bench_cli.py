"""Command-line pipeline: synth | preprocess | train | eval | predict | report.

Configuration resolution order (later wins): built-in defaults, config file
sections, the MFK_SEED environment variable (seed only), command flags.
Dotted flags address any config key directly, e.g. `--model.psm_hidden 128`
or `--train.learning_rate 1e-3`. Every run echoes its fully resolved
configuration so it can be replayed from that file alone.

Exit codes: 0 success, 1 runtime/numeric failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as metrics_mod
from .errors import ConfigError, MfkError, ParseError
from .metrics import (
    FrameSchedule,
    MetricReport,
    baseline_constant_velocity,
    baseline_zero_velocity,
    merge_reports,
    pose_windows,
)
from .model import (
    ModelConfig,
    build_model,
    load_checkpoint,
    param_count,
    predict,
    predict_autoregressive,
    save_checkpoint,
)
from .motion_data import (
    ManifestEntry,
    downsample,
    load_manifest_samples,
    load_scene_json,
    read_manifest,
    sample_filename,
    save_sample_npy,
    select_joints,
    split_dataset,
    window_samples,
    write_manifest,
)
from .synth_gen import SynthConfig, generate_dataset, generate_raw_scene
from .training import TrainConfig, train


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/latest"
    synth: SynthConfig = field(default_factory=SynthConfig)
    samples: int = 12
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    window_stride: int | None = None
    eval_steps: int = 2  # autoregressive depth during evaluation
    fps: float = 25.0


_SECTION_TYPES = {"synth": SynthConfig, "model": ModelConfig, "train": TrainConfig}
_RUN_KEYS = {
    "seed": int,
    "out_dir": str,
    "samples": int,
    "window_stride": lambda v: None if v in ("", "none") else int(v),
    "eval_steps": int,
    "fps": float,
}


def _coerce(current_value, text: str):
    if isinstance(current_value, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(current_value, int):
        return int(text)
    if isinstance(current_value, float):
        return float(text)
    if current_value is None:
        try:
            return int(text)
        except ValueError:
            return float(text)
    return text


def _apply_setting(cfg: RunConfig, dotted: str, value: str) -> RunConfig:
    if "." in dotted:
        section, key = dotted.split(".", 1)
        if section not in _SECTION_TYPES:
            raise ConfigError(f"unknown config section {section!r}")
        sub = getattr(cfg, section)
        if not hasattr(sub, key):
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        coerced = _coerce(getattr(sub, key), value)
        try:
            return dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **{key: coerced})})
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{dotted} = {value}: {exc}") from exc
    if dotted not in _RUN_KEYS:
        raise ConfigError(f"unknown top-level config key {dotted!r}")
    return dataclasses.replace(cfg, **{dotted: _RUN_KEYS[dotted](value)})


def read_config_file(path) -> list[tuple[str, str]]:
    """Sectioned key=value text: `[section]` headers then `key = value` lines."""
    settings: list[tuple[str, str]] = []
    section = ""
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ParseError(f"{path}: line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        dotted = f"{section}.{key}" if section and section != "run" else key
        settings.append((dotted, value.strip()))
    return settings


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for dotted, value in read_config_file(args.config):
            cfg = _apply_setting(cfg, dotted, value)
    env_seed = os.environ.get("MFK_SEED")
    if env_seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(env_seed))
        cfg = dataclasses.replace(cfg, synth=dataclasses.replace(cfg.synth, seed=int(env_seed)))
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, seed=int(env_seed)))
    for dotted, value in getattr(args, "overrides", []):
        cfg = _apply_setting(cfg, dotted, value)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Render the resolved config in the same format `--config` accepts."""
    lines = ["[run]"]
    for key in _RUN_KEYS:
        value = getattr(cfg, key)
        lines.append(f"{key} = {'' if value is None else value}")
    for section in _SECTION_TYPES:
        lines.append(f"[{section}]")
        for f in dataclasses.fields(getattr(cfg, section)):
            value = getattr(getattr(cfg, section), f.name)
            lines.append(f"{f.name} = {'' if value is None else value}")
    return "\n".join(lines) + "\n"


def _echo_config(cfg: RunConfig, out_dir: Path, log) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    text = dump_config(cfg)
    (out_dir / "resolved_config.ini").write_text(text)
    log("resolved configuration:")
    for line in text.rstrip().splitlines():
        log("  " + line)


class _Logger:
    def __init__(self, path: Path | None):
        self.path = path
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.fh = open(path, "a")
        else:
            self.fh = None

    def __call__(self, message: str) -> None:
        print(message)
        if self.fh is not None:
            stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
            self.fh.write(f"{stamp} {message}\n")
            self.fh.flush()

    def close(self):
        if self.fh is not None:
            self.fh.close()


def _split_flag_overrides(argv: list[str]) -> tuple[list[str], list[tuple[str, str]]]:
    """Pull out `--section.key value` flags argparse cannot declare statically."""
    plain: list[str] = []
    overrides: list[tuple[str, str]] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token.startswith("--") and ("." in token):
            name = token[2:]
            if "=" in name:
                key, _, value = name.partition("=")
                overrides.append((key, value))
                i += 1
                continue
            if i + 1 >= len(argv):
                raise ConfigError(f"flag {token} needs a value")
            overrides.append((name, argv[i + 1]))
            i += 2
            continue
        plain.append(token)
        i += 1
    return plain, overrides


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    out_dir = Path(args.out or cfg.out_dir)
    log = _Logger(out_dir / "synth.log" if args.out or cfg.out_dir else None)
    _echo_config(cfg, out_dir, log)
    n = cfg.samples if args.samples is None else args.samples
    synth_cfg = cfg.synth
    if args.persons is not None:
        synth_cfg = dataclasses.replace(synth_cfg, persons=args.persons)
    if args.frames is not None:
        synth_cfg = dataclasses.replace(synth_cfg, frames=args.frames)
    seed = cfg.seed if args.seed is None else args.seed

    entries = []
    if args.format == "json":
        from .motion_data import write_scene_json

        for i in range(n):
            raw = generate_raw_scene(dataclasses.replace(synth_cfg, seed=seed + i))
            raw.sample_id = f"{i:04d}"
            path = out_dir / f"raw_{raw.sample_id}.json"
            write_scene_json(raw, path)
            log(f"wrote {path}")
        log(f"generated {n} raw JSON scene(s)")
        return 0

    samples = generate_dataset([synth_cfg] * n, seed=seed) if n > 0 else []
    split = split_dataset(samples, seed=seed) if samples else None
    train_ids = {s.sample_id for s in split.train} if split else set()
    for sample in samples:
        path = save_sample_npy(sample, out_dir)
        entries.append(
            ManifestEntry(
                sample_id=sample.sample_id,
                scene=sample.scene,
                split="train" if sample.sample_id in train_ids else "test",
                file=path.name,
                fps=sample.fps,
                persons=sample.n_persons,
                frames=sample.n_frames,
            )
        )
    write_manifest(entries, out_dir / "manifest.txt")
    log(f"wrote {len(entries)} sample(s) + manifest to {out_dir}")
    return 0


def cmd_preprocess(args) -> int:
    cfg = resolve_config(args)
    out_dir = Path(args.out)
    log = _Logger(out_dir / "preprocess.log")
    _echo_config(cfg, out_dir, log)
    raw_paths = sorted(Path(args.input).glob("*.json"))
    if not raw_paths:
        print(f"error: no JSON scene files under {args.input}", file=sys.stderr)
        return 2
    samples = []
    for path in raw_paths:
        raw = load_scene_json(path)
        sample = select_joints(raw)
        factor = max(int(round(sample.fps / cfg.fps)), 1)
        if factor > 1:
            sample = downsample(sample, factor)
        samples.append(sample)
        log(f"ingested {path.name}: P={sample.n_persons} T={sample.n_frames} @{sample.fps}fps")
    split = split_dataset(samples, seed=cfg.seed)
    train_ids = {s.sample_id for s in split.train}
    entries = []
    for sample in samples:
        path = save_sample_npy(sample, out_dir)
        entries.append(
            ManifestEntry(
                sample_id=sample.sample_id,
                scene=sample.scene,
                split="train" if sample.sample_id in train_ids else "test",
                file=path.name,
                fps=sample.fps,
                persons=sample.n_persons,
                frames=sample.n_frames,
            )
        )
    write_manifest(entries, out_dir / "manifest.txt")
    log(f"preprocessed {len(entries)} scene(s) into {out_dir}")
    return 0


def _manifest_or_usage(path_str: str | None):
    if not path_str or not Path(path_str).exists():
        raise _Usage(f"manifest not found: {path_str}")
    return Path(path_str)


class _Usage(Exception):
    pass


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    if args.lr is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, learning_rate=args.lr))
    if args.epochs is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, epochs=args.epochs))
    if args.batch is not None:
        cfg = dataclasses.replace(cfg, train=dataclasses.replace(cfg.train, batch_size=args.batch))
    manifest = _manifest_or_usage(args.manifest)
    out_dir = Path(args.out or cfg.out_dir)
    log = _Logger(out_dir / "train.log")
    _echo_config(cfg, out_dir, log)
    train_samples = load_manifest_samples(manifest, args.data, split="train")
    if not train_samples:
        raise _Usage(f"no training samples in manifest {manifest}")
    windows = window_samples(
        train_samples,
        in_len=cfg.model.in_frames,
        out_len=cfg.model.out_frames,
        stride=cfg.window_stride,
    )
    if windows.skipped:
        log(f"skipped {windows.skipped} too-short sample(s)")
    model = build_model(cfg.model, seed=cfg.seed)
    log(f"model parameters: {param_count(model)}")
    model, history = train(model, windows.windows, cfg.train)
    ckpt = Path(args.ckpt or out_dir / "model.ckpt")
    ckpt.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, ckpt)
    epoch_log = out_dir / "epochs.log"
    with open(epoch_log, "w") as fh:
        for e in range(len(history.rec)):
            fh.write(
                f"epoch={e} rec={history.rec[e]!r} pose={history.pose[e]!r} "
                f"joint={history.joint[e]!r} seconds={history.seconds[e]:.3f}\n"
            )
    log(f"trained {cfg.train.epochs} epoch(s), {history.steps} step(s); checkpoint {ckpt}")
    return 0


def _eval_windows(samples, in_len, out_len, stride):
    result = window_samples(samples, in_len=in_len, out_len=out_len, stride=stride)
    return result.windows


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    manifest = _manifest_or_usage(args.manifest)
    ckpt_path = Path(args.ckpt)
    if not ckpt_path.exists():
        raise _Usage(f"checkpoint not found: {ckpt_path}")
    out_dir = Path(args.out or cfg.out_dir)
    log = _Logger(out_dir / "eval.log")
    _echo_config(cfg, out_dir, log)
    model = load_checkpoint(ckpt_path)
    mcfg = model.cfg
    test_samples = load_manifest_samples(manifest, args.data, split="test")
    if not test_samples:
        raise _Usage("manifest has no test samples")
    if test_samples[0].data.shape[2] != mcfg.joints:
        raise ConfigError(
            f"checkpoint expects {mcfg.joints} joints, data has {test_samples[0].data.shape[2]}"
        )
    schedule = FrameSchedule(fps=cfg.fps)
    steps = max(cfg.eval_steps, 1)
    ultra_len = mcfg.out_frames * steps
    report = MetricReport(
        metadata={
            "checkpoint": str(ckpt_path),
            "manifest": str(manifest),
            "seed": cfg.seed,
            "eval_steps": steps,
        }
    )
    predictors = {
        "model": lambda obs: predict_autoregressive(model, obs, steps),
        "zero_velocity": lambda obs: baseline_zero_velocity(obs, ultra_len),
        "constant_velocity": lambda obs: baseline_constant_velocity(obs, ultra_len),
    }
    by_scene: dict[str, list] = {}
    for sample in test_samples:
        needed = mcfg.in_frames + mcfg.out_frames
        result = window_samples([sample], in_len=mcfg.in_frames, out_len=max(ultra_len, mcfg.out_frames), stride=None)
        wins = result.windows
        if not wins:
            wins = _eval_windows([sample], mcfg.in_frames, mcfg.out_frames, None)
        by_scene.setdefault(sample.scene, []).extend(wins)
    if not any(by_scene.values()):
        raise _Usage("test samples are too short for evaluation windows")
    reference_windows = []
    for sample in test_samples:
        reference_windows.append(pose_windows(sample.data, stride=metrics_mod.PS_WINDOW_FRAMES))
    ref = np.concatenate([w for w in reference_windows if w.size], axis=0)

    for scene, wins in sorted(by_scene.items()):
        for name, fn in predictors.items():
            per_ms: dict[int, list[float]] = {ms: [] for ms in schedule.all_ms}
            per_ms_ajpe: dict[int, list[float]] = {ms: [] for ms in schedule.all_ms}
            per_ms_rfde: list[float] = []
            ps_pred: dict[int, list[np.ndarray]] = {}
            for w in wins:
                pred = fn(w.input)
                horizon = min(pred.shape[1], w.target.shape[1])
                gt = w.target[:, :horizon]
                pr = pred[:, :horizon]
                for ms in schedule.all_ms:
                    idx = schedule.frame_index(ms)
                    if idx <= horizon:
                        per_ms[ms].append(metrics_mod.gjpe(pr, gt, idx))
                        per_ms_ajpe[ms].append(metrics_mod.ajpe(pr, gt, mcfg.root_index, idx))
                n_frames = min(mcfg.out_frames, horizon)
                per_ms_rfde.append(
                    metrics_mod.rfde(pr[:, :n_frames], gt[:, :n_frames], mcfg.root_index)
                )
                for second in range(pred.shape[1] // metrics_mod.PS_WINDOW_FRAMES):
                    lo = second * metrics_mod.PS_WINDOW_FRAMES
                    block = pose_windows(pred[:, lo : lo + metrics_mod.PS_WINDOW_FRAMES])
                    ps_pred.setdefault(second, []).append(block)
            for ms in schedule.all_ms:
                if per_ms[ms]:
                    report.add_value(name, scene, "gjpe", ms, float(np.mean(per_ms[ms])))
                    report.add_value(name, scene, "ajpe", ms, float(np.mean(per_ms_ajpe[ms])))
            report.add_value(name, scene, "rfde", 1000, float(np.mean(per_ms_rfde)))
            for second, blocks in sorted(ps_pred.items()):
                window_block = np.concatenate(blocks, axis=0)
                report.add_ps(name, scene, "ps_entropy", second, metrics_mod.ps_entropy(window_block))
                report.add_ps(name, scene, "ps_kld", second, metrics_mod.ps_kld(ref, window_block))
        log(f"evaluated scene {scene}: {len(wins)} window(s)")
    report.add_ps("reference", "all", "ps_entropy", 0, metrics_mod.ps_entropy(ref))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json())
    (out_dir / "report.csv").write_text(report.to_csv())
    (out_dir / "ps_curves.csv").write_text(report.ps_curve_csv())
    log(f"wrote report.json / report.csv / ps_curves.csv to {out_dir}")
    return 0


def cmd_predict(args) -> int:
    cfg = resolve_config(args)
    ckpt_path = Path(args.ckpt)
    if not ckpt_path.exists():
        raise _Usage(f"checkpoint not found: {ckpt_path}")
    in_path = Path(args.input)
    if not in_path.exists():
        raise _Usage(f"input sample not found: {in_path}")
    model = load_checkpoint(ckpt_path)
    data = np.load(in_path)
    if data.ndim != 4 or data.shape[1] < model.cfg.in_frames:
        raise _Usage(
            f"input needs at least {model.cfg.in_frames} frames of [P,T,J,3] data, got {data.shape}"
        )
    observed = data[:, : model.cfg.in_frames]
    pred = predict_autoregressive(model, observed, args.steps)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "wb") as fh:
        np.lib.format.write_array(fh, np.ascontiguousarray(pred, dtype="<f8"), version=(1, 0))
    print(f"wrote predictions {pred.shape} to {out_path}")
    return 0


def cmd_report(args) -> int:
    reports = []
    for path in args.reports:
        p = Path(path)
        if not p.exists():
            raise _Usage(f"report not found: {p}")
        reports.append(MetricReport.from_json(p.read_text()))
    merged = merge_reports(reports)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "combined.json").write_text(merged.to_json())
    (out_dir / "combined.csv").write_text(merged.to_csv())
    (out_dir / "ps_curves.csv").write_text(merged.ps_curve_csv())
    print(f"merged {len(reports)} report(s) into {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfk", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="sectioned key=value config file")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("synth", help="generate synthetic scenes + manifest")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--persons", type=int, default=None)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--format", choices=("npy", "json"), default="npy")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("preprocess", help="ingest raw JSON scenes into NPY + manifest")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_preprocess)

    p = sub.add_parser("train", help="train a model on the manifest's train split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", default=None, help="directory holding the NPY files")
    p.add_argument("--out", default=None)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run metrics on the manifest's test split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="forecast future poses for one NPY sample")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=1)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("report", help="merge metric reports into comparison tables")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        plain, overrides = _split_flag_overrides(argv)
        parser = build_parser()
        args = parser.parse_args(plain)
        args.overrides = overrides
        return args.fn(args)
    except _Usage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MfkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
