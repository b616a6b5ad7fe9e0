"""Operational surface: dataset generation, two-stage training, evaluation,
ablations, one-shot generation, map export, and the HTTP service.

Exit codes: 0 success, 2 usage (argparse), 3 config invariant violation,
1 anything else; errors print one machine-parsable line on stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import codec
from . import dataset as ds
from . import evaluate as ev
from .checkpoint import CheckpointError, file_digest, load_checkpoint
from .config import ConfigError, RunConfig, desk_config, load_run_config, run_config_from_dict
from .transformer import ConditioningInput, TransformerModel, train_transformer
from .vae import ABLATION_VARIANTS, VaeModel, train_vae


class CliError(RuntimeError):
    pass


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return desk_config()
    return load_run_config(path)


def _config_from_checkpoint(ckpt_path: str) -> tuple[RunConfig, object]:
    ckpt = load_checkpoint(ckpt_path)
    raw = ckpt.extra.get("run_config")
    if raw is None:
        raise CliError(f"{ckpt_path}: checkpoint predates embedded configs; pass --config")
    cfg = run_config_from_dict(raw)
    if cfg.digest() != ckpt.config_digest:
        raise CheckpointError(f"{ckpt_path}: embedded config does not match header digest")
    return cfg, ckpt


def _require(path: str, what: str) -> str:
    if not Path(path).exists():
        raise CliError(f"{what} not found: {path}")
    return path


class _TrainingLock:
    """One training process per checkpoint dir; guards concurrent CLI runs."""

    def __init__(self, directory: Path):
        directory.mkdir(parents=True, exist_ok=True)
        self.path = directory / ".training.lock"
        self.fd = None

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.write(self.fd, str(os.getpid()).encode())
        except FileExistsError:
            raise CliError(
                f"training lock held ({self.path}); remove it if no other run is active") from None
        return self

    def __exit__(self, *exc):
        if self.fd is not None:
            os.close(self.fd)
            self.path.unlink(missing_ok=True)
        return False


def cmd_gen_data(args) -> int:
    cfg = _load_config(args.config)
    records, manifest = ds.generate_dataset(cfg.dataset)
    out = Path(args.out or cfg.paths.dataset_dir)
    ds.save_dataset(records, manifest, out, export_wav=args.wav, config=cfg.dataset)
    print(f"wrote {len(records)} records to {out} (hash {manifest['content_hash'][:12]})")
    return 0


def _load_records(cfg: RunConfig, dataset_dir: str | None):
    root = Path(dataset_dir or cfg.paths.dataset_dir)
    if (root / "manifest.json").exists():
        records, manifest = ds.load_dataset(root)
        if manifest["config"] != ds._config_dict(cfg.dataset):
            raise CliError(f"dataset at {root} was generated with a different dataset config")
        return records
    records, _ = ds.generate_dataset(cfg.dataset)
    return records


def cmd_train_vae(args) -> int:
    cfg = _load_config(args.config)
    records = _load_records(cfg, args.dataset_dir)
    ckpt_dir = Path(cfg.paths.checkpoint_dir)
    out = Path(args.out or ckpt_dir / "vae.ckpt")
    with _TrainingLock(out.parent):
        _, history = train_vae(records, cfg, out, log_path=out.parent / "vae_loss.csv",
                               verbose=not args.quiet)
    print(f"vae checkpoint: {out} (digest {file_digest(out)[:12]}, "
          f"final total {history[-1].total:.4f})")
    return 0


def cmd_train_transformer(args) -> int:
    cfg = _load_config(args.config)
    _require(args.vae, "vae checkpoint")
    records = _load_records(cfg, args.dataset_dir)
    out = Path(args.out or Path(cfg.paths.checkpoint_dir) / "transformer.ckpt")
    with _TrainingLock(out.parent):
        _, losses = train_transformer(records, cfg, args.vae, out,
                                      log_path=out.parent / "transformer_loss.csv",
                                      verbose=not args.quiet)
    print(f"transformer checkpoint: {out} (digest {file_digest(out)[:12]}, "
          f"final mse {losses[-1]:.6f})")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_config(args.config)
    _require(args.vae, "vae checkpoint")
    records = _load_records(cfg, args.dataset_dir)
    from .vae import load_vae
    vae = load_vae(args.vae, cfg)
    transformer = None
    if args.transformer:
        from .transformer import load_transformer
        transformer = load_transformer(_require(args.transformer, "transformer checkpoint"), cfg)
    report = ev.evaluate_pipeline(cfg, records, vae, transformer)
    out = Path(args.out or Path(cfg.paths.report_dir) / "eval_report.json")
    report.save(out)
    rows = ev.export_latent_scatter(vae, records, "train", out.parent / "latent_scatter.csv")
    ev.render_scatter_svg(rows, out.parent / "latent_scatter.svg",
                          cfg.dataset.n_families, cfg.dataset.instruments_per_family)
    print(f"eval report: {out}")
    for model_name, splits in report.recon_error.items():
        for split, errs in splits.items():
            print(f"  recon[{model_name}][{split}]: mse={errs['mse']:.6g} mae={errs['mae']:.6g}")
    for source, splits in report.pitch_accuracy.items():
        for split, acc in splits.items():
            print(f"  pitch_acc[{source}][{split}]: {acc:.4f}")
    for split in report.v_inst:
        print(f"  v_inst[{split}]={report.v_inst[split]} v_pitch[{split}]={report.v_pitch[split]}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args.config)
    if args.variant not in ABLATION_VARIANTS:
        raise CliError(f"unknown ablation variant {args.variant!r}; "
                       f"choose from {', '.join(ABLATION_VARIANTS)}")
    records = _load_records(cfg, args.dataset_dir)
    out_dir = Path(args.out or Path(cfg.paths.report_dir) / "ablations")
    with _TrainingLock(out_dir):
        report = ev.run_ablation(args.variant, cfg, records, out_dir, verbose=not args.quiet)
    print(f"ablation {args.variant}: v_inst[train]={report.v_inst['train']} "
          f"v_pitch[train]={report.v_pitch['train']}")
    return 0


def cmd_generate(args) -> int:
    _require(args.vae, "vae checkpoint")
    _require(args.transformer, "transformer checkpoint")
    cfg, vae_ckpt = _config_from_checkpoint(args.vae)
    vae = VaeModel.from_checkpoint(vae_ckpt, cfg)
    t_ckpt = load_checkpoint(args.transformer, expect_digest=cfg.digest())
    transformer = TransformerModel.from_checkpoint(t_ckpt, cfg)

    if not cfg.dataset.pitch_lo <= args.pitch <= cfg.dataset.pitch_hi:
        raise CliError(f"pitch {args.pitch} outside trained range "
                       f"[{cfg.dataset.pitch_lo}, {cfg.dataset.pitch_hi}]")
    z = clamp_to_unit_disc(np.array([args.x, args.y], dtype=np.float32))
    emb = transformer.generate(ConditioningInput(z=z, pitch_index=args.pitch - cfg.dataset.pitch_lo))
    waveform = codec.decode(emb, cfg.dataset)
    codec.write_wav(args.out, waveform, cfg.dataset.sample_rate)
    print(f"wrote {args.out} ({waveform.size} samples at {cfg.dataset.sample_rate} Hz, "
          f"point=({z[0]:.4f}, {z[1]:.4f}), pitch={args.pitch})")
    return 0


def cmd_export_map(args) -> int:
    _require(args.vae, "vae checkpoint")
    cfg, vae_ckpt = _config_from_checkpoint(args.vae)
    vae = VaeModel.from_checkpoint(vae_ckpt, cfg)
    records = _load_records(cfg, args.dataset_dir)
    ev.export_latent_scatter(vae, records, args.split, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    cfg = _load_config(args.config)
    port = int(os.environ.get("TIMBRE_MAP_PORT", args.port))
    _require(args.vae, "vae checkpoint")
    _require(args.transformer, "transformer checkpoint")
    serve(cfg, args.vae, args.transformer, port=port, host=args.host,
          static_dir=args.static, dataset_dir=args.dataset_dir)
    return 0


def clamp_to_unit_disc(z: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(z))
    if norm <= 1.0:
        return z
    return z / norm


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timbremap",
        description="Pitch-disentangled 2D timbre maps: data, training, eval, serving.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    p = add("gen-data", cmd_gen_data, help="synthesize the dataset to disk")
    p.add_argument("--config", help="run config JSON (defaults to the desk preset)")
    p.add_argument("--out", help="dataset directory (default from config paths)")
    p.add_argument("--wav", action="store_true", help="also export per-record WAV files")

    p = add("train-vae", cmd_train_vae, help="train stage 1")
    p.add_argument("--config")
    p.add_argument("--dataset-dir")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")

    p = add("train-transformer", cmd_train_transformer, help="train stage 2")
    p.add_argument("--config")
    p.add_argument("--vae", required=True, help="trained stage-1 checkpoint")
    p.add_argument("--dataset-dir")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")

    p = add("eval", cmd_eval, help="run the evaluation protocol")
    p.add_argument("--config")
    p.add_argument("--vae", required=True)
    p.add_argument("--transformer")
    p.add_argument("--dataset-dir")
    p.add_argument("--out")

    p = add("ablate", cmd_ablate, help="retrain with one loss component removed")
    p.add_argument("--variant", required=True)
    p.add_argument("--config")
    p.add_argument("--dataset-dir")
    p.add_argument("--out")
    p.add_argument("--quiet", action="store_true")

    p = add("generate", cmd_generate, help="generate one note to a WAV file")
    p.add_argument("--vae", required=True)
    p.add_argument("--transformer", required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--pitch", type=int, required=True, help="MIDI note number")
    p.add_argument("--out", required=True)

    p = add("export-map", cmd_export_map, help="export the latent scatter as CSV")
    p.add_argument("--vae", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="train", choices=["train", "val", "test"])
    p.add_argument("--dataset-dir")

    p = add("serve", cmd_serve, help="HTTP API (and static frontend) for the explorer")
    p.add_argument("--config")
    p.add_argument("--vae", required=True)
    p.add_argument("--transformer", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static", help="static frontend directory (default: frontend/dist if present)")
    p.add_argument("--dataset-dir")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 3
    except (CliError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
