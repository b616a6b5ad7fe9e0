"""Shared fixtures; the desk-scale pipeline trains once per session."""

import dataclasses
import time
from types import SimpleNamespace

import pytest

from timbremap import evaluate as ev
from timbremap.cli import main as cli_main
from timbremap.config import PathsConfig, desk_config, save_run_config
from timbremap.dataset import generate_dataset
from timbremap.transformer import load_transformer
from timbremap.vae import load_vae


@pytest.fixture(scope="session")
def desk_pipeline(tmp_path_factory):
    """Full desk preset run through the CLI: data, both stages, eval report."""
    root = tmp_path_factory.mktemp("desk_pipeline")
    cfg = dataclasses.replace(desk_config(), paths=PathsConfig(
        dataset_dir=str(root / "data"), checkpoint_dir=str(root / "ckpt"),
        report_dir=str(root / "reports")))
    cfg_path = root / "config.json"
    save_run_config(cfg, cfg_path)

    start = time.time()
    assert cli_main(["gen-data", "--config", str(cfg_path)]) == 0
    assert cli_main(["train-vae", "--config", str(cfg_path), "--quiet"]) == 0
    assert cli_main(["train-transformer", "--config", str(cfg_path), "--quiet",
                     "--vae", str(root / "ckpt" / "vae.ckpt")]) == 0
    assert cli_main(["eval", "--config", str(cfg_path),
                     "--vae", str(root / "ckpt" / "vae.ckpt"),
                     "--transformer", str(root / "ckpt" / "transformer.ckpt")]) == 0
    elapsed = time.time() - start

    records, _ = generate_dataset(cfg.dataset)
    vae = load_vae(root / "ckpt" / "vae.ckpt", cfg)
    transformer = load_transformer(root / "ckpt" / "transformer.ckpt", cfg)
    report = ev.EvalReport.load(root / "reports" / "eval_report.json")
    return SimpleNamespace(root=root, cfg=cfg, cfg_path=cfg_path, records=records,
                           vae=vae, transformer=transformer, report=report,
                           pipeline_seconds=elapsed)
