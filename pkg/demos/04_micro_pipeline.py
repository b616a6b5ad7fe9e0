"""The full two-stage pipeline at toy scale, in about a minute.

Trains both stages on the micro preset, prints the disentanglement variances
and pitch accuracies, and renders the latent map as an SVG.
"""

import pathlib
import time

from timbremap import evaluate as ev
from timbremap.config import micro_config
from timbremap.dataset import generate_dataset
from timbremap.transformer import train_transformer
from timbremap.vae import train_vae

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

cfg = micro_config()
records, manifest = generate_dataset(cfg.dataset)
print(f"micro dataset: {manifest['counts']} (config digest {cfg.digest()[:12]})")

t0 = time.time()
vae, history = train_vae(records, cfg, out_dir / "micro_vae.ckpt")
print(f"stage 1 trained in {time.time() - t0:.0f}s; "
      f"total loss {history[0].total:.3f} -> {history[-1].total:.3f}")

t0 = time.time()
transformer, losses = train_transformer(records, cfg, out_dir / "micro_vae.ckpt",
                                        out_dir / "micro_transformer.ckpt")
print(f"stage 2 trained in {time.time() - t0:.0f}s; mse {losses[0]:.4f} -> {losses[-1]:.5f}")

report = ev.evaluate_pipeline(cfg, records, vae, transformer)
print("\npitch accuracy (train):",
      {k: round(v["train"], 3) for k, v in report.pitch_accuracy.items()})
print("recon error (train):",
      {k: round(v["train"]["mse"], 5) for k, v in report.recon_error.items()})
print(f"V_inst={report.v_inst['train']}")
print(f"V_pitch={report.v_pitch['train']}")

rows = ev.export_latent_scatter(vae, records, "train", out_dir / "micro_scatter.csv")
ev.render_scatter_svg(rows, out_dir / "micro_scatter.svg",
                      cfg.dataset.n_families, cfg.dataset.instruments_per_family)
print(f"\nlatent map: {out_dir}/micro_scatter.svg "
      "(micro scale is for smoke testing; the desk preset gives real structure)")
