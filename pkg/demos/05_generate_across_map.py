"""Steering generation with the 2D map: same pitch, different timbre points.

Expects desk-scale checkpoints (see README quickstart); falls back to
training the micro preset if none are found.
"""

import pathlib
import sys

import numpy as np

from timbremap import codec
from timbremap.checkpoint import load_checkpoint
from timbremap.config import micro_config, run_config_from_dict
from timbremap.dataset import generate_dataset
from timbremap.transformer import ConditioningInput, TransformerModel, train_transformer
from timbremap.vae import VaeModel, train_vae

out_dir = pathlib.Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

vae_path = pathlib.Path(sys.argv[1]) if len(sys.argv) > 2 else pathlib.Path("runs/checkpoints/vae.ckpt")
t_path = pathlib.Path(sys.argv[2]) if len(sys.argv) > 2 else pathlib.Path("runs/checkpoints/transformer.ckpt")

if vae_path.exists() and t_path.exists():
    ckpt = load_checkpoint(t_path)
    cfg = run_config_from_dict(ckpt.extra["run_config"])
    transformer = TransformerModel.from_checkpoint(ckpt, cfg)
    vae = VaeModel.from_checkpoint(load_checkpoint(vae_path), cfg)
    print(f"loaded checkpoints (digest {cfg.digest()[:12]})")
else:
    print("no desk checkpoints found; training the micro preset instead")
    cfg = micro_config()
    records, _ = generate_dataset(cfg.dataset)
    vae, _ = train_vae(records, cfg, out_dir / "m_vae.ckpt")
    transformer, _ = train_transformer(records, cfg, out_dir / "m_vae.ckpt", out_dir / "m_t.ckpt")

# Walk a line across the map at a fixed pitch: timbre morphs, pitch holds.
pitch = min(cfg.dataset.pitch_hi, cfg.dataset.pitch_lo + 4)
points = [(-0.8, 0.0), (-0.3, 0.3), (0.0, 0.0), (0.4, -0.4), (0.8, 0.2)]
for i, (x, y) in enumerate(points):
    emb = transformer.generate(ConditioningInput(
        z=np.array([x, y], dtype=np.float32), pitch_index=pitch - cfg.dataset.pitch_lo))
    wave = codec.decode(emb, cfg.dataset)
    path = out_dir / f"walk_{i}_x{x:+.1f}_y{y:+.1f}.wav"
    codec.write_wav(path, wave, cfg.dataset.sample_rate)
    print(f"({x:+.1f}, {y:+.1f}) pitch {pitch} -> {path.name} "
          f"(embedding range [{emb.min():.2f}, {emb.max():.2f}])")

# And the same point at different pitches: timbre holds, pitch moves.
for pitch in range(cfg.dataset.pitch_lo, cfg.dataset.pitch_hi + 1, 4):
    emb = transformer.generate(ConditioningInput(
        z=np.array([0.4, -0.4], dtype=np.float32), pitch_index=pitch - cfg.dataset.pitch_lo))
    wave = codec.decode(emb, cfg.dataset)
    codec.write_wav(out_dir / f"pitch_{pitch}.wav", wave, cfg.dataset.sample_rate)
print(f"\nwrote pitch sweep WAVs to {out_dir}/")
