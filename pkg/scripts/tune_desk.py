"""Dev-only: run the desk pipeline and print every directional criterion."""
import sys, time
import numpy as np
from timbremap.config import desk_config
from timbremap import dataset as ds
from timbremap.vae import train_vae
from timbremap.transformer import train_transformer
from timbremap import evaluate as ev

out = sys.argv[1] if len(sys.argv) > 1 else "/tmp/desk_run"
cfg = desk_config()
print("digest:", cfg.digest()[:12], "vae_epochs:", cfg.training.vae_epochs,
      "t_epochs:", cfg.training.transformer_epochs)

t0 = time.time()
records, manifest = ds.generate_dataset(cfg.dataset)
print(f"dataset: {len(records)} records in {time.time()-t0:.1f}s")

t0 = time.time()
vae, hist = train_vae(records, cfg, f"{out}/vae.ckpt", verbose=True)
t_vae = time.time() - t0
print(f"VAE trained in {t_vae:.0f}s; total loss {hist[0].total:.4f} -> {hist[-1].total:.4f}")

v_inst, v_pitch = ev.disentanglement_variances(vae, records, "train")
print(f"V_inst={v_inst} V_pitch={v_pitch}")
print(f"A6 ratio check: {v_inst} <= 0.1*{v_pitch} ? {np.all(v_inst <= 0.1*v_pitch)}; "
      f"V_pitch in [0,0.275]? {np.all((v_pitch >= 0) & (v_pitch <= 0.275))}")

t0 = time.time()
tfm, losses = train_transformer(records, cfg, f"{out}/vae.ckpt", f"{out}/t.ckpt", verbose=True)
t_t = time.time() - t0
print(f"transformer trained in {t_t:.0f}s; mse {losses[0]:.5f} -> {losses[-1]:.6f}")

acc_gt = ev.pitch_accuracy(vae, tfm, records, "train", "gt")
acc_vae = ev.pitch_accuracy(vae, tfm, records, "train", "vae")
acc_t = ev.pitch_accuracy(vae, tfm, records, "train", "transformer")
print(f"pitch acc train: GT={acc_gt:.3f} VAE={acc_vae:.3f} T={acc_t:.3f}")
print(f"A7: T>=0.9? {acc_t>=0.9}; T>VAE? {acc_t>acc_vae}")

rec = ev.reconstruction_error(vae, tfm, records, "train")
print(f"recon train: VAE mse={rec['vae']['mse']:.5f} T mse={rec['transformer']['mse']:.6f}")
print(f"A8: T < VAE? {rec['transformer']['mse'] < rec['vae']['mse']}")
print(f"TOTAL TIME: vae={t_vae:.0f}s transformer={t_t:.0f}s")
