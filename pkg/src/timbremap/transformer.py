"""Stage 2: conditional encoder-decoder over embedding frames.

The encoder turns (timbre point, pitch) into memory tokens; the decoder
predicts frame t from a zero-vector BOS plus frames < t under a causal mask
built from true -inf entries, so masked positions carry exactly zero weight.
Generation re-runs a full-length forward per step over a zero-padded token
buffer: with exact masking this is bitwise identical to teacher forcing on
the same prefix, which is also what makes the causality contract testable.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import DatasetConfig, RunConfig, TransformerConfig
from .dataset import SampleRecord, batch_arrays, batch_iterator, split_records
from .vae import VaeModel, load_vae

_INIT_TAG = 4001
_COND_TAG = 4002


@dataclass
class ConditioningInput:
    z: np.ndarray        # (2,) timbre point
    pitch_index: int     # 0-based class index


def sinusoidal_positions(n_pos: int, dim: int) -> np.ndarray:
    pos = np.arange(n_pos)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10_000.0, (2 * (i // 2)) / dim)
    table = np.where(i % 2 == 0, np.sin(angle), np.cos(angle))
    return table.astype(np.float32)


def causal_mask(n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.float32)
    m[np.arange(n)[:, None] < np.arange(n)[None, :]] = -np.inf
    return m


class TransformerModel:
    def __init__(self, t_cfg: TransformerConfig, data_cfg: DatasetConfig, seed: int):
        t_cfg.validate()
        self.cfg = t_cfg
        self.data_cfg = data_cfg
        self.n_pitch = data_cfg.n_pitches
        self.frames = data_cfg.frames
        self.channels = data_cfg.channels
        d = t_cfg.model_dim

        self.params = ad.ParameterStore()
        rng = np.random.default_rng(np.random.SeedSequence([seed, _INIT_TAG]))

        def kaiming(shape, fan_in):
            bound = float(np.sqrt(1.0 / fan_in))
            return rng.uniform(-bound, bound, size=shape).astype(np.float32)

        def add_affine(name, n_in, n_out):
            self.params.add(f"{name}.w", kaiming((n_in, n_out), n_in))
            self.params.add(f"{name}.b", np.zeros(n_out, dtype=np.float32))

        def add_ln(name, width):
            self.params.add(f"{name}.g", np.ones(width, dtype=np.float32))
            self.params.add(f"{name}.b", np.zeros(width, dtype=np.float32))

        def add_attn(name):
            for proj in ("q", "k", "v", "o"):
                add_affine(f"{name}.{proj}", d, d)

        def add_ff(name):
            add_affine(f"{name}.1", d, t_cfg.ff_dim)
            add_affine(f"{name}.2", t_cfg.ff_dim, d)

        add_affine("enc.z_proj", 2, d)
        self.params.add("enc.pitch_embed", kaiming((self.n_pitch, d), d))
        if t_cfg.cond_concat == "feature":
            add_affine("enc.cond_merge", 2 * d, d)
        for i in range(t_cfg.n_enc_layers):
            add_ln(f"enc.l{i}.ln1", d)
            add_attn(f"enc.l{i}.attn")
            add_ln(f"enc.l{i}.ln2", d)
            add_ff(f"enc.l{i}.ff")
        add_ln("enc.ln_out", d)

        add_affine("dec.in_proj", self.channels, d)
        for i in range(t_cfg.n_dec_layers):
            add_ln(f"dec.l{i}.ln1", d)
            add_attn(f"dec.l{i}.self")
            add_ln(f"dec.l{i}.ln2", d)
            add_attn(f"dec.l{i}.cross")
            add_ln(f"dec.l{i}.ln3", d)
            add_ff(f"dec.l{i}.ff")
        add_ln("dec.ln_out", d)
        add_affine("dec.out_proj", d, self.channels)

        self._pe = sinusoidal_positions(max(self.frames, 8), d)
        self._causal = causal_mask(self.frames)

    # ------------------------------------------------------------------

    def _heads_split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        h = self.cfg.n_heads
        x = ad.reshape(x, (b, t, h, d // h))
        x = ad.transpose(x, (0, 2, 1, 3))
        return ad.reshape(x, (b * h, t, d // h))

    def _heads_merge(self, x: Tensor, batch: int) -> Tensor:
        bh, t, dh = x.shape
        h = self.cfg.n_heads
        x = ad.reshape(x, (batch, h, t, dh))
        x = ad.transpose(x, (0, 2, 1, 3))
        return ad.reshape(x, (batch, t, h * dh))

    def _mha(self, name: str, x_q: Tensor, x_kv: Tensor, mask: np.ndarray | None) -> Tensor:
        p = self.params
        batch = x_q.shape[0]
        q = self._heads_split(ad.dense(x_q, p[f"{name}.q.w"], p[f"{name}.q.b"]))
        k = self._heads_split(ad.dense(x_kv, p[f"{name}.k.w"], p[f"{name}.k.b"]))
        v = self._heads_split(ad.dense(x_kv, p[f"{name}.v.w"], p[f"{name}.v.b"]))
        out = ad.attention(q, k, v, mask=mask)
        out = self._heads_merge(out, batch)
        return ad.dense(out, p[f"{name}.o.w"], p[f"{name}.o.b"])

    def _ff(self, name: str, x: Tensor) -> Tensor:
        p = self.params
        h = ad.gelu(ad.dense(x, p[f"{name}.1.w"], p[f"{name}.1.b"]))
        return ad.dense(h, p[f"{name}.2.w"], p[f"{name}.2.b"])

    def _ln(self, name: str, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.params[f"{name}.g"], self.params[f"{name}.b"])

    # ------------------------------------------------------------------

    def build_encoder_input(self, z, pitch_index) -> Tensor:
        """Conditioning tokens: projected z and embedded pitch, positionally
        encoded; sequence-wise concat yields two tokens, feature-wise one."""
        z_t = z if isinstance(z, Tensor) else ad.constant(np.asarray(z, dtype=np.float32))
        if z_t.data.ndim == 1:
            z_t = ad.reshape(z_t, (1, 2))
        idx = np.atleast_1d(np.asarray(pitch_index))
        if np.any(idx < 0) or np.any(idx >= self.n_pitch):
            raise ValueError(f"pitch index out of range [0, {self.n_pitch})")
        p = self.params
        b = z_t.shape[0]
        z_tok = ad.dense(z_t, p["enc.z_proj.w"], p["enc.z_proj.b"])
        u_tok = ad.embedding(p["enc.pitch_embed"], idx)
        if self.cfg.cond_concat == "feature":
            merged = ad.dense(ad.concat([z_tok, u_tok], axis=1),
                              p["enc.cond_merge.w"], p["enc.cond_merge.b"])
            x = ad.reshape(merged, (b, 1, self.cfg.model_dim))
            return ad.add(x, ad.constant(self._pe[:1][None, :, :]))
        z_tok = ad.reshape(z_tok, (b, 1, self.cfg.model_dim))
        u_tok = ad.reshape(u_tok, (b, 1, self.cfg.model_dim))
        x = ad.concat([z_tok, u_tok], axis=1)
        return ad.add(x, ad.constant(self._pe[:2][None, :, :]))

    def encoder_forward(self, enc_input: Tensor) -> Tensor:
        x = enc_input
        for i in range(self.cfg.n_enc_layers):
            normed = self._ln(f"enc.l{i}.ln1", x)
            x = ad.add(x, self._mha(f"enc.l{i}.attn", normed, normed, None))
            x = ad.add(x, self._ff(f"enc.l{i}.ff", self._ln(f"enc.l{i}.ln2", x)))
        return self._ln("enc.ln_out", x)

    def decoder_forward(self, memory: Tensor, tokens) -> Tensor:
        """tokens: (B, T, channels) decoder inputs (BOS + shifted frames);
        returns (B, T, channels) next-frame predictions."""
        x = tokens if isinstance(tokens, Tensor) else ad.constant(np.asarray(tokens, dtype=np.float32))
        if x.shape[1] != self.frames or x.shape[2] != self.channels:
            raise ad.ShapeError(
                f"decoder_forward: expected (B, {self.frames}, {self.channels}), got {x.shape}")
        p = self.params
        x = ad.dense(x, p["dec.in_proj.w"], p["dec.in_proj.b"])
        x = ad.add(x, ad.constant(self._pe[:self.frames][None, :, :]))
        for i in range(self.cfg.n_dec_layers):
            normed = self._ln(f"dec.l{i}.ln1", x)
            x = ad.add(x, self._mha(f"dec.l{i}.self", normed, normed, self._causal))
            normed = self._ln(f"dec.l{i}.ln2", x)
            x = ad.add(x, self._mha(f"dec.l{i}.cross", normed, memory, None))
            x = ad.add(x, self._ff(f"dec.l{i}.ff", self._ln(f"dec.l{i}.ln3", x)))
        x = self._ln("dec.ln_out", x)
        return ad.dense(x, p["dec.out_proj.w"], p["dec.out_proj.b"])

    # ------------------------------------------------------------------

    @staticmethod
    def shift_tokens(frames_bct: np.ndarray) -> np.ndarray:
        """(B, C, T) ground truth -> (B, T, C) decoder inputs: BOS + frames < t."""
        b, c, t = frames_bct.shape
        tokens = np.zeros((b, t, c), dtype=np.float32)
        tokens[:, 1:, :] = np.transpose(frames_bct, (0, 2, 1))[:, :-1, :]
        return tokens

    def teacher_forced(self, z: np.ndarray, pitch_idx: np.ndarray,
                       frames_bct: np.ndarray) -> np.ndarray:
        with ad.no_grad():
            memory = self.encoder_forward(self.build_encoder_input(z, pitch_idx))
            pred = self.decoder_forward(memory, self.shift_tokens(frames_bct))
        return pred.data

    def generate_batch(self, z: np.ndarray, pitch_idx: np.ndarray) -> np.ndarray:
        """Free-running generation for a whole batch -> (B, C, T) embeddings."""
        z = np.asarray(z, dtype=np.float32).reshape(-1, 2)
        pitch_idx = np.atleast_1d(np.asarray(pitch_idx))
        b = z.shape[0]
        with ad.no_grad():
            memory = self.encoder_forward(self.build_encoder_input(z, pitch_idx))
            tokens = np.zeros((b, self.frames, self.channels), dtype=np.float32)
            out = np.zeros((b, self.frames, self.channels), dtype=np.float32)
            for t in range(self.frames):
                pred = self.decoder_forward(memory, tokens).data
                out[:, t, :] = pred[:, t, :]
                if t + 1 < self.frames:
                    tokens[:, t + 1, :] = pred[:, t, :]
        return np.transpose(out, (0, 2, 1))

    def generate(self, cond: ConditioningInput) -> np.ndarray:
        """(channels, frames) embedding for one conditioning point."""
        return self.generate_batch(cond.z[None, :], np.array([cond.pitch_index]))[0]

    def state_arrays(self) -> dict[str, np.ndarray]:
        return self.params.state_arrays()

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, run_cfg: RunConfig) -> "TransformerModel":
        model = cls(run_cfg.transformer, run_cfg.dataset, seed=run_cfg.training.seed)
        model.params.load_state_arrays(ckpt.arrays)
        return model


def conditioning_latents(vae: VaeModel, records: list[SampleRecord],
                         noise_scale: float, rng: np.random.Generator) -> np.ndarray:
    """Frozen-VAE timbre points for stage-2 conditioning: mu + sigma*eps*scale."""
    e = np.stack([r.embedding for r in records]).astype(np.float32)
    mu, logvar, _ = vae.encode_arrays(e)
    if noise_scale == 0.0:
        return mu
    eps = rng.standard_normal(size=mu.shape).astype(np.float32)
    return mu + np.exp(0.5 * logvar) * eps * noise_scale


def train_transformer(records: list[SampleRecord], run_cfg: RunConfig,
                      vae_checkpoint: str | Path, checkpoint_path: str | Path,
                      log_path: str | Path | None = None,
                      verbose: bool = False) -> tuple[TransformerModel, list[float]]:
    """Teacher-forced MSE training against ground-truth next frames, with the
    stage-1 model frozen and only providing conditioning."""
    run_cfg.validate()
    vae = load_vae(vae_checkpoint, run_cfg)
    tr = run_cfg.training
    train = split_records(records, "train")
    model = TransformerModel(run_cfg.transformer, run_cfg.dataset, seed=tr.seed)
    opt = ad.Adam(model.params, lr=tr.transformer_lr)
    cond_rng = np.random.default_rng(np.random.SeedSequence([tr.seed, _COND_TAG]))

    epoch_losses: list[float] = []
    for epoch in range(tr.transformer_epochs):
        total = 0.0
        n = 0
        for batch in batch_iterator(train, tr.batch_size, tr.seed + 1, epoch):
            e_np, pitch_idx, _, _ = batch_arrays(batch)
            z = conditioning_latents(vae, batch, tr.cond_noise_scale, cond_rng)
            memory = model.encoder_forward(model.build_encoder_input(z, pitch_idx))
            pred = model.decoder_forward(memory, model.shift_tokens(e_np))
            target = ad.constant(np.transpose(e_np, (0, 2, 1)))
            loss = ad.mse(pred, target)
            if not np.isfinite(loss.item()):
                raise RuntimeError(f"non-finite transformer loss at epoch {epoch}")
            opt.zero_grad()
            ad.backward(loss)
            opt.step()
            total += loss.item() * len(batch)
            n += len(batch)
        epoch_losses.append(total / n)
        if verbose and (epoch % 20 == 0 or epoch == tr.transformer_epochs - 1):
            print(f"[transformer] epoch {epoch}: mse={epoch_losses[-1]:.6f}")

    if log_path is not None:
        with open(log_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if fh.tell() == 0:
                writer.writerow(["epoch", "train_mse"])
            for i, v in enumerate(epoch_losses):
                writer.writerow([i, v])
    save_checkpoint(checkpoint_path, kind="transformer", config_digest=run_cfg.digest(),
                    arrays=model.params.state_arrays(),
                    rng_state=cond_rng.bit_generator.state, epoch=tr.transformer_epochs,
                    extra={"vae_checkpoint": Path(vae_checkpoint).name,
                           "run_config": run_cfg.semantic_dict()})
    return model, epoch_losses


def load_transformer(checkpoint_path: str | Path, run_cfg: RunConfig) -> TransformerModel:
    ckpt = load_checkpoint(checkpoint_path, expect_digest=run_cfg.digest())
    if ckpt.kind != "transformer":
        raise ValueError(f"{checkpoint_path}: expected a transformer checkpoint, got {ckpt.kind!r}")
    return TransformerModel.from_checkpoint(ckpt, run_cfg)
