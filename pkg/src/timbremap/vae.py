"""Stage 1: convolutional VAE with pitch/regression heads and the two
latent-space classifiers.

The encoder trunk (strided convs, then a dense stack) feeds a regression head
(mu, logvar of the 2D timbre latent) and a pitch head. The decoder consumes
the sampled latent concatenated with a gradient-detached argmax one-hot of the
pitch logits, so reconstruction can use pitch without training the pitch head
through that path. Instrument and family classifiers read mu and their
gradients flow back into the encoder; that pressure is what organizes the map.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import losses as L
from .autodiff import Tensor
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import DatasetConfig, RunConfig, VaeConfig
from .dataset import SampleRecord, batch_arrays, batch_iterator, split_records

_INIT_TAG = 3001
_NOISE_TAG = 3002


@dataclass
class LatentPoint:
    mu: Tensor
    logvar: Tensor
    z: Tensor | None = None


@dataclass
class EncoderOutput:
    latent: LatentPoint
    pitch_logits: Tensor


class TrainingAborted(RuntimeError):
    """Raised when a non-finite loss/gradient stops training; carries the
    path of the last good checkpoint."""

    def __init__(self, message: str, checkpoint_path: str | None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


def _kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = float(np.sqrt(1.0 / fan_in))
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class VaeModel:
    def __init__(self, vae_cfg: VaeConfig, data_cfg: DatasetConfig, seed: int,
                 include_family: bool = True):
        vae_cfg.validate(data_cfg)
        self.cfg = vae_cfg
        self.data_cfg = data_cfg
        self.include_family = include_family
        self.n_pitch = data_cfg.n_pitches
        self.act = vae_cfg.activation

        # conv length chain, encoder side
        self.lengths = [data_cfg.frames]
        for _ in vae_cfg.conv_channels:
            self.lengths.append(ad.conv_output_length(self.lengths[-1], vae_cfg.stride))
        self.flat_size = vae_cfg.conv_channels[-1] * self.lengths[-1]

        self.params = ad.ParameterStore()
        rng = np.random.default_rng(np.random.SeedSequence([seed, _INIT_TAG]))
        k = vae_cfg.kernel_size

        in_ch = data_cfg.channels
        for i, out_ch in enumerate(vae_cfg.conv_channels):
            self.params.add(f"enc.conv{i}.w", _kaiming_uniform(rng, (out_ch, in_ch, k), in_ch * k))
            self.params.add(f"enc.conv{i}.b", np.zeros(out_ch, dtype=np.float32))
            in_ch = out_ch

        width = self.flat_size
        for i, out in enumerate(vae_cfg.dense_sizes):
            self.params.add(f"enc.dense{i}.w", _kaiming_uniform(rng, (width, out), width))
            self.params.add(f"enc.dense{i}.b", np.zeros(out, dtype=np.float32))
            width = out
        trunk = width

        self.params.add("enc.reg_head.w", _kaiming_uniform(rng, (trunk, 4), trunk))
        self.params.add("enc.reg_head.b", np.zeros(4, dtype=np.float32))
        self.params.add("enc.pitch_head.w", _kaiming_uniform(rng, (trunk, self.n_pitch), trunk))
        self.params.add("enc.pitch_head.b", np.zeros(self.n_pitch, dtype=np.float32))

        # decoder: mirrored dense stack plus a bridge affine up to the conv
        # unflatten size, then mirrored transposed convs down to the input
        # channel count
        dec_sizes = list(reversed(vae_cfg.dense_sizes))
        width = vae_cfg.latent_dim + self.n_pitch
        self._dec_dense_out = []
        for i, out in enumerate(dec_sizes + [self.flat_size]):
            self.params.add(f"dec.dense{i}.w", _kaiming_uniform(rng, (width, out), width))
            self.params.add(f"dec.dense{i}.b", np.zeros(out, dtype=np.float32))
            self._dec_dense_out.append(out)
            width = out

        dec_in_chain = list(reversed(vae_cfg.conv_channels))
        dec_out_chain = dec_in_chain[1:] + [data_cfg.channels]
        for i, (cin, cout) in enumerate(zip(dec_in_chain, dec_out_chain)):
            self.params.add(f"dec.tconv{i}.w", _kaiming_uniform(rng, (cin, cout, k), cin * k))
            self.params.add(f"dec.tconv{i}.b", np.zeros(cout, dtype=np.float32))

        self._add_classifier(rng, "inst", vae_cfg.inst_classifier_sizes)
        if include_family:
            self._add_classifier(rng, "fam", vae_cfg.fam_classifier_sizes)

    def _add_classifier(self, rng, name: str, sizes: tuple[int, ...]) -> None:
        for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            self.params.add(f"{name}.dense{i}.w", _kaiming_uniform(rng, (a, b), a))
            self.params.add(f"{name}.dense{i}.b", np.zeros(b, dtype=np.float32))

    # ------------------------------------------------------------------

    def encode(self, e) -> EncoderOutput:
        """e: (B, channels, frames) array or Tensor -> latent + pitch logits."""
        x = e if isinstance(e, Tensor) else ad.constant(np.asarray(e, dtype=np.float32))
        if x.shape[1:] != (self.data_cfg.channels, self.data_cfg.frames):
            raise ad.ShapeError(
                f"encode: expected (B, {self.data_cfg.channels}, {self.data_cfg.frames}), got {x.shape}")
        p = self.params
        for i in range(len(self.cfg.conv_channels)):
            x = ad.conv1d(x, p[f"enc.conv{i}.w"], p[f"enc.conv{i}.b"], self.cfg.stride)
            x = ad.activation(x, self.act)
        x = ad.reshape(x, (x.shape[0], self.flat_size))
        for i in range(len(self.cfg.dense_sizes)):
            x = ad.dense(x, p[f"enc.dense{i}.w"], p[f"enc.dense{i}.b"])
            x = ad.activation(x, self.act)
        head = ad.dense(x, p["enc.reg_head.w"], p["enc.reg_head.b"])
        mu = ad.slice_axis(head, 1, 0, 2)
        logvar = ad.clip(ad.slice_axis(head, 1, 2, 4), -self.cfg.logvar_clamp, self.cfg.logvar_clamp)
        pitch_logits = ad.dense(x, p["enc.pitch_head.w"], p["enc.pitch_head.b"])
        return EncoderOutput(latent=LatentPoint(mu=mu, logvar=logvar), pitch_logits=pitch_logits)

    def reparametrize(self, latent: LatentPoint, noise_scale: float,
                      rng: np.random.Generator) -> Tensor:
        """z = mu + exp(logvar/2) * eps * noise_scale; gradient reaches mu and
        logvar only (eps is a constant draw)."""
        eps = rng.standard_normal(size=latent.mu.shape).astype(np.float32)
        if noise_scale == 0.0:
            return latent.mu
        sigma = ad.exp(latent.logvar * 0.5)
        z = ad.add(latent.mu, ad.mul(sigma, ad.constant(eps * noise_scale)))
        latent.z = z
        return z

    @staticmethod
    def pitch_onehot_detached(pitch_logits: Tensor) -> Tensor:
        """Argmax one-hot, severed from the graph. Ties take the lowest index."""
        logits = pitch_logits.data
        onehot = np.zeros_like(logits)
        onehot[np.arange(logits.shape[0]), logits.argmax(axis=1)] = 1.0
        return ad.constant(onehot)

    def decode(self, z: Tensor, pitch_onehot: Tensor) -> Tensor:
        if pitch_onehot.shape[-1] != self.n_pitch or not np.allclose(
                pitch_onehot.data.sum(axis=-1), 1.0, atol=1e-5):
            raise ValueError("decode: pitch_onehot must be one-hot over the pitch classes")
        p = self.params
        x = ad.concat([z, pitch_onehot], axis=1)
        for i in range(len(self._dec_dense_out)):
            x = ad.dense(x, p[f"dec.dense{i}.w"], p[f"dec.dense{i}.b"])
            x = ad.activation(x, self.act)
        x = ad.reshape(x, (x.shape[0], self.cfg.conv_channels[-1], self.lengths[-1]))
        n_t = len(self.cfg.conv_channels)
        for i in range(n_t):
            target_len = self.lengths[n_t - 1 - i]
            x = ad.conv1d_transpose(x, p[f"dec.tconv{i}.w"], p[f"dec.tconv{i}.b"],
                                    self.cfg.stride, target_len)
            if i < n_t - 1:
                x = ad.activation(x, self.act)
        return x

    def _classifier_forward(self, name: str, mu: Tensor, sizes: tuple[int, ...]) -> Tensor:
        x = mu
        n = len(sizes) - 1
        for i in range(n):
            x = ad.dense(x, self.params[f"{name}.dense{i}.w"], self.params[f"{name}.dense{i}.b"])
            if i < n - 1:
                x = ad.activation(x, self.act)
        return x

    def classify_instrument(self, mu: Tensor) -> Tensor:
        return self._classifier_forward("inst", mu, self.cfg.inst_classifier_sizes)

    def classify_family(self, mu: Tensor) -> Tensor:
        if not self.include_family:
            raise RuntimeError("family classifier removed in this configuration")
        return self._classifier_forward("fam", mu, self.cfg.fam_classifier_sizes)

    # ------------------------------------------------------------------

    def encode_arrays(self, e: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Inference-path encode: (mu, logvar, pitch_logits) as ndarrays."""
        with ad.no_grad():
            out = self.encode(e)
        return out.latent.mu.data, out.latent.logvar.data, out.pitch_logits.data

    def decode_arrays(self, z: np.ndarray, pitch_index: np.ndarray) -> np.ndarray:
        onehot = np.zeros((len(pitch_index), self.n_pitch), dtype=np.float32)
        onehot[np.arange(len(pitch_index)), pitch_index] = 1.0
        with ad.no_grad():
            out = self.decode(ad.constant(np.asarray(z, dtype=np.float32)), ad.constant(onehot))
        return out.data

    def reconstruct_arrays(self, e: np.ndarray) -> np.ndarray:
        """Deterministic reconstruction path: mu (no sampling) + detached argmax."""
        mu, _, logits = self.encode_arrays(e)
        return self.decode_arrays(mu, logits.argmax(axis=1))

    def state_arrays(self) -> dict[str, np.ndarray]:
        return self.params.state_arrays()

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint, run_cfg: RunConfig) -> "VaeModel":
        include_family = bool(ckpt.extra.get("include_family", True))
        model = cls(run_cfg.vae, run_cfg.dataset, seed=run_cfg.training.seed,
                    include_family=include_family)
        model.params.load_state_arrays(ckpt.arrays)
        return model


ABLATION_VARIANTS = ("no_kl", "no_reg", "no_nei", "no_fam")


def apply_ablation(weights: L.LossWeights, variant: str | None) -> tuple[L.LossWeights, bool]:
    """Returns (possibly zeroed weights, include_family flag)."""
    if variant is None:
        return weights, True
    if variant not in ABLATION_VARIANTS:
        raise ValueError(f"unknown ablation variant {variant!r}; choose from {ABLATION_VARIANTS}")
    if variant == "no_kl":
        return dataclasses.replace(weights, beta_kl=0.0), True
    if variant == "no_reg":
        return dataclasses.replace(weights, beta_reg=0.0), True
    if variant == "no_nei":
        return dataclasses.replace(weights, beta_nei=0.0), True
    return dataclasses.replace(weights, beta_fam=0.0), False


def train_vae(records: list[SampleRecord], run_cfg: RunConfig,
              checkpoint_path: str | Path, log_path: str | Path | None = None,
              ablation: str | None = None, verbose: bool = False) -> tuple[VaeModel, list[L.LossBreakdown]]:
    """Train stage 1 on the train split; writes a checkpoint and returns the
    per-epoch loss log."""
    run_cfg.validate()
    weights, include_family = apply_ablation(run_cfg.loss, ablation)
    train = split_records(records, "train")
    tr = run_cfg.training
    model = VaeModel(run_cfg.vae, run_cfg.dataset, seed=tr.seed, include_family=include_family)
    opt = ad.Adam(model.params, lr=tr.vae_lr)
    noise_rng = np.random.default_rng(np.random.SeedSequence([tr.seed, _NOISE_TAG]))
    digest = run_cfg.digest()

    history: list[L.LossBreakdown] = []
    last_good: dict[str, np.ndarray] | None = None
    last_good_epoch = -1

    for epoch in range(tr.vae_epochs):
        sums = np.zeros(8)
        n_batches = 0
        for batch in batch_iterator(train, tr.batch_size, tr.seed, epoch):
            e_np, pitch_idx, inst_ids, fam_ids = batch_arrays(batch)
            e = ad.constant(e_np)
            out = model.encode(e)
            mu, logvar = out.latent.mu, out.latent.logvar
            z = model.reparametrize(out.latent, 1.0, noise_rng)
            onehot = model.pitch_onehot_detached(out.pitch_logits)
            e_hat = model.decode(z, onehot)

            att, rep = L.loss_neighbor(mu, inst_ids, weights.margin, weights.eps)
            terms = {
                "rec": L.loss_rec(e_hat, e),
                "kl": L.loss_kl(mu, logvar, weights.kl_reduce),
                "reg": L.loss_reg(mu),
                "nei_attractive": att,
                "nei_repulsive": rep,
                "pitch": L.loss_cross_entropy(out.pitch_logits, pitch_idx),
                "inst": L.loss_cross_entropy(model.classify_instrument(mu), inst_ids),
                "fam": (L.loss_cross_entropy(model.classify_family(mu), fam_ids)
                        if include_family else ad.constant(np.float32(0.0))),
            }
            total, bd = L.total_vae_loss(terms, weights, epoch, tr.vae_epochs)
            if not np.isfinite(bd.total):
                path = _dump_last_good(checkpoint_path, last_good, last_good_epoch,
                                       digest, include_family, noise_rng)
                raise TrainingAborted(
                    f"non-finite loss at epoch {epoch}; last good checkpoint: {path}", path)
            opt.zero_grad()
            ad.backward(total)
            try:
                opt.step()
            except ad.GradientNaNError as exc:
                path = _dump_last_good(checkpoint_path, last_good, last_good_epoch,
                                       digest, include_family, noise_rng)
                raise TrainingAborted(f"{exc}; last good checkpoint: {path}", path) from exc
            sums += [bd.rec, bd.kl, bd.reg, bd.nei_attractive, bd.nei_repulsive,
                     bd.pitch, bd.inst, bd.fam]
            n_batches += 1

        means = sums / n_batches
        _, w = L.scheduled_weights(epoch, tr.vae_epochs, weights)
        epoch_bd = L.LossBreakdown(
            epoch=epoch, gamma=epoch / tr.vae_epochs,
            rec=means[0], kl=means[1], reg=means[2], nei_attractive=means[3],
            nei_repulsive=means[4], pitch=means[5], inst=means[6], fam=means[7],
            scheduled_weights=w,
            total=sum(w[k] * v for k, v in zip(
                L.TERM_NAMES, [means[0], means[1], means[2], means[3] + means[4],
                               means[5], means[6], means[7]])),
        )
        history.append(epoch_bd)
        if verbose and (epoch % 20 == 0 or epoch == tr.vae_epochs - 1):
            print(f"[vae] epoch {epoch}: total={epoch_bd.total:.4f} rec={epoch_bd.rec:.4f} "
                  f"pitch={epoch_bd.pitch:.4f} inst={epoch_bd.inst:.4f}")
        last_good = {k: v.copy() for k, v in model.params.state_arrays().items()}
        last_good_epoch = epoch

    if log_path is not None:
        L.append_breakdown_csv(log_path, history)
    save_checkpoint(checkpoint_path, kind="vae", config_digest=digest,
                    arrays=model.params.state_arrays(),
                    rng_state=noise_rng.bit_generator.state, epoch=tr.vae_epochs,
                    extra={"include_family": include_family, "ablation": ablation or "baseline",
                           "run_config": run_cfg.semantic_dict()})
    return model, history


def _dump_last_good(checkpoint_path, last_good, last_good_epoch, digest,
                    include_family, noise_rng) -> str | None:
    if last_good is None:
        return None
    path = str(checkpoint_path) + ".last_good"
    save_checkpoint(path, kind="vae", config_digest=digest, arrays=last_good,
                    rng_state=noise_rng.bit_generator.state, epoch=last_good_epoch,
                    extra={"include_family": include_family, "aborted": True})
    return path


def load_vae(checkpoint_path: str | Path, run_cfg: RunConfig) -> VaeModel:
    ckpt = load_checkpoint(checkpoint_path, expect_digest=run_cfg.digest())
    if ckpt.kind != "vae":
        raise ValueError(f"{checkpoint_path}: expected a vae checkpoint, got {ckpt.kind!r}")
    return VaeModel.from_checkpoint(ckpt, run_cfg)
