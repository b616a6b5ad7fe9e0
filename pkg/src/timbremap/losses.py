"""The seven training-objective components and their curriculum schedule.

Reductions, documented where the source formulation leaves room:
  - reconstruction: MSE averaged over batch AND elements (scale-free w.r.t.
    embedding size);
  - KL: summed over batch and both latent dims by default (`kl_reduce="sum"`,
    the literal reading), with a "mean" switch;
  - distances use a numerically safe sqrt (negative round-off clamped by
    construction, guarded backward at zero).
Self-pairs are excluded from both neighbor sums.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass(frozen=True)
class LossWeights:
    beta_rec: float = 0.2
    beta_kl: float = 0.0039
    beta_reg: float = 1.0
    beta_nei: float = 0.6
    beta_pitch: float = 0.07
    beta_inst: float = 0.12
    beta_fam: float = 2.0
    alpha_nei: float = 0.5
    alpha_inst: float = 0.8
    alpha_fam: float = 1.5
    margin: float = 0.25
    eps: float = 1e-6
    kl_reduce: str = "sum"

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("beta_") and getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if self.eps <= 0:
            raise ValueError("eps must be > 0")
        if self.kl_reduce not in ("sum", "mean"):
            raise ValueError("kl_reduce must be 'sum' or 'mean'")


TERM_NAMES = ("rec", "kl", "reg", "nei", "pitch", "inst", "fam")


@dataclass
class LossBreakdown:
    """Every term value and its scheduled weight for one batch or epoch."""

    epoch: int
    gamma: float
    rec: float
    kl: float
    reg: float
    nei_attractive: float
    nei_repulsive: float
    pitch: float
    inst: float
    fam: float
    scheduled_weights: dict[str, float] = field(default_factory=dict)
    total: float = 0.0

    CSV_COLUMNS = (
        "epoch", "gamma", "rec", "kl", "reg", "nei_attractive", "nei_repulsive",
        "pitch", "inst", "fam",
        "w_rec", "w_kl", "w_reg", "w_nei", "w_pitch", "w_inst", "w_fam",
        "total",
    )

    def term_values(self) -> dict[str, float]:
        return {
            "rec": self.rec, "kl": self.kl, "reg": self.reg,
            "nei": self.nei_attractive + self.nei_repulsive,
            "pitch": self.pitch, "inst": self.inst, "fam": self.fam,
        }

    def csv_row(self) -> list:
        terms = self.term_values()
        return ([self.epoch, self.gamma, self.rec, self.kl, self.reg,
                 self.nei_attractive, self.nei_repulsive, self.pitch, self.inst, self.fam]
                + [self.scheduled_weights[k] for k in TERM_NAMES]
                + [self.total])

    def check_total(self, rel_tol: float = 1e-6) -> bool:
        expected = sum(self.scheduled_weights[k] * v for k, v in self.term_values().items())
        return abs(self.total - expected) <= rel_tol * max(1.0, abs(expected))


def append_breakdown_csv(path: str | Path, rows: list[LossBreakdown]) -> None:
    path = Path(path)
    write_header = not path.exists()
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if write_header:
            writer.writerow(LossBreakdown.CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.csv_row())


def curriculum_gamma(epoch: int, n_epochs: int, weights: LossWeights) -> tuple[float, float, float, float]:
    """Training progress gamma and the three scheduled multipliers.

    Returns (gamma, nei_multiplier, inst_multiplier, fam_multiplier) where the
    neighbor and instrument terms fade in as gamma**alpha and the family term
    fades out as (1-gamma)**alpha.
    """
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    if not 0 <= epoch <= n_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {n_epochs}]")
    gamma = epoch / n_epochs
    return (
        gamma,
        gamma ** weights.alpha_nei,
        gamma ** weights.alpha_inst,
        (1.0 - gamma) ** weights.alpha_fam,
    )


def scheduled_weights(epoch: int, n_epochs: int, weights: LossWeights) -> tuple[float, dict[str, float]]:
    gamma, m_nei, m_inst, m_fam = curriculum_gamma(epoch, n_epochs, weights)
    return gamma, {
        "rec": weights.beta_rec,
        "kl": weights.beta_kl,
        "reg": weights.beta_reg,
        "nei": weights.beta_nei * m_nei,
        "pitch": weights.beta_pitch,
        "inst": weights.beta_inst * m_inst,
        "fam": weights.beta_fam * m_fam,
    }


def loss_rec(e_hat: Tensor, e: Tensor) -> Tensor:
    """Reconstruction error: MSE over batch and all embedding elements."""
    return ad.mse(e_hat, e)


def loss_kl(mu: Tensor, logvar: Tensor, reduce: str = "sum") -> Tensor:
    """KL divergence to a standard normal: 0.5 * (mu^2 + sigma^2 - logvar - 1)."""
    var = ad.exp(logvar)
    per_entry = ad.sub(ad.add(ad.mul(mu, mu), var), logvar) - 1.0
    total = ad.sum_all(per_entry) * 0.5
    if reduce == "mean":
        total = total * (1.0 / mu.shape[0])
    return total


def loss_reg(mu: Tensor) -> Tensor:
    """Unit-circle constraint: mean over batch of max(0, ||mu|| - 1)."""
    excess = ad.maximum_scalar(ad.l2_norm_last(mu) - 1.0, 0.0)
    return ad.mean_all(excess)


def loss_neighbor(mu: Tensor, instrument_ids: np.ndarray,
                  margin: float = 0.25, eps: float = 1e-6) -> tuple[Tensor, Tensor]:
    """Attractive/repulsive pair terms over latent means in one batch.

    Same-instrument pairs are pulled together (squared distance), cross-class
    pairs pushed beyond `margin`; both normalized by their pair count + eps.
    """
    n = mu.shape[0]
    if n < 2:
        raise ValueError("neighbor loss needs a batch of at least 2")
    ids = np.asarray(instrument_ids)
    if ids.shape != (n,):
        raise ValueError(f"instrument_ids shape {ids.shape} does not match batch {n}")

    same = (ids[:, None] == ids[None, :]).astype(mu.dtype)
    off_diag = 1.0 - np.eye(n, dtype=mu.dtype)
    s = same * off_diag
    ns = (1.0 - same) * off_diag

    d2 = ad.pairwise_sqdist(mu)
    d = ad.sqrt(d2)

    attractive = ad.sum_all(ad.mul(d2, ad.constant(s))) * (1.0 / (float(s.sum()) + eps))
    shortfall = ad.maximum_scalar(margin - d, 0.0)
    repulsive = ad.sum_all(ad.mul(ad.mul(shortfall, shortfall), ad.constant(ns))) \
        * (1.0 / (float(ns.sum()) + eps))
    return attractive, repulsive


def loss_cross_entropy(logits: Tensor, target_indices: np.ndarray) -> Tensor:
    """Mean cross-entropy against integer class targets."""
    return ad.cross_entropy(logits, target_indices)


def total_vae_loss(terms: dict[str, Tensor], weights: LossWeights,
                   epoch: int, n_epochs: int) -> tuple[Tensor, LossBreakdown]:
    """Combine the seven terms with their scheduled weights.

    `terms` carries Tensors for rec/kl/reg/pitch/inst/fam plus the neighbor
    pair (nei_attractive, nei_repulsive), all from the same batch.
    """
    gamma, w = scheduled_weights(epoch, n_epochs, weights)
    nei = ad.add(terms["nei_attractive"], terms["nei_repulsive"])
    ordered = {
        "rec": terms["rec"], "kl": terms["kl"], "reg": terms["reg"],
        "nei": nei, "pitch": terms["pitch"], "inst": terms["inst"], "fam": terms["fam"],
    }
    total = None
    for name in TERM_NAMES:
        piece = ordered[name] * w[name]
        total = piece if total is None else ad.add(total, piece)

    breakdown = LossBreakdown(
        epoch=epoch, gamma=gamma,
        rec=terms["rec"].item(), kl=terms["kl"].item(), reg=terms["reg"].item(),
        nei_attractive=terms["nei_attractive"].item(),
        nei_repulsive=terms["nei_repulsive"].item(),
        pitch=terms["pitch"].item(), inst=terms["inst"].item(), fam=terms["fam"].item(),
        scheduled_weights=w, total=total.item(),
    )
    return total, breakdown
