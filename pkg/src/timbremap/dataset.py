"""Deterministic synthetic dataset: families x instruments x pitches.

Splits are stratified two ways: `test` holds out one whole instrument per
family (the unseen-instrument evaluation), `val` holds out a seeded choice of
pitches from each remaining instrument. Every (instrument, pitch) pair occurs
exactly once across the three splits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import codec
from .config import DatasetConfig

SPLITS = ("train", "val", "test")

_SPLIT_TAG = 2002
_BATCH_TAG = 2003
_TEST_PICK_TAG = 2004


@dataclass
class SampleRecord:
    """One dataset item: embedding grid plus its labels and split."""

    embedding: np.ndarray  # (channels, frames) float32
    pitch: int
    pitch_class_index: int
    instrument_id: int
    family_id: int
    split: str

    def validate(self, config: DatasetConfig) -> None:
        assert self.pitch_class_index == self.pitch - config.pitch_lo
        assert self.family_id == self.instrument_id // config.instruments_per_family


def generate_dataset(config: DatasetConfig) -> tuple[list[SampleRecord], dict]:
    """All records plus a manifest; a pure function of the config."""
    config.validate()

    test_instruments = _pick_test_instruments(config)
    records: list[SampleRecord] = []
    for family_id in range(config.n_families):
        for local_idx in range(config.instruments_per_family):
            instrument_id = family_id * config.instruments_per_family + local_idx
            val_pitches = _pick_val_pitches(config, instrument_id)
            for pitch in config.pitches:
                if instrument_id in test_instruments:
                    split = "test"
                elif pitch in val_pitches:
                    split = "val"
                else:
                    split = "train"
                waveform = codec.synth_waveform(family_id, instrument_id, pitch, config)
                records.append(SampleRecord(
                    embedding=codec.encode(waveform, config),
                    pitch=pitch,
                    pitch_class_index=pitch - config.pitch_lo,
                    instrument_id=instrument_id,
                    family_id=family_id,
                    split=split,
                ))
    manifest = build_manifest(records, config)
    return records, manifest


def _pick_test_instruments(config: DatasetConfig) -> set[int]:
    held_out = set()
    for family_id in range(config.n_families):
        rng = np.random.default_rng(
            np.random.SeedSequence([config.seed, _TEST_PICK_TAG, family_id]))
        local = int(rng.integers(0, config.instruments_per_family))
        held_out.add(family_id * config.instruments_per_family + local)
    return held_out


def _pick_val_pitches(config: DatasetConfig, instrument_id: int) -> set[int]:
    n_val = max(1, round(config.split_fractions[1] * config.n_pitches))
    rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, _SPLIT_TAG, instrument_id]))
    chosen = rng.choice(config.n_pitches, size=n_val, replace=False)
    return {config.pitch_lo + int(i) for i in chosen}


def split_records(records: list[SampleRecord], split: str) -> list[SampleRecord]:
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    return [r for r in records if r.split == split]


def build_manifest(records: list[SampleRecord], config: DatasetConfig) -> dict:
    items = []
    hasher = hashlib.sha256()
    for i, r in enumerate(records):
        blob = r.embedding.astype("<f4").tobytes()
        hasher.update(blob)
        items.append({
            "index": i,
            "file": f"{r.split}/{_record_filename(r)}",
            "pitch": r.pitch,
            "pitch_class_index": r.pitch_class_index,
            "instrument_id": r.instrument_id,
            "family_id": r.family_id,
            "split": r.split,
            "shape": list(r.embedding.shape),
        })
    counts = {s: sum(1 for r in records if r.split == s) for s in SPLITS}
    return {
        "format": "timbremap-dataset-v1",
        "config": _config_dict(config),
        "counts": counts,
        "records": items,
        "content_hash": hasher.hexdigest(),
    }


def _config_dict(config: DatasetConfig) -> dict:
    import dataclasses

    d = dataclasses.asdict(config)
    d["split_fractions"] = list(d["split_fractions"])
    return d


def _record_filename(r: SampleRecord) -> str:
    return f"inst{r.instrument_id:03d}_p{r.pitch:03d}.f32"


def save_dataset(records: list[SampleRecord], manifest: dict, root: str | Path,
                 export_wav: bool = False, config: DatasetConfig | None = None) -> None:
    """One directory per split; embeddings as little-endian float32 blobs."""
    root = Path(root)
    for split in SPLITS:
        (root / split).mkdir(parents=True, exist_ok=True)
    for r in records:
        (root / r.split / _record_filename(r)).write_bytes(r.embedding.astype("<f4").tobytes())
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if export_wav:
        assert config is not None
        wav_dir = root / "wav"
        wav_dir.mkdir(exist_ok=True)
        for r in records:
            w = codec.synth_waveform(r.family_id, r.instrument_id, r.pitch, config)
            codec.write_wav(wav_dir / f"inst{r.instrument_id:03d}_p{r.pitch:03d}.wav",
                            w, config.sample_rate)


def load_dataset(root: str | Path) -> tuple[list[SampleRecord], dict]:
    root = Path(root)
    with open(root / "manifest.json") as fh:
        manifest = json.load(fh)
    records = []
    for item in manifest["records"]:
        blob = (root / item["file"]).read_bytes()
        emb = np.frombuffer(blob, dtype="<f4").reshape(item["shape"]).copy()
        records.append(SampleRecord(
            embedding=emb,
            pitch=item["pitch"],
            pitch_class_index=item["pitch_class_index"],
            instrument_id=item["instrument_id"],
            family_id=item["family_id"],
            split=item["split"],
        ))
    return records, manifest


def batch_iterator(records: list[SampleRecord], batch_size: int, seed: int, epoch: int):
    """Seeded per-epoch shuffle; the final short batch is kept."""
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2 (pair losses need at least a pair)")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _BATCH_TAG, epoch]))
    order = rng.permutation(len(records))
    for start in range(0, len(records), batch_size):
        yield [records[i] for i in order[start:start + batch_size]]


def batch_arrays(batch: list[SampleRecord]):
    """Stack one batch into (embeddings, pitch_idx, instrument_ids, family_ids)."""
    e = np.stack([r.embedding for r in batch]).astype(np.float32)
    pitch = np.array([r.pitch_class_index for r in batch])
    inst = np.array([r.instrument_id for r in batch])
    fam = np.array([r.family_id for r in batch])
    return e, pitch, inst, fam


# ---------------------------------------------------------------------------
# separability probes: cheap guarantees that the codec kept the information
# the two heads will need


def nn_pitch_accuracy(records: list[SampleRecord]) -> float:
    """Leave-one-out 1-NN pitch prediction on raw embedding grids."""
    feats = [r.embedding.reshape(-1) for r in records]
    return _nn_accuracy(records, feats, label=lambda r: r.pitch, exclude_same_pitch=False)


def nn_instrument_accuracy(records: list[SampleRecord]) -> float:
    """Leave-one-out 1-NN instrument prediction on each sample's temporal
    energy profile (frame-pooled bands), neighbors restricted to a different
    pitch.

    Each (instrument, pitch) pair is unique, so an unrestricted full-grid
    neighbor answers the pitch question, never the timbre one; the pooled
    profile isolates the attack/decay fingerprint that identifies an
    instrument across pitches.
    """
    feats = [r.embedding.mean(axis=0) for r in records]
    return _nn_accuracy(records, feats, label=lambda r: r.instrument_id, exclude_same_pitch=True)


def _nn_accuracy(records: list[SampleRecord], feats, label, exclude_same_pitch: bool) -> float:
    x = np.stack(feats).astype(np.float64)
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, np.inf)
    if exclude_same_pitch:
        pitches = np.array([r.pitch for r in records])
        d2[pitches[:, None] == pitches[None, :]] = np.inf
    nearest = np.argmin(d2, axis=1)
    labels = np.array([label(r) for r in records])
    return float((labels[nearest] == labels).mean())
