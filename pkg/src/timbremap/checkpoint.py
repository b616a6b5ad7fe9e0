"""Versioned binary checkpoint container shared by both training stages.

Layout: magic, format version, config digest (hex), a JSON metadata block
(named parameter shapes in order, RNG state, epoch counter, stage kind),
then the raw little-endian float32 parameter blocks. Loading verifies the
config digest when the caller supplies one; a mismatch is a hard error.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"TMCK"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


@dataclass
class Checkpoint:
    kind: str
    config_digest: str
    arrays: dict[str, np.ndarray]
    rng_state: dict | None
    epoch: int
    extra: dict


def save_checkpoint(path: str | Path, kind: str, config_digest: str,
                    arrays: dict[str, np.ndarray], rng_state: dict | None = None,
                    epoch: int = 0, extra: dict | None = None) -> None:
    meta = {
        "kind": kind,
        "epoch": epoch,
        "rng_state": _encode_rng(rng_state),
        "extra": extra or {},
        "blocks": [{"name": k, "shape": list(v.shape)} for k, v in arrays.items()],
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(config_digest.encode().ljust(64, b"\0")[:64])
        fh.write(struct.pack("<Q", len(meta_bytes)))
        fh.write(meta_bytes)
        for v in arrays.values():
            fh.write(np.ascontiguousarray(v, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path, expect_digest: str | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    digest = blob[8:72].rstrip(b"\0").decode()
    if expect_digest is not None and digest != expect_digest:
        raise CheckpointError(
            f"{path}: config digest mismatch (checkpoint {digest[:12]}..., expected {expect_digest[:12]}...)")
    (meta_len,) = struct.unpack_from("<Q", blob, 72)
    meta = json.loads(blob[80:80 + meta_len])
    offset = 80 + meta_len
    arrays = {}
    for block in meta["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        arrays[block["name"]] = arr.copy()
        offset += count * 4
    return Checkpoint(kind=meta["kind"], config_digest=digest, arrays=arrays,
                      rng_state=_decode_rng(meta["rng_state"]), epoch=meta["epoch"],
                      extra=meta.get("extra", {}))


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _encode_rng(state: dict | None):
    if state is None:
        return None
    return json.loads(json.dumps(state, default=int))


def _decode_rng(state):
    return state
