"""Binary checkpoint files.

Little-endian layout:

    magic    8 bytes   b"SOLCKPT1"
    confhash 32 bytes  sha256 of the canonical config serialization
    count    uint32    number of tensors
    per tensor:
        name_len uint16, name utf-8
        rank     uint8
        dims     rank * uint32
        payload  float32, C order

The loader validates tensor shapes against freshly initialized parameters for
the current config, so a checkpoint cannot be silently loaded into a network
of the wrong architecture.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .config import TrainConfig, serialize_config

MAGIC = b"SOLCKPT1"


class CheckpointError(RuntimeError):
    pass


def config_hash(cfg: TrainConfig) -> bytes:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).digest()


def save_checkpoint(path, params: dict[str, np.ndarray], cfg: TrainConfig) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(config_hash(cfg))
        f.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            tensor = np.ascontiguousarray(params[name], dtype=np.float32)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(tensor.tobytes())


def load_checkpoint(path, expected_shapes: dict[str, tuple[int, ...]] | None = None,
                    expected_cfg: TrainConfig | None = None) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        data = f.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError("truncated checkpoint")
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    stored_hash = take(32)
    if expected_cfg is not None and stored_hash != config_hash(expected_cfg):
        raise CheckpointError("checkpoint was written for a different config")
    (count,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        n_items = int(np.prod(dims)) if rank else 1
        payload = np.frombuffer(take(4 * n_items), dtype="<f4").reshape(dims)
        params[name] = payload.astype(np.float64)
    if off != len(data):
        raise CheckpointError("trailing bytes after last tensor")
    if expected_shapes is not None:
        if set(params) != set(expected_shapes):
            raise CheckpointError(
                f"tensor names mismatch: {sorted(params)} vs {sorted(expected_shapes)}")
        for name, shape in expected_shapes.items():
            if params[name].shape != tuple(shape):
                raise CheckpointError(
                    f"{name}: shape {params[name].shape}, expected {tuple(shape)}")
    return params
