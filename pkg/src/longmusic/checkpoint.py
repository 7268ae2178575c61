"""Single-file checkpoints.

Layout (little-endian)::

    b"LMCK"  u16 format version  u32 manifest length  manifest (UTF-8 JSON)
    u32 tensor count
    per tensor: u16 name length, name, u8 ndim, u32 dims..., float32 data

The manifest records the model config, training step, best validation NLL
and the event-vocabulary fingerprint.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .events import VOCAB
from .layers import Module
from .model import build_model, config_from_dict

MAGIC = b"LMCK"
FORMAT_VERSION = 1


def dumps_checkpoint(model: Module, step: int = 0, best_val: float | None = None, extra: dict | None = None) -> bytes:
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "step": int(step),
        "best_val": None if best_val is None or not np.isfinite(best_val) else float(best_val),
        "vocab_hash": VOCAB.fingerprint(),
    }
    if extra:
        manifest["extra"] = extra
    blob = json.dumps(manifest, sort_keys=True).encode()
    out = bytearray(MAGIC + struct.pack("<HI", FORMAT_VERSION, len(blob)) + blob)
    params = list(model.named_parameters())
    out += struct.pack("<I", len(params))
    for name, p in params:
        raw = name.encode()
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<B", p.ndim)
        out += struct.pack(f"<{p.ndim}I", *p.shape)
        out += np.ascontiguousarray(p.data, dtype="<f4").tobytes()
    return bytes(out)


def loads_checkpoint(data: bytes) -> tuple[Module, dict]:
    if data[:4] != MAGIC:
        raise ValueError("not a checkpoint (bad magic)")
    version, mlen = struct.unpack_from("<HI", data, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 10
    manifest = json.loads(data[pos : pos + mlen].decode())
    pos += mlen
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    state = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + nlen].decode()
        pos += nlen
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", data, pos)
        pos += 4 * ndim
        size = int(np.prod(shape, dtype=np.int64))
        state[name] = np.frombuffer(data, dtype="<f4", count=size, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * size
    if manifest.get("vocab_hash") != VOCAB.fingerprint():
        raise ValueError("checkpoint was trained with a different event vocabulary")
    model = build_model(config_from_dict(manifest["config"]))
    model.load_state_dict(state)
    model.eval()
    return model, manifest


def save_checkpoint(path, model: Module, step: int = 0, best_val: float | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps_checkpoint(model, step, best_val, extra))
    tmp.replace(path)
    return path


def load_checkpoint(path) -> tuple[Module, dict]:
    return loads_checkpoint(Path(path).read_bytes())
