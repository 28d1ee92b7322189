"""Binary model checkpoints: JSON header + little-endian float32 payload.

Layout: 8-byte magic, uint32 format version, uint32 header length, UTF-8
JSON header, then the raw parameter payload in manifest order. The header
records the model config, the training config it was produced under, and
a named-tensor manifest with shapes and byte offsets.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import ModelConfig, Seq2SeqModel
from .training import TrainingConfig

MAGIC = b"DPAGECKP"
FORMAT_VERSION = 1


def save_checkpoint(model: Seq2SeqModel, path, training_config: TrainingConfig | None = None):
    params = model.parameters()
    manifest = []
    offset = 0
    blobs = []
    for name, p in params.items():
        data = p.data.astype("<f4")
        blobs.append(data.tobytes())
        manifest.append({"name": name, "shape": list(p.data.shape), "offset": offset})
        offset += data.nbytes
    header = {
        "format_version": FORMAT_VERSION,
        "mode": model.mode,
        "model_config": asdict(model.config),
        "training_config": asdict(training_config) if training_config else None,
        "manifest": manifest,
        "payload_bytes": offset,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for b in blobs:
            f.write(b)


def load_checkpoint(path) -> tuple[Seq2SeqModel, dict]:
    """Rebuild a model from disk; returns (model, header)."""
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:8] != MAGIC:
        raise DataFormatError(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack("<II", raw[8:16])
    if version != FORMAT_VERSION:
        raise DataFormatError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(raw[16:16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"{path}: corrupt checkpoint header: {e}") from e
    payload = raw[16 + header_len:]
    if len(payload) != header["payload_bytes"]:
        raise DataFormatError(
            f"{path}: payload length mismatch: header says {header['payload_bytes']} "
            f"bytes, file has {len(payload)}")
    config = ModelConfig(**header["model_config"])
    model = Seq2SeqModel(config, mode=header["mode"])
    params = model.parameters()
    manifest_names = [m["name"] for m in header["manifest"]]
    if sorted(manifest_names) != sorted(params):
        raise DataFormatError(f"{path}: manifest names do not match model parameters")
    for entry in header["manifest"]:
        p = params[entry["name"]]
        shape = tuple(entry["shape"])
        if shape != p.data.shape:
            raise DataFormatError(
                f"{path}: shape mismatch for {entry['name']}: {shape} vs {p.data.shape}")
        count = int(np.prod(shape))
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        p.data[...] = arr.reshape(shape).astype(np.float64)
    return model, header
