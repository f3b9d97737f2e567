"""Versioned checkpoint files with named float64 tensors.

Layout::

    b"CTXRERANK-CKPT\\n"
    8-byte little-endian header length
    UTF-8 JSON header (indented): format version, schema, training config,
        model kinds and dims, best validation metric, epoch, and a tensor
        table of {name, shape, offset}
    raw little-endian float64 tensor data, in table order

Loading rebuilds the models and copies the tensors back bit for bit.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .embedding import FeatureSchema
from .model import ContextualReranker
from .ranker import PointwiseRanker

MAGIC = b"CTXRERANK-CKPT\n"
FORMAT_VERSION = 1
_LE_F8 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    schema: FeatureSchema
    config: dict
    reranker: ContextualReranker | None = None
    ranker: PointwiseRanker | None = None
    best_metric: float | None = None
    epoch: int | None = None


def _model_entry(model):
    if isinstance(model, ContextualReranker):
        return {"kind": "reranker", "dims": model.dims}
    if isinstance(model, PointwiseRanker):
        return {"kind": "ranker", "dims": model.dims}
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def save_checkpoint(path, ckpt: Checkpoint):
    models = {name: m for name, m in (("reranker", ckpt.reranker), ("ranker", ckpt.ranker))
              if m is not None}
    tensors, blobs, offset = [], [], 0
    for prefix, model in models.items():
        for name, t in model.named_parameters().items():
            data = np.ascontiguousarray(t.data, dtype=_LE_F8)
            tensors.append({"name": f"{prefix}/{name}", "shape": list(data.shape),
                            "offset": offset})
            blobs.append(data.tobytes())
            offset += data.nbytes
    config = ckpt.config
    if dataclasses.is_dataclass(config):
        config = dataclasses.asdict(config)
    header = {
        "format_version": FORMAT_VERSION,
        "schema": ckpt.schema.to_dict(),
        "config": config,
        "models": {name: _model_entry(m) for name, m in models.items()},
        "best_metric": ckpt.best_metric,
        "epoch": ckpt.epoch,
        "tensors": tensors,
    }
    raw = json.dumps(header, indent=2, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def read_header(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
        start = fh.tell()
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    return header, start


def _build(entry, schema):
    dims = entry["dims"]
    if entry["kind"] == "reranker":
        return ContextualReranker(schema, dims["hidden"], dims["d"], dims["d_h"],
                                  dims["num_blocks"], dims["heads"],
                                  position_embeddings=dims["position_embeddings"],
                                  max_candidates=dims["max_candidates"] or None,
                                  n_max=dims["n_max"])
    if entry["kind"] == "ranker":
        return PointwiseRanker(schema, dims["hidden"])
    raise CheckpointError(f"unknown model kind {entry['kind']!r}")


def load_checkpoint(path) -> Checkpoint:
    header, start = read_header(path)
    schema = FeatureSchema.from_dict(header["schema"])
    with open(path, "rb") as fh:
        fh.seek(start)
        payload = fh.read()
    models = {name: _build(entry, schema) for name, entry in header["models"].items()}
    params = {f"{prefix}/{k}": t for prefix, m in models.items()
              for k, t in m.named_parameters().items()}
    seen = set()
    for entry in header["tensors"]:
        name, shape = entry["name"], tuple(entry["shape"])
        if name not in params:
            raise CheckpointError(f"{path}: unexpected tensor {name}")
        target = params[name]
        if target.shape != shape:
            raise CheckpointError(f"{path}: tensor {name} has shape {shape}, model expects {target.shape}")
        count = int(np.prod(shape))
        target.data[...] = np.frombuffer(payload, dtype=_LE_F8, count=count,
                                         offset=entry["offset"]).reshape(shape)
        seen.add(name)
    missing = set(params) - seen
    if missing:
        raise CheckpointError(f"{path}: missing tensors {sorted(missing)}")
    return Checkpoint(schema, header["config"], models.get("reranker"), models.get("ranker"),
                      header["best_metric"], header["epoch"])
