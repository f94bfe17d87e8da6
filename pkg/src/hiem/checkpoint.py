"""Versioned checkpoint files: a single .npz holding every parameter and
optimizer array plus a JSON metadata blob.  float64 arrays round-trip
bitwise."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path, state: dict, extra_meta: dict | None = None) -> None:
    arrays = dict(state["arrays"])
    meta = dict(state["meta"])
    meta["format_version"] = FORMAT_VERSION
    if extra_meta:
        meta["extra"] = extra_meta
    arrays["__meta__"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8
    )
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with np.load(path) as data:
        arrays = {k: data[k].copy() for k in data.files if k != "__meta__"}
        meta = json.loads(bytes(data["__meta__"]).decode())
    version = meta.pop("format_version", None)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version}")
    return {"arrays": arrays, "meta": meta}
