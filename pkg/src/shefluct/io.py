"""Binary field dumps with JSON sidecars, CSV tables and run manifests."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

__all__ = ["save_fields", "load_fields", "write_table", "read_table", "content_hash", "write_manifest"]

TABLE_COLUMNS = ("epsilon", "delta", "estimate", "stderr", "M")


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".npz", ".json") else path


def save_fields(path, arrays: dict, metadata: dict) -> tuple[Path, Path]:
    """Write ``<path>.npz`` and a ``<path>.json`` sidecar describing it."""
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    data = stem.with_suffix(".npz")
    side = stem.with_suffix(".json")
    np.savez(data, **arrays)
    meta = dict(metadata)
    meta["schema"] = 1
    meta["arrays"] = {k: {"shape": list(np.shape(v)), "dtype": str(np.asarray(v).dtype)} for k, v in arrays.items()}
    meta["file"] = data.name
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=_jsonable))
    return data, side


def load_fields(path) -> tuple[dict, dict]:
    stem = _stem(path)
    meta = json.loads(stem.with_suffix(".json").read_text())
    with np.load(stem.with_suffix(".npz")) as z:
        arrays = {k: z[k] for k in z.files}
    return arrays, meta


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _fmt(v) -> str:
    # repr round-trips doubles exactly
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, rows, columns=TABLE_COLUMNS) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])
    return path


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def content_hash(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj``."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, config: dict, wall_time: float, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"config": config, "content_hash": content_hash(config), "wall_time_s": wall_time}
    if extra:
        body.update(extra)
    path.write_text(json.dumps(body, indent=2, sort_keys=True, default=_jsonable))
    return path
