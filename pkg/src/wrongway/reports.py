"""CSV and JSON writers with a shared metadata block.

Every JSON document has the shape ``{"meta": {...}, "rows": [...]}`` (plus
optional extra top-level keys); CSV files carry the same metadata as ``#``
comment lines ahead of the header. Only ``meta.generated_at`` varies between
reruns of an identical configuration; set ``SOURCE_DATE_EPOCH`` to pin it.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

TOOL = "wrongway"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, Path):
        return str(v)
    return v


def config_hash(config: dict) -> str:
    # the output location does not change any result, so it stays out of the hash
    settings = {k: v for k, v in config.items() if k != "out_dir"}
    blob = json.dumps(_plain(settings), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.replace(microsecond=0).isoformat()


def make_meta(config: dict, command: str, **extra) -> dict:
    meta = {
        "tool": TOOL,
        "version": __version__,
        "command": command,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "config": _plain(config),
    }
    meta.update(_plain(extra))
    meta["generated_at"] = timestamp()
    return meta


def write_json(path, meta: dict, rows, **extra) -> Path:
    path = Path(path)
    doc = {"meta": meta, "rows": _plain(rows)}
    doc.update(_plain(extra))
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, meta: dict, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"# {meta['tool']} {meta['version']} command={meta['command']} "
                 f"config_hash={meta['config_hash']} seed={meta['seed']}\n")
        fh.write(f"# generated_at={meta['generated_at']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(v) for v in (r if not isinstance(r, dict) else (r[h] for h in header))])
    return path


def read_csv_rows(path):
    """Rows of a CSV written by :func:`write_csv`, skipping ``#`` comment lines."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
