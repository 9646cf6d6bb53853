"""Artifact writers: CSV (RFC 4180, header row, '.' decimal, no locale),
NDJSON (one UTF-8 object per line), JSON documents, and run manifests.

Float formatting goes through repr so reruns are byte-identical."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path


def _plain(value):
    """JSON-safe scalar: numpy types to Python, everything else untouched."""
    if hasattr(value, "item"):
        return value.item()
    return value


def write_csv(path, rows, fieldnames=None):
    rows = list(rows)
    path = Path(path)
    if fieldnames is None:
        if not rows:
            raise ValueError("cannot infer a header from zero rows")
        fieldnames = list(rows[0].keys())
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _plain(v) for k, v in row.items()})
    return path


def write_ndjson(path, records):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, default=_plain))
            fh.write("\n")
    return path


def write_json(path, doc):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_plain)
        fh.write("\n")
    return path


def config_hash(doc: dict) -> str:
    """Stable hash of a config document (canonical JSON, sorted keys)."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=_plain)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
