"""Report serialization: one JSON document per run plus CSV tables.

The JSON layout is documented in the README.  ``created_at`` and
``content_hash`` are volatile; the hash is computed over the canonical
serialization with those two fields removed, so identical runs produce
identical hashes regardless of wall-clock time.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
from pathlib import Path

SCHEMA_VERSION = 1
VOLATILE_KEYS = ("created_at", "content_hash")


def canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(payload: dict) -> str:
    stripped = {k: v for k, v in payload.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(canonical_json(stripped).encode()).hexdigest()


def _sanitize(value):
    """Replace non-finite floats so the canonical serializer never sees them."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and not (value == value and abs(value) != float("inf")):
        return None
    return value


def build_report(subcommand: str, config_echo: dict, results: dict) -> dict:
    report = _sanitize({
        "schema_version": SCHEMA_VERSION,
        "subcommand": subcommand,
        "config": config_echo,
        "results": results,
    })
    report["created_at"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    report["content_hash"] = content_hash(report)
    return report


def write_report(path, report: dict) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return target


def write_csv(path, header, rows) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return target
