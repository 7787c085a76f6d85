"""Flat JSON reports keyed by a hash of the run configuration."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
from pathlib import Path

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if x != x or x in (float("inf"), float("-inf")):
            return str(x)
        return x
    if isinstance(obj, Path):
        return str(obj)
    return obj


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def write_report(out_dir, command: str, config: dict, results: dict, checks: dict) -> Path:
    """Write ``<command>-<hash>.json``; ``checks`` maps a name to a pass flag or a dict with ``passed``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = config_hash({"command": command, **config})
    flat = {k: (v if isinstance(v, dict) else {"passed": bool(v)}) for k, v in checks.items()}
    record = {
        "command": command,
        "config": config,
        "config_hash": h,
        "results": results,
        "checks": flat,
        "passed": all(bool(c.get("passed")) for c in flat.values()),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out / f"{command}-{h}.json"
    path.write_text(json.dumps(_plain(record), sort_keys=True, indent=2) + "\n")
    return path
