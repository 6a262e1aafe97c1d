"""Deterministic CSV and JSON writers for computed tables and reports.

CSV files start with '#'-prefixed metadata lines (tool version, config hash,
seed, ...) followed by a header row.  Floats are rendered with repr-accurate
precision so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

TOOL_NAME = "logtail"


def _tool_version() -> str:
    try:
        from importlib.metadata import version

        return version(TOOL_NAME)
    except Exception:
        return "0.1.0"


def fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".17g")
    return str(v)


def config_hash(doc) -> str:
    """Stable hash of a JSON-serializable configuration document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_csv(path, header: list, rows, metadata: dict | None = None) -> None:
    path = Path(path)
    lines = [f"# tool={TOOL_NAME} {_tool_version()}"]
    for key in sorted((metadata or {}).keys()):
        lines.append(f"# {key}={metadata[key]}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
