"""Deterministic CSV/JSON table writers and the run manifest.

Floats are rendered with repr (shortest round-trip form), so identical
results serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy


def _render(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path: Path, columns, rows, fmt: str = "csv") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        lines = [",".join(columns)]
        lines.extend(",".join(_render(v) for v in row) for row in rows)
        payload = "\n".join(lines) + "\n"
        out = path.with_suffix(".csv")
    elif fmt == "json":
        records = [
            {col: (float(v) if isinstance(v, (float, np.floating)) else
                   int(v) if isinstance(v, (int, np.integer)) else str(v))
             for col, v in zip(columns, row)}
            for row in rows
        ]
        payload = json.dumps(records, indent=1, sort_keys=True) + "\n"
        out = path.with_suffix(".json")
    else:
        raise ValueError(f"unknown output format {fmt!r}")
    out.write_bytes(payload.encode("utf-8"))
    return out


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, config_path, seed, results, files) -> Path:
    """Run manifest: config hash, seed, versions, per-experiment verdicts,
    and a content hash for every emitted table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    config_hash = (sha256_file(config_path)
                   if config_path is not None else None)
    manifest = {
        "config_sha256": config_hash,
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "experiments": {
            r.name: {
                "id": r.experiment_id,
                "passed": bool(r.passed),
                "checks": {k: bool(v) for k, v in sorted(r.checks.items())},
                "details": r.details,
            }
            for r in results
        },
        "files": {
            str(Path(p).name): sha256_file(p) for p in sorted(map(str, files))
        },
        "all_passed": all(r.passed for r in results),
    }
    path = out_dir / "manifest.json"
    path.write_bytes(
        (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode("utf-8")
    )
    return path
