"""Result persistence: CSV tables, JSON documents, and run manifests.

CSV bodies are written with 17-significant-digit floats in deterministic
row order, so identical (config, seed) runs are byte-identical regardless
of worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["fmt", "write_csv", "write_json", "file_digest", "RunManifest"]


def fmt(x) -> str:
    """Canonical scalar formatting: floats at 17 significant digits."""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(x) for x in row])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Record of one experiment run; every output file is listed with its
    SHA-256 digest."""

    kind: str
    seed: int
    config: dict
    resolution: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)  # name -> {path, sha256}
    flagged: list = field(default_factory=list)
    started: float = field(default_factory=time.time)
    elapsed: float = 0.0
    version: str = __version__

    def add_output(self, name: str, path) -> None:
        self.outputs[name] = {"path": str(path), "sha256": file_digest(path)}

    def flag(self, message: str) -> None:
        self.flagged.append(message)

    def finish(self, out_dir) -> Path:
        self.elapsed = time.time() - self.started
        doc = {
            "kind": self.kind,
            "seed": self.seed,
            "config": self.config,
            "resolution": self.resolution,
            "outputs": self.outputs,
            "flagged": self.flagged,
            "elapsed_seconds": self.elapsed,
            "version": self.version,
        }
        return write_json(Path(out_dir) / "manifest.json", doc)
