"""Run manifests: canonical config hashing plus input file digests.

Manifests carry no timestamps so identical runs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from fidgetkit import __version__


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def hash_inputs(paths: list) -> dict[str, str]:
    out = {}
    for p in sorted(Path(x) for x in paths):
        if p.is_file():
            out[str(p)] = file_digest(p)
        elif p.is_dir():
            for child in sorted(p.rglob("*")):
                if child.is_file():
                    out[str(child)] = file_digest(child)
    return out


def write_manifest(path, command: str, config: dict, inputs: list) -> dict:
    doc = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "inputs": hash_inputs(inputs),
        "version": __version__,
    }
    with open(path, "w") as f:
        f.write(canonical_json(doc))
    return doc
