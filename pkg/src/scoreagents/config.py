"""Run configuration: defaults, file loading, deep merging, stable digests.

A configuration is a plain JSON-compatible mapping. The top level selects
which agents run, carries one opaque parameter block per agent (handed to
that agent untouched), optional extra dependency edges, and the audit
thresholds. Anything the user supplies is merged over the defaults, so a
config file only needs the keys it changes.
"""

from __future__ import annotations

import copy
import hashlib
import json
from collections.abc import Mapping
from pathlib import Path

from .errors import SchemaError

__all__ = ["config_digest", "default_config", "load_config", "merge_config"]

DEFAULT_CONFIG = {
    "agents": ["structural", "harmonic", "stylistic"],
    "structural": {},
    "harmonic": {},
    "stylistic": {},
    "dependencies": {},
    "audit": {
        "structural_consistent_f1": 0.9,
        "structural_minor_f1": 0.6,
        "boundary_tolerance": 1,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULT_CONFIG)


def merge_config(base: Mapping, override: Mapping) -> dict:
    """Recursively merge ``override`` into ``base`` without mutating either.

    Nested mappings merge key by key; any other value (including lists)
    replaces the base value outright.
    """
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config(path: str | Path | None) -> dict:
    """Defaults merged with the JSON object at ``path`` (defaults when None)."""
    if path is None:
        return default_config()
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}", field_path="") from exc
    if not isinstance(document, Mapping):
        raise SchemaError("config file must hold a JSON object", field_path="")
    return merge_config(DEFAULT_CONFIG, document)


def config_digest(config: Mapping) -> str:
    """Short stable hash of a config mapping, for envelope provenance."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"),
                           default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]
