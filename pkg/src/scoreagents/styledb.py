"""Style reference database: profile schema, validation, and shipped seed data.

A database document is a JSON key-value tree: a ``profiles`` list plus an
optional symmetric ``adjacency`` map used when grading near-miss
attributions.  The seed below covers the eight 18th-century idioms the
package ships with; its means and spreads are editable curation, not
measured ground truth, and every value can be overridden by pointing the
tools at another file.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple

from .errors import SchemaError

FEATURE_FIELDS = (
    "chromaticism",
    "ornamentation_density",
    "mean_voice_count",
    "phrase_regularity",
    "cadence_rate",
    "harmonic_rhythm",
    "seventh_ratio",
)


class FeatureStat(NamedTuple):
    mean: float
    spread: float


@dataclass(frozen=True)
class StyleProfile:
    label: str
    features: Mapping[str, FeatureStat]
    typical_instrumentation: tuple[str, ...]
    typical_ornamentation: tuple[str, ...]
    exemplar_composers: tuple[str, ...]


SEED_DOCUMENT = {
    "version": 1,
    "profiles": [
        {
            "label": "Late Baroque",
            "features": {
                "chromaticism": {"mean": 0.12, "spread": 0.08},
                "ornamentation_density": {"mean": 0.20, "spread": 0.18},
                "mean_voice_count": {"mean": 3.2, "spread": 1.1},
                "phrase_regularity": {"mean": 0.55, "spread": 0.30},
                "cadence_rate": {"mean": 0.40, "spread": 0.30},
                "harmonic_rhythm": {"mean": 2.0, "spread": 1.0},
                "seventh_ratio": {"mean": 0.28, "spread": 0.16},
            },
            "instrumentation": ["harpsichord", "organ", "strings", "continuo"],
            "ornamentation": ["trill", "mordent", "turn", "written-out diminutions"],
            "composers": ["J. S. Bach", "Handel"],
        },
        {
            "label": "Galant",
            "features": {
                "chromaticism": {"mean": 0.07, "spread": 0.06},
                "ornamentation_density": {"mean": 0.15, "spread": 0.15},
                "mean_voice_count": {"mean": 2.4, "spread": 0.9},
                "phrase_regularity": {"mean": 0.30, "spread": 0.22},
                "cadence_rate": {"mean": 0.55, "spread": 0.30},
                "harmonic_rhythm": {"mean": 1.3, "spread": 0.8},
                "seventh_ratio": {"mean": 0.18, "spread": 0.14},
            },
            "instrumentation": ["harpsichord", "strings", "voice"],
            "ornamentation": ["appoggiatura", "trill", "slide"],
            "composers": ["D. Scarlatti", "Pergolesi"],
        },
        {
            "label": "Empfindsamer Stil",
            "features": {
                "chromaticism": {"mean": 0.16, "spread": 0.09},
                "ornamentation_density": {"mean": 0.25, "spread": 0.20},
                "mean_voice_count": {"mean": 2.2, "spread": 0.8},
                "phrase_regularity": {"mean": 0.65, "spread": 0.30},
                "cadence_rate": {"mean": 0.45, "spread": 0.30},
                "harmonic_rhythm": {"mean": 1.6, "spread": 0.9},
                "seventh_ratio": {"mean": 0.30, "spread": 0.16},
            },
            "instrumentation": ["clavichord", "fortepiano", "strings"],
            "ornamentation": ["appoggiatura", "turn", "bebung"],
            "composers": ["C. P. E. Bach"],
        },
        {
            "label": "Classical",
            "features": {
                "chromaticism": {"mean": 0.05, "spread": 0.05},
                "ornamentation_density": {"mean": 0.10, "spread": 0.12},
                "mean_voice_count": {"mean": 2.8, "spread": 1.0},
                "phrase_regularity": {"mean": 0.20, "spread": 0.18},
                "cadence_rate": {"mean": 0.65, "spread": 0.30},
                "harmonic_rhythm": {"mean": 1.0, "spread": 0.7},
                "seventh_ratio": {"mean": 0.14, "spread": 0.12},
            },
            "instrumentation": ["fortepiano", "string quartet", "orchestra"],
            "ornamentation": ["trill", "grace note", "alberti figuration"],
            "composers": ["Haydn", "Mozart", "Boccherini", "Salieri"],
        },
        {
            "label": "Opera Reform",
            "features": {
                "chromaticism": {"mean": 0.08, "spread": 0.07},
                "ornamentation_density": {"mean": 0.08, "spread": 0.10},
                "mean_voice_count": {"mean": 3.0, "spread": 1.2},
                "phrase_regularity": {"mean": 0.35, "spread": 0.25},
                "cadence_rate": {"mean": 0.50, "spread": 0.30},
                "harmonic_rhythm": {"mean": 0.9, "spread": 0.7},
                "seventh_ratio": {"mean": 0.16, "spread": 0.13},
            },
            "instrumentation": ["orchestra", "chorus", "voice"],
            "ornamentation": ["syllabic declamation", "restrained trill"],
            "composers": ["Gluck"],
        },
        {
            "label": "Mannheim School",
            "features": {
                "chromaticism": {"mean": 0.06, "spread": 0.06},
                "ornamentation_density": {"mean": 0.12, "spread": 0.13},
                "mean_voice_count": {"mean": 4.2, "spread": 1.4},
                "phrase_regularity": {"mean": 0.25, "spread": 0.20},
                "cadence_rate": {"mean": 0.60, "spread": 0.30},
                "harmonic_rhythm": {"mean": 0.8, "spread": 0.6},
                "seventh_ratio": {"mean": 0.12, "spread": 0.11},
            },
            "instrumentation": ["orchestra", "clarinets", "horns"],
            "ornamentation": ["crescendo roller", "rocket figure", "sigh motif"],
            "composers": ["Stamitz"],
        },
        {
            "label": "Opera Buffa",
            "features": {
                "chromaticism": {"mean": 0.05, "spread": 0.05},
                "ornamentation_density": {"mean": 0.12, "spread": 0.13},
                "mean_voice_count": {"mean": 2.6, "spread": 1.0},
                "phrase_regularity": {"mean": 0.22, "spread": 0.20},
                "cadence_rate": {"mean": 0.70, "spread": 0.30},
                "harmonic_rhythm": {"mean": 1.1, "spread": 0.8},
                "seventh_ratio": {"mean": 0.13, "spread": 0.12},
            },
            "instrumentation": ["voice", "orchestra", "continuo recitative"],
            "ornamentation": ["patter figures", "cadential trill"],
            "composers": ["Paisiello"],
        },
        {
            "label": "French Baroque",
            "features": {
                "chromaticism": {"mean": 0.10, "spread": 0.08},
                "ornamentation_density": {"mean": 0.30, "spread": 0.22},
                "mean_voice_count": {"mean": 2.9, "spread": 1.1},
                "phrase_regularity": {"mean": 0.45, "spread": 0.28},
                "cadence_rate": {"mean": 0.45, "spread": 0.30},
                "harmonic_rhythm": {"mean": 1.7, "spread": 0.9},
                "seventh_ratio": {"mean": 0.24, "spread": 0.15},
            },
            "instrumentation": ["harpsichord", "viols", "flutes", "orchestra"],
            "ornamentation": ["agrement", "port de voix", "coule", "pince"],
            "composers": ["Rameau"],
        },
    ],
    "adjacency": {
        "Late Baroque": ["French Baroque", "Galant", "Empfindsamer Stil"],
        "French Baroque": ["Late Baroque", "Galant"],
        "Galant": ["Late Baroque", "French Baroque", "Empfindsamer Stil",
                   "Classical", "Opera Buffa"],
        "Empfindsamer Stil": ["Late Baroque", "Galant", "Classical",
                              "Mannheim School"],
        "Classical": ["Galant", "Empfindsamer Stil", "Mannheim School",
                      "Opera Reform", "Opera Buffa"],
        "Mannheim School": ["Empfindsamer Stil", "Classical"],
        "Opera Reform": ["Classical", "Opera Buffa"],
        "Opera Buffa": ["Galant", "Classical", "Opera Reform"],
    },
}


def seed_document() -> dict:
    """Deep copy of the shipped database document, safe to edit."""
    return copy.deepcopy(SEED_DOCUMENT)


def _require(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise SchemaError(message, path)


def load_reference_db(document: Mapping) -> list[StyleProfile]:
    """Validate a database document and return its profiles.

    Labels must be unique and non-empty, every profile must carry every
    feature field, and every spread must be positive and finite.
    """
    _require(isinstance(document, Mapping), "document must be a mapping", "")
    raw_profiles = document.get("profiles")
    _require(isinstance(raw_profiles, list) and raw_profiles,
             "profiles must be a non-empty list", "profiles")
    profiles = []
    seen = set()
    for i, raw in enumerate(raw_profiles):
        path = f"profiles[{i}]"
        _require(isinstance(raw, Mapping), "profile must be a mapping", path)
        label = raw.get("label")
        _require(isinstance(label, str) and label.strip(), "label must be a non-empty string",
                 f"{path}.label")
        _require(label not in seen, f"duplicate label {label!r}", f"{path}.label")
        seen.add(label)
        raw_features = raw.get("features")
        _require(isinstance(raw_features, Mapping), "features must be a mapping",
                 f"{path}.features")
        stats = {}
        for field in FEATURE_FIELDS:
            fpath = f"{path}.features.{field}"
            entry = raw_features.get(field)
            _require(isinstance(entry, Mapping), f"missing feature {field}", fpath)
            try:
                mean = float(entry["mean"])
                spread = float(entry["spread"])
            except (KeyError, TypeError, ValueError):
                raise SchemaError("feature needs numeric mean and spread", fpath) from None
            _require(math.isfinite(mean), "mean must be finite", f"{fpath}.mean")
            _require(math.isfinite(spread) and spread > 0,
                     "spread must be positive and finite", f"{fpath}.spread")
            stats[field] = FeatureStat(mean, spread)
        unknown = set(raw_features) - set(FEATURE_FIELDS)
        _require(not unknown, f"unknown feature fields {sorted(unknown)}", f"{path}.features")
        profiles.append(StyleProfile(
            label=label,
            features=stats,
            typical_instrumentation=tuple(raw.get("instrumentation", ())),
            typical_ornamentation=tuple(raw.get("ornamentation", ())),
            exemplar_composers=tuple(raw.get("composers", ())),
        ))
    return profiles


def load_adjacency(document: Mapping, profiles: list[StyleProfile]) -> dict[str, frozenset[str]]:
    """Symmetric near-miss map; labels must exist, no self edges."""
    labels = {p.label for p in profiles}
    raw = document.get("adjacency", {})
    _require(isinstance(raw, Mapping), "adjacency must be a mapping", "adjacency")
    out = {label: set() for label in labels}
    for label, neighbours in raw.items():
        _require(label in labels, f"unknown label {label!r}", "adjacency")
        _require(isinstance(neighbours, (list, tuple)), "neighbours must be a list",
                 f"adjacency.{label}")
        for n in neighbours:
            _require(n in labels, f"unknown label {n!r}", f"adjacency.{label}")
            _require(n != label, "self edges are not allowed", f"adjacency.{label}")
            out[label].add(n)
            out[n].add(label)
    return {label: frozenset(n) for label, n in out.items()}


def read_style_db(path) -> tuple[list[StyleProfile], dict[str, frozenset[str]]]:
    """Load and validate a JSON database file."""
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}", str(path)) from exc
    profiles = load_reference_db(document)
    return profiles, load_adjacency(document, profiles)


def seed_profiles() -> list[StyleProfile]:
    return load_reference_db(SEED_DOCUMENT)


def seed_adjacency() -> dict[str, frozenset[str]]:
    return load_adjacency(SEED_DOCUMENT, seed_profiles())
