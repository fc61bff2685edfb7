"""Reference annotations: trusted human analyses used to score system output.

A reference is a small JSON document keyed by work id.  Every analytic
dimension is optional; consumers skip whatever the annotator left out.

Schema::

    {
      "work_id": "string, required",
      "boundaries": [int, ...],     # internal section starts, measure indexes
      "letters": ["A", "B", ...],   # one letter per section, in order
      "key": "G minor",             # or {"tonic": 7, "mode": "minor"}
      "modulations": [int, ...],    # measure indexes of key changes
      "style": "string label"
    }

``boundaries`` lists where a new section begins, so a piece with segments
starting at measures 0, 8 and 16 is annotated as ``[8, 16]``; the opening
measure is never listed.
"""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaError
from .harmonic import parse_key_name

__all__ = ["ReferenceAnnotation", "parse_reference", "read_reference"]


@dataclass(frozen=True)
class ReferenceAnnotation:
    work_id: str
    boundaries: tuple[int, ...] | None = None
    letters: tuple[str, ...] | None = None
    key: tuple[int, str] | None = None
    modulations: tuple[int, ...] | None = None
    style: str | None = None


def _require(condition: bool, message: str, path: str) -> None:
    if not condition:
        raise SchemaError(message, field_path=path)


def _measure_list(value: object, path: str) -> tuple[int, ...]:
    _require(isinstance(value, Sequence) and not isinstance(value, str),
             "expected a list of measure indexes", path)
    out = []
    for i, item in enumerate(value):
        _require(isinstance(item, int) and not isinstance(item, bool) and item >= 0,
                 "measure indexes must be non-negative integers", f"{path}[{i}]")
        out.append(item)
    _require(out == sorted(out), "measure indexes must be ascending", path)
    return tuple(out)


def _key_value(value: object, path: str) -> tuple[int, str]:
    if isinstance(value, str):
        try:
            return parse_key_name(value)
        except ValueError as exc:
            raise SchemaError(str(exc), field_path=path) from exc
    if isinstance(value, Mapping):
        tonic = value.get("tonic")
        mode = value.get("mode")
        _require(isinstance(tonic, int) and 0 <= tonic < 12, "tonic must be 0..11",
                 f"{path}.tonic")
        _require(mode in ("major", "minor"), "mode must be major or minor",
                 f"{path}.mode")
        return int(tonic), str(mode)
    raise SchemaError("key must be a name string or {tonic, mode}", field_path=path)


def parse_reference(document: Mapping) -> ReferenceAnnotation:
    """Validate a parsed JSON document and return the annotation."""
    _require(isinstance(document, Mapping), "reference must be an object", "")
    work_id = document.get("work_id")
    _require(isinstance(work_id, str) and bool(work_id.strip()),
             "work_id must be a non-empty string", "work_id")

    known = {"work_id", "boundaries", "letters", "key", "modulations", "style"}
    for field in document:
        _require(field in known, f"unknown field {field!r}", str(field))

    boundaries = letters = key = modulations = style = None
    if "boundaries" in document:
        boundaries = _measure_list(document["boundaries"], "boundaries")
    if "letters" in document:
        raw = document["letters"]
        _require(isinstance(raw, Sequence) and not isinstance(raw, str),
                 "letters must be a list", "letters")
        for i, item in enumerate(raw):
            _require(isinstance(item, str) and len(item) == 1 and item.isupper(),
                     "letters must be single uppercase characters", f"letters[{i}]")
        letters = tuple(raw)
        if boundaries is not None:
            _require(len(letters) == len(boundaries) + 1,
                     "need one letter per section", "letters")
    if "key" in document:
        key = _key_value(document["key"], "key")
    if "modulations" in document:
        modulations = _measure_list(document["modulations"], "modulations")
    if "style" in document:
        raw = document["style"]
        _require(isinstance(raw, str) and bool(raw.strip()),
                 "style must be a non-empty string", "style")
        style = raw
    return ReferenceAnnotation(work_id=work_id, boundaries=boundaries,
                               letters=letters, key=key,
                               modulations=modulations, style=style)


def read_reference(path: str | Path) -> ReferenceAnnotation:
    """Load and validate a reference annotation file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path}: {exc}", field_path="") from exc
    return parse_reference(document)
