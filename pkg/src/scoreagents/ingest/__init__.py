"""Format detection and parsing of symbolic music into the canonical Score."""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
from pathlib import Path

from ..errors import ParseError, UnsupportedFormatError
from .base import ParseDiagnostics, SourceFormat
from .annotate import write_annotated_musicxml
from .kern import parse_kern
from .midi import parse_midi
from .musicxml import parse_musicxml, unwrap_container

__all__ = [
    "SourceFormat",
    "ParseDiagnostics",
    "detect_format",
    "parse_musicxml",
    "parse_midi",
    "parse_kern",
    "parse_bytes",
    "load_path",
    "write_annotated_musicxml",
]

_XML_ROOTS = {"score-partwise", "score-timewise"}


def detect_format(data: bytes) -> SourceFormat:
    """Sniff which of the three supported formats ``data`` carries."""
    if not data:
        raise UnsupportedFormatError("empty input")
    if data[:4] == b"MThd":
        return SourceFormat.MIDI
    if data[:2] == b"PK":
        try:
            data = unwrap_container(data)
        except Exception:
            raise UnsupportedFormatError("unreadable compressed container")
    if _xml_root(data) in _XML_ROOTS:
        return SourceFormat.MUSICXML
    try:
        text = data.decode("utf-8", errors="replace")
    except Exception:  # pragma: no cover - replace never raises
        raise UnsupportedFormatError("undecodable input")
    for line in text.splitlines():
        if line.startswith("**") and "**kern" in line.split("\t"):
            return SourceFormat.KERN
    raise UnsupportedFormatError("unrecognized content")


def _xml_root(data: bytes) -> str | None:
    head = data.lstrip(b"\xef\xbb\xbf \t\r\n")
    if not head.startswith(b"<"):
        return None
    try:
        for _event, el in ET.iterparse(io.BytesIO(data), events=("start",)):
            return el.tag
    except ET.ParseError:
        return None
    return None


def parse_bytes(data: bytes, fmt: SourceFormat | None = None):
    """Parse ``data``, sniffing the format unless ``fmt`` pins it.

    Returns (Score, ParseDiagnostics).
    """
    if fmt is None:
        fmt = detect_format(data)
    if fmt is SourceFormat.MIDI:
        return parse_midi(data)
    if fmt is SourceFormat.MUSICXML:
        return parse_musicxml(data)
    return parse_kern(data.decode("utf-8", errors="replace"))


def load_path(path: str | Path, fmt: SourceFormat | None = None):
    """Read a file and parse it; the Score's metadata records the source path."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    score, diags = parse_bytes(data, fmt)
    score.metadata.setdefault("source_path", str(path))
    if not score.metadata.get("title"):
        score.metadata["title"] = path.stem
    return score, diags
