"""MusicXML reader (partwise and timewise, plain or compressed container)."""

from __future__ import annotations

import io
import xml.etree.ElementTree as ET
import zipfile
from fractions import Fraction

from ..errors import ParseError
from ..model import Pitch, REST
from .base import ParseDiagnostics, RawNote, assemble_score, span_measures

SUPPORTED_MEASURE_CHILDREN = {"note", "backup", "forward", "attributes", "barline", "print"}
SUPPORTED_ATTRIBUTE_CHILDREN = {"divisions", "time", "key", "staves", "clef"}


def unwrap_container(data: bytes) -> bytes:
    """Extract the root score document from a compressed .mxl container."""
    with zipfile.ZipFile(io.BytesIO(data)) as zf:
        rootfile = None
        try:
            container = ET.fromstring(zf.read("META-INF/container.xml"))
            el = container.find(".//rootfile")
            if el is not None:
                rootfile = el.get("full-path")
        except KeyError:
            pass
        if rootfile is None:
            candidates = [
                n for n in zf.namelist()
                if n.lower().endswith((".xml", ".musicxml")) and not n.startswith("META-INF")
            ]
            if not candidates:
                raise ParseError("compressed container holds no score document")
            rootfile = candidates[0]
        return zf.read(rootfile)


def _root(data: bytes) -> ET.Element:
    if data[:2] == b"PK":
        data = unwrap_container(data)
    try:
        return ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise ParseError(f"malformed XML: {exc}", line=line, column=col) from exc


def _text(el: ET.Element | None, default: str = "") -> str:
    return el.text.strip() if el is not None and el.text else default


def _int(el: ET.Element | None, default: int = 0) -> int:
    t = _text(el)
    return int(t) if t else default


def parse_musicxml(data: bytes) -> tuple:
    """Parse MusicXML bytes into (Score, ParseDiagnostics)."""
    root = _root(data)
    if root.tag == "score-partwise":
        part_measures = _partwise_layout(root)
    elif root.tag == "score-timewise":
        part_measures = _timewise_layout(root)
    else:
        raise ParseError(f"root element {root.tag!r} is not a MusicXML score")

    diags = ParseDiagnostics()
    part_ids = _part_list(root)
    if not part_ids:
        raise ParseError("empty part-list")

    raw_parts: list[list[RawNote]] = []
    spans_per_part = []
    pickup_per_part = []
    for pid, _name in part_ids:
        measures = part_measures.get(pid)
        if measures is None:
            diags.warn(f"part {pid}", "declared in part-list but has no measures")
            raw_parts.append([])
            spans_per_part.append([])
            pickup_per_part.append(False)
            continue
        notes, spans, pickup = _parse_part(pid, measures, diags)
        raw_parts.append(notes)
        spans_per_part.append(spans)
        pickup_per_part.append(pickup)

    ref = max(range(len(spans_per_part)), key=lambda i: len(spans_per_part[i]))
    for i, spans in enumerate(spans_per_part):
        if spans and len(spans) != len(spans_per_part[ref]):
            diags.warn(f"part {part_ids[i][0]}", "measure count differs across parts")

    metadata = {
        "title": _text(root.find("work/work-title")) or _text(root.find("movement-title")),
        "composer": _text(root.find("identification/creator[@type='composer']")),
        "source_format": "musicxml",
    }
    if pickup_per_part[ref]:
        metadata["pickup"] = True

    score = assemble_score(part_ids, raw_parts, span_measures(spans_per_part[ref]), metadata)
    return score, diags


def _part_list(root: ET.Element) -> list[tuple[str, str]]:
    out = []
    for sp in root.findall("part-list/score-part"):
        pid = sp.get("id")
        if pid:
            out.append((pid, _text(sp.find("part-name"))))
    return out


def _partwise_layout(root: ET.Element) -> dict[str, list[ET.Element]]:
    return {p.get("id"): list(p.findall("measure")) for p in root.findall("part")}


def _timewise_layout(root: ET.Element) -> dict[str, list[ET.Element]]:
    """Regroup timewise measures into per-part measure lists.

    Each synthesized measure element carries the original measure's
    attributes and that part's children.
    """
    out: dict[str, list[ET.Element]] = {}
    for measure in root.findall("measure"):
        for part in measure.findall("part"):
            synth = ET.Element("measure", dict(measure.attrib))
            synth.extend(list(part))
            out.setdefault(part.get("id"), []).append(synth)
    return out


def _parse_part(pid: str, measures: list[ET.Element], diags: ParseDiagnostics):
    notes: list[RawNote] = []
    spans: list[tuple[Fraction, tuple[int, int], int | None]] = []
    divisions: int | None = None
    time_sig = (4, 4)
    key: int | None = None
    cursor = Fraction(0)
    pickup = False
    open_ties: dict[tuple[int, int], int] = {}  # (voice, midi) -> index into notes

    for mi, measure in enumerate(measures):
        measure_start = cursor
        max_extent = cursor
        prev_onset = cursor  # onset shared by following <chord/> notes
        implicit = measure.get("implicit") == "yes" or (mi == 0 and measure.get("number") == "0")

        for el in measure:
            if el.tag == "attributes":
                for a in el:
                    if a.tag == "divisions":
                        divisions = _int(a)
                        if divisions <= 0:
                            raise ParseError(f"non-positive divisions in part {pid}")
                    elif a.tag == "time":
                        time_sig = (_int(a.find("beats"), 4), _int(a.find("beat-type"), 4))
                    elif a.tag == "key":
                        key = _int(a.find("fifths"))
                    elif a.tag not in SUPPORTED_ATTRIBUTE_CHILDREN:
                        diags.skip(a.tag)
            elif el.tag == "note":
                if divisions is None and el.find("grace") is None:
                    raise ParseError(f"note before divisions in part {pid}, measure {mi}")
                cursor, prev_onset = _parse_note(
                    el, notes, open_ties, cursor, prev_onset, divisions, diags, pid
                )
                max_extent = max(max_extent, cursor)
            elif el.tag in ("backup", "forward"):
                if divisions is None:
                    raise ParseError(f"{el.tag} before divisions in part {pid}")
                delta = Fraction(_int(el.find("duration")), divisions)
                cursor = cursor - delta if el.tag == "backup" else cursor + delta
                max_extent = max(max_extent, cursor)
            elif el.tag in SUPPORTED_MEASURE_CHILDREN:
                pass
            else:
                diags.skip(el.tag)

        nominal = Fraction(time_sig[0] * 4, time_sig[1])
        actual = max_extent - measure_start
        if mi == 0 and (implicit or (Fraction(0) < actual < nominal)):
            pickup = actual > 0 and actual < nominal
            length = actual if pickup else nominal
        else:
            if actual > nominal:
                diags.warn(f"part {pid} measure {mi}", f"content {actual} exceeds nominal {nominal}")
            length = nominal
        spans.append((measure_start, time_sig, key))
        cursor = measure_start + length

    if open_ties:
        diags.warn(f"part {pid}", f"{len(open_ties)} unterminated ties")
    return notes, spans, pickup


def _parse_note(el, notes, open_ties, cursor, prev_onset, divisions, diags, pid):
    is_chord = el.find("chord") is not None
    is_grace = el.find("grace") is not None
    onset = prev_onset if is_chord else cursor

    if is_grace:
        duration = Fraction(0)
    else:
        dur_el = el.find("duration")
        if dur_el is None:
            raise ParseError(f"note without duration in part {pid}")
        duration = Fraction(_int(dur_el), divisions)

    voice = _int(el.find("voice"), 1)
    rest = el.find("rest") is not None
    tie_types = {t.get("type") for t in el.findall("tie")}

    if rest:
        content = REST
    else:
        pe = el.find("pitch")
        if pe is None:
            diags.skip("unpitched")
            content = REST
        else:
            step = _text(pe.find("step"), "C")
            alter = _int(pe.find("alter"))
            octave = _int(pe.find("octave"), 4)
            content = Pitch(step, alter, octave)

    new_cursor = onset if (is_grace or is_chord) else onset + duration
    if is_chord and not is_grace:
        new_cursor = max(cursor, onset + duration)

    if content is not REST and isinstance(content, Pitch):
        slot = (voice, content.midi)
        if "stop" in tie_types and slot in open_ties:
            idx = open_ties.pop(slot)
            prev = notes[idx]
            if prev.onset + prev.duration == onset:
                notes[idx] = RawNote(prev.onset, prev.duration + duration, prev.content,
                                     voice, prev.grace)
                if "start" in tie_types:
                    open_ties[slot] = idx
                return new_cursor, onset
            diags.warn(f"part {pid}", "tie stop does not abut tie start; kept separate")
        notes.append(RawNote(onset, duration, content, voice, is_grace))
        if "start" in tie_types:
            open_ties[slot] = len(notes) - 1
    elif rest:
        notes.append(RawNote(onset, duration, REST, voice, is_grace))

    return new_cursor, onset
