"""Serialize a Score (plus optional analysis annotations) back to MusicXML.

The writer positions every event explicitly with backup/forward, so any
voicing the model can hold is representable; events spanning barlines are
split and tied, which the reader merges back on round-trip.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from fractions import Fraction

from ..errors import ConsistencyError
from ..model import Measure, NoteEvent, Score

_ACCIDENTAL_ALTER = {-2: "-2", -1: "-1", 1: "1", 2: "2"}

MODE_NAMES = {"major": "major", "minor": "minor"}
PC_NAMES = ["C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B"]
PC_STEP_ALTER = [
    ("C", 0), ("C", 1), ("D", 0), ("E", -1), ("E", 0), ("F", 0),
    ("F", 1), ("G", 0), ("A", -1), ("A", 0), ("B", -1), ("B", 0),
]
KIND_NAMES = {
    "maj": "major", "min": "minor", "dim": "diminished", "aug": "augmented",
    "dom7": "dominant", "maj7": "major-seventh", "min7": "minor-seventh",
    "halfdim7": "half-diminished", "dim7": "diminished-seventh",
}


def key_name(tonic: int, mode: str) -> str:
    return f"{PC_NAMES[tonic]} {mode}"


def write_annotated_musicxml(score: Score, report=None) -> bytes:
    """Render ``score`` as partwise MusicXML with ``report`` annotations.

    ``report`` may be None for a plain round-trippable score document.
    """
    _check_report(score, report)
    divisions = _divisions(score)
    annotations = _collect_annotations(score, report, divisions)

    root = ET.Element("score-partwise", {"version": "3.1"})
    if score.metadata.get("title"):
        work = ET.SubElement(root, "work")
        ET.SubElement(work, "work-title").text = str(score.metadata["title"])
    if score.metadata.get("composer"):
        ident = ET.SubElement(root, "identification")
        creator = ET.SubElement(ident, "creator", {"type": "composer"})
        creator.text = str(score.metadata["composer"])

    part_list = ET.SubElement(root, "part-list")
    for part in score.parts:
        sp = ET.SubElement(part_list, "score-part", {"id": part.part_id})
        ET.SubElement(sp, "part-name").text = part.name or part.part_id

    for pi, part in enumerate(score.parts):
        pe = ET.SubElement(root, "part", {"id": part.part_id})
        _write_part(pe, score, pi, divisions, annotations if pi == 0 else {})

    ET.indent(root)
    body = ET.tostring(root, encoding="unicode")
    header = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        '<!DOCTYPE score-partwise PUBLIC "-//Recordare//DTD MusicXML 3.1 '
        'Partwise//EN" "http://www.musicxml.org/dtds/partwise.dtd">\n'
    )
    return (header + body + "\n").encode("utf-8")


def _check_report(score: Score, report) -> None:
    if report is None:
        return
    outline = getattr(report, "outline", None)
    if outline is not None:
        for seg in outline.segments:
            if seg.start_measure >= score.measure_count or seg.end_measure >= score.measure_count:
                raise ConsistencyError(
                    f"segment {seg.start_measure}..{seg.end_measure} beyond "
                    f"measure table of {score.measure_count}"
                )
    harmony = getattr(report, "harmony", None)
    if harmony is not None:
        for rn in harmony.numerals:
            if rn.span[0] >= score.total_beats:
                raise ConsistencyError(f"numeral at beat {rn.span[0]} beyond total {score.total_beats}")


def _divisions(score: Score) -> int:
    denoms = [1]
    for part in score.parts:
        for e in part.events:
            denoms.append(e.onset.denominator)
            denoms.append(e.duration.denominator)
    for m in score.measures:
        denoms.append(m.start_beat.denominator)
    return math.lcm(*denoms)


def _measure_end(score: Score, m: Measure) -> Fraction:
    nxt = m.index + 1
    if nxt < len(score.measures):
        return score.measures[nxt].start_beat
    return max(m.end_beat, score.total_beats)


def _split_at_barlines(score: Score, e: NoteEvent) -> list[tuple[NoteEvent, str | None]]:
    """Split an event at measure boundaries; tag pieces with tie roles."""
    pieces = []
    start, end = e.onset, e.end
    mi = e.measure_index
    while True:
        m = score.measures[mi] if mi < len(score.measures) else None
        m_end = _measure_end(score, m) if m else end
        piece_end = min(end, m_end)
        pieces.append((start, piece_end, mi))
        if piece_end >= end:
            break
        start = piece_end
        mi += 1
    if len(pieces) == 1:
        return [(e, None)]
    out = []
    for k, (s, t, mi) in enumerate(pieces):
        role = "start" if k == 0 else ("stop" if k == len(pieces) - 1 else "continue")
        out.append(
            (
                NoteEvent(s, t - s, e.content, e.voice, e.part_index, mi, e.grace),
                role,
            )
        )
    return out


def _write_part(pe: ET.Element, score: Score, pi: int, divisions: int, annotations: dict):
    part = score.parts[pi]
    by_measure: dict[int, list[tuple[NoteEvent, str | None]]] = {}
    for e in part.events:
        for piece, tie in _split_at_barlines(score, e):
            by_measure.setdefault(piece.measure_index, []).append((piece, tie))

    prev_ts = None
    prev_key = None
    for m in score.measures:
        me = ET.SubElement(pe, "measure", {"number": str(m.index)})
        if score.metadata.get("pickup") and m.index == 0:
            me.set("implicit", "yes")
        attrs = ET.Element("attributes")
        if m.index == 0:
            ET.SubElement(attrs, "divisions").text = str(divisions)
        if m.notated_key is not None and m.notated_key != prev_key:
            ke = ET.SubElement(attrs, "key")
            ET.SubElement(ke, "fifths").text = str(m.notated_key)
            prev_key = m.notated_key
        if m.time_signature != prev_ts:
            te = ET.SubElement(attrs, "time")
            ET.SubElement(te, "beats").text = str(m.time_signature[0])
            ET.SubElement(te, "beat-type").text = str(m.time_signature[1])
            prev_ts = m.time_signature
        if len(attrs):
            me.append(attrs)

        for el in annotations.get(m.index, []):
            me.append(el)

        cursor = m.start_beat
        for piece, tie in sorted(
            by_measure.get(m.index, ()), key=lambda p: (p[0].onset, p[0].voice, p[0].midi or -1)
        ):
            cursor = _write_positioned_note(me, piece, tie, cursor, divisions)
        gap = _measure_end(score, m) - cursor
        if gap > 0 and by_measure.get(m.index):
            fwd = ET.SubElement(me, "forward")
            ET.SubElement(fwd, "duration").text = str(int(gap * divisions))


def _write_positioned_note(me, e: NoteEvent, tie, cursor: Fraction, divisions: int) -> Fraction:
    if e.onset > cursor:
        fwd = ET.SubElement(me, "forward")
        ET.SubElement(fwd, "duration").text = str(int((e.onset - cursor) * divisions))
    elif e.onset < cursor:
        back = ET.SubElement(me, "backup")
        ET.SubElement(back, "duration").text = str(int((cursor - e.onset) * divisions))

    ne = ET.SubElement(me, "note")
    if e.grace:
        ET.SubElement(ne, "grace")
    if e.is_pitched:
        p = e.content
        pitch = ET.SubElement(ne, "pitch")
        ET.SubElement(pitch, "step").text = p.step
        if p.alter:
            ET.SubElement(pitch, "alter").text = str(p.alter)
        ET.SubElement(pitch, "octave").text = str(p.octave)
    else:
        ET.SubElement(ne, "rest")
    if not e.grace:
        ET.SubElement(ne, "duration").text = str(int(e.duration * divisions))
    if tie:
        roles = {"start": ["start"], "stop": ["stop"], "continue": ["stop", "start"]}[tie]
        for r in roles:
            ET.SubElement(ne, "tie", {"type": r})
    ET.SubElement(ne, "voice").text = str(e.voice)
    return e.onset if e.grace else e.end


def _direction(text: str, offset_div: int = 0) -> ET.Element:
    d = ET.Element("direction", {"placement": "above"})
    dt = ET.SubElement(d, "direction-type")
    ET.SubElement(dt, "words").text = text
    if offset_div:
        ET.SubElement(d, "offset").text = str(offset_div)
    return d


def _rehearsal(letter: str) -> ET.Element:
    d = ET.Element("direction", {"placement": "above"})
    dt = ET.SubElement(d, "direction-type")
    ET.SubElement(dt, "rehearsal").text = letter
    return d


def _harmony_element(root_pc: int, quality: str, numeral: str, offset_div: int) -> ET.Element:
    h = ET.Element("harmony")
    step, alter = PC_STEP_ALTER[root_pc]
    re = ET.SubElement(h, "root")
    ET.SubElement(re, "root-step").text = step
    if alter:
        ET.SubElement(re, "root-alter").text = str(alter)
    kind = ET.SubElement(h, "kind", {"text": numeral})
    kind.text = KIND_NAMES.get(quality, "other")
    if offset_div:
        ET.SubElement(h, "offset").text = str(offset_div)
    return h


def _collect_annotations(score: Score, report, divisions: int) -> dict[int, list[ET.Element]]:
    out: dict[int, list[ET.Element]] = {}
    if report is None:
        return out

    def add(mi: int, el: ET.Element):
        out.setdefault(mi, []).append(el)

    outline = getattr(report, "outline", None)
    if outline is not None:
        for seg in outline.segments:
            add(seg.start_measure, _rehearsal(seg.letter))
            add(seg.start_measure, _direction(f"Section {seg.letter} ({seg.role})"))

    harmony = getattr(report, "harmony", None)
    if harmony is not None:
        gk = harmony.global_key
        add(0, _direction(f"Key: {key_name(gk.tonic, gk.mode)}"))
        for beat in harmony.modulations:
            mi = score.measure_of_beat(beat)
            key = _key_at(harmony, beat)
            label = f"Modulation: {key_name(key.tonic, key.mode)}" if key else "Modulation"
            add(mi, _direction(label))
        for rn in harmony.numerals:
            mi = score.measure_of_beat(rn.span[0])
            offset = int((rn.span[0] - score.measures[mi].start_beat) * divisions)
            chord = _chord_at(harmony, rn.span[0])
            if chord is not None:
                add(mi, _harmony_element(chord.root, chord.quality, rn.numeral, offset))
            add(mi, _direction(rn.numeral, offset))
    return out


def _key_at(harmony, beat: Fraction):
    for (start, end), key in harmony.trajectory:
        if start <= beat < end:
            return key
    return None


def _chord_at(harmony, beat: Fraction):
    for chord in harmony.chords:
        if chord.span[0] <= beat < chord.span[1]:
            return chord
    return None
