"""Shared plumbing for the format parsers."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from ..model import Measure, NoteEvent, Part, Score, sort_events


class SourceFormat(enum.Enum):
    MUSICXML = "musicxml"
    MIDI = "midi"
    KERN = "kern"


@dataclass
class ParseDiagnostics:
    """Non-fatal findings collected while parsing one file."""

    warnings: list[tuple[str, str]] = field(default_factory=list)
    skipped_elements: Counter = field(default_factory=Counter)

    def warn(self, location: str, message: str) -> None:
        self.warnings.append((location, message))

    def skip(self, kind: str, n: int = 1) -> None:
        self.skipped_elements[kind] += n

    def merge(self, other: "ParseDiagnostics") -> None:
        self.warnings.extend(other.warnings)
        self.skipped_elements.update(other.skipped_elements)


@dataclass
class RawNote:
    """Parser-internal event before measure assignment."""

    onset: Fraction
    duration: Fraction
    content: object  # Pitch or REST
    voice: int = 1
    grace: bool = False


def measure_index_at(measures: tuple[Measure, ...], beat: Fraction) -> int:
    idx = 0
    for m in measures:
        if m.start_beat > beat:
            break
        idx = m.index
    return idx


def grid_measures(
    ts_changes: list[tuple[Fraction, tuple[int, int]]],
    key_changes: list[tuple[Fraction, int]],
    max_end: Fraction,
    pickup_beats: Fraction | None = None,
) -> tuple[Measure, ...]:
    """Nominal measure grid from time-signature changes at beat positions.

    Changes are assumed to land on measure starts; a change mid-measure is
    deferred to the next boundary.
    """
    ts_changes = sorted(ts_changes)
    key_changes = sorted(key_changes)
    if not ts_changes or ts_changes[0][0] > 0:
        ts_changes.insert(0, (Fraction(0), (4, 4)))

    measures = []
    start = Fraction(0)
    index = 0
    current_ts = ts_changes[0][1]
    current_key: int | None = None
    while start < max_end or index == 0:
        for beat, ts in ts_changes:
            if beat <= start:
                current_ts = ts
        for beat, key in key_changes:
            if beat <= start:
                current_key = key
        m = Measure(index, start, current_ts, current_key)
        length = m.beats
        if index == 0 and pickup_beats:
            length = pickup_beats
        measures.append(m)
        start += length
        index += 1
        if max_end == 0:
            break
    return tuple(measures)


def span_measures(
    spans: list[tuple[Fraction, tuple[int, int], int | None]],
) -> tuple[Measure, ...]:
    """Measure table from explicit (start_beat, time_signature, key) spans."""
    return tuple(
        Measure(i, start, ts, key) for i, (start, ts, key) in enumerate(spans)
    )


def assemble_score(
    part_ids: list[tuple[str, str]],
    raw_parts: list[list[RawNote]],
    measures: tuple[Measure, ...],
    metadata: dict,
) -> Score:
    """Attach measure indexes, sort, and freeze everything into a Score."""
    ends = [n.onset + n.duration for notes in raw_parts for n in notes]
    max_end = max(ends, default=Fraction(0))
    total = measures[-1].end_beat if measures else max_end
    if measures and metadata.get("pickup") and len(measures) > 1:
        total = measures[-1].end_beat
    total = max(total, max_end)

    parts = []
    for pi, ((pid, pname), notes) in enumerate(zip(part_ids, raw_parts)):
        events = [
            NoteEvent(
                onset=n.onset,
                duration=n.duration,
                content=n.content,
                voice=n.voice,
                part_index=pi,
                measure_index=measure_index_at(measures, n.onset),
                grace=n.grace,
            )
            for n in notes
        ]
        parts.append(Part(part_id=pid, name=pname, events=sort_events(events)))
    return Score(metadata=metadata, parts=tuple(parts), measures=measures, total_beats=total)
