"""Canonical in-memory score representation shared by every agent.

Time is measured in beats (quarter notes) from the start of the score and
is kept exact as :class:`fractions.Fraction` so that boundary comparisons
against reference annotations never drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

STEP_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}

BeatValue = Fraction | int


@dataclass(frozen=True)
class Pitch:
    """Spelled pitch. ``midi`` is derived from step/alter/octave."""

    step: str
    alter: int = 0
    octave: int = 4

    def __post_init__(self):
        if self.step not in STEP_SEMITONES:
            raise ValueError(f"invalid step {self.step!r}")
        if not -2 <= self.alter <= 2:
            raise ValueError(f"alter {self.alter} outside -2..+2")
        if not 0 <= self.midi <= 127:
            raise ValueError(f"pitch {self} maps to MIDI {self.midi} outside 0..127")

    @property
    def midi(self) -> int:
        return 12 * (self.octave + 1) + STEP_SEMITONES[self.step] + self.alter

    @property
    def pitch_class(self) -> int:
        return self.midi % 12

    def __str__(self) -> str:
        acc = {-2: "bb", -1: "b", 0: "", 1: "#", 2: "##"}[self.alter]
        return f"{self.step}{acc}{self.octave}"


class Rest:
    """Singleton marker for rest events."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Rest"


REST = Rest()


@dataclass(frozen=True)
class NoteEvent:
    """One timed note or rest inside a part."""

    onset: Fraction
    duration: Fraction
    content: Pitch | Rest
    voice: int = 1
    part_index: int = 0
    measure_index: int = 0
    grace: bool = False

    @property
    def is_pitched(self) -> bool:
        return isinstance(self.content, Pitch)

    @property
    def midi(self) -> int | None:
        return self.content.midi if isinstance(self.content, Pitch) else None

    @property
    def end(self) -> Fraction:
        return self.onset + self.duration


@dataclass(frozen=True)
class Measure:
    index: int
    start_beat: Fraction
    time_signature: tuple[int, int] = (4, 4)
    notated_key: int | None = None  # signed count of sharps, -7..+7

    @property
    def beats(self) -> Fraction:
        num, den = self.time_signature
        return Fraction(num * 4, den)

    @property
    def end_beat(self) -> Fraction:
        return self.start_beat + self.beats


@dataclass(frozen=True)
class Part:
    part_id: str
    name: str = ""
    instrument: str = ""
    events: tuple[NoteEvent, ...] = ()


@dataclass(frozen=True)
class Score:
    """Immutable after construction; safe to share across concurrent agents."""

    metadata: dict = field(default_factory=dict)
    parts: tuple[Part, ...] = ()
    measures: tuple[Measure, ...] = ()
    total_beats: Fraction = Fraction(0)

    def pitched_events(self) -> list[NoteEvent]:
        return [e for p in self.parts for e in p.events if e.is_pitched]

    def events_in(self, from_beat: Fraction, to_beat: Fraction) -> list[NoteEvent]:
        """Events overlapping [from_beat, to_beat), unclipped."""
        out = []
        for part in self.parts:
            for e in part.events:
                if _overlaps(e, from_beat, to_beat):
                    out.append(e)
        return out

    @property
    def measure_count(self) -> int:
        return len(self.measures)

    def measure_of_beat(self, beat: Fraction) -> int:
        """Index of the measure containing ``beat`` (clamped to the table)."""
        idx = 0
        for m in self.measures:
            if m.start_beat > beat:
                break
            idx = m.index
        return idx


class MelodyNote(NamedTuple):
    onset: Fraction
    duration: Fraction
    midi: int


@dataclass(frozen=True)
class Violation:
    invariant: str
    message: str
    part_index: int | None = None
    event_index: int | None = None

    def __str__(self) -> str:
        loc = ""
        if self.part_index is not None:
            loc = f" [part {self.part_index}"
            loc += f", event {self.event_index}]" if self.event_index is not None else "]"
        return f"{self.invariant}: {self.message}{loc}"


def _overlaps(e: NoteEvent, from_beat: Fraction, to_beat: Fraction) -> bool:
    if e.duration == 0:  # grace notes occupy an instant
        return from_beat <= e.onset < to_beat
    return e.onset < to_beat and e.end > from_beat


def _event_sort_key(e: NoteEvent):
    return (e.onset, e.voice, e.midi if e.midi is not None else -1)


def sort_events(events: Iterable[NoteEvent]) -> tuple[NoteEvent, ...]:
    return tuple(sorted(events, key=_event_sort_key))


def validate(score: Score) -> list[Violation]:
    """Check every Score invariant; an empty list means the score is well formed.

    Violations are data, not failures: callers decide what to do with them.
    """
    violations: list[Violation] = []

    for pi, part in enumerate(score.parts):
        prev_key = None
        for ei, e in enumerate(part.events):
            if e.onset < 0:
                violations.append(Violation("onset-nonnegative", f"onset {e.onset} < 0", pi, ei))
            if e.duration < 0 or (e.duration == 0 and not e.grace):
                violations.append(
                    Violation("duration-positive", f"duration {e.duration} on non-grace event", pi, ei)
                )
            if e.part_index != pi:
                violations.append(
                    Violation("part-index", f"event part_index {e.part_index} != containing part {pi}", pi, ei)
                )
            key = _event_sort_key(e)
            if prev_key is not None and key < prev_key:
                violations.append(
                    Violation("event-order", "events not sorted by (onset, voice, midi)", pi, ei)
                )
            prev_key = key
            measure = _measure_by_index(score, e.measure_index)
            if measure is None:
                violations.append(
                    Violation("measure-index", f"measure_index {e.measure_index} not in table", pi, ei)
                )
            elif not (measure.start_beat <= e.onset < _measure_end(score, measure)):
                violations.append(
                    Violation(
                        "measure-index",
                        f"onset {e.onset} outside measure {e.measure_index} "
                        f"[{measure.start_beat}, {_measure_end(score, measure)})",
                        pi,
                        ei,
                    )
                )
            if e.end > score.total_beats:
                violations.append(
                    Violation("total-beats", f"event ends at {e.end} > total_beats {score.total_beats}", pi, ei)
                )

    for k in range(len(score.measures) - 1):
        cur, nxt = score.measures[k], score.measures[k + 1]
        # pickup measures are exempt from the time-signature duration rule
        if k == 0 and score.metadata.get("pickup"):
            if nxt.start_beat <= cur.start_beat:
                violations.append(Violation("measure-grid", f"measure {k + 1} does not advance"))
            continue
        if nxt.start_beat != cur.end_beat:
            violations.append(
                Violation(
                    "measure-grid",
                    f"measure {nxt.index} starts at {nxt.start_beat}, expected {cur.end_beat}",
                )
            )

    return violations


def _measure_by_index(score: Score, index: int) -> Measure | None:
    for m in score.measures:
        if m.index == index:
            return m
    return None


def _measure_end(score: Score, measure: Measure) -> Fraction:
    """Actual end of a measure: the next measure's start, or its nominal end."""
    for m in score.measures:
        if m.index == measure.index + 1:
            return m.start_beat
    return max(measure.end_beat, score.total_beats)


def slice_score(score: Score, from_beat: BeatValue, to_beat: BeatValue) -> Score:
    """Restrict a score to the window [from_beat, to_beat).

    Overlapping events are kept with durations clipped to the window;
    onsets stay in absolute beats. The measure table keeps exactly the
    measures that overlap the window.
    """
    from_beat, to_beat = Fraction(from_beat), Fraction(to_beat)
    if not 0 <= from_beat < to_beat:
        raise ValueError(f"invalid range [{from_beat}, {to_beat})")
    to_beat = min(to_beat, score.total_beats) if score.total_beats > 0 else to_beat
    if to_beat <= from_beat:  # window entirely past the end
        return replace(
            score,
            parts=tuple(replace(p, events=()) for p in score.parts),
            measures=(),
            total_beats=to_beat,
        )

    parts = []
    for part in score.parts:
        events = []
        for e in part.events:
            if not _overlaps(e, from_beat, to_beat):
                continue
            onset = max(e.onset, from_beat)
            duration = min(e.end, to_beat) - onset if e.duration > 0 else Fraction(0)
            events.append(replace(e, onset=onset, duration=duration))
        parts.append(replace(part, events=sort_events(events)))

    measures = tuple(
        m for m in score.measures if m.start_beat < to_beat and _measure_end(score, m) > from_beat
    )
    return replace(score, parts=tuple(parts), measures=measures, total_beats=to_beat)


def flatten_melody(score: Score, part_index: int | None = None) -> list[MelodyNote]:
    """Collapse a part (or the whole texture) to a monophonic skyline melody.

    At any instant the highest sounding pitch wins; rests and grace notes
    are dropped. Raises ValueError when there is nothing pitched to flatten.
    """
    if part_index is None:
        events = [e for p in score.parts for e in p.events]
    else:
        if not 0 <= part_index < len(score.parts):
            raise ValueError(f"part {part_index} does not exist")
        events = list(score.parts[part_index].events)
    notes = [e for e in events if e.is_pitched and e.duration > 0]
    if not notes:
        raise ValueError("no pitched events to flatten")

    boundaries = sorted({e.onset for e in notes} | {e.end for e in notes})
    melody: list[MelodyNote] = []
    current: tuple[NoteEvent, Fraction] | None = None  # (winning event, segment start)
    for lo, hi in zip(boundaries, boundaries[1:]):
        sounding = [e for e in notes if e.onset <= lo and e.end >= hi]
        winner = max(sounding, key=lambda e: e.midi, default=None)
        if winner is None:
            if current is not None:
                melody.append(MelodyNote(current[1], lo - current[1], current[0].midi))
                current = None
            continue
        if current is not None and current[0] is winner:
            continue  # same event keeps sounding; extend
        if current is not None:
            melody.append(MelodyNote(current[1], lo - current[1], current[0].midi))
        current = (winner, lo)
    if current is not None:
        melody.append(MelodyNote(current[1], boundaries[-1] - current[1], current[0].midi))
    return melody


def transpose(score: Score, semitones: int) -> Score:
    """Chromatic transposition helper used by tests and fixtures."""
    parts = []
    for part in score.parts:
        events = []
        for e in part.events:
            if e.is_pitched:
                events.append(replace(e, content=pitch_from_midi(e.midi + semitones)))
            else:
                events.append(e)
        parts.append(replace(part, events=sort_events(events)))
    return replace(score, parts=tuple(parts))


_SHARP_SPELLING = [
    ("C", 0), ("C", 1), ("D", 0), ("E", -1), ("E", 0), ("F", 0),
    ("F", 1), ("G", 0), ("A", -1), ("A", 0), ("B", -1), ("B", 0),
]


def pitch_from_midi(midi: int) -> Pitch:
    """Default (mixed sharp/flat) spelling for a MIDI number."""
    step, alter = _SHARP_SPELLING[midi % 12]
    octave = midi // 12 - 1
    # keep the derived midi identical to the input
    if STEP_SEMITONES[step] + alter + 12 * (octave + 1) != midi:
        octave = (midi - STEP_SEMITONES[step] - alter) // 12 - 1
    return Pitch(step, alter, octave)


def build_measures(
    time_signatures: Sequence[tuple[int, tuple[int, int]]],
    total_beats: Fraction,
    pickup_beats: Fraction | None = None,
    notated_keys: Sequence[tuple[int, int]] = (),
) -> tuple[Measure, ...]:
    """Lay out a measure table from (measure index, time signature) changes.

    ``pickup_beats`` shortens measure 0. ``notated_keys`` is a list of
    (measure index, sharps) changes.
    """
    if not time_signatures or time_signatures[0][0] != 0:
        time_signatures = [(0, (4, 4)), *time_signatures]
    ts_map = dict(time_signatures)
    key_map = dict(notated_keys)

    measures = []
    start = Fraction(0)
    index = 0
    current_ts = ts_map[0]
    current_key = key_map.get(0)
    while start < total_beats or index == 0:
        current_ts = ts_map.get(index, current_ts)
        current_key = key_map.get(index, current_key)
        m = Measure(index, start, current_ts, current_key)
        length = m.beats
        if index == 0 and pickup_beats is not None:
            length = pickup_beats
        measures.append(m)
        start += length
        index += 1
        if total_beats == 0:
            break
    return tuple(measures)
