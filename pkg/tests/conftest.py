"""Shared builders for hand-constructed scores used across the test suite."""

from fractions import Fraction

import pytest

from scoreagents.model import (
    Measure,
    NoteEvent,
    Part,
    Pitch,
    REST,
    Score,
    build_measures,
    sort_events,
)


def F(x) -> Fraction:
    return Fraction(x)


def note(onset, duration, midi_or_pitch, voice=1, part_index=0, measure_index=0, grace=False):
    from scoreagents.model import pitch_from_midi

    content = (
        pitch_from_midi(midi_or_pitch) if isinstance(midi_or_pitch, int) else midi_or_pitch
    )
    return NoteEvent(
        onset=Fraction(onset),
        duration=Fraction(duration),
        content=content,
        voice=voice,
        part_index=part_index,
        measure_index=measure_index,
        grace=grace,
    )


def rest(onset, duration, voice=1, part_index=0, measure_index=0):
    return NoteEvent(
        onset=Fraction(onset),
        duration=Fraction(duration),
        content=REST,
        voice=voice,
        part_index=part_index,
        measure_index=measure_index,
    )


def make_score(events_per_part, total_beats, time_signature=(4, 4), metadata=None,
               notated_keys=(), pickup_beats=None):
    """Assemble a Score from per-part event lists, auto-filling measure indexes."""
    total_beats = Fraction(total_beats)
    measures = build_measures(
        [(0, time_signature)], total_beats,
        pickup_beats=Fraction(pickup_beats) if pickup_beats is not None else None,
        notated_keys=notated_keys,
    )

    def measure_index_at(beat):
        idx = 0
        for m in measures:
            if m.start_beat > beat:
                break
            idx = m.index
        return idx

    parts = []
    for pi, events in enumerate(events_per_part):
        fixed = [
            NoteEvent(
                onset=e.onset,
                duration=e.duration,
                content=e.content,
                voice=e.voice,
                part_index=pi,
                measure_index=measure_index_at(e.onset),
                grace=e.grace,
            )
            for e in events
        ]
        parts.append(Part(part_id=f"P{pi + 1}", events=sort_events(fixed)))

    meta = {"title": "test piece", "composer": "", "source_format": "builder"}
    if pickup_beats is not None:
        meta["pickup"] = True
    if metadata:
        meta.update(metadata)
    return Score(metadata=meta, parts=tuple(parts), measures=measures, total_beats=total_beats)


@pytest.fixture
def simple_score():
    """Two 4/4 measures, one part: C4 D4 E4 F4 | G4 held 4 beats."""
    events = [
        note(0, 1, 60),
        note(1, 1, 62),
        note(2, 1, 64),
        note(3, 1, 65),
        note(4, 4, 67),
    ]
    return make_score([events], total_beats=8)


def dense_measure(start):
    """C-major eighth-note texture: 8 onsets, monophonic."""
    seq = [60, 64, 67, 72, 60, 64, 67, 72]
    return [note(Fraction(start) + Fraction(i, 2), Fraction(1, 2), m) for i, m in enumerate(seq)]


def variant_measure(start):
    """Same density and register, pitch-class emphasis shifted toward D."""
    seq = [62, 60, 62, 60, 62, 60, 62, 69]
    return [note(Fraction(start) + Fraction(i, 2), Fraction(1, 2), m) for i, m in enumerate(seq)]


def triad_measure(start):
    """Contrasting texture: two half-note three-voice chords on F/Ab/B."""
    ev = []
    for k in range(2):
        for m in (65, 68, 71):
            ev.append(note(Fraction(start) + 2 * k, Fraction(2), m))
    return ev


def make_xxyx_score():
    """16 measures: 4 dense, 4 variant (same letter), 4 contrast, 4 dense.

    Tuned so segment letters come out A A B A and the novelty peaks sit
    exactly at measures 4, 8, 12 with the default detector settings.
    """
    blocks = [dense_measure] * 4 + [variant_measure] * 4 + [triad_measure] * 4 + [dense_measure] * 4
    events = []
    for mi, block in enumerate(blocks):
        events += block(4 * mi)
    return make_score([events], total_beats=64)


MAJOR_STEPS = (0, 2, 4, 5, 7, 9, 11)
HARMONIC_MINOR_STEPS = (0, 2, 3, 5, 7, 8, 11)


def scale_score(tonic, steps=MAJOR_STEPS, base_midi=60):
    """Two 4/4 measures: a one-octave quarter-note ascent capped by the octave."""
    midis = [base_midi + tonic + s for s in steps] + [base_midi + tonic + 12]
    return make_score([[note(i, 1, m) for i, m in enumerate(midis)]], total_beats=8)


def chord_progression_score(chord_midis, beats_per_chord=4):
    """One block chord per entry, each sustained for ``beats_per_chord``."""
    events = []
    onset = Fraction(0)
    for midis in chord_midis:
        events.extend(note(onset, beats_per_chord, m) for m in midis)
        onset += beats_per_chord
    return make_score([events], total_beats=onset)


def modulation_score():
    """Sixteen 4/4 measures: eight of C-major scales, then eight of G-major."""
    events = []
    for rep in range(4):
        base = rep * 8
        for i, m in enumerate([60, 62, 64, 65, 67, 69, 71, 72]):
            events.append(note(base + i, 1, m))
    for rep in range(4):
        base = 32 + rep * 8
        for i, m in enumerate([67, 69, 71, 72, 74, 76, 78, 79]):
            events.append(note(base + i, 1, m))
    return make_score([events], total_beats=64)
