"""Humdrum **kern reader.

Each **kern spine becomes a Part; spine splits add voices within the part.
Every spine advances its own clock by the durations it consumes, so homophonic
and free-rhythm spines both land on exact beat positions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import ParseError
from ..model import Pitch, REST
from .base import ParseDiagnostics, RawNote, assemble_score, span_measures

_RECIP_RE = re.compile(r"(\d+)(\.*)")
_PITCH_RE = re.compile(r"([a-gA-G])\1*")


@dataclass
class _Spine:
    part: int
    voice: int
    clock: Fraction = Fraction(0)
    open_ties: dict[int, int] = field(default_factory=dict)  # midi -> note index
    closed: bool = False


def parse_kern(text: str) -> tuple:
    """Parse kern text into (Score, ParseDiagnostics)."""
    diags = ParseDiagnostics()
    lines = text.splitlines()

    spines: list[_Spine] = []
    part_notes: list[list[RawNote]] = []
    part_ids: list[tuple[str, str]] = []
    kern_columns: list[bool] = []
    barlines: list[Fraction] = []
    ts_changes: list[tuple[Fraction, tuple[int, int]]] = []
    key_changes: list[tuple[Fraction, int]] = []
    started = False

    for lineno, line in enumerate(lines, start=1):
        if not line or line.startswith("!"):
            continue
        tokens = line.split("\t")

        if any(t.startswith("**") for t in tokens):
            if started:
                diags.warn(f"line {lineno}", "nested exclusive interpretation ignored")
                continue
            started = True
            for t in tokens:
                is_kern = t == "**kern"
                kern_columns.append(is_kern)
                if is_kern:
                    part_index = len(part_ids)
                    part_ids.append((f"S{part_index + 1}", f"spine {part_index + 1}"))
                    part_notes.append([])
                    spines.append(_Spine(part_index, 1))
                else:
                    spines.append(_Spine(-1, 1))
                    diags.skip(f"spine:{t}")
            continue

        if not started:
            diags.warn(f"line {lineno}", "data before exclusive interpretation")
            continue

        if all(t.startswith("*") for t in tokens):
            _interpretation_line(tokens, spines, lineno, ts_changes, key_changes, diags)
            continue

        if any(t.startswith("=") for t in tokens):
            live = [s.clock for s in spines if s.part >= 0 and not s.closed]
            if live:
                barlines.append(max(live))
            continue

        if len(tokens) != len(spines):
            raise ParseError(
                f"data line carries {len(tokens)} tokens for {len(spines)} spines",
                line=lineno,
            )
        for spine, token in zip(list(spines), tokens):
            if spine.part < 0 or spine.closed or token == ".":
                continue
            _data_token(token, spine, part_notes[spine.part], lineno, diags)

    if not part_ids:
        raise ParseError("no **kern spine found")

    total = max(
        [s.clock for s in spines if s.part >= 0]
        + [n.onset + n.duration for notes in part_notes for n in notes],
        default=Fraction(0),
    )
    spans, pickup = _measure_spans(barlines, ts_changes, key_changes, total)
    metadata = {"title": "", "composer": "", "source_format": "kern"}
    if pickup:
        metadata["pickup"] = True
    score = assemble_score(part_ids, part_notes, span_measures(spans), metadata)
    return score, diags


def _interpretation_line(tokens, spines, lineno, ts_changes, key_changes, diags):
    now = max((s.clock for s in spines if s.part >= 0), default=Fraction(0))
    for t in tokens:
        m = re.fullmatch(r"\*M(\d+)/(\d+)", t)
        if m:
            ts_changes.append((now, (int(m.group(1)), int(m.group(2)))))
            break
    for t in tokens:
        m = re.fullmatch(r"\*k\[([a-g#\-nx ]*)\]", t)
        if m:
            acc = m.group(1)
            key_changes.append((now, acc.count("#") - acc.count("-")))
            break

    if "*-" in tokens:
        for spine, t in zip(spines, tokens):
            if t == "*-":
                spine.closed = True
        return

    if "*^" in tokens or "*v" in tokens:
        new_spines = []
        i = 0
        while i < len(tokens):
            spine = spines[i]
            if tokens[i] == "*^":
                new_spines.append(spine)
                twin = _Spine(spine.part, spine.voice + 1, spine.clock)
                new_spines.append(twin)
            elif tokens[i] == "*v":
                new_spines.append(spine)
                while i + 1 < len(tokens) and tokens[i + 1] == "*v":
                    i += 1  # joined spines collapse into the leftmost
                new_spines[-1].clock = max(new_spines[-1].clock, spines[i].clock)
            else:
                new_spines.append(spine)
            i += 1
        spines[:] = new_spines


def recip_duration(token: str) -> Fraction | None:
    """Beats for a recip token: n -> 4/n quarters, dots extend by halves."""
    m = _RECIP_RE.search(token)
    if not m:
        return None
    digits, dots = m.group(1), len(m.group(2))
    if set(digits) == {"0"}:
        base = Fraction(8) * (2 ** (len(digits) - 1))
    else:
        base = Fraction(4, int(digits))
    return base * (2 - Fraction(1, 2**dots))


def kern_pitch(token: str) -> Pitch | None:
    m = _PITCH_RE.search(token)
    if not m:
        return None
    run = m.group(0)
    letter = run[0]
    count = len(run)
    octave = 3 + count if letter.islower() else 4 - count
    rest = token[m.end():]
    alter = 0
    for ch in rest:
        if ch == "#":
            alter += 1
        elif ch == "-":
            alter -= 1
        elif ch == "n":
            alter = 0
        else:
            break
    return Pitch(letter.upper(), alter, octave)


def _data_token(token, spine, notes, lineno, diags):
    advance = Fraction(0)
    for sub in token.split(" "):
        if not sub or sub == ".":
            continue
        grace = "q" in sub or "Q" in sub
        tie_open = "[" in sub
        tie_mid = "_" in sub
        tie_close = "]" in sub

        duration = Fraction(0) if grace else recip_duration(sub)
        if duration is None:
            diags.warn(f"line {lineno}", f"token {sub!r} has no duration; skipped")
            continue
        advance = max(advance, duration)

        if "r" in sub:
            notes.append(RawNote(spine.clock, duration, REST, spine.voice))
            continue
        pitch = kern_pitch(sub)
        if pitch is None:
            diags.warn(f"line {lineno}", f"token {sub!r} has no pitch; skipped")
            continue
        midi = pitch.midi
        if (tie_mid or tie_close) and midi in spine.open_ties:
            idx = spine.open_ties[midi]
            prev = notes[idx]
            if prev.onset + prev.duration == spine.clock:
                notes[idx] = RawNote(prev.onset, prev.duration + duration,
                                     prev.content, prev.voice, prev.grace)
                if tie_close:
                    del spine.open_ties[midi]
                continue
            diags.warn(f"line {lineno}", "tie continuation does not abut; kept separate")
            del spine.open_ties[midi]
        notes.append(RawNote(spine.clock, duration, pitch, spine.voice, grace))
        if tie_open:
            spine.open_ties[midi] = len(notes) - 1
    spine.clock += advance


def _measure_spans(barlines, ts_changes, key_changes, total):
    cuts = sorted({t for t in barlines if Fraction(0) < t < total})
    boundaries = [Fraction(0), *cuts, total]
    if total == 0:
        boundaries = [Fraction(0)]

    def ts_at(beat):
        current = (4, 4)
        for t, ts in sorted(ts_changes):
            if t <= beat:
                current = ts
        return current

    def key_at(beat):
        current = None
        for t, k in sorted(key_changes):
            if t <= beat:
                current = k
        return current

    spans = []
    for start in boundaries[:-1] if len(boundaries) > 1 else boundaries:
        spans.append((start, ts_at(start), key_at(start)))
    if not spans:
        spans = [(Fraction(0), ts_at(Fraction(0)), key_at(Fraction(0)))]

    pickup = False
    if len(spans) > 1:
        num, den = spans[0][1]
        nominal = Fraction(num * 4, den)
        first_len = boundaries[1] - boundaries[0]
        pickup = Fraction(0) < first_len < nominal
    return spans, pickup
