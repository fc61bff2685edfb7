"""Key finding, modulation tracking, chords, and Roman-numeral mapping.

Key strength is the Pearson correlation between a duration-weighted
pitch-class histogram and the Krumhansl-Kessler probe-tone profiles
(Krumhansl 1990), trying all 24 rotations.  The histogram is rotated
rather than the profile, so a transposed score produces bitwise the
same correlation for the shifted key and equivariance is exact in
floating point.

Chords are matched per beat slice against binary pitch-class templates
by cosine similarity; numerals interpret each chord in the key that the
tonal trajectory assigns to its span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import EmptyInputError, MetricError
from .model import Score

KK_MAJOR = (6.35, 2.23, 3.48, 2.33, 4.38, 4.09, 2.52, 5.19, 2.39, 3.66, 2.29, 2.88)
KK_MINOR = (6.33, 2.68, 3.52, 5.38, 2.60, 3.53, 2.54, 4.75, 3.98, 2.69, 3.34, 3.17)

MAJOR_KEY_NAMES = ("C", "Db", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B")
MINOR_KEY_NAMES = ("C", "C#", "D", "Eb", "E", "F", "F#", "G", "G#", "A", "Bb", "B")

CHORD_TEMPLATES = (
    ("maj", (0, 4, 7)),
    ("min", (0, 3, 7)),
    ("dim", (0, 3, 6)),
    ("aug", (0, 4, 8)),
    ("dom7", (0, 4, 7, 10)),
    ("maj7", (0, 4, 7, 11)),
    ("min7", (0, 3, 7, 10)),
    ("halfdim7", (0, 3, 6, 10)),
    ("dim7", (0, 3, 6, 9)),
)

DEFAULT_WINDOW_MEASURES = 4
DEFAULT_HOP = 1
DEFAULT_MIN_DWELL = 2
DEFAULT_GRID = Fraction(1)
DEFAULT_CHORD_FLOOR = 0.6

ROMAN = ("I", "II", "III", "IV", "V", "VI", "VII")
_ROMAN_DEGREE = {r: i + 1 for i, r in enumerate(ROMAN)}

_UPPER_QUALITIES = frozenset({"maj", "aug", "dom7", "maj7"})
_QUALITY_SUFFIX = {
    "maj": "", "min": "", "dim": "°", "aug": "+", "dom7": "7",
    "maj7": "maj7", "min7": "7", "halfdim7": "ø7", "dim7": "°7",
}

_DIATONIC = {
    "major": {
        (0, "maj"): "I", (0, "maj7"): "Imaj7",
        (2, "min"): "ii", (2, "min7"): "ii7",
        (4, "min"): "iii", (4, "min7"): "iii7",
        (5, "maj"): "IV", (5, "maj7"): "IVmaj7",
        (7, "maj"): "V", (7, "dom7"): "V7",
        (9, "min"): "vi", (9, "min7"): "vi7",
        (11, "dim"): "vii°", (11, "halfdim7"): "viiø7",
    },
    # Natural and harmonic variants both count as diatonic in minor.
    "minor": {
        (0, "min"): "i", (0, "min7"): "i7",
        (2, "dim"): "ii°", (2, "halfdim7"): "iiø7",
        (3, "maj"): "III", (3, "maj7"): "IIImaj7", (3, "aug"): "III+",
        (5, "min"): "iv", (5, "min7"): "iv7",
        (7, "maj"): "V", (7, "dom7"): "V7", (7, "min"): "v", (7, "min7"): "v7",
        (8, "maj"): "VI", (8, "maj7"): "VImaj7",
        (10, "maj"): "VII", (10, "dom7"): "VII7",
        (11, "dim"): "vii°", (11, "dim7"): "vii°7",
    },
}

_DEGREE_BY_OFFSET = {
    "major": {0: (1, ""), 1: (2, "b"), 2: (2, ""), 3: (3, "b"), 4: (3, ""), 5: (4, ""),
              6: (4, "#"), 7: (5, ""), 8: (6, "b"), 9: (6, ""), 10: (7, "b"), 11: (7, "")},
    "minor": {0: (1, ""), 1: (2, "b"), 2: (2, ""), 3: (3, ""), 4: (3, "#"), 5: (4, ""),
              6: (4, "#"), 7: (5, ""), 8: (6, ""), 9: (6, "#"), 10: (7, ""), 11: (7, "#")},
}

# Functional classes over scale degrees and the transitions each may open.
_DEGREE_CLASS = {1: "t", 3: "t", 6: "t", 2: "s", 4: "s", 5: "d", 7: "d"}
_ALLOWED_NEXT = {"t": ("t", "s", "d"), "s": ("d", "t", "s"), "d": ("t", "d")}


@dataclass(frozen=True)
class KeyEstimate:
    tonic: int
    mode: str
    correlation: float
    runner_up: Optional["KeyEstimate"] = None

    @property
    def name(self) -> str:
        return key_name(self.tonic, self.mode)


@dataclass(frozen=True)
class ChordLabel:
    root: int
    quality: str
    span: tuple[Fraction, Fraction]
    score: float


@dataclass(frozen=True)
class RomanNumeral:
    numeral: str
    applied_of: Optional[str]
    key_context: KeyEstimate
    span: tuple[Fraction, Fraction]
    chromatic: bool = False

    @property
    def label(self) -> str:
        return f"{self.numeral}/{self.applied_of}" if self.applied_of else self.numeral


@dataclass
class HarmonicMap:
    global_key: KeyEstimate
    trajectory: list[tuple[tuple[Fraction, Fraction], KeyEstimate]]
    modulations: list[Fraction]
    modulation_measures: list[int]
    chords: list[ChordLabel]
    numerals: list[RomanNumeral]
    coherence: Optional[float]


_NAME_TO_PC = {
    "Cb": 11, "C": 0, "C#": 1, "Db": 1, "D": 2, "D#": 3, "Eb": 3, "E": 4, "E#": 5,
    "Fb": 4, "F": 5, "F#": 6, "Gb": 6, "G": 7, "G#": 8, "Ab": 8, "A": 9, "A#": 10,
    "Bb": 10, "B": 11, "B#": 0,
}


def key_name(tonic: int, mode: str) -> str:
    """Display name for a (tonic, mode) pair, e.g. ``key_name(7, 'major')`` -> 'G major'."""
    names = MAJOR_KEY_NAMES if mode == "major" else MINOR_KEY_NAMES
    return f"{names[tonic % 12]} {mode}"


def parse_key_name(text: str) -> tuple[int, str]:
    """Inverse of KeyEstimate.name, accepting any enharmonic spelling."""
    parts = text.strip().split()
    if len(parts) != 2:
        raise ValueError(f"expected '<tonic> major|minor', got {text!r}")
    name, mode = parts[0], parts[1].lower()
    pc = _NAME_TO_PC.get(name[0].upper() + name[1:].lower())
    if pc is None or mode not in ("major", "minor"):
        raise ValueError(f"unknown key {text!r}")
    return pc, mode


def key_signature_accidentals(tonic: int, mode: str) -> int:
    """Accidental count of the key signature, minimized over enharmonics."""
    relative_major = tonic if mode == "major" else (tonic + 3) % 12
    sharps = (relative_major * 7) % 12
    flats = (relative_major * 5) % 12
    return min(sharps, flats)


def duration_weighted_pcs(score: Score, from_beat=None, to_beat=None) -> list[float]:
    """Pitch-class histogram weighted by sounding duration inside the span."""
    lo = None if from_beat is None else Fraction(from_beat)
    hi = None if to_beat is None else Fraction(to_beat)
    hist = [0.0] * 12
    for part in score.parts:
        for ev in part.events:
            if not ev.is_pitched or ev.duration == 0:
                continue
            start = ev.onset if lo is None else max(ev.onset, lo)
            end = ev.end if hi is None else min(ev.end, hi)
            if end > start:
                hist[ev.content.midi % 12] += float(end - start)
    return hist


def _pearson(x: Sequence[float], y: Sequence[float]) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / math.sqrt(sxx * syy)


def _rank_keys(hist: Sequence[float]):
    rows = []
    for mode, profile in (("major", KK_MAJOR), ("minor", KK_MINOR)):
        for tonic in range(12):
            rotated = [hist[(i + tonic) % 12] for i in range(12)]
            rows.append((-_pearson(rotated, profile),
                         key_signature_accidentals(tonic, mode),
                         0 if mode == "major" else 1,
                         tonic, mode))
    rows.sort()
    return rows


def _estimate_from_hist(hist: Sequence[float]) -> KeyEstimate:
    rows = _rank_keys(hist)
    neg_r2, _, _, tonic2, mode2 = rows[1]
    neg_r, _, _, tonic, mode = rows[0]
    return KeyEstimate(tonic, mode, -neg_r, KeyEstimate(tonic2, mode2, -neg_r2))


def estimate_global_key(score: Score) -> KeyEstimate:
    """Best of the 24 keys; ties go to fewer signature accidentals, then major."""
    hist = duration_weighted_pcs(score)
    if not any(hist):
        raise EmptyInputError("key estimation needs pitched content")
    return _estimate_from_hist(hist)


def dwell_runs(keys: Sequence[tuple[int, str]], min_dwell: int):
    """Collapse window votes to keys that hold at least min_dwell wins in a row.

    Returns (key, index of the run's first vote) pairs; shorter excursions
    disappear, and reunited runs of the same key merge.
    """
    raw: list[list] = []
    for i, key in enumerate(keys):
        if raw and raw[-1][0] == key:
            raw[-1][2] += 1
        else:
            raw.append([key, i, 1])
    out: list[tuple[tuple[int, str], int]] = []
    for key, start, length in raw:
        if length < min_dwell:
            continue
        if not out or out[-1][0] != key:
            out.append((key, start))
    return out


def track_keys(score: Score, window_measures: int = DEFAULT_WINDOW_MEASURES,
               hop: int = DEFAULT_HOP, min_dwell: int = DEFAULT_MIN_DWELL):
    """Windowed key trajectory plus modulation beats.

    Windows of window_measures slide by hop; each votes for its best key.
    A key registers only after min_dwell consecutive wins.  A window flips
    once most of its measures sit in the new key, so each later run opens
    (window - 1) // 2 measures after its first winning window starts.
    """
    if window_measures < 2:
        raise ValueError("window_measures must be at least 2")
    if hop < 1:
        raise ValueError("hop must be at least 1")
    global_key = estimate_global_key(score)
    measures = score.measures
    total = score.total_beats

    votes: list[tuple[int, KeyEstimate]] = []
    for s in range(0, len(measures) - window_measures + 1, hop):
        lo = measures[s].start_beat
        hi = measures[s + window_measures - 1].end_beat
        hist = duration_weighted_pcs(score, lo, hi)
        if any(hist):
            votes.append((s, _estimate_from_hist(hist)))

    runs = dwell_runs([(e.tonic, e.mode) for _, e in votes], min_dwell)
    if len(runs) <= 1:
        return [((Fraction(0), total), global_key)], []

    bounds = [i for _, i in runs] + [len(votes)]
    entries: list[tuple[Fraction, KeyEstimate]] = []
    for r, ((tonic, mode), first) in enumerate(runs):
        matching = [e for _, e in votes[bounds[r]:bounds[r + 1]]
                    if (e.tonic, e.mode) == (tonic, mode)]
        representative = max(matching, key=lambda e: e.correlation)
        if r == 0:
            cut = Fraction(0)
        else:
            opening = min(votes[first][0] + (window_measures - 1) // 2, len(measures) - 1)
            cut = measures[opening].start_beat
        entries.append((cut, representative))

    trajectory: list[tuple[tuple[Fraction, Fraction], KeyEstimate]] = []
    for i, (cut, est) in enumerate(entries):
        end = entries[i + 1][0] if i + 1 < len(entries) else total
        if end <= cut:
            continue
        if trajectory and (trajectory[-1][1].tonic, trajectory[-1][1].mode) == (est.tonic, est.mode):
            (lo, _), prev = trajectory[-1]
            trajectory[-1] = ((lo, end), prev)
        else:
            trajectory.append(((cut, end), est))
    modulations = [span[0] for span, _ in trajectory[1:]]
    return trajectory, modulations


def _best_template(weights: Sequence[float]):
    norm = math.sqrt(sum(w * w for w in weights))
    if norm == 0:
        return None
    best = None
    for root in range(12):
        for order, (quality, intervals) in enumerate(CHORD_TEMPLATES):
            dot = sum(weights[(root + iv) % 12] for iv in intervals)
            cos = dot / (norm * math.sqrt(len(intervals)))
            # Ties: triads before sevenths, then lowest root.
            rank = (-cos, len(intervals) > 3, root, order)
            if best is None or rank < best[0]:
                best = (rank, root, quality, cos)
    return best[1], best[2], best[3]


def classify_chords(score: Score, grid=DEFAULT_GRID,
                    chord_floor: float = DEFAULT_CHORD_FLOOR) -> list[ChordLabel]:
    """Template labels per grid slice; sub-floor and silent slices are skipped,
    adjacent identical labels merge with a duration-weighted score."""
    grid = Fraction(grid)
    if grid <= 0:
        raise ValueError("grid must be positive")
    labels: list[ChordLabel] = []
    lo = Fraction(0)
    while lo < score.total_beats:
        hi = min(lo + grid, score.total_beats)
        match = _best_template(duration_weighted_pcs(score, lo, hi))
        if match is not None:
            root, quality, strength = match
            if strength >= chord_floor:
                prev = labels[-1] if labels else None
                if (prev is not None and (prev.root, prev.quality) == (root, quality)
                        and prev.span[1] == lo):
                    old_len = float(prev.span[1] - prev.span[0])
                    new_len = float(hi - lo)
                    blended = (prev.score * old_len + strength * new_len) / (old_len + new_len)
                    labels[-1] = ChordLabel(root, quality, (prev.span[0], hi), blended)
                else:
                    labels.append(ChordLabel(root, quality, (lo, hi), strength))
        lo = hi
    return labels


def _key_at(trajectory, beat: Fraction) -> KeyEstimate:
    for (lo, hi), key in trajectory:
        if lo <= beat < hi:
            return key
    if trajectory and beat == trajectory[-1][0][1]:
        return trajectory[-1][1]
    raise ValueError(f"trajectory does not cover beat {beat}")


def _target_numeral(offset: int, mode: str) -> Optional[str]:
    for quality in ("maj", "min", "dim"):
        numeral = _DIATONIC[mode].get((offset, quality))
        if numeral is not None:
            return numeral
    return None


def _chromatic_numeral(offset: int, quality: str, mode: str) -> str:
    degree, accidental = _DEGREE_BY_OFFSET[mode][offset]
    base = ROMAN[degree - 1]
    if quality not in _UPPER_QUALITIES:
        base = base.lower()
    return accidental + base + _QUALITY_SUFFIX[quality]


def roman_numerals(chords: Sequence[ChordLabel], trajectory) -> list[RomanNumeral]:
    """Interpret each chord in its trajectory key.

    Diatonic chords take plain numerals; nondiatonic major or dominant-seventh
    chords rooted a perfect fifth above a diatonic degree become applied
    dominants of that degree; everything else is flagged chromatic.
    """
    if not chords:
        raise ValueError("no chords to interpret")
    out: list[RomanNumeral] = []
    for chord in chords:
        key = _key_at(trajectory, chord.span[0])
        offset = (chord.root - key.tonic) % 12
        numeral = _DIATONIC[key.mode].get((offset, chord.quality))
        if numeral is not None:
            out.append(RomanNumeral(numeral, None, key, chord.span))
            continue
        if chord.quality in ("maj", "dom7"):
            target = _target_numeral((offset - 7) % 12, key.mode)
            if target is not None:
                base = "V7" if chord.quality == "dom7" else "V"
                out.append(RomanNumeral(base, target, key, chord.span))
                continue
        out.append(RomanNumeral(_chromatic_numeral(offset, chord.quality, key.mode),
                                None, key, chord.span, chromatic=True))
    return out


def _numeral_degree(text: str) -> int:
    core = text.lstrip("b#")
    letters = []
    for ch in core:
        if ch.upper() in ("I", "V", "X"):
            letters.append(ch.upper())
        else:
            break
    return _ROMAN_DEGREE["".join(letters)]


def _transition_allowed(prev: RomanNumeral, cur: RomanNumeral) -> bool:
    if (prev.numeral, prev.applied_of) == (cur.numeral, cur.applied_of):
        return True
    if prev.applied_of is not None:
        return cur.applied_of is None and \
            _numeral_degree(cur.numeral) == _numeral_degree(prev.applied_of)
    src = _DEGREE_CLASS[_numeral_degree(prev.numeral)]
    if cur.applied_of is not None:
        dst = "d"
    else:
        dst = _DEGREE_CLASS[_numeral_degree(cur.numeral)]
    return dst in _ALLOWED_NEXT[src]


def harmonic_coherence(numerals: Sequence[RomanNumeral]) -> float:
    """Fraction of successive transitions the functional table allows, times 10."""
    if len(numerals) < 2:
        raise MetricError("harmonic coherence needs at least two chords")
    allowed = sum(_transition_allowed(a, b) for a, b in zip(numerals, numerals[1:]))
    return 10.0 * allowed / (len(numerals) - 1)


def analyze_harmony(score: Score, *, window_measures: int = DEFAULT_WINDOW_MEASURES,
                    hop: int = DEFAULT_HOP, min_dwell: int = DEFAULT_MIN_DWELL,
                    grid=DEFAULT_GRID, chord_floor: float = DEFAULT_CHORD_FLOOR) -> HarmonicMap:
    """Full harmonic pass: global key, trajectory, chords, numerals, coherence.

    Coherence is None when fewer than two chords were classified; modulation
    positions come out both as beats and as measure indexes.
    """
    global_key = estimate_global_key(score)
    trajectory, modulations = track_keys(score, window_measures, hop, min_dwell)
    chords = classify_chords(score, grid, chord_floor)
    numerals = roman_numerals(chords, trajectory) if chords else []
    coherence = harmonic_coherence(numerals) if len(numerals) >= 2 else None
    return HarmonicMap(global_key, trajectory, modulations,
                       [score.measure_of_beat(b) for b in modulations],
                       chords, numerals, coherence)
