"""Structural agent: formal segmentation and the architectural outline.

Per-measure feature frames feed a self-similarity matrix; a Gaussian-tapered
checkerboard kernel run along its diagonal yields a novelty curve whose
peaks become section boundaries. Sections are lettered by similarity to
earlier sections and given advisory role labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptyInputError
from .model import Score

ROLES = ("introduction", "exposition", "development", "reprise", "coda", "section")

KERNEL_HALF_WIDTH = 4
NOVELTY_THRESHOLD = 0.3
LETTER_MATCH_THRESHOLD = 0.85
INTRO_MAX_MEASURES = 8
INTRO_DENSITY_RATIO = 0.75
CODA_LENGTH_RATIO = 0.5


@dataclass(frozen=True)
class FeatureFrame:
    """Texture summary of one measure."""

    measure_index: int
    pc_vector: tuple[float, ...]  # 12 duration weights, L1-normalized
    onset_density: float  # note onsets per beat
    voice_count: float  # time-weighted mean simultaneous notes


@dataclass(frozen=True)
class Segment:
    start_measure: int
    end_measure: int  # inclusive
    letter: str
    role: str
    confidence: float

    @property
    def measure_count(self) -> int:
        return self.end_measure - self.start_measure + 1


@dataclass(frozen=True)
class FormOutline:
    segments: tuple[Segment, ...]
    form_string: str


def extract_frames(score: Score) -> list[FeatureFrame]:
    """One FeatureFrame per measure of the score."""
    if not score.measures or not score.pitched_events():
        raise EmptyInputError("score has no measures or no pitched content")

    frames = []
    for m in score.measures:
        start = m.start_beat
        end = score.measures[m.index + 1].start_beat if m.index + 1 < len(score.measures) \
            else max(score.total_beats, m.end_beat)
        events = [e for e in score.events_in(start, end) if e.is_pitched]
        beats = end - start

        weights = [Fraction(0)] * 12
        onsets = 0
        for e in events:
            if start <= e.onset < end:
                onsets += 1
            overlap = min(e.end, end) - max(e.onset, start)
            if overlap > 0:
                weights[e.content.pitch_class] += overlap
        total = sum(weights)
        pc = tuple(float(w / total) for w in weights) if total else (0.0,) * 12

        frames.append(
            FeatureFrame(
                measure_index=m.index,
                pc_vector=pc,
                onset_density=float(Fraction(onsets) / beats) if beats else 0.0,
                voice_count=mean_voices(events, start, end),
            )
        )
    return frames


def mean_voices(events, start, end) -> float:
    """Time-weighted mean count of simultaneously sounding notes on [start, end)."""
    sounding = [(max(e.onset, start), min(e.end, end)) for e in events if e.duration > 0]
    sounding = [(a, b) for a, b in sounding if b > a]
    if not sounding or end <= start:
        return 0.0
    cuts = sorted({start, end, *(a for a, _ in sounding), *(b for _, b in sounding)})
    acc = Fraction(0)
    for lo, hi in zip(cuts, cuts[1:]):
        n = sum(1 for a, b in sounding if a <= lo and b >= hi)
        acc += n * (hi - lo)
    return float(acc / (end - start))


def frame_matrix(frames: list[FeatureFrame]) -> np.ndarray:
    """Stack frames as rows: 12 pc weights plus piece-normalized density and voices."""
    pc = np.array([f.pc_vector for f in frames], dtype=float)
    density = np.array([f.onset_density for f in frames], dtype=float)
    voices = np.array([f.voice_count for f in frames], dtype=float)
    if density.max() > 0:
        density = density / density.max()
    if voices.max() > 0:
        voices = voices / voices.max()
    return np.column_stack([pc, density, voices])


def self_similarity(frames: list[FeatureFrame]) -> np.ndarray:
    """Pairwise cosine similarity of frame vectors; values in [0, 1]."""
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames, got {len(frames)}")
    X = frame_matrix(frames)
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = X / safe[:, None]
    S = unit @ unit.T
    return np.clip(S, 0.0, 1.0)


def checkerboard_kernel(half_width: int) -> np.ndarray:
    """Gaussian-tapered checkerboard; same-side blocks +, cross blocks -."""
    L = half_width
    idx = np.arange(-L, L) + 0.5
    taper = np.exp(-(idx**2) / (2 * (L / 2.0) ** 2))
    sign = np.sign(idx)
    return np.outer(taper * sign, taper * sign)


def novelty_curve(S: np.ndarray, kernel_half_width: int = KERNEL_HALF_WIDTH) -> np.ndarray:
    """Checkerboard-kernel correlation along the diagonal.

    Position i scores the crack between measures i-1 and i. Windows are
    edge-clipped; the within-block and cross-block kernel halves are
    normalized separately so clipping never biases the score. The value is
    half the gap between mean within-block and mean cross-block similarity.
    """
    if kernel_half_width < 1:
        raise ValueError("kernel_half_width must be >= 1")
    n = S.shape[0]
    L = kernel_half_width
    K = checkerboard_kernel(L)
    out = np.zeros(n)
    for i in range(1, n):
        lo = max(0, i - L)
        hi = min(n, i + L)
        sub = S[lo:hi, lo:hi]
        k = K[lo - i + L : hi - i + L, lo - i + L : hi - i + L]
        within = np.where(k > 0, k, 0.0)
        cross = np.where(k < 0, -k, 0.0)
        if within.sum() > 0 and cross.sum() > 0:
            gap = (sub * within).sum() / within.sum() - (sub * cross).sum() / cross.sum()
            out[i] = max(gap / 2.0, 0.0)
    return out


def detect_boundaries(
    S: np.ndarray,
    kernel_half_width: int = KERNEL_HALF_WIDTH,
    threshold: float = NOVELTY_THRESHOLD,
) -> list[int]:
    """Measure indices where a new section starts (0 is implicit, not listed)."""
    nov = novelty_curve(S, kernel_half_width)
    if nov.max() <= 0:
        return []
    cutoff = threshold * nov.max()
    boundaries = []
    for i in range(1, len(nov)):
        left = nov[i - 1]
        right = nov[i + 1] if i + 1 < len(nov) else -np.inf
        if nov[i] > left and nov[i] >= right and nov[i] > cutoff:
            boundaries.append(i)
    return boundaries


def label_sections(
    frames: list[FeatureFrame],
    boundaries: list[int],
    letter_match_threshold: float = LETTER_MATCH_THRESHOLD,
    intro_max_measures: int = INTRO_MAX_MEASURES,
    intro_density_ratio: float = INTRO_DENSITY_RATIO,
    coda_length_ratio: float = CODA_LENGTH_RATIO,
) -> FormOutline:
    """Partition measures at the boundaries and assign letters and roles."""
    n = len(frames)
    edges = [0, *[b for b in boundaries if 0 < b < n], n]
    X = frame_matrix(frames)

    prototypes: list[np.ndarray] = []  # mean vector of each letter's first segment
    letters: list[str] = []
    spans = list(zip(edges, edges[1:]))
    for lo, hi in spans:
        mean = X[lo:hi].mean(axis=0)
        norm = np.linalg.norm(mean)
        unit = mean / norm if norm > 0 else mean
        best, best_sim = None, letter_match_threshold
        for li, proto in enumerate(prototypes):
            sim = float(unit @ proto)
            if sim >= best_sim:
                best, best_sim = li, sim
        if best is None:
            prototypes.append(unit)
            letters.append(chr(ord("A") + (len(prototypes) - 1) % 26))
        else:
            letters.append(chr(ord("A") + best % 26))

    mean_len = sum(hi - lo for lo, hi in spans) / len(spans)
    piece_density = float(np.mean([f.onset_density for f in frames]))
    segments = []
    for si, ((lo, hi), letter) in enumerate(zip(spans, letters)):
        role, confidence = _role_for(
            si, len(spans), hi - lo, letter, letters, mean_len, frames[lo:hi],
            piece_density, intro_max_measures, intro_density_ratio, coda_length_ratio,
        )
        segments.append(Segment(lo, hi - 1, letter, role, confidence))
    return FormOutline(tuple(segments), "".join(letters))


def _role_for(si, nseg, length, letter, letters, mean_len, seg_frames,
              piece_density, intro_max, intro_ratio, coda_ratio):
    first_of_letter = letters.index(letter) == si
    if si == 0:
        density = float(np.mean([f.onset_density for f in seg_frames]))
        if nseg > 1 and length < intro_max and piece_density > 0 \
                and density < intro_ratio * piece_density:
            return "introduction", 0.6
        return "exposition", 0.8
    if si == nseg - 1 and length < coda_ratio * mean_len:
        return "coda", 0.6
    if letter == "A" and not first_of_letter:
        if any(l != "A" for l in letters[:si]):
            return "reprise", 0.7
        return "exposition", 0.6
    if first_of_letter:
        return "development", 0.6
    return "section", 0.5


def analyze_structure(score: Score, **params) -> FormOutline:
    """Full structural pass: frames, similarity, boundaries, outline."""
    frames = extract_frames(score)
    if len(frames) < 2:
        return FormOutline(
            (Segment(0, len(frames) - 1, "A", "exposition", 0.8),), "A"
        )
    S = self_similarity(frames)
    boundaries = detect_boundaries(
        S,
        kernel_half_width=params.get("kernel_half_width", KERNEL_HALF_WIDTH),
        threshold=params.get("threshold", NOVELTY_THRESHOLD),
    )
    return label_sections(
        frames,
        boundaries,
        letter_match_threshold=params.get("letter_match_threshold", LETTER_MATCH_THRESHOLD),
        intro_max_measures=params.get("intro_max_measures", INTRO_MAX_MEASURES),
        intro_density_ratio=params.get("intro_density_ratio", INTRO_DENSITY_RATIO),
        coda_length_ratio=params.get("coda_length_ratio", CODA_LENGTH_RATIO),
    )
