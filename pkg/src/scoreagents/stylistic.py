"""Style-period attribution from structural and harmonic evidence.

Seven texture and harmony statistics summarize a work; each reference
profile scores the vector with an independent-per-feature Gaussian
kernel exp(-z^2 / 2) evaluated in log space.  The kernel is left
unnormalized on purpose: scaling every spread by a common factor then
only scales the log-likelihoods, so the ranking (and the attribution
argmax) is unchanged, which is the contract callers rely on when they
loosen or tighten a database wholesale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import EmptyInputError
from .harmonic import HarmonicMap, _numeral_degree
from .model import Score
from .structural import FormOutline, mean_voices
from .styledb import FEATURE_FIELDS, StyleProfile, seed_profiles

DEFAULT_ORNAMENT_THRESHOLD = Fraction(1, 4)

_MAJOR_SCALE = frozenset({0, 2, 4, 5, 7, 9, 11})
# Natural plus harmonic minor, matching what numeral lookup treats as diatonic.
_MINOR_SCALE = frozenset({0, 2, 3, 5, 7, 8, 10, 11})

_SEVENTH_QUALITIES = frozenset({"dom7", "maj7", "min7", "halfdim7", "dim7"})


@dataclass(frozen=True)
class StyleFeatureVector:
    chromaticism: float
    ornamentation_density: float
    mean_voice_count: float
    phrase_regularity: float
    cadence_rate: float
    harmonic_rhythm: float
    seventh_ratio: float

    def as_dict(self) -> dict[str, float]:
        return {field: getattr(self, field) for field in FEATURE_FIELDS}


@dataclass(frozen=True)
class StyleAttribution:
    distribution: dict[str, float]
    top_label: str
    instrumentation_notes: str
    ornamentation_notes: str
    degenerate: bool = False


@dataclass(frozen=True)
class StyleAssessment:
    features: StyleFeatureVector
    attribution: StyleAttribution


def _scale_of(key) -> frozenset[int]:
    base = _MAJOR_SCALE if key.mode == "major" else _MINOR_SCALE
    return frozenset((pc + key.tonic) % 12 for pc in base)


def _key_for_beat(trajectory, beat):
    for (lo, hi), key in trajectory:
        if lo <= beat < hi:
            return key
    return trajectory[-1][1] if trajectory else None


def _chromaticism(score: Score, harmony: HarmonicMap) -> float:
    notes = score.pitched_events()
    if not notes:
        return 0.0
    outside = 0
    for ev in notes:
        key = _key_for_beat(harmony.trajectory, ev.onset) or harmony.global_key
        if ev.content.pitch_class not in _scale_of(key):
            outside += 1
    return outside / len(notes)


def _segment_spans(score: Score, outline: FormOutline):
    spans = []
    for seg in outline.segments:
        lo = score.measures[seg.start_measure].start_beat
        hi = score.measures[seg.end_measure].end_beat
        spans.append((lo, min(hi, score.total_beats) if score.total_beats else hi))
    return spans


def _phrase_regularity(spans) -> float:
    lengths = [float(hi - lo) for lo, hi in spans]
    if not lengths:
        return 0.0
    mean = sum(lengths) / len(lengths)
    if mean == 0:
        return 0.0
    variance = sum((x - mean) ** 2 for x in lengths) / len(lengths)
    return math.sqrt(variance) / mean


def _cadence_rate(harmony: HarmonicMap, spans) -> float:
    """Share of segments whose closing chord is I approached from V."""
    if not spans or len(harmony.numerals) < 2:
        return 0.0
    hits = 0
    for _, end in spans:
        for i, num in enumerate(harmony.numerals):
            if num.span[0] < end <= num.span[1]:
                prev = harmony.numerals[i - 1] if i else None
                if (prev is not None and prev.applied_of is None
                        and num.applied_of is None
                        and _numeral_degree(prev.numeral) == 5
                        and _numeral_degree(num.numeral) == 1):
                    hits += 1
                break
    return hits / len(spans)


def extract_style_features(score: Score, harmony: HarmonicMap, outline: FormOutline,
                           ornament_threshold: Fraction = DEFAULT_ORNAMENT_THRESHOLD,
                           ) -> StyleFeatureVector:
    """Deterministic feature summary; all three inputs must describe one score."""
    notes = score.pitched_events()
    if not notes:
        raise EmptyInputError("style features need pitched content")
    total_beats = score.total_beats
    spans = _segment_spans(score, outline)

    ornaments = sum(1 for ev in notes if ev.duration < ornament_threshold)
    chords = harmony.chords
    measures = max(len(score.measures), 1)

    return StyleFeatureVector(
        chromaticism=_chromaticism(score, harmony),
        ornamentation_density=ornaments / float(total_beats) if total_beats else 0.0,
        mean_voice_count=mean_voices(notes, Fraction(0), total_beats),
        phrase_regularity=_phrase_regularity(spans),
        cadence_rate=_cadence_rate(harmony, spans),
        harmonic_rhythm=max(len(chords) - 1, 0) / measures,
        seventh_ratio=(sum(1 for c in chords if c.quality in _SEVENTH_QUALITIES) / len(chords)
                       if chords else 0.0),
    )


def attribute_period(features: StyleFeatureVector,
                     profiles: Sequence[StyleProfile]) -> StyleAttribution:
    """Normalized per-profile likelihoods; argmax ties go to database order."""
    if not profiles:
        raise ValueError("attribution needs at least one profile")
    values = features.as_dict()
    logs = []
    for profile in profiles:
        z2 = 0.0
        for field in FEATURE_FIELDS:
            mean, spread = profile.features[field]
            z = (values[field] - mean) / spread
            z2 += z * z
        logs.append(-0.5 * z2)

    # Log-space keeps likelihood ratios exact however small the raw
    # densities get; only a non-finite best log-likelihood (every density
    # collapsed to zero beyond recovery) falls back to uniform.
    top = max(logs)
    degenerate = not math.isfinite(top)
    if degenerate:
        weights = [1.0] * len(profiles)
    else:
        weights = [math.exp(lg - top) for lg in logs]
    norm = sum(weights)
    distribution = {p.label: w / norm for p, w in zip(profiles, weights)}

    best = max(range(len(profiles)), key=lambda i: (weights[i], -i))
    winner = profiles[best]
    return StyleAttribution(
        distribution=distribution,
        top_label=winner.label,
        instrumentation_notes=", ".join(winner.typical_instrumentation),
        ornamentation_notes=", ".join(winner.typical_ornamentation),
        degenerate=degenerate,
    )


def analyze_style(score: Score, harmony: HarmonicMap, outline: FormOutline,
                  profiles: Optional[Sequence[StyleProfile]] = None,
                  ornament_threshold: Fraction = DEFAULT_ORNAMENT_THRESHOLD,
                  ) -> StyleAssessment:
    if profiles is None:
        profiles = seed_profiles()
    if not profiles:
        raise ValueError("style database is empty")
    features = extract_style_features(score, harmony, outline, ornament_threshold)
    return StyleAssessment(features, attribute_period(features, profiles))
