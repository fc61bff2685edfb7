"""Quantitative evaluation: similarity, diversity, motif and agreement metrics.

Everything here is a pure function over finished analyses.  The melodic
distance is a normalized DTW over pitch-interval series, so transpositions
of the same line compare as identical.  The normalization minimizes path
cost divided by path length over all monotone alignments (not merely the
cheapest path divided by its own length); that quotient is found exactly
with Dinkelbach's parametric scheme over rational arithmetic, so equal-cost
paths of different lengths cannot make the result platform-dependent.

Agreement with a reference annotation uses a ±1-measure tolerance and
greedy nearest-first one-to-one boundary pairing, which is deterministic;
an optimal-assignment switch is reserved but not implemented.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .errors import MetricError, WorkMismatchError
from .model import MelodyNote, Score, flatten_melody
from .reference import ReferenceAnnotation
from .structural import FormOutline

__all__ = [
    "AgreementStats",
    "boundary_scores",
    "compare_to_reference",
    "corpus_summary",
    "dtw_melodic_distance",
    "greedy_matches",
    "motif_complexity",
    "rhythmic_entropy",
    "segment_boundaries",
    "shannon_form_diversity",
    "stats_table",
    "tonal_agreement_class",
]

log = logging.getLogger(__name__)

DEFAULT_IOI_GRID = Fraction(1, 4)
DEFAULT_IOI_CAP = Fraction(8)
BOUNDARY_TOLERANCE = 1

VERDICT_VALUES = ("Consistent", "MinorError", "Hallucination")
TABLE_COLUMNS = (
    "work_id",
    "segmentation_precision",
    "segmentation_recall",
    "segmentation_f1",
    "boundary_match_pct",
    "tonal_agreement",
    "modulation_jaccard",
)


@dataclass(frozen=True)
class AgreementStats:
    """How closely one analysis tracks a reference annotation.

    ``boundary_match_pct`` is ``100 * segmentation_f1``, the single headline
    number for segmentation agreement.
    """

    segmentation_precision: float
    segmentation_recall: float
    segmentation_f1: float
    boundary_match_pct: float
    tonal_agreement: str
    modulation_jaccard: float


def _interval_series(melody: Sequence) -> list[int]:
    midis = [n.midi if isinstance(n, MelodyNote) else int(n) for n in melody]
    if len(midis) < 2:
        raise MetricError("melodic distance needs at least 2 notes per melody")
    return [b - a for a, b in zip(midis, midis[1:])]


def _best_ratio_path(costs: list[list[int]], lam: Fraction):
    """Minimize sum(cost) - lam * length over monotone paths; return the triple."""
    rows, cols = len(costs), len(costs[0])
    table: list[list[tuple[Fraction, int, int]]] = [[None] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            step = costs[i][j] - lam
            if i == 0 and j == 0:
                table[i][j] = (step, costs[i][j], 1)
                continue
            options = []
            if i > 0 and j > 0:
                options.append(table[i - 1][j - 1])
            if i > 0:
                options.append(table[i - 1][j])
            if j > 0:
                options.append(table[i][j - 1])
            score, cost, length = min(options, key=lambda t: (t[0], t[2], t[1]))
            table[i][j] = (score + step, cost + costs[i][j], length + 1)
    return table[rows - 1][cols - 1]


def dtw_melodic_distance(a: Sequence, b: Sequence) -> float:
    """Normalized DTW distance between two melodies' pitch-interval series.

    Local cost is |x - y| semitones with the step set {(1,0), (0,1), (1,1)};
    the result is the smallest path cost over path length achievable by any
    alignment. Melodies may be MelodyNote sequences or bare midi numbers.
    """
    xs = _interval_series(a)
    ys = _interval_series(b)
    costs = [[abs(x - y) for y in ys] for x in xs]
    lam = Fraction(0)
    while True:
        score, cost, length = _best_ratio_path(costs, lam)
        if score == 0:
            return float(lam)
        lam = Fraction(cost, length)


def rhythmic_entropy(score: Score, grid: Fraction = DEFAULT_IOI_GRID,
                     cap: Fraction = DEFAULT_IOI_CAP) -> float:
    """Shannon entropy (bits) of quantized melodic inter-onset intervals.

    Each IOI is rounded to the nearest multiple of ``grid`` (ties to the even
    category) and clipped at ``cap`` beats before counting.
    """
    if grid <= 0 or cap <= 0:
        raise ValueError("grid and cap must be positive")
    try:
        melody = flatten_melody(score)
    except ValueError:
        melody = []
    if len(melody) < 2:
        raise MetricError("rhythmic entropy needs at least 2 melody onsets")
    categories = []
    for prev, nxt in zip(melody, melody[1:]):
        ioi = min(nxt.onset - prev.onset, cap)
        categories.append(round(Fraction(ioi) / grid))
    counts = Counter(categories)
    total = len(categories)
    # + 0.0 keeps the single-category case at 0.0 rather than -0.0
    return -sum((c / total) * math.log2(c / total) for c in counts.values()) + 0.0


def shannon_form_diversity(outline: FormOutline) -> float:
    """Shannon diversity (natural log) of section letters, length-weighted.

    Each letter's frequency is the total number of measures it governs, so a
    long refrain counts for more than a fleeting episode.
    """
    if not outline.segments:
        raise MetricError("form diversity needs at least one segment")
    weights: Counter[str] = Counter()
    for seg in outline.segments:
        weights[seg.letter] += seg.end_measure - seg.start_measure + 1
    total = sum(weights.values())
    return -sum((w / total) * math.log(w / total) for w in weights.values()) + 0.0


def _contains(longer: tuple, shorter: tuple) -> bool:
    span = len(shorter)
    return any(longer[i:i + span] == shorter for i in range(len(longer) - span + 1))


def motif_complexity(score: Score, min_len: int = 3, max_len: int = 6,
                     min_occurrences: int = 3) -> int:
    """Count distinct recurrent pitch-interval n-grams in the melody.

    An n-gram (lengths ``min_len``..``max_len``) counts when it occurs at
    least ``min_occurrences`` times and is not wholly contained in a longer
    counted n-gram with the same occurrence count; dropping only same-count
    subpatterns keeps the count monotone in ``min_occurrences``. A melody too
    short to hold a single n-gram scores 0 rather than raising.
    """
    if min_len < 1 or max_len < min_len or min_occurrences < 1:
        raise ValueError("need 1 <= min_len <= max_len and min_occurrences >= 1")
    try:
        melody = flatten_melody(score)
    except ValueError:
        melody = []
    intervals = tuple(b.midi - a.midi for a, b in zip(melody, melody[1:]))
    if len(intervals) < min_len:
        log.debug("melody of %d notes is too short for %d-interval motifs",
                  len(melody), min_len)
        return 0
    counts: Counter[tuple[int, ...]] = Counter()
    for n in range(min_len, max_len + 1):
        for i in range(len(intervals) - n + 1):
            counts[intervals[i:i + n]] += 1
    recurrent = {g: c for g, c in counts.items() if c >= min_occurrences}
    kept = 0
    for gram, occ in recurrent.items():
        absorbed = any(len(other) > len(gram) and occ == other_occ
                       and _contains(other, gram)
                       for other, other_occ in recurrent.items())
        if not absorbed:
            kept += 1
    return kept


def segment_boundaries(outline: FormOutline) -> list[int]:
    """Internal boundary positions: the start measure of every later segment."""
    return [seg.start_measure for seg in outline.segments[1:]]


def greedy_matches(predicted: Sequence[int], actual: Sequence[int],
                   tolerance: int = BOUNDARY_TOLERANCE) -> int:
    """Size of the greedy nearest-first one-to-one matching within tolerance."""
    candidates = sorted(
        (abs(p - a), ai, pi)
        for ai, a in enumerate(actual)
        for pi, p in enumerate(predicted)
        if abs(p - a) <= tolerance
    )
    used_a: set[int] = set()
    used_p: set[int] = set()
    matched = 0
    for _, ai, pi in candidates:
        if ai in used_a or pi in used_p:
            continue
        used_a.add(ai)
        used_p.add(pi)
        matched += 1
    return matched


def boundary_scores(predicted: Sequence[int], actual: Sequence[int],
                    tolerance: int = BOUNDARY_TOLERANCE) -> tuple[float, float, float]:
    """Precision, recall and F1 of boundary positions under a measure tolerance.

    Pairing is greedy nearest-first and one-to-one. Two empty sets agree
    perfectly; an empty side scores 1.0 on its own ratio (nothing to miss).
    """
    matched = greedy_matches(predicted, actual, tolerance)
    precision = matched / len(predicted) if predicted else 1.0
    recall = matched / len(actual) if actual else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def tonal_agreement_class(found: tuple[int, str], expected: tuple[int, str]) -> str:
    ft, fm = found
    et, em = expected
    if fm == em:
        if ft == et:
            return "exact"
        if (ft - et) % 12 in (5, 7):
            return "related"
        return "disagree"
    if ft == et:
        return "related"
    minor_tonic = ft if fm == "minor" else et
    major_tonic = et if fm == "minor" else ft
    if (minor_tonic + 3) % 12 == major_tonic:
        return "related"
    return "disagree"


def _modulation_jaccard(predicted: Sequence[int], actual: Sequence[int],
                        tolerance: int) -> float:
    if not predicted and not actual:
        return 1.0
    matched = greedy_matches(predicted, actual, tolerance)
    return matched / (len(predicted) + len(actual) - matched)


def compare_to_reference(report, reference: ReferenceAnnotation,
                         tolerance: int = BOUNDARY_TOLERANCE) -> AgreementStats:
    """Score an analysis report against a reference annotation.

    The reference must annotate boundaries and the global key; an absent
    modulations field counts as annotating none. Raises WorkMismatchError
    when the two sides identify different works and MetricError when a
    required dimension is missing.
    """
    source = getattr(report, "source", None) or {}
    work_id = source.get("work_id") if hasattr(source, "get") else None
    if work_id and reference.work_id and work_id != reference.work_id:
        raise WorkMismatchError(
            f"report describes {work_id!r} but reference describes"
            f" {reference.work_id!r}")
    if reference.boundaries is None:
        raise MetricError("reference does not annotate boundaries")
    if reference.key is None:
        raise MetricError("reference does not annotate the global key")

    predicted = segment_boundaries(report.outline)
    precision, recall, f1 = boundary_scores(predicted, reference.boundaries, tolerance)
    key = report.harmony.global_key
    tonal = tonal_agreement_class((key.tonic, key.mode), reference.key)
    jaccard = _modulation_jaccard(report.harmony.modulation_measures,
                                  reference.modulations or (), tolerance)
    return AgreementStats(
        segmentation_precision=precision,
        segmentation_recall=recall,
        segmentation_f1=f1,
        boundary_match_pct=100.0 * f1,
        tonal_agreement=tonal,
        modulation_jaccard=jaccard,
    )


def _dimension_order(dimensions: Iterable[str]) -> list[str]:
    canonical = ("structural", "harmonic", "stylistic")
    seen = set(dimensions)
    ordered = [d for d in canonical if d in seen]
    ordered.extend(sorted(seen - set(canonical)))
    return ordered


def corpus_summary(entries: Sequence[tuple[AgreementStats | None, Sequence]]) -> dict:
    """Aggregate per-work agreement into the corpus-level results table.

    Each entry pairs a work's AgreementStats (None when it had no usable
    reference) with its consistency verdicts. Returns verdict counts per
    dimension, means over the scored works, and tonal-agreement tallies.
    """
    if not entries:
        raise MetricError("corpus summary needs at least one work")
    verdict_counts: dict[str, Counter[str]] = {}
    tonal: Counter[str] = Counter({"exact": 0, "related": 0, "disagree": 0})
    f1s: list[float] = []
    pcts: list[float] = []
    for stats, verdicts in entries:
        for verdict in verdicts:
            per_dim = verdict_counts.setdefault(verdict.dimension, Counter())
            per_dim[verdict.verdict] += 1
        if stats is None:
            continue
        f1s.append(stats.segmentation_f1)
        pcts.append(stats.boundary_match_pct)
        tonal[stats.tonal_agreement] += 1
    return {
        "works": len(entries),
        "scored": len(f1s),
        "verdict_counts": {
            dim: {value: verdict_counts[dim][value] for value in VERDICT_VALUES}
            for dim in _dimension_order(verdict_counts)
        },
        "mean_segmentation_f1": sum(f1s) / len(f1s) if f1s else None,
        "mean_boundary_match_pct": sum(pcts) / len(pcts) if pcts else None,
        "tonal_counts": dict(tonal),
    }


def stats_table(rows: Sequence[tuple[str, AgreementStats | None]]) -> str:
    """Render per-work agreement as CSV for spreadsheet import.

    Columns, in order: work_id, segmentation_precision, segmentation_recall,
    segmentation_f1, boundary_match_pct, tonal_agreement, modulation_jaccard.
    Works without stats leave the metric cells empty.
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for work_id, stats in rows:
        if stats is None:
            writer.writerow([work_id] + [""] * (len(TABLE_COLUMNS) - 1))
            continue
        writer.writerow([
            work_id,
            f"{stats.segmentation_precision:.6f}",
            f"{stats.segmentation_recall:.6f}",
            f"{stats.segmentation_f1:.6f}",
            f"{stats.boundary_match_pct:.6f}",
            stats.tonal_agreement,
            f"{stats.modulation_jaccard:.6f}",
        ])
    return buffer.getvalue()
