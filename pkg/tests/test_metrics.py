"""Evaluation metrics against brute-force and hand-arithmetic oracles."""

import math
import random
from collections import Counter
from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scoreagents.errors import MetricError, WorkMismatchError
from scoreagents.harmonic import KeyEstimate
from scoreagents.metrics import (
    AgreementStats,
    TABLE_COLUMNS,
    boundary_scores,
    compare_to_reference,
    corpus_summary,
    dtw_melodic_distance,
    motif_complexity,
    rhythmic_entropy,
    segment_boundaries,
    shannon_form_diversity,
    stats_table,
)
from scoreagents.model import flatten_melody
from scoreagents.reference import ReferenceAnnotation
from scoreagents.structural import FormOutline, Segment

from conftest import make_score, note


# ---------------------------------------------------------------- builders

def melody_score(midis, ioi=Fraction(1)):
    """Monophonic legato line with a constant inter-onset interval."""
    ioi = Fraction(ioi)
    events = [note(i * ioi, ioi, m) for i, m in enumerate(midis)]
    span = len(midis) * ioi
    total = Fraction(math.ceil(span / 4) * 4)
    return make_score([events], total_beats=max(total, 4))


def rhythm_score(iois):
    """Single-pitch line whose successive onsets are separated by ``iois``."""
    onsets = [Fraction(0)]
    for gap in iois:
        onsets.append(onsets[-1] + Fraction(gap))
    events = []
    for i, onset in enumerate(onsets):
        gap = onsets[i + 1] - onset if i + 1 < len(onsets) else Fraction(1)
        events.append(note(onset, gap, 72))
    span = onsets[-1] + 1
    return make_score([events], total_beats=Fraction(math.ceil(span / 4) * 4))


def outline_of(*sections):
    """Build a FormOutline from (letter, measure_count) pairs."""
    segments = []
    start = 0
    for letter, count in sections:
        segments.append(Segment(start, start + count - 1, letter, "section", 1.0))
        start += count
    return FormOutline(tuple(segments), "".join(s[0] for s in sections))


def report_stub(boundaries, key=(0, "major"), modulations=(), work_id="w1",
                measures=32):
    """The minimal report shape compare_to_reference reads."""
    sections = [("A", b - a) for a, b in
                zip((0,) + tuple(boundaries), tuple(boundaries) + (measures,))]
    return SimpleNamespace(
        source={"work_id": work_id},
        outline=outline_of(*sections),
        harmony=SimpleNamespace(
            global_key=KeyEstimate(key[0], key[1], 0.9),
            modulation_measures=list(modulations),
        ),
    )


def reference_of(boundaries=(), key=(0, "major"), modulations=(), work_id="w1"):
    return ReferenceAnnotation(work_id=work_id, boundaries=tuple(boundaries),
                               key=key, modulations=tuple(modulations))


# ------------------------------------------------------------------ oracles

def dtw_oracle(xs, ys):
    """Minimum of path cost over path length across every monotone alignment."""
    best = [None]

    def walk(i, j, cost, length):
        cost += abs(xs[i] - ys[j])
        length += 1
        if i == len(xs) - 1 and j == len(ys) - 1:
            ratio = Fraction(cost, length)
            if best[0] is None or ratio < best[0]:
                best[0] = ratio
            return
        if i + 1 < len(xs):
            walk(i + 1, j, cost, length)
        if j + 1 < len(ys):
            walk(i, j + 1, cost, length)
        if i + 1 < len(xs) and j + 1 < len(ys):
            walk(i + 1, j + 1, cost, length)

    walk(0, 0, 0, 0)
    return best[0]


def intervals_of(midis):
    return [b - a for a, b in zip(midis, midis[1:])]


def motif_oracle(intervals, min_len=3, max_len=6, min_occurrences=3):
    """Closed recurrent n-grams by explicit enumeration."""
    counts = Counter()
    for n in range(min_len, max_len + 1):
        for i in range(len(intervals) - n + 1):
            counts[tuple(intervals[i:i + n])] += 1
    recurrent = {g: c for g, c in counts.items() if c >= min_occurrences}
    kept = []
    for gram, occ in recurrent.items():
        closed = True
        for other, other_occ in recurrent.items():
            if len(other) <= len(gram) or other_occ != occ:
                continue
            windows = [other[k:k + len(gram)] for k in range(len(other) - len(gram) + 1)]
            if gram in windows:
                closed = False
                break
        if closed:
            kept.append(gram)
    return len(kept)


def quantized_categories(iois):
    return [min(round(Fraction(ioi) * 4), 32) for ioi in iois]


# ---------------------------------------------------------------- DTW

class TestMelodicDistance:
    def test_identity_is_zero(self):
        melody = flatten_melody(melody_score([60, 62, 64, 65, 67]))
        assert dtw_melodic_distance(melody, melody) == 0.0

    def test_transposition_is_zero(self):
        a = flatten_melody(melody_score([60, 62, 64, 65, 67]))
        b = flatten_melody(melody_score([65, 67, 69, 70, 72]))
        assert dtw_melodic_distance(a, b) == 0.0

    def test_interval_series_two_two_vs_two_three(self):
        # intervals [2,2] vs [2,3]: cheapest ratio path costs 1 over length 3
        a = [60, 62, 64]
        b = [60, 62, 65]
        assert dtw_melodic_distance(a, b) == pytest.approx(1 / 3, abs=1e-12)
        assert dtw_oracle(intervals_of(a), intervals_of(b)) == Fraction(1, 3)

    def test_matches_exhaustive_path_enumeration(self):
        rng = random.Random(41)
        for _ in range(40):
            a = [rng.randrange(55, 72) for _ in range(rng.randrange(2, 6))]
            b = [rng.randrange(55, 72) for _ in range(rng.randrange(2, 6))]
            expected = dtw_oracle(intervals_of(a), intervals_of(b))
            assert dtw_melodic_distance(a, b) == pytest.approx(float(expected),
                                                               abs=1e-12)

    def test_symmetric(self):
        rng = random.Random(17)
        for _ in range(25):
            a = [rng.randrange(50, 80) for _ in range(rng.randrange(2, 7))]
            b = [rng.randrange(50, 80) for _ in range(rng.randrange(2, 7))]
            assert dtw_melodic_distance(a, b) == dtw_melodic_distance(b, a)

    def test_never_exceeds_max_single_step_cost(self):
        rng = random.Random(99)
        for _ in range(25):
            a = [rng.randrange(40, 90) for _ in range(rng.randrange(2, 7))]
            b = [rng.randrange(40, 90) for _ in range(rng.randrange(2, 7))]
            xs, ys = intervals_of(a), intervals_of(b)
            ceiling = max(abs(x - y) for x in xs for y in ys)
            assert dtw_melodic_distance(a, b) <= ceiling + 1e-12

    def test_accepts_notes_and_bare_midi_numbers(self):
        score = melody_score([60, 64, 67])
        assert dtw_melodic_distance(flatten_melody(score), [60, 64, 67]) == 0.0

    @pytest.mark.parametrize("a,b", [([60], [60, 62]), ([], [60, 62]),
                                     ([60, 62], [64])])
    def test_short_melody_raises(self, a, b):
        with pytest.raises(MetricError):
            dtw_melodic_distance(a, b)


# ---------------------------------------------------------------- entropy

class TestRhythmicEntropy:
    def test_isochronous_is_zero(self):
        assert rhythmic_entropy(rhythm_score([1] * 8)) == 0.0

    def test_four_equal_categories_two_bits(self):
        assert rhythmic_entropy(rhythm_score([1, 2, 3, 4] * 2)) == pytest.approx(2.0)

    def test_eight_four_two_two_gives_1_75_bits(self):
        iois = [1] * 8 + [2] * 4 + [3] * 2 + [4] * 2
        by_hand = -(8 / 16 * math.log2(8 / 16) + 4 / 16 * math.log2(4 / 16)
                    + 2 * (2 / 16) * math.log2(2 / 16))
        assert by_hand == pytest.approx(1.75)
        assert rhythmic_entropy(rhythm_score(iois)) == pytest.approx(1.75)

    def test_quantization_merges_nearby_iois(self):
        # 0.2, 0.3 and 0.25 beats all land on the quarter-beat category
        score = rhythm_score([Fraction(1, 5), Fraction(3, 10), Fraction(1, 4)])
        assert rhythmic_entropy(score) == 0.0

    def test_quantization_separates_distinct_grid_points(self):
        score = rhythm_score([Fraction(1, 8), Fraction(1, 4)] * 2)
        assert rhythmic_entropy(score) == pytest.approx(1.0)

    def test_half_grid_ties_round_to_even(self):
        # 3/8 beat rounds up to the 1/2-beat category, merging with true halves
        score = rhythm_score([Fraction(3, 8), Fraction(1, 2)] * 2)
        assert rhythmic_entropy(score) == 0.0

    def test_cap_merges_long_gaps(self):
        assert rhythmic_entropy(rhythm_score([9, 20, 12])) == 0.0
        assert rhythmic_entropy(rhythm_score([1, 9, 1, 20])) == pytest.approx(1.0)

    def test_bounded_by_log2_of_occupied_categories(self):
        rng = random.Random(7)
        choices = [Fraction(1, 4), Fraction(1, 2), 1, Fraction(3, 2), 2, 3, 9]
        for _ in range(30):
            iois = [rng.choice(choices) for _ in range(rng.randrange(2, 12))]
            occupied = len(set(quantized_categories(iois)))
            h = rhythmic_entropy(rhythm_score(iois))
            assert h <= math.log2(occupied) + 1e-12
            counts = Counter(quantized_categories(iois)).values()
            if len(set(counts)) == 1:
                assert h == pytest.approx(math.log2(occupied))

    def test_fewer_than_two_onsets_raises(self):
        with pytest.raises(MetricError):
            rhythmic_entropy(rhythm_score([]))
        with pytest.raises(MetricError):
            rhythmic_entropy(make_score([[]], total_beats=4))

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            rhythmic_entropy(rhythm_score([1, 1]), grid=Fraction(0))


# ------------------------------------------------------------- diversity

class TestFormDiversity:
    def test_single_letter_outline_is_zero(self):
        assert shannon_form_diversity(outline_of(("A", 8))) == 0.0
        assert shannon_form_diversity(outline_of(("A", 4), ("A", 4))) == 0.0

    def test_two_equal_letters_is_ln2(self):
        outline = outline_of(("A", 8), ("B", 8))
        assert shannon_form_diversity(outline) == pytest.approx(math.log(2))

    def test_ababcb_equal_segments(self):
        outline = outline_of(("A", 4), ("B", 4), ("A", 4), ("B", 4), ("C", 4),
                             ("B", 4))
        by_hand = -(2 / 6 * math.log(2 / 6) + 3 / 6 * math.log(3 / 6)
                    + 1 / 6 * math.log(1 / 6))
        assert by_hand == pytest.approx(1.0114, abs=1e-4)
        assert shannon_form_diversity(outline) == pytest.approx(by_hand)

    def test_weighting_by_measure_length(self):
        outline = outline_of(("A", 2), ("B", 6))
        by_hand = -(0.25 * math.log(0.25) + 0.75 * math.log(0.75))
        assert shannon_form_diversity(outline) == pytest.approx(by_hand)

    def test_repeated_letters_aggregate(self):
        outline = outline_of(("A", 4), ("B", 4), ("A", 4))
        by_hand = -(2 / 3 * math.log(2 / 3) + 1 / 3 * math.log(1 / 3))
        assert shannon_form_diversity(outline) == pytest.approx(by_hand)

    def test_bounded_by_ln_distinct_letters(self):
        rng = random.Random(3)
        for _ in range(30):
            sections = [(rng.choice("ABCD"), rng.randrange(1, 9))
                        for _ in range(rng.randrange(1, 8))]
            outline = outline_of(*sections)
            distinct = len({s[0] for s in sections})
            assert shannon_form_diversity(outline) <= math.log(distinct) + 1e-12

    def test_empty_outline_raises(self):
        with pytest.raises(MetricError):
            shannon_form_diversity(FormOutline((), ""))


# ---------------------------------------------------------------- motifs

def midis_from_intervals(intervals, start=60):
    midis = [start]
    for step in intervals:
        midis.append(midis[-1] + step)
    return midis


class TestMotifComplexity:
    def test_constant_pitch_twenty_notes(self):
        # all-zero n-grams of lengths 3..6 occur 17/16/15/14 times; distinct
        # counts mean none absorbs another, so all four survive
        score = melody_score([60] * 20)
        assert motif_oracle([0] * 19) == 4
        assert motif_complexity(score) == 4

    def test_motif_stated_three_times_with_connectives(self):
        midis = ([60, 62, 61, 64, 65] + [50]
                 + [60, 62, 61, 64, 65] + [80]
                 + [60, 62, 61, 64, 65])
        score = melody_score(midis)
        assert motif_oracle(intervals_of(midis)) == 1
        assert motif_complexity(score) == 1

    def test_no_repeats_is_zero(self):
        midis = midis_from_intervals([1, 2, 3, 4, 5, 6, 7], start=40)
        assert motif_complexity(melody_score(midis)) == 0

    def test_too_short_melody_is_zero_not_error(self):
        assert motif_complexity(melody_score([60, 62, 64])) == 0
        assert motif_complexity(make_score([[]], total_beats=4)) == 0

    def test_same_count_subpattern_absorbed(self):
        # (1,1,1) occurs 3 times; every longer gram occurs at most twice
        midis = midis_from_intervals([1, 1, 1, 2, 1, 1, 1, 2, 1, 1, 1])
        assert motif_complexity(melody_score(midis)) == 1

    def test_different_count_subpattern_survives(self):
        # (1,2,3) occurs 4 times, its 4-interval container only 3
        intervals = [1, 2, 3, 4, 9, 1, 2, 3, 4, 9, 1, 2, 3, 4, 9, 1, 2, 3, 8]
        midis = midis_from_intervals(intervals, start=30)
        score = melody_score(midis)
        assert motif_complexity(score) == motif_oracle(intervals)
        assert motif_complexity(score, min_occurrences=4) == 1

    def test_max_len_limits_the_window(self):
        score = melody_score([60] * 11)  # constant: lengths 3..6 occur 8/7/6/5
        assert motif_complexity(score) == 4
        assert motif_complexity(score, max_len=4) == 2

    def test_threshold_above_max_occurrences_is_zero(self):
        assert motif_complexity(melody_score([60] * 20), min_occurrences=18) == 0

    def test_matches_enumeration_oracle(self):
        rng = random.Random(23)
        for _ in range(30):
            intervals = [rng.choice([-2, 0, 2]) for _ in range(rng.randrange(8, 18))]
            score = melody_score(midis_from_intervals(intervals))
            assert motif_complexity(score) == motif_oracle(intervals)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.sampled_from([-2, 0, 2, 5]), min_size=8, max_size=16))
    def test_monotone_in_min_occurrences(self, intervals):
        score = melody_score(midis_from_intervals(intervals))
        counts = [motif_complexity(score, min_occurrences=k) for k in (2, 3, 4)]
        assert counts[0] >= counts[1] >= counts[2]

    def test_invalid_parameters_rejected(self):
        score = melody_score([60] * 8)
        with pytest.raises(ValueError):
            motif_complexity(score, min_len=0)
        with pytest.raises(ValueError):
            motif_complexity(score, min_len=4, max_len=3)
        with pytest.raises(ValueError):
            motif_complexity(score, min_occurrences=0)


# ------------------------------------------------------------- agreement

class TestBoundaryScores:
    def test_exact_match(self):
        assert boundary_scores([8, 16, 24], [8, 16, 24]) == (1.0, 1.0, 1.0)

    def test_both_empty_is_perfect(self):
        assert boundary_scores([], []) == (1.0, 1.0, 1.0)

    def test_empty_prediction_misses_everything(self):
        precision, recall, f1 = boundary_scores([], [8])
        assert (precision, recall, f1) == (1.0, 0.0, 0.0)

    def test_tolerance_window(self):
        assert boundary_scores([9], [8])[2] == 1.0
        assert boundary_scores([10], [8])[2] == 0.0

    def test_one_to_one_pairing(self):
        precision, recall, _ = boundary_scores([8, 9], [8])
        assert (precision, recall) == (0.5, 1.0)

    def test_greedy_takes_exact_hits_first(self):
        # matching 8 to 8 blocks the two-pair assignment (7-8, 8-9); the
        # pairing is deliberately greedy, not optimal
        precision, recall, _ = boundary_scores([7, 8], [8, 9])
        assert (precision, recall) == (0.5, 0.5)


class TestCompareToReference:
    def test_report_equal_to_reference_is_perfect(self):
        report = report_stub([8, 16, 24], modulations=[16])
        ref = reference_of([8, 16, 24], modulations=[16])
        stats = compare_to_reference(report, ref)
        assert stats.segmentation_precision == 1.0
        assert stats.segmentation_recall == 1.0
        assert stats.segmentation_f1 == 1.0
        assert stats.boundary_match_pct == 100.0
        assert stats.tonal_agreement == "exact"
        assert stats.modulation_jaccard == 1.0

    def test_missing_one_of_four_boundaries(self):
        report = report_stub([8, 16, 24])
        ref = reference_of([4, 8, 16, 24])
        stats = compare_to_reference(report, ref)
        assert stats.segmentation_precision == 1.0
        assert stats.segmentation_recall == pytest.approx(0.75)
        assert stats.segmentation_f1 == pytest.approx(6 / 7)
        assert stats.boundary_match_pct == pytest.approx(600 / 7)

    @pytest.mark.parametrize("found,expected,verdict", [
        ((0, "major"), (0, "major"), "exact"),
        ((9, "minor"), (9, "minor"), "exact"),
        ((0, "major"), (9, "minor"), "related"),   # relative
        ((9, "minor"), (0, "major"), "related"),
        ((0, "major"), (0, "minor"), "related"),   # parallel
        ((0, "major"), (7, "major"), "related"),   # dominant
        ((0, "major"), (5, "major"), "related"),   # subdominant
        ((6, "minor"), (9, "major"), "related"),   # F# minor vs A major
        ((9, "minor"), (4, "minor"), "related"),   # minor fifth-adjacent
        ((0, "major"), (2, "major"), "disagree"),
        ((0, "major"), (3, "major"), "disagree"),
        ((7, "major"), (9, "minor"), "disagree"),  # not A minor's relative
    ])
    def test_tonal_agreement_classes(self, found, expected, verdict):
        report = report_stub([8], key=found)
        ref = reference_of([8], key=expected)
        assert compare_to_reference(report, ref).tonal_agreement == verdict

    @pytest.mark.parametrize("found,annotated,expected", [
        ([], [], 1.0),
        ([8], [], 0.0),
        ([], [8], 0.0),
        ([8], [8], 1.0),
        ([8], [9], 1.0),
        ([8, 20], [9], 0.5),
    ])
    def test_modulation_jaccard(self, found, annotated, expected):
        report = report_stub([8], modulations=found)
        ref = reference_of([8], modulations=annotated)
        assert compare_to_reference(report, ref).modulation_jaccard == \
            pytest.approx(expected)

    def test_unannotated_modulations_count_as_none(self):
        report = report_stub([8], modulations=[])
        ref = ReferenceAnnotation(work_id="w1", boundaries=(8,), key=(0, "major"))
        assert compare_to_reference(report, ref).modulation_jaccard == 1.0

    def test_work_mismatch_raises(self):
        with pytest.raises(WorkMismatchError):
            compare_to_reference(report_stub([8], work_id="a"),
                                 reference_of([8], work_id="b"))

    def test_missing_required_dimension_raises(self):
        report = report_stub([8])
        with pytest.raises(MetricError):
            compare_to_reference(report, ReferenceAnnotation(
                work_id="w1", key=(0, "major")))
        with pytest.raises(MetricError):
            compare_to_reference(report, ReferenceAnnotation(
                work_id="w1", boundaries=(8,)))

    def test_real_analysis_against_itself_is_perfect(self):
        from scoreagents.harmonic import analyze_harmony
        from scoreagents.structural import analyze_structure
        from conftest import make_xxyx_score

        score = make_xxyx_score()
        outline = analyze_structure(score)
        harmony = analyze_harmony(score)
        report = SimpleNamespace(source={"work_id": "self"}, outline=outline,
                                 harmony=harmony)
        ref = ReferenceAnnotation(
            work_id="self",
            boundaries=tuple(segment_boundaries(outline)),
            key=(harmony.global_key.tonic, harmony.global_key.mode),
            modulations=tuple(harmony.modulation_measures),
        )
        stats = compare_to_reference(report, ref)
        assert stats.segmentation_f1 == 1.0
        assert stats.tonal_agreement == "exact"
        assert stats.modulation_jaccard == 1.0


def verdict(dimension, value):
    return SimpleNamespace(dimension=dimension, verdict=value)


def full_stats(f1=1.0, tonal="exact", jaccard=1.0):
    return AgreementStats(
        segmentation_precision=f1, segmentation_recall=f1, segmentation_f1=f1,
        boundary_match_pct=100 * f1, tonal_agreement=tonal,
        modulation_jaccard=jaccard)


class TestCorpusSummary:
    def test_all_consistent(self):
        entries = [(full_stats(), [verdict("structural", "Consistent"),
                                   verdict("harmonic", "Consistent"),
                                   verdict("stylistic", "Consistent")])
                   for _ in range(3)]
        summary = corpus_summary(entries)
        assert summary["works"] == 3
        for dim in ("structural", "harmonic", "stylistic"):
            assert summary["verdict_counts"][dim] == {
                "Consistent": 3, "MinorError": 0, "Hallucination": 0}
        assert summary["mean_segmentation_f1"] == 1.0
        assert summary["tonal_counts"] == {"exact": 3, "related": 0, "disagree": 0}

    def test_mixture_matches_hand_tallies(self):
        entries = [
            (full_stats(1.0, "exact"), [verdict("structural", "Consistent"),
                                        verdict("harmonic", "Consistent")]),
            (full_stats(6 / 7, "related"), [verdict("structural", "MinorError"),
                                            verdict("harmonic", "Consistent")]),
            (full_stats(0.5, "disagree"), [verdict("structural", "Hallucination"),
                                           verdict("harmonic", "MinorError")]),
            (None, [verdict("structural", "Consistent")]),
            (full_stats(1.0, "exact"), [verdict("harmonic", "Hallucination")]),
        ]
        summary = corpus_summary(entries)
        assert summary["works"] == 5
        assert summary["scored"] == 4
        assert summary["verdict_counts"]["structural"] == {
            "Consistent": 2, "MinorError": 1, "Hallucination": 1}
        assert summary["verdict_counts"]["harmonic"] == {
            "Consistent": 2, "MinorError": 1, "Hallucination": 1}
        assert summary["mean_segmentation_f1"] == \
            pytest.approx((1.0 + 6 / 7 + 0.5 + 1.0) / 4)
        assert summary["mean_boundary_match_pct"] == \
            pytest.approx(100 * (1.0 + 6 / 7 + 0.5 + 1.0) / 4)
        assert summary["tonal_counts"] == {"exact": 2, "related": 1, "disagree": 1}

    def test_no_scored_works_leaves_means_undefined(self):
        summary = corpus_summary([(None, [verdict("structural", "Consistent")])])
        assert summary["scored"] == 0
        assert summary["mean_segmentation_f1"] is None
        assert summary["mean_boundary_match_pct"] is None

    def test_dimensions_ordered_canonically(self):
        entries = [(None, [verdict("stylistic", "Consistent"),
                           verdict("harmonic", "Consistent"),
                           verdict("structural", "Consistent")])]
        dims = list(corpus_summary(entries)["verdict_counts"])
        assert dims == ["structural", "harmonic", "stylistic"]

    def test_empty_input_raises(self):
        with pytest.raises(MetricError):
            corpus_summary([])


class TestStatsTable:
    def test_column_order_and_formatting(self):
        text = stats_table([("w1", full_stats(6 / 7, "related", 0.5))])
        lines = text.splitlines()
        assert lines[0] == ",".join(TABLE_COLUMNS)
        cells = lines[1].split(",")
        assert cells[0] == "w1"
        assert cells[3] == f"{6 / 7:.6f}"
        assert cells[5] == "related"
        assert cells[6] == "0.500000"

    def test_missing_stats_leave_empty_cells(self):
        lines = stats_table([("w2", None)]).splitlines()
        assert lines[1] == "w2" + "," * (len(TABLE_COLUMNS) - 1)
