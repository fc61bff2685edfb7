"""Format detection, the three parsers, and the annotated-MusicXML writer."""

import zipfile
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from scoreagents.errors import ParseError, UnsupportedFormatError
from scoreagents.ingest import (
    SourceFormat,
    detect_format,
    load_path,
    parse_bytes,
    parse_kern,
    parse_midi,
    parse_musicxml,
    write_annotated_musicxml,
)
from scoreagents.ingest.kern import kern_pitch, recip_duration
from scoreagents.model import validate
from tests.conftest import make_score, note, rest

GOLDEN = Path(__file__).parent / "fixtures" / "golden"


def read(name: str) -> bytes:
    return (GOLDEN / name).read_bytes()


def pitched(score, part_index):
    return [
        (e.onset, e.duration, e.midi)
        for e in score.parts[part_index].events
        if e.is_pitched
    ]


class TestDetectFormat:
    def test_midi_by_header_chunk(self):
        assert detect_format(read("cross.mid")) is SourceFormat.MIDI

    def test_musicxml_by_root_element(self):
        assert detect_format(read("cross.musicxml")) is SourceFormat.MUSICXML
        assert detect_format(read("timewise.musicxml")) is SourceFormat.MUSICXML

    def test_compressed_container_unwraps(self):
        assert detect_format(read("cross.mxl")) is SourceFormat.MUSICXML

    def test_kern_by_spine_header(self):
        assert detect_format(read("cross.krn")) is SourceFormat.KERN
        assert detect_format(b"!! comment\n**kern\n4c\n*-") is SourceFormat.KERN

    def test_rejects_unknown_and_empty(self):
        with pytest.raises(UnsupportedFormatError):
            detect_format(b"")
        with pytest.raises(UnsupportedFormatError):
            detect_format(b"hello world")
        with pytest.raises(UnsupportedFormatError):
            detect_format(b"<html><body/></html>")

    @given(st.binary(min_size=0, max_size=64))
    @settings(max_examples=200)
    def test_arbitrary_bytes_never_crash(self, data):
        try:
            parse_bytes(data)
        except (ParseError, UnsupportedFormatError):
            pass


class TestParseMusicXML:
    def test_minimal_single_note(self):
        score, diags = parse_musicxml(read("minimal.musicxml"))
        assert pitched(score, 0) == [(Fraction(0), Fraction(4), 60)]
        assert score.measure_count == 1
        assert validate(score) == []

    def test_tied_halves_merge_to_one_event(self):
        xml = read("minimal.musicxml").decode()
        tied = xml.replace(
            "<note><pitch><step>C</step><octave>4</octave></pitch>"
            "<duration>4</duration><voice>1</voice></note>",
            "<note><pitch><step>C</step><octave>4</octave></pitch>"
            '<duration>2</duration><tie type="start"/><voice>1</voice></note>'
            "<note><pitch><step>C</step><octave>4</octave></pitch>"
            '<duration>2</duration><tie type="stop"/><voice>1</voice></note>',
        )
        score, _ = parse_musicxml(tied.encode())
        assert pitched(score, 0) == [(Fraction(0), Fraction(4), 60)]

    def test_feature_coverage(self):
        score, diags = parse_musicxml(read("features.musicxml"))
        assert score.metadata["pickup"] is True
        assert score.metadata["composer"] == "Trad."
        assert [m.start_beat for m in score.measures] == [0, 1, 4]
        assert score.measures[0].notated_key == 1
        assert score.measures[0].time_signature == (3, 4)

        events = score.parts[0].events
        graces = [e for e in events if e.grace]
        assert len(graces) == 1 and graces[0].duration == 0 and graces[0].midi == 69
        chord_notes = [
            e for e in events if e.onset == 1 and e.duration == 2 and e.is_pitched and e.voice == 1
        ]
        assert sorted(e.midi for e in chord_notes) == [67, 71]
        sharp = [e for e in events if e.midi == 66]
        assert len(sharp) == 1 and sharp[0].onset == Fraction(3)
        bass = [e for e in events if e.voice == 2]
        assert [(e.onset, e.duration) for e in bass if e.is_pitched] == [(Fraction(1), Fraction(2))]
        assert any(not e.is_pitched for e in bass)
        assert diags.skipped_elements["direction"] == 1
        assert validate(score) == []

    def test_timewise_layout(self):
        score, _ = parse_musicxml(read("timewise.musicxml"))
        assert len(score.parts) == 2
        assert pitched(score, 0) == [(Fraction(0), Fraction(2), 76), (Fraction(2), Fraction(2), 74)]
        assert pitched(score, 1) == [(Fraction(0), Fraction(2), 48), (Fraction(2), Fraction(2), 43)]
        assert score.measures[0].time_signature == (2, 4)

    def test_empty_part_list_rejected(self):
        xml = b'<?xml version="1.0"?><score-partwise><part-list/></score-partwise>'
        with pytest.raises(ParseError, match="part-list"):
            parse_musicxml(xml)

    def test_malformed_xml_reports_position(self):
        with pytest.raises(ParseError) as exc:
            parse_musicxml(b"<score-partwise><unclosed></score-partwise>")
        assert exc.value.line is not None

    def test_note_before_divisions_rejected(self):
        xml = (
            b'<?xml version="1.0"?><score-partwise>'
            b'<part-list><score-part id="P1"><part-name>X</part-name></score-part></part-list>'
            b'<part id="P1"><measure number="1">'
            b"<note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note>"
            b"</measure></part></score-partwise>"
        )
        with pytest.raises(ParseError, match="divisions"):
            parse_musicxml(xml)


class TestParseMidi:
    def test_single_note(self):
        score, _ = parse_midi(read("single_note.mid"))
        assert pitched(score, 0) == [(Fraction(0), Fraction(1), 60)]
        assert score.measures[0].time_signature == (4, 4)

    def test_running_status_and_velocity_zero_offs(self):
        score, diags = parse_midi(read("running_status.mid"))
        assert pitched(score, 0) == [
            (Fraction(0), Fraction(1), 60),
            (Fraction(1), Fraction(1), 64),
            (Fraction(2), Fraction(1), 67),  # dangling, closed at track end
        ]
        assert any("dangling" in msg for _loc, msg in diags.warnings)
        assert any("4/4" in msg for _loc, msg in diags.warnings)

    def test_format2_rejected(self):
        with pytest.raises(UnsupportedFormatError, match="format 2"):
            parse_midi(read("format2.mid"))

    def test_smpte_division_rejected(self):
        with pytest.raises(UnsupportedFormatError, match="SMPTE"):
            parse_midi(read("smpte.mid"))

    def test_truncated_chunk_rejected(self):
        with pytest.raises(ParseError, match="truncated"):
            parse_midi(read("truncated.mid"))

    def test_tempo_independent_beats(self):
        # same notes with an inserted tempo event parse identically
        from tools.gen_fixtures import header, on, off, time_signature, track

        tempo = bytes((0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20))
        with_tempo = header(0, 1, 480) + track(
            [(0, time_signature(4, 2)), (0, tempo), (0, on(60)), (480, off(60))]
        )
        score, _ = parse_midi(with_tempo)
        assert pitched(score, 0) == [(Fraction(0), Fraction(1), 60)]


class TestParseKern:
    def test_minimal_whole_note(self):
        score, _ = parse_kern(read("minimal.krn").decode())
        assert pitched(score, 0) == [(Fraction(0), Fraction(4), 60)]

    @pytest.mark.parametrize(
        "token,midi",
        [("c", 60), ("cc", 72), ("C", 48), ("CC", 36), ("b", 71), ("B", 59),
         ("c#", 61), ("e-", 63), ("g##", 69), ("a--", 67)],
    )
    def test_pitch_semantics(self, token, midi):
        assert kern_pitch(token).midi == midi

    @pytest.mark.parametrize(
        "token,beats",
        [("4", Fraction(1)), ("2", Fraction(2)), ("1", Fraction(4)), ("8", Fraction(1, 2)),
         ("2.", Fraction(3)), ("4..", Fraction(7, 4)), ("12", Fraction(1, 3)),
         ("0", Fraction(8)), ("16", Fraction(1, 4))],
    )
    def test_recip_durations(self, token, beats):
        assert recip_duration(token) == beats

    def test_feature_coverage(self):
        score, _ = parse_kern(read("features.krn").decode())
        assert score.metadata["pickup"] is True
        assert [m.start_beat for m in score.measures] == [0, 1, 4]
        assert score.measures[0].time_signature == (3, 4)
        assert score.measures[0].notated_key == 1

        events = score.parts[0].events
        graces = [e for e in events if e.grace]
        assert len(graces) == 1 and graces[0].midi == 72
        chord = [e for e in events if e.onset == 1 and e.is_pitched and not e.grace]
        assert sorted(e.midi for e in chord) == [67, 71]
        assert all(e.duration == 3 for e in chord)
        assert [e.midi for e in events if e.onset == 4] == [68]
        rests = [e for e in events if not e.is_pitched]
        assert [(e.onset, e.duration) for e in rests] == [(Fraction(9, 2), Fraction(1, 2))]
        assert validate(score) == []

    def test_tie_merges_across_barline(self):
        text = "**kern\n*M4/4\n=1\n[1c\n=2\n2c]\n2d\n==\n*-\n"
        score, _ = parse_kern(text)
        assert pitched(score, 0) == [
            (Fraction(0), Fraction(6), 60),
            (Fraction(6), Fraction(2), 62),
        ]

    def test_spine_count_mismatch_reports_line(self):
        text = "**kern\t**kern\n*M4/4\t*M4/4\n4c\n*-\t*-\n"
        with pytest.raises(ParseError) as exc:
            parse_kern(text)
        assert exc.value.line == 3

    def test_spine_split_and_join(self):
        text = (
            "**kern\n*M4/4\n=1\n*^\n2c\t2e\n*v\t*v\n2g\n==\n*-\n"
        )
        score, _ = parse_kern(text)
        assert len(score.parts) == 1
        assert sorted(pitched(score, 0)) == [
            (Fraction(0), Fraction(2), 60),
            (Fraction(0), Fraction(2), 64),
            (Fraction(2), Fraction(2), 67),
        ]

    def test_non_kern_spines_skipped(self):
        text = "**kern\t**dynam\n*M4/4\t*\n=1\t=1\n4c\tf\n==\t==\n*-\t*-\n"
        score, diags = parse_kern(text)
        assert len(score.parts) == 1
        assert pitched(score, 0) == [(Fraction(0), Fraction(1), 60)]
        assert diags.skipped_elements["spine:**dynam"] == 1


class TestCrossFormat:
    """One hand-built piece encoded three ways parses identically."""

    def fingerprint(self, score):
        return [pitched(score, i) for i in range(len(score.parts))], [
            (m.start_beat, m.time_signature) for m in score.measures
        ]

    def test_all_three_encodings_agree(self):
        xml_score, _ = parse_musicxml(read("cross.musicxml"))
        kern_score, _ = parse_kern(read("cross.krn").decode())
        midi_score, _ = parse_midi(read("cross.mid"))
        mxl_score, _ = parse_musicxml(read("cross.mxl"))

        reference = self.fingerprint(xml_score)
        assert self.fingerprint(kern_score) == reference
        assert self.fingerprint(midi_score) == reference
        assert self.fingerprint(mxl_score) == reference
        for s in (xml_score, kern_score, midi_score):
            assert validate(s) == []
            assert s.total_beats == 8

    def test_load_path_dispatches(self, tmp_path):
        for name in ("cross.musicxml", "cross.krn", "cross.mid"):
            score, _ = load_path(GOLDEN / name)
            assert score.metadata["source_path"].endswith(name)
            assert score.total_beats == 8


class TestWriteMusicXML:
    @pytest.mark.parametrize("name", ["cross.musicxml", "features.musicxml", "minimal.musicxml"])
    def test_round_trip_preserves_events_and_measures(self, name):
        original, _ = parse_musicxml(read(name))
        rewritten = write_annotated_musicxml(original, None)
        back, diags = parse_musicxml(rewritten)
        for pi in range(len(original.parts)):
            assert sorted(pitched(back, pi)) == sorted(pitched(original, pi))
            orig_all = [(e.onset, e.duration, e.midi, e.grace) for e in original.parts[pi].events]
            back_all = [(e.onset, e.duration, e.midi, e.grace) for e in back.parts[pi].events]
            assert sorted(back_all, key=repr) == sorted(orig_all, key=repr)
        assert [(m.start_beat, m.time_signature, m.notated_key) for m in back.measures] == [
            (m.start_beat, m.time_signature, m.notated_key) for m in original.measures
        ]
        assert back.total_beats == original.total_beats

    def test_round_trip_from_kern_and_midi(self):
        for loader, name in ((parse_kern, "features.krn"), (parse_midi, "cross.mid")):
            raw = read(name)
            original, _ = loader(raw.decode() if name.endswith("krn") else raw)
            back, _ = parse_musicxml(write_annotated_musicxml(original, None))
            for pi in range(len(original.parts)):
                assert sorted(pitched(back, pi)) == sorted(pitched(original, pi))

    def test_event_spanning_barline_splits_and_ties(self):
        events = [note(0, 1, 60), note(1, 6, 64), note(7, 1, 60)]
        s = make_score([events], total_beats=8)
        doc = write_annotated_musicxml(s, None)
        assert doc.count(b"<tie ") == 2
        back, _ = parse_musicxml(doc)
        assert pitched(back, 0) == pitched(s, 0)

    def test_document_declares_partwise_dtd(self):
        s = make_score([[note(0, 4, 60)]], total_beats=4)
        doc = write_annotated_musicxml(s, None)
        assert doc.startswith(b"<?xml")
        assert b"score-partwise" in doc
