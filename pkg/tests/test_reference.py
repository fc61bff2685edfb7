"""Reference annotation schema and key-name parsing."""

import json

import pytest

from scoreagents.errors import SchemaError
from scoreagents.harmonic import (
    MAJOR_KEY_NAMES,
    MINOR_KEY_NAMES,
    parse_key_name,
)
from scoreagents.reference import ReferenceAnnotation, parse_reference, read_reference

FULL_DOCUMENT = {
    "work_id": "bwv-846",
    "boundaries": [8, 16, 24],
    "letters": ["A", "B", "A", "C"],
    "key": "C major",
    "modulations": [16],
    "style": "Late Baroque",
}


class TestKeyNameParsing:
    def test_round_trips_every_major_key_name(self):
        for pc, name in enumerate(MAJOR_KEY_NAMES):
            assert parse_key_name(f"{name} major") == (pc, "major")

    def test_round_trips_every_minor_key_name(self):
        for pc, name in enumerate(MINOR_KEY_NAMES):
            assert parse_key_name(f"{name} minor") == (pc, "minor")

    @pytest.mark.parametrize("text,expected", [
        ("Db major", (1, "major")),
        ("C# major", (1, "major")),
        ("bb minor", (10, "minor")),
        ("  G  Minor ", None),
    ])
    def test_enharmonic_and_case_tolerance(self, text, expected):
        if expected is None:
            assert parse_key_name(text) == (7, "minor")
        else:
            assert parse_key_name(text) == expected

    @pytest.mark.parametrize("text", ["H major", "C dorian", "major", "C", ""])
    def test_rejects_nonsense(self, text):
        with pytest.raises(ValueError):
            parse_key_name(text)


class TestParseReference:
    def test_full_document(self):
        ref = parse_reference(FULL_DOCUMENT)
        assert ref == ReferenceAnnotation(
            work_id="bwv-846", boundaries=(8, 16, 24),
            letters=("A", "B", "A", "C"), key=(0, "major"),
            modulations=(16,), style="Late Baroque")

    def test_all_dimensions_optional(self):
        ref = parse_reference({"work_id": "w"})
        assert ref.boundaries is None
        assert ref.key is None
        assert ref.style is None

    def test_key_as_mapping(self):
        ref = parse_reference({"work_id": "w", "key": {"tonic": 7, "mode": "minor"}})
        assert ref.key == (7, "minor")

    @pytest.mark.parametrize("document,path_fragment", [
        ({}, "work_id"),
        ({"work_id": ""}, "work_id"),
        ({"work_id": "w", "boundaries": [8, 4]}, "boundaries"),
        ({"work_id": "w", "boundaries": [-1]}, "boundaries[0]"),
        ({"work_id": "w", "boundaries": [True]}, "boundaries[0]"),
        ({"work_id": "w", "boundaries": "8"}, "boundaries"),
        ({"work_id": "w", "boundaries": [8], "letters": ["A"]}, "letters"),
        ({"work_id": "w", "letters": ["a"]}, "letters[0]"),
        ({"work_id": "w", "key": "C dorian"}, "key"),
        ({"work_id": "w", "key": {"tonic": 12, "mode": "major"}}, "key.tonic"),
        ({"work_id": "w", "key": {"tonic": 0, "mode": "lydian"}}, "key.mode"),
        ({"work_id": "w", "key": 5}, "key"),
        ({"work_id": "w", "style": ""}, "style"),
        ({"work_id": "w", "tempo": 120}, "tempo"),
    ])
    def test_schema_violations_name_the_field(self, document, path_fragment):
        with pytest.raises(SchemaError) as err:
            parse_reference(document)
        assert path_fragment in err.value.field_path

    def test_letters_without_boundaries_allowed(self):
        ref = parse_reference({"work_id": "w", "letters": ["A", "B"]})
        assert ref.letters == ("A", "B")


class TestReadReference:
    def test_reads_json_file(self, tmp_path):
        path = tmp_path / "ref.json"
        path.write_text(json.dumps(FULL_DOCUMENT), encoding="utf-8")
        assert read_reference(path).work_id == "bwv-846"

    def test_invalid_json_raises_schema_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(SchemaError):
            read_reference(path)
