"""Standard MIDI File reader (formats 0 and 1).

Beat positions come straight from delta ticks and the header division;
tempo meta events are irrelevant to metric time and are skipped.
"""

from __future__ import annotations

import struct
from fractions import Fraction

from ..errors import ParseError, UnsupportedFormatError
from ..model import pitch_from_midi
from .base import ParseDiagnostics, RawNote, assemble_score, grid_measures

_NOTE_OFF = 0x80
_NOTE_ON = 0x90
_META = 0xFF
_SYSEX = (0xF0, 0xF7)
_PARAM_BYTES = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


class _Reader:
    def __init__(self, data: bytes, offset: int, end: int):
        self.data = data
        self.pos = offset
        self.end = end

    def u8(self) -> int:
        if self.pos >= self.end:
            raise ParseError("truncated chunk: byte expected")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise ParseError(f"truncated chunk: {n} bytes expected")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            b = self.u8()
            value = (value << 7) | (b & 0x7F)
            if not b & 0x80:
                return value
        raise ParseError("variable-length quantity longer than 4 bytes")

    @property
    def exhausted(self) -> bool:
        return self.pos >= self.end


def parse_midi(data: bytes) -> tuple:
    """Parse SMF bytes into (Score, ParseDiagnostics)."""
    if len(data) < 14 or data[:4] != b"MThd":
        raise ParseError("missing MThd header")
    header_len, fmt, ntrks, division = struct.unpack(">IHHH", data[4:14])
    if header_len < 6:
        raise ParseError(f"header length {header_len} < 6")
    if fmt == 2:
        raise UnsupportedFormatError("SMF format 2 (independent sequences) is not supported")
    if fmt not in (0, 1):
        raise UnsupportedFormatError(f"SMF format {fmt} is not supported")
    if division & 0x8000:
        raise UnsupportedFormatError("SMPTE time division carries no metric beat")
    if division == 0:
        raise ParseError("zero ticks-per-quarter division")

    diags = ParseDiagnostics()
    pos = 8 + header_len
    tracks = []
    while pos + 8 <= len(data) and len(tracks) < ntrks:
        tag = data[pos : pos + 4]
        (length,) = struct.unpack(">I", data[pos + 4 : pos + 8])
        if pos + 8 + length > len(data):
            raise ParseError(f"truncated chunk: track {len(tracks)} claims {length} bytes")
        if tag == b"MTrk":
            tracks.append((pos + 8, pos + 8 + length))
        else:
            diags.skip(f"chunk:{tag.decode('latin1')}")
        pos += 8 + length
    if len(tracks) < ntrks:
        diags.warn("header", f"header declares {ntrks} tracks, found {len(tracks)}")

    ts_changes: list[tuple[Fraction, tuple[int, int]]] = []
    key_changes: list[tuple[Fraction, int]] = []
    track_notes: list[list[RawNote]] = []
    track_names: list[str] = []
    for ti, (start, end) in enumerate(tracks):
        notes, name = _parse_track(data, start, end, ti, division, ts_changes, key_changes, diags)
        track_notes.append(notes)
        track_names.append(name)

    if not ts_changes:
        diags.warn("header", "no time-signature event; assuming 4/4")

    part_ids = []
    raw_parts = []
    for ti, notes in enumerate(track_notes):
        if not notes:
            continue
        part_ids.append((f"T{ti + 1}", track_names[ti] or f"Track {ti + 1}"))
        raw_parts.append(notes)
    if not part_ids:
        part_ids = [("T1", "Track 1")]
        raw_parts = [[]]

    max_end = max((n.onset + n.duration for p in raw_parts for n in p), default=Fraction(0))
    measures = grid_measures(ts_changes, key_changes, max_end)
    metadata = {"title": "", "composer": "", "source_format": "midi"}
    score = assemble_score(part_ids, raw_parts, measures, metadata)
    return score, diags


def _parse_track(data, start, end, ti, division, ts_changes, key_changes, diags):
    r = _Reader(data, start, end)
    tick = 0
    running_status = None
    open_notes: dict[tuple[int, int], list[tuple[int, RawNote]]] = {}
    notes: list[RawNote] = []
    name = ""

    while not r.exhausted:
        tick += r.varlen()
        b = r.u8()
        if b == _META:
            meta_type = r.u8()
            payload = r.take(r.varlen())
            beat = Fraction(tick, division)
            if meta_type == 0x58 and len(payload) >= 2:
                ts_changes.append((beat, (payload[0], 1 << payload[1])))
            elif meta_type == 0x59 and len(payload) >= 1:
                sharps = struct.unpack(">b", payload[:1])[0]
                key_changes.append((beat, sharps))
            elif meta_type == 0x03 and not name:
                name = payload.decode("latin1", errors="replace").strip()
            elif meta_type == 0x2F:
                break
            continue
        if b in _SYSEX:
            r.take(r.varlen())
            continue
        if b & 0x80:
            status = b
            running_status = status
            first = None
        else:
            if running_status is None:
                raise ParseError(f"track {ti}: data byte {b:#x} with no running status")
            status = running_status
            first = b

        kind = status & 0xF0
        channel = status & 0x0F
        nparams = _PARAM_BYTES.get(kind)
        if nparams is None:
            raise ParseError(f"track {ti}: unknown status byte {status:#x}")
        params = [first] if first is not None else []
        while len(params) < nparams:
            params.append(r.u8())

        if kind == _NOTE_ON and params[1] > 0:
            raw = RawNote(Fraction(tick, division), Fraction(0), pitch_from_midi(params[0]),
                          voice=channel + 1)
            open_notes.setdefault((channel, params[0]), []).append((tick, raw))
            notes.append(raw)
        elif kind == _NOTE_OFF or (kind == _NOTE_ON and params[1] == 0):
            stack = open_notes.get((channel, params[0]))
            if stack:
                on_tick, raw = stack.pop(0)
                raw.duration = Fraction(tick - on_tick, division)
                if raw.duration == 0:
                    raw.grace = True
                    diags.warn(f"track {ti}", f"zero-length note {params[0]} kept as grace")
            else:
                diags.skip("unmatched-note-off")
        else:
            diags.skip(f"event:{kind:#x}")

    dangling = [(slot, item) for slot, stack in open_notes.items() for item in stack]
    for (channel, key), (on_tick, raw) in dangling:
        raw.duration = Fraction(tick - on_tick, division)
        if raw.duration == 0:
            raw.grace = True
        diags.warn(f"track {ti}", f"dangling note-on key {key} closed at track end")
    return notes, name
