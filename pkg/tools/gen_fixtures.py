#!/usr/bin/env python3
"""Regenerate the golden parser fixtures under tests/fixtures/golden/.

Fixtures are authored here with the standard library only, so the parsers
under test never participate in producing their own expected inputs.
"""

from __future__ import annotations

import io
import struct
import zipfile
from pathlib import Path

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "golden"


# ---------------------------------------------------------------- MusicXML

XML_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'

CROSS_MUSICXML = XML_HEADER + """\
<score-partwise version="3.1">
  <work><work-title>Cross-format test piece</work-title></work>
  <part-list>
    <score-part id="P1"><part-name>Melody</part-name></score-part>
    <score-part id="P2"><part-name>Bass</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="1">
      <attributes>
        <divisions>1</divisions>
        <key><fifths>0</fifths></key>
        <time><beats>4</beats><beat-type>4</beat-type></time>
      </attributes>
      <note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
      <note><pitch><step>D</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
      <note><pitch><step>E</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
      <note><pitch><step>F</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
    </measure>
    <measure number="2">
      <note><pitch><step>G</step><octave>4</octave></pitch><duration>2</duration><tie type="start"/><voice>1</voice></note>
      <note><pitch><step>G</step><octave>4</octave></pitch><duration>1</duration><tie type="stop"/><voice>1</voice></note>
      <note><pitch><step>A</step><octave>4</octave></pitch><duration>1</duration><voice>1</voice></note>
    </measure>
  </part>
  <part id="P2">
    <measure number="1">
      <attributes>
        <divisions>2</divisions>
        <key><fifths>0</fifths></key>
        <time><beats>4</beats><beat-type>4</beat-type></time>
      </attributes>
      <note><pitch><step>C</step><octave>3</octave></pitch><duration>8</duration><voice>1</voice></note>
    </measure>
    <measure number="2">
      <note><pitch><step>C</step><octave>3</octave></pitch><duration>4</duration><voice>1</voice></note>
      <note><pitch><step>G</step><octave>2</octave></pitch><duration>4</duration><voice>1</voice></note>
    </measure>
  </part>
</score-partwise>
"""

MINIMAL_MUSICXML = XML_HEADER + """\
<score-partwise version="3.1">
  <part-list>
    <score-part id="P1"><part-name>Music</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="1">
      <attributes>
        <divisions>1</divisions>
        <time><beats>4</beats><beat-type>4</beat-type></time>
      </attributes>
      <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration><voice>1</voice></note>
    </measure>
  </part>
</score-partwise>
"""

# chords, two voices via backup, an accidental, a grace note, a rest,
# a pickup measure, and an unsupported element (ornament -> skipped)
FEATURES_MUSICXML = XML_HEADER + """\
<score-partwise version="3.1">
  <work><work-title>Feature coverage</work-title></work>
  <identification><creator type="composer">Trad.</creator></identification>
  <part-list>
    <score-part id="P1"><part-name>Keyboard</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="0" implicit="yes">
      <attributes>
        <divisions>4</divisions>
        <key><fifths>1</fifths></key>
        <time><beats>3</beats><beat-type>4</beat-type></time>
      </attributes>
      <note><pitch><step>D</step><octave>4</octave></pitch><duration>4</duration><voice>1</voice></note>
    </measure>
    <measure number="1">
      <note><grace/><pitch><step>A</step><octave>4</octave></pitch><voice>1</voice></note>
      <note><pitch><step>G</step><octave>4</octave></pitch><duration>8</duration><voice>1</voice></note>
      <note><chord/><pitch><step>B</step><octave>4</octave></pitch><duration>8</duration><voice>1</voice></note>
      <note><pitch><step>F</step><alter>1</alter><octave>4</octave></pitch><duration>4</duration><voice>1</voice>
        <notations><ornaments><trill-mark/></ornaments></notations>
      </note>
      <backup><duration>12</duration></backup>
      <note><pitch><step>G</step><octave>2</octave></pitch><duration>8</duration><voice>2</voice></note>
      <note><rest/><duration>4</duration><voice>2</voice></note>
    </measure>
    <measure number="2">
      <note><pitch><step>G</step><octave>4</octave></pitch><duration>12</duration><voice>1</voice></note>
      <direction><direction-type><words>rit.</words></direction-type></direction>
    </measure>
  </part>
</score-partwise>
"""

TIMEWISE_MUSICXML = XML_HEADER + """\
<score-timewise version="3.1">
  <part-list>
    <score-part id="P1"><part-name>One</part-name></score-part>
    <score-part id="P2"><part-name>Two</part-name></score-part>
  </part-list>
  <measure number="1">
    <part id="P1">
      <attributes><divisions>1</divisions><time><beats>2</beats><beat-type>4</beat-type></time></attributes>
      <note><pitch><step>E</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
    </part>
    <part id="P2">
      <attributes><divisions>1</divisions><time><beats>2</beats><beat-type>4</beat-type></time></attributes>
      <note><pitch><step>C</step><octave>3</octave></pitch><duration>2</duration><voice>1</voice></note>
    </part>
  </measure>
  <measure number="2">
    <part id="P1">
      <note><pitch><step>D</step><octave>5</octave></pitch><duration>2</duration><voice>1</voice></note>
    </part>
    <part id="P2">
      <note><pitch><step>G</step><octave>2</octave></pitch><duration>2</duration><voice>1</voice></note>
    </part>
  </measure>
</score-timewise>
"""


# ---------------------------------------------------------------- kern

CROSS_KERN = """\
**kern\t**kern
*M4/4\t*M4/4
*k[]\t*k[]
=1\t=1
4c\t1C
4d\t.
4e\t.
4f\t.
=2\t=2
[2g\t2C
4g]\t2GG
4a\t.
==\t==
*-\t*-
"""

MINIMAL_KERN = """\
**kern
*M4/4
=1
1c
==
*-
"""

# chords, dotted values, a grace note, a rest, an accidental, a pickup
FEATURES_KERN = """\
!! feature coverage
**kern
*M3/4
*k[f#]
4d
=1
qcc
2.g 2.b
=2
8g#
8r
2f#
==
*-
"""


# ---------------------------------------------------------------- MIDI


def varlen(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def track(events: list[tuple[int, bytes]]) -> bytes:
    """events: (delta, raw message bytes); end-of-track appended."""
    body = b"".join(varlen(d) + msg for d, msg in events)
    body += varlen(0) + bytes((0xFF, 0x2F, 0x00))
    return b"MTrk" + struct.pack(">I", len(body)) + body


def header(fmt: int, ntrks: int, division: int) -> bytes:
    return b"MThd" + struct.pack(">IHHH", 6, fmt, ntrks, division)


def time_signature(num: int, den_pow: int) -> bytes:
    return bytes((0xFF, 0x58, 0x04, num, den_pow, 24, 8))


def on(key: int, vel: int = 64, ch: int = 0) -> bytes:
    return bytes((0x90 | ch, key, vel))


def off(key: int, ch: int = 0) -> bytes:
    return bytes((0x80 | ch, key, 0))


def cross_midi() -> bytes:
    q = 480
    melody = [
        (0, on(60)), (q, off(60)),
        (0, on(62)), (q, off(62)),
        (0, on(64)), (q, off(64)),
        (0, on(65)), (q, off(65)),
        (0, on(67)), (3 * q, off(67)),
        (0, on(69)), (q, off(69)),
    ]
    bass = [
        (0, on(48)), (4 * q, off(48)),
        (0, on(48)), (2 * q, off(48)),
        (0, on(43)), (2 * q, off(43)),
    ]
    meta = [(0, time_signature(4, 2))]
    return header(1, 3, q) + track(meta) + track(melody) + track(bass)


def single_note_midi() -> bytes:
    return header(0, 1, 480) + track(
        [(0, time_signature(4, 2)), (0, on(60)), (480, off(60))]
    )


def running_status_midi() -> bytes:
    """Note-ons with running status and velocity-0 releases; no time signature."""
    q = 96
    body = (
        varlen(0) + bytes((0x90, 60, 64))
        + varlen(q) + bytes((60, 0))          # running status: vel-0 off
        + varlen(0) + bytes((64, 64))
        + varlen(q) + bytes((64, 0))
        + varlen(0) + bytes((67, 64))
    )
    body += varlen(q) + bytes((0xFF, 0x2F, 0x00))  # dangling 67 closes at end
    return header(0, 1, q) + b"MTrk" + struct.pack(">I", len(body)) + body


def format2_midi() -> bytes:
    return header(2, 1, 480) + track([(0, on(60)), (480, off(60))])


def truncated_midi() -> bytes:
    whole = single_note_midi()
    return whole[:-4]


def smpte_midi() -> bytes:
    division = struct.unpack(">H", struct.pack(">bB", -25, 40))[0]
    return header(0, 1, division) + track([(0, on(60)), (480, off(60))])


def mxl_container(xml_text: str) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_DEFLATED) as zf:
        zf.writestr(
            "META-INF/container.xml",
            XML_HEADER
            + '<container><rootfiles><rootfile full-path="score.xml"/></rootfiles></container>',
        )
        zf.writestr("score.xml", xml_text)
    return buf.getvalue()


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    text = {
        "cross.musicxml": CROSS_MUSICXML,
        "minimal.musicxml": MINIMAL_MUSICXML,
        "features.musicxml": FEATURES_MUSICXML,
        "timewise.musicxml": TIMEWISE_MUSICXML,
        "cross.krn": CROSS_KERN,
        "minimal.krn": MINIMAL_KERN,
        "features.krn": FEATURES_KERN,
    }
    binary = {
        "cross.mxl": mxl_container(CROSS_MUSICXML),
        "cross.mid": cross_midi(),
        "single_note.mid": single_note_midi(),
        "running_status.mid": running_status_midi(),
        "format2.mid": format2_midi(),
        "truncated.mid": truncated_midi(),
        "smpte.mid": smpte_midi(),
    }
    for name, content in text.items():
        (GOLDEN / name).write_text(content, encoding="utf-8")
    for name, content in binary.items():
        (GOLDEN / name).write_bytes(content)
    print(f"wrote {len(text) + len(binary)} fixtures to {GOLDEN}")


if __name__ == "__main__":
    main()
