"""Report rendering: the canonical machine document and the human text.

The machine document is versioned JSON with sorted keys and exact rational
positions encoded as strings, so the same analysis always serializes to the
same bytes. Agent timing is deliberately not serialized: report equality is
defined on this canonical form and timing would make identical analyses
compare unequal. ``parse_machine_report`` inverts the serialization; a
parsed report has zeroed durations but is otherwise equal to the original.

The human document is plain markdown-ish text with exactly six sections:
header, form, harmony, style, metrics, verdicts.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Optional

from .coordinator import AgentEnvelope, AnalysisReport, ConsistencyVerdict
from .errors import SchemaError
from .harmonic import ChordLabel, HarmonicMap, KeyEstimate, RomanNumeral
from .structural import FormOutline, Segment
from .stylistic import StyleAssessment, StyleAttribution, StyleFeatureVector

__all__ = [
    "REPORT_FORMAT",
    "REPORT_VERSION",
    "human_document",
    "machine_document",
    "parse_machine_report",
    "work_slug",
]

REPORT_FORMAT = "scoreagents-report"
REPORT_VERSION = 1


def work_slug(work_id: str) -> str:
    """Filesystem-safe stem for naming a work's output files."""
    cleaned = "".join(c if c.isalnum() or c in "-_" else "_" for c in str(work_id))
    return cleaned.strip("_") or "work"


# ------------------------------------------------------------- serialization

def _frac(value) -> str:
    return str(Fraction(value))


def _key_doc(key: Optional[KeyEstimate]) -> Optional[dict]:
    if key is None:
        return None
    return {
        "tonic": key.tonic,
        "mode": key.mode,
        "correlation": key.correlation,
        "runner_up": _key_doc(key.runner_up),
    }


def _outline_doc(outline: Optional[FormOutline]) -> Optional[dict]:
    if outline is None:
        return None
    return {
        "form": outline.form_string,
        "segments": [
            {
                "start_measure": s.start_measure,
                "end_measure": s.end_measure,
                "letter": s.letter,
                "role": s.role,
                "confidence": s.confidence,
            }
            for s in outline.segments
        ],
    }


def _harmony_doc(harmony: Optional[HarmonicMap]) -> Optional[dict]:
    if harmony is None:
        return None
    return {
        "global_key": _key_doc(harmony.global_key),
        "trajectory": [
            {"start": _frac(span[0]), "end": _frac(span[1]), "key": _key_doc(key)}
            for span, key in harmony.trajectory
        ],
        "modulations": [_frac(b) for b in harmony.modulations],
        "modulation_measures": list(harmony.modulation_measures),
        "chords": [
            {
                "root": c.root,
                "quality": c.quality,
                "span": [_frac(c.span[0]), _frac(c.span[1])],
                "score": c.score,
            }
            for c in harmony.chords
        ],
        "numerals": [
            {
                "numeral": n.numeral,
                "applied_of": n.applied_of,
                "key": _key_doc(n.key_context),
                "span": [_frac(n.span[0]), _frac(n.span[1])],
                "chromatic": n.chromatic,
            }
            for n in harmony.numerals
        ],
        "coherence": harmony.coherence,
    }


def _style_doc(style: Optional[StyleAttribution],
               features: Optional[StyleFeatureVector]) -> Optional[dict]:
    if style is None:
        return None
    return {
        "distribution": dict(style.distribution),
        "top_label": style.top_label,
        "instrumentation_notes": style.instrumentation_notes,
        "ornamentation_notes": style.ornamentation_notes,
        "degenerate": style.degenerate,
        "features": features.as_dict() if features is not None else None,
    }


def _envelope_doc(envelope: AgentEnvelope) -> dict:
    doc = {
        "status": envelope.status,
        "config_digest": envelope.config_digest,
    }
    if envelope.status == "failed":
        payload = envelope.payload if isinstance(envelope.payload, dict) else {}
        doc["error"] = payload.get("error", {"type": "Error", "message": ""})
    return doc


def machine_document(report: AnalysisReport) -> str:
    """Canonical JSON rendering; identical analyses give identical bytes."""
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "source": dict(report.source),
        "outline": _outline_doc(report.outline),
        "harmony": _harmony_doc(report.harmony),
        "style": _style_doc(report.style, report.style_features),
        "metrics": dict(report.metrics),
        "verdicts": None if report.verdicts is None else [
            {"dimension": v.dimension, "verdict": v.verdict, "note": v.note}
            for v in report.verdicts
        ],
        # keyed by agent name, so the document does not depend on the order
        # parallel-eligible agents happened to execute in
        "envelopes": {e.agent: _envelope_doc(e) for e in report.envelopes},
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -------------------------------------------------------------------- parsing

def _parse_key(doc: Optional[dict]) -> Optional[KeyEstimate]:
    if doc is None:
        return None
    return KeyEstimate(tonic=doc["tonic"], mode=doc["mode"],
                       correlation=doc["correlation"],
                       runner_up=_parse_key(doc.get("runner_up")))


def _parse_outline(doc: Optional[dict]) -> Optional[FormOutline]:
    if doc is None:
        return None
    segments = tuple(
        Segment(s["start_measure"], s["end_measure"], s["letter"], s["role"],
                s["confidence"])
        for s in doc["segments"]
    )
    return FormOutline(segments, doc["form"])


def _parse_harmony(doc: Optional[dict]) -> Optional[HarmonicMap]:
    if doc is None:
        return None
    return HarmonicMap(
        global_key=_parse_key(doc["global_key"]),
        trajectory=[
            ((Fraction(t["start"]), Fraction(t["end"])), _parse_key(t["key"]))
            for t in doc["trajectory"]
        ],
        modulations=[Fraction(b) for b in doc["modulations"]],
        modulation_measures=list(doc["modulation_measures"]),
        chords=[
            ChordLabel(c["root"], c["quality"],
                       (Fraction(c["span"][0]), Fraction(c["span"][1])),
                       c["score"])
            for c in doc["chords"]
        ],
        numerals=[
            RomanNumeral(n["numeral"], n["applied_of"], _parse_key(n["key"]),
                         (Fraction(n["span"][0]), Fraction(n["span"][1])),
                         n["chromatic"])
            for n in doc["numerals"]
        ],
        coherence=doc["coherence"],
    )


def _parse_style(doc: Optional[dict]):
    if doc is None:
        return None, None
    attribution = StyleAttribution(
        distribution=dict(doc["distribution"]),
        top_label=doc["top_label"],
        instrumentation_notes=doc["instrumentation_notes"],
        ornamentation_notes=doc["ornamentation_notes"],
        degenerate=doc["degenerate"],
    )
    features = None
    if doc.get("features") is not None:
        features = StyleFeatureVector(**doc["features"])
    return attribution, features


def parse_machine_report(text: str) -> AnalysisReport:
    """Rebuild a report from its canonical document.

    Envelope payloads for successful agents are re-pointed at the parsed
    top-level objects; durations come back as 0.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a valid report document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise SchemaError("not a report document", field_path="format")
    if doc.get("version") != REPORT_VERSION:
        raise SchemaError(f"unsupported report version {doc.get('version')!r}",
                          field_path="version")

    outline = _parse_outline(doc["outline"])
    harmony = _parse_harmony(doc["harmony"])
    attribution, features = _parse_style(doc["style"])

    payload_by_agent = {
        "structural": outline,
        "harmonic": harmony,
        "stylistic": StyleAssessment(features, attribution)
        if attribution is not None and features is not None else attribution,
    }
    known = ("structural", "harmonic", "stylistic")
    agents = [a for a in known if a in doc["envelopes"]]
    agents += sorted(set(doc["envelopes"]) - set(known))
    envelopes = []
    for agent in agents:
        env = doc["envelopes"][agent]
        if env["status"] == "ok":
            payload = payload_by_agent.get(agent)
        else:
            payload = {"error": env.get("error", {})}
        envelopes.append(AgentEnvelope(agent, env["status"], payload,
                                       config_digest=env["config_digest"]))

    verdicts = None
    if doc["verdicts"] is not None:
        verdicts = tuple(
            ConsistencyVerdict(v["dimension"], v["verdict"], v["note"])
            for v in doc["verdicts"]
        )
    return AnalysisReport(
        source=dict(doc["source"]),
        outline=outline,
        harmony=harmony,
        style=attribution,
        metrics=dict(doc["metrics"]),
        verdicts=verdicts,
        envelopes=tuple(envelopes),
        style_features=features,
    )


# ------------------------------------------------------------- human report

def _format_metric(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"


def human_document(report: AnalysisReport) -> str:
    """Readable text rendering: header, form, harmony, style, metrics, verdicts."""
    source = report.source
    lines = [f"# Analysis: {source.get('work_id', 'untitled')}"]
    described = [source.get(k) for k in ("title", "composer") if source.get(k)]
    if described:
        lines.append("work: " + ", ".join(described))
    if source.get("path") or source.get("format"):
        origin = source.get("path", "")
        if source.get("format"):
            origin = f"{origin} ({source['format']})" if origin else source["format"]
        lines.append(f"source: {origin}")

    lines += ["", "## Form"]
    if report.outline is None:
        lines.append("unavailable: structural agent produced no result")
    else:
        lines.append(f"form: {report.outline.form_string}")
        for seg in report.outline.segments:
            lines.append(
                f"  {seg.letter}: measures {seg.start_measure}-{seg.end_measure}"
                f" ({seg.role}, confidence {seg.confidence:.2f})")

    lines += ["", "## Harmony"]
    if report.harmony is None:
        lines.append("unavailable: harmonic agent produced no result")
    else:
        harmony = report.harmony
        lines.append(f"global key: {harmony.global_key.name}"
                     f" (correlation {harmony.global_key.correlation:.3f})")
        for span, key in harmony.trajectory:
            lines.append(f"  beats {span[0]}-{span[1]}: {key.name}")
        if harmony.modulation_measures:
            at = ", ".join(str(m) for m in harmony.modulation_measures)
            lines.append(f"modulations at measures: {at}")
        else:
            lines.append("modulations: none")
        if harmony.numerals:
            lines.append("numerals: " + " ".join(n.label for n in harmony.numerals))
        coherence = "n/a" if harmony.coherence is None \
            else f"{harmony.coherence:.1f}/10"
        lines.append(f"harmonic coherence: {coherence}")

    lines += ["", "## Style"]
    if report.style is None:
        lines.append("unavailable: stylistic agent produced no result")
    else:
        style = report.style
        suffix = " (degenerate: uniform fallback)" if style.degenerate else ""
        lines.append(f"top label: {style.top_label}{suffix}")
        ranked = sorted(style.distribution.items(), key=lambda kv: (-kv[1], kv[0]))
        for label, p in ranked:
            lines.append(f"  {label}: {p:.3f}")
        if style.instrumentation_notes:
            lines.append(f"instrumentation: {style.instrumentation_notes}")
        if style.ornamentation_notes:
            lines.append(f"ornamentation: {style.ornamentation_notes}")

    lines += ["", "## Metrics"]
    if report.metrics:
        for name in sorted(report.metrics):
            lines.append(f"{name}: {_format_metric(report.metrics[name])}")
    else:
        lines.append("none computed")

    lines += ["", "## Verdicts"]
    if report.verdicts is None:
        lines.append("no reference supplied")
    elif not report.verdicts:
        lines.append("no dimensions audited")
    else:
        for v in report.verdicts:
            lines.append(f"{v.dimension}: {v.verdict} ({v.note})")

    return "\n".join(lines) + "\n"
