"""Agent orchestration: planning, isolated execution, auditing, synthesis.

The coordinator turns a configuration into a dependency-ordered task list,
runs each agent inside its own failure boundary, and assembles whatever
succeeded into one report. A crashing agent produces a failed envelope and
takes down only the agents that depend on its output; analysis aborts only
when nothing at all succeeded.

Auditing compares a finished report against a reference annotation with a
fixed rule table per dimension. The three verdict values are the entire
vocabulary; a dimension the reference does not annotate is omitted from the
verdict list rather than guessed at.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from .config import config_digest, default_config, merge_config
from .errors import AnalysisError, MetricError, PlanError
from .harmonic import HarmonicMap, analyze_harmony, key_name
from .metrics import (
    boundary_scores,
    greedy_matches,
    motif_complexity,
    rhythmic_entropy,
    segment_boundaries,
    shannon_form_diversity,
    tonal_agreement_class,
)
from .model import Score, validate
from .reference import ReferenceAnnotation
from .structural import FormOutline, analyze_structure
from .styledb import StyleProfile, seed_adjacency
from .stylistic import StyleAssessment, StyleAttribution, StyleFeatureVector, analyze_style

__all__ = [
    "AGENT_NAMES",
    "AgentEnvelope",
    "AgentTask",
    "AnalysisReport",
    "ConsistencyVerdict",
    "audit_consistency",
    "plan",
    "run_analysis",
    "synthesize_report",
]

log = logging.getLogger(__name__)

AGENT_NAMES = ("structural", "harmonic", "stylistic")
DEFAULT_DEPENDENCIES = {
    "structural": frozenset(),
    "harmonic": frozenset(),
    "stylistic": frozenset({"structural", "harmonic"}),
}
VERDICT_CONSISTENT = "Consistent"
VERDICT_MINOR = "MinorError"
VERDICT_HALLUCINATION = "Hallucination"


@dataclass(frozen=True)
class AgentTask:
    agent: str
    depends_on: frozenset[str]
    config: dict


@dataclass
class AgentEnvelope:
    """One agent's outcome. Timing is informational and excluded from equality."""

    agent: str
    status: str  # ok | failed
    payload: object
    duration_ms: int = field(compare=False, default=0)
    config_digest: str = ""


@dataclass(frozen=True)
class ConsistencyVerdict:
    dimension: str
    verdict: str
    note: str


@dataclass
class AnalysisReport:
    source: dict
    outline: Optional[FormOutline]
    harmony: Optional[HarmonicMap]
    style: Optional[StyleAttribution]
    metrics: dict
    verdicts: Optional[tuple[ConsistencyVerdict, ...]]
    envelopes: tuple[AgentEnvelope, ...]
    style_features: Optional[StyleFeatureVector] = None


def plan(config: Optional[dict] = None) -> list[AgentTask]:
    """Dependency-ordered tasks for the configured agents.

    Ties between ready agents resolve in the config's listing order, so
    structural and harmonic (which never depend on each other) may legally
    run in either order; stylistic always lands last because it consumes
    both of their outputs.
    """
    cfg = merge_config(default_config(), config or {})
    listed = list(dict.fromkeys(cfg.get("agents") or []))
    if not listed:
        raise PlanError("config selects no agents")
    unknown = [a for a in listed if a not in AGENT_NAMES]
    if unknown:
        raise PlanError(f"unknown agents in config: {', '.join(unknown)}")

    selected = set(listed)
    dependencies: dict[str, set[str]] = {
        agent: set(DEFAULT_DEPENDENCIES[agent]) for agent in listed
    }
    extra = cfg.get("dependencies") or {}
    for agent, deps in extra.items():
        if agent in dependencies:
            dependencies[agent].update(deps)
    for agent, deps in dependencies.items():
        missing = deps - selected
        if missing:
            raise PlanError(
                f"{agent} depends on unselected agents: {', '.join(sorted(missing))}")

    ordered: list[AgentTask] = []
    done: set[str] = set()
    pending = list(listed)
    while pending:
        ready = [a for a in pending if dependencies[a] <= done]
        if not ready:
            raise PlanError(f"dependency cycle among: {', '.join(pending)}")
        agent = ready[0]
        pending.remove(agent)
        done.add(agent)
        ordered.append(AgentTask(agent=agent,
                                 depends_on=frozenset(dependencies[agent]),
                                 config=dict(cfg.get(agent) or {})))
    return ordered


def _harmonic_kwargs(cfg: dict) -> dict:
    kwargs = dict(cfg)
    if "grid" in kwargs:
        kwargs["grid"] = Fraction(str(kwargs["grid"]))
    return kwargs


def _stylistic_kwargs(cfg: dict) -> dict:
    kwargs = dict(cfg)
    if "ornament_threshold" in kwargs:
        kwargs["ornament_threshold"] = Fraction(str(kwargs["ornament_threshold"]))
    return kwargs


def _run_agent(task: AgentTask, score: Score, payloads: dict,
               profiles: Optional[list[StyleProfile]]):
    if task.agent == "structural":
        return analyze_structure(score, **task.config)
    if task.agent == "harmonic":
        return analyze_harmony(score, **_harmonic_kwargs(task.config))
    if task.agent == "stylistic":
        return analyze_style(score, payloads["harmonic"], payloads["structural"],
                             profiles=profiles, **_stylistic_kwargs(task.config))
    raise PlanError(f"no runner for agent {task.agent!r}")


def _error_payload(exc: BaseException) -> dict:
    return {"error": {"type": type(exc).__name__, "message": str(exc)}}


def _default_source(score: Score) -> dict:
    meta = score.metadata
    source = {"work_id": meta.get("title") or "untitled"}
    if meta.get("source_format"):
        source["format"] = meta["source_format"]
    return source


def _report_metrics(score: Score, outline: Optional[FormOutline],
                    harmony: Optional[HarmonicMap]) -> dict:
    metrics: dict = {}
    try:
        metrics["rhythmic_entropy_bits"] = rhythmic_entropy(score)
    except MetricError:
        pass
    if outline is not None:
        try:
            metrics["form_diversity"] = shannon_form_diversity(outline)
        except MetricError:
            pass
    metrics["motif_count"] = motif_complexity(score)
    if harmony is not None and harmony.coherence is not None:
        metrics["harmonic_coherence"] = harmony.coherence
    return metrics


def run_analysis(score: Score, config: Optional[dict] = None, *,
                 source: Optional[dict] = None,
                 profiles: Optional[list[StyleProfile]] = None) -> AnalysisReport:
    """Execute the configured agents over one score and assemble a report.

    Each agent runs inside its own failure boundary: an exception becomes a
    failed envelope, agents that depend on the failed one are marked failed
    without running, and everything independent still completes. Raises
    AnalysisError (carrying all envelopes) only when no agent succeeded, and
    ValueError when the score itself is malformed.
    """
    violations = validate(score)
    if violations:
        summary = "; ".join(v.message for v in violations[:3])
        raise ValueError(f"score fails validation: {summary}")

    tasks = plan(config)
    payloads: dict[str, object] = {}
    envelopes: list[AgentEnvelope] = []
    for task in tasks:
        digest = config_digest(task.config)
        missing = sorted(d for d in task.depends_on if d not in payloads)
        if missing:
            reason = RuntimeError(f"dependency failed: {', '.join(missing)}")
            envelopes.append(AgentEnvelope(task.agent, "failed",
                                           _error_payload(reason),
                                           config_digest=digest))
            continue
        started = time.perf_counter()
        try:
            payload = _run_agent(task, score, payloads, profiles)
        except Exception as exc:
            log.warning("%s agent failed: %s", task.agent, exc)
            envelopes.append(AgentEnvelope(
                task.agent, "failed", _error_payload(exc),
                duration_ms=round((time.perf_counter() - started) * 1000),
                config_digest=digest))
            continue
        payloads[task.agent] = payload
        envelopes.append(AgentEnvelope(
            task.agent, "ok", payload,
            duration_ms=round((time.perf_counter() - started) * 1000),
            config_digest=digest))

    if not payloads:
        raise AnalysisError("every agent failed", envelopes=envelopes)

    outline = payloads.get("structural")
    harmony = payloads.get("harmonic")
    assessment = payloads.get("stylistic")
    return AnalysisReport(
        source=dict(source) if source else _default_source(score),
        outline=outline,
        harmony=harmony,
        style=assessment.attribution if assessment else None,
        style_features=assessment.features if assessment else None,
        metrics=_report_metrics(score, outline, harmony),
        verdicts=None,
        envelopes=tuple(envelopes),
    )


def _structural_verdict(report: AnalysisReport, reference: ReferenceAnnotation,
                        audit_cfg: dict) -> ConsistencyVerdict:
    tolerance = audit_cfg["boundary_tolerance"]
    _, _, f1 = boundary_scores(segment_boundaries(report.outline),
                               reference.boundaries, tolerance)
    if f1 >= audit_cfg["structural_consistent_f1"]:
        return ConsistencyVerdict("structural", VERDICT_CONSISTENT,
                                  f"boundary F1 {f1:.2f}")
    if f1 >= audit_cfg["structural_minor_f1"]:
        return ConsistencyVerdict("structural", VERDICT_MINOR,
                                  f"structure split missed (boundary F1 {f1:.2f})")
    return ConsistencyVerdict("structural", VERDICT_HALLUCINATION,
                              f"structure misread (boundary F1 {f1:.2f})")


def _harmonic_verdict(report: AnalysisReport, reference: ReferenceAnnotation,
                      audit_cfg: dict) -> ConsistencyVerdict:
    tolerance = audit_cfg["boundary_tolerance"]
    key = report.harmony.global_key
    agreement = tonal_agreement_class((key.tonic, key.mode), reference.key)
    claimed = list(report.harmony.modulation_measures)
    annotated = list(reference.modulations or ())
    spurious = len(claimed) - greedy_matches(claimed, annotated, tolerance)
    key_rank = {"exact": 0, "related": 1, "disagree": 2}[agreement]
    spurious_rank = min(spurious, 2)
    rank = max(key_rank, spurious_rank)
    note = (f"key {key.name} vs {key_name(*reference.key)} ({agreement});"
            f" {spurious} spurious modulation(s)")
    if rank == 0:
        return ConsistencyVerdict("harmonic", VERDICT_CONSISTENT, note)
    if rank == 1:
        return ConsistencyVerdict("harmonic", VERDICT_MINOR,
                                  f"harmony mislabel: {note}")
    return ConsistencyVerdict("harmonic", VERDICT_HALLUCINATION,
                              f"modulation misdetected: {note}")


def _stylistic_verdict(report: AnalysisReport, reference: ReferenceAnnotation,
                       adjacency: dict[str, frozenset[str]]) -> ConsistencyVerdict:
    top = report.style.top_label
    if top == reference.style:
        return ConsistencyVerdict("stylistic", VERDICT_CONSISTENT,
                                  f"style {top}")
    if reference.style in adjacency.get(top, frozenset()):
        return ConsistencyVerdict(
            "stylistic", VERDICT_MINOR,
            f"adjacent style: {top} vs {reference.style}")
    return ConsistencyVerdict(
        "stylistic", VERDICT_HALLUCINATION,
        f"stylistic period confusion: {top} vs {reference.style}")


def audit_consistency(report: AnalysisReport, reference: ReferenceAnnotation,
                      adjacency: Optional[dict[str, frozenset[str]]] = None,
                      config: Optional[dict] = None) -> list[ConsistencyVerdict]:
    """One verdict per auditable dimension, in structural/harmonic/stylistic order.

    A dimension is skipped (left out of the list, with a log note) when the
    reference does not annotate it or the corresponding agent produced no
    payload to audit.
    """
    audit_cfg = merge_config(default_config(), config or {})["audit"]
    verdicts: list[ConsistencyVerdict] = []

    if reference.boundaries is not None and report.outline is not None:
        verdicts.append(_structural_verdict(report, reference, audit_cfg))
    else:
        log.info("structural dimension skipped: %s",
                 "reference has no boundaries" if reference.boundaries is None
                 else "no structural payload")

    if reference.key is not None and report.harmony is not None:
        verdicts.append(_harmonic_verdict(report, reference, audit_cfg))
    else:
        log.info("harmonic dimension skipped: %s",
                 "reference has no key" if reference.key is None
                 else "no harmonic payload")

    if reference.style is not None and report.style is not None:
        if adjacency is None:
            adjacency = seed_adjacency()
        verdicts.append(_stylistic_verdict(report, reference, adjacency))
    else:
        log.info("stylistic dimension skipped: %s",
                 "reference has no style" if reference.style is None
                 else "no stylistic payload")

    return verdicts


def with_verdicts(report: AnalysisReport,
                  verdicts: list[ConsistencyVerdict]) -> AnalysisReport:
    """Copy of the report with audit results attached."""
    return replace(report, verdicts=tuple(verdicts))


def synthesize_report(report: AnalysisReport) -> tuple[str, str]:
    """(machine document, human document) renderings of one report."""
    from . import report as report_io

    return report_io.machine_document(report), report_io.human_document(report)
