"""Command-line surface tying parsing, analysis, evaluation, and batch runs together.

Four subcommands: ``analyze`` one work, ``batch`` a manifest of works,
``compare`` a saved report to a reference annotation, and ``db`` to create
or check a style profile database. Reports and tables go to standard
output, diagnostics to standard error, so output can be piped.

Exit codes are stable: 0 success, 1 batch finished with per-work failures,
2 unreadable or malformed input, 3 analysis failure, 4 report/reference
work-id mismatch, 5 refusing to overwrite an existing database.

The corpus manifest is a CSV with header ``path,work_id,composer,title,
reference,style``; only ``path`` and ``work_id`` are required per row, work
ids must be unique, lines starting with ``#`` are skipped, and relative
paths are resolved against the manifest's own directory. A row's
``reference`` points at a reference-annotation JSON file; ``style`` is a
bare period label usable on its own when no full annotation exists.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional

from . import __version__
from .config import load_config
from .coordinator import (AnalysisReport, audit_consistency, run_analysis,
                          synthesize_report, with_verdicts)
from .errors import (AnalysisError, MetricError, ParseError, PlanError,
                     SchemaError, ScoreAgentsError, UnsupportedFormatError,
                     WorkMismatchError)
from .ingest import SourceFormat, load_path, write_annotated_musicxml
from .metrics import AgreementStats, compare_to_reference, corpus_summary, stats_table
from .model import Score
from .reference import ReferenceAnnotation, read_reference
from .report import machine_document, parse_machine_report, work_slug
from .styledb import read_style_db, seed_document, seed_profiles

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_PARSE = 2
EXIT_ANALYSIS = 3
EXIT_MISMATCH = 4
EXIT_EXISTS = 5

STYLE_DB_ENV = "SCOREAGENTS_STYLE_DB"

MANIFEST_COLUMNS = ("path", "work_id", "composer", "title", "reference", "style")


# ------------------------------------------------------------ corpus manifest

class ManifestEntry(NamedTuple):
    path: Path
    work_id: str
    composer: Optional[str] = None
    title: Optional[str] = None
    reference: Optional[Path] = None
    style: Optional[str] = None


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple[ManifestEntry, ...]


def parse_manifest(text: str, base_dir: Optional[Path] = None) -> CorpusManifest:
    """Parse manifest CSV; relative paths are joined onto ``base_dir``."""
    lines = [line for line in text.splitlines()
             if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise SchemaError("manifest has no header row")
    reader = csv.DictReader(lines, restkey="__extra__")
    columns = tuple(name.strip() for name in reader.fieldnames or ())
    unknown = [name for name in columns if name not in MANIFEST_COLUMNS]
    if unknown:
        raise SchemaError(f"unknown manifest column {unknown[0]!r}",
                          field_path="header")
    for required in ("path", "work_id"):
        if required not in columns:
            raise SchemaError(f"manifest header lacks {required!r} column",
                              field_path="header")

    def resolve(cell: str) -> Path:
        path = Path(cell)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return path

    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    for index, row in enumerate(reader):
        where = f"entries[{index}]"
        if row.pop("__extra__", None):
            raise SchemaError("row has more cells than header columns",
                              field_path=where)
        cells = {key.strip(): (value or "").strip() for key, value in row.items()}
        if not cells.get("path"):
            raise SchemaError("row lacks a path", field_path=f"{where}.path")
        work_id = cells.get("work_id", "")
        if not work_id:
            raise SchemaError("row lacks a work id", field_path=f"{where}.work_id")
        if work_id in seen:
            raise SchemaError(f"duplicate work id {work_id!r}",
                              field_path=f"{where}.work_id")
        seen.add(work_id)
        entries.append(ManifestEntry(
            path=resolve(cells["path"]),
            work_id=work_id,
            composer=cells.get("composer") or None,
            title=cells.get("title") or None,
            reference=resolve(cells["reference"]) if cells.get("reference") else None,
            style=cells.get("style") or None,
        ))
    if not entries:
        raise SchemaError("manifest lists no works")
    return CorpusManifest(tuple(entries))


def read_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise SchemaError(f"manifest {path} is not UTF-8 text: {exc}") from exc
    return parse_manifest(text, path.parent)


# ------------------------------------------------------------ shared plumbing

def _resolve_db(flag: Optional[str]):
    """(profiles, adjacency) from --db, the environment, or built-in seeds.

    Returns (None, None) when neither source names a file, letting the
    agents fall back to the seed profiles on their own.
    """
    path = flag or os.environ.get(STYLE_DB_ENV)
    if not path:
        return None, None
    return read_style_db(path)


def _print_warnings(label: str, warnings) -> None:
    for location, message in warnings:
        print(f"{label}: warning: {location}: {message}", file=sys.stderr)


def _entry_reference(entry: ManifestEntry) -> Optional[ReferenceAnnotation]:
    """The reference to audit against, if the manifest row supplies one.

    A bare style label in the manifest acts as a style-only annotation; a
    reference file missing its style field inherits the manifest label.
    """
    if entry.reference is not None:
        reference = read_reference(entry.reference)
        if reference.style is None and entry.style:
            reference = replace(reference, style=entry.style)
        return reference
    if entry.style:
        return ReferenceAnnotation(work_id=entry.work_id, style=entry.style)
    return None


def _entry_source(entry: ManifestEntry, score: Score) -> dict:
    source = {"work_id": entry.work_id}
    if entry.composer:
        source["composer"] = entry.composer
    if entry.title:
        source["title"] = entry.title
    if score.metadata.get("source_format"):
        source["format"] = score.metadata["source_format"]
    return source


# ------------------------------------------------------------------- analyze

def cmd_analyze(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    profiles, adjacency = _resolve_db(args.db)
    fmt = SourceFormat(args.format) if args.format else None
    score, diags = load_path(args.path, fmt)
    _print_warnings(args.path, diags.warnings)

    report = run_analysis(score, config, profiles=profiles)
    if args.reference:
        reference = read_reference(args.reference)
        report = with_verdicts(
            report, audit_consistency(report, reference, adjacency, config))
    machine, human = synthesize_report(report)

    wrote = False
    if args.out_json:
        Path(args.out_json).write_text(machine, encoding="utf-8")
        wrote = True
    if args.out_text:
        Path(args.out_text).write_text(human, encoding="utf-8")
        wrote = True
    if args.out_musicxml:
        Path(args.out_musicxml).write_bytes(write_annotated_musicxml(score, report))
        wrote = True
    if args.figures:
        from .figures import save_report_figures

        for path in save_report_figures(score, report, args.figures):
            log.info("wrote %s", path)
        wrote = True
    if not wrote:
        sys.stdout.write(human)
    return EXIT_OK


# --------------------------------------------------------------------- batch

class _WorkResult(NamedTuple):
    entry: ManifestEntry
    score: Optional[Score]
    report: Optional[AnalysisReport]
    stats: Optional[AgreementStats]
    machine: Optional[str]
    warnings: tuple
    error: Optional[Exception]


def _analyze_entry(entry: ManifestEntry, config: dict, profiles, adjacency,
                   tolerance: int) -> _WorkResult:
    try:
        score, diags = load_path(entry.path)
        report = run_analysis(score, config,
                              source=_entry_source(entry, score),
                              profiles=profiles)
        reference = _entry_reference(entry)
        stats = None
        if reference is not None:
            report = with_verdicts(
                report, audit_consistency(report, reference, adjacency, config))
            if reference.boundaries is not None and reference.key is not None:
                stats = compare_to_reference(report, reference, tolerance)
        return _WorkResult(entry, score, report, stats,
                           machine_document(report), tuple(diags.warnings), None)
    except Exception as exc:
        return _WorkResult(entry, None, None, None, None, (), exc)


def _print_batch(results: list[_WorkResult], out) -> Optional[dict]:
    """Agreement table, verdict table, and corpus summary on ``out``."""
    out.write("# agreement\n")
    out.write(stats_table([(r.entry.work_id, r.stats) for r in results]))

    audited = [r for r in results
               if r.report is not None and r.report.verdicts is not None]
    if not audited:
        return None
    out.write("# verdicts\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("work_id", "dimension", "verdict", "note"))
    for result in audited:
        for verdict in result.report.verdicts:
            writer.writerow((result.entry.work_id, verdict.dimension,
                             verdict.verdict, verdict.note))

    summary = corpus_summary([(r.stats, r.report.verdicts) for r in audited])
    out.write("# summary\n")
    out.write(f"works: {summary['works']}\n")
    out.write(f"scored: {summary['scored']}\n")
    for dimension, counts in summary["verdict_counts"].items():
        tallies = ", ".join(f"{verdict} {count}" for verdict, count in counts.items())
        out.write(f"{dimension}: {tallies}\n")
    for field in ("mean_segmentation_f1", "mean_boundary_match_pct"):
        value = summary[field]
        out.write(f"{field}: {'n/a' if value is None else format(value, '.6f')}\n")
    tonal = ", ".join(f"{kind} {count}"
                      for kind, count in summary["tonal_counts"].items())
    out.write(f"tonal: {tonal}\n")
    return summary


def cmd_batch(args: argparse.Namespace) -> int:
    manifest = read_manifest(args.manifest)
    config = load_config(args.config)
    profiles, adjacency = _resolve_db(args.db)
    tolerance = config["audit"]["boundary_tolerance"]

    def work(entry: ManifestEntry) -> _WorkResult:
        return _analyze_entry(entry, config, profiles, adjacency, tolerance)

    jobs = max(1, args.jobs)
    if jobs == 1:
        results = [work(entry) for entry in manifest.entries]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, manifest.entries))

    for result in results:
        _print_warnings(result.entry.work_id, result.warnings)
        if result.error is not None:
            print(f"{result.entry.work_id}: failed:"
                  f" {type(result.error).__name__}: {result.error}",
                  file=sys.stderr)

    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for result in results:
            if result.machine is not None:
                target = out_dir / f"{work_slug(result.entry.work_id)}.json"
                target.write_text(result.machine, encoding="utf-8")

    summary = _print_batch(results, sys.stdout)

    if args.figures:
        # pyplot is not thread-safe, so figures render here, after the pool.
        from .figures import save_corpus_figure, save_report_figures

        for result in results:
            if result.report is not None:
                save_report_figures(result.score, result.report, args.figures)
        if summary is not None:
            save_corpus_figure(summary, Path(args.figures) / "corpus_summary.png")

    failed = sum(1 for r in results if r.error is not None)
    return EXIT_FAILURES if failed else EXIT_OK


# ------------------------------------------------------------------- compare

def cmd_compare(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    _profiles, adjacency = _resolve_db(args.db)
    try:
        text = Path(args.report).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {args.report}: {exc}") from exc
    report = parse_machine_report(text)
    reference = read_reference(args.reference)

    stats = compare_to_reference(report, reference,
                                 config["audit"]["boundary_tolerance"])
    verdicts = audit_consistency(report, reference, adjacency, config)

    print(f"work: {reference.work_id}")
    print(f"segmentation_precision: {stats.segmentation_precision:.6f}")
    print(f"segmentation_recall: {stats.segmentation_recall:.6f}")
    print(f"segmentation_f1: {stats.segmentation_f1:.6f}")
    print(f"boundary_match_pct: {stats.boundary_match_pct:.6f}")
    print(f"tonal_agreement: {stats.tonal_agreement}")
    print(f"modulation_jaccard: {stats.modulation_jaccard:.6f}")
    for verdict in verdicts:
        print(f"{verdict.dimension}: {verdict.verdict} ({verdict.note})")
    return EXIT_OK


# ------------------------------------------------------------------------ db

def cmd_db(args: argparse.Namespace) -> int:
    raw = args.path or os.environ.get(STYLE_DB_ENV)
    if not raw:
        print(f"error: no database path given and {STYLE_DB_ENV} is unset",
              file=sys.stderr)
        return EXIT_PARSE
    path = Path(raw)

    if args.action == "init":
        if path.exists() and not args.force:
            print(f"error: {path} exists; pass --force to overwrite",
                  file=sys.stderr)
            return EXIT_EXISTS
        path.write_text(json.dumps(seed_document(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")
        print(f"wrote {len(seed_profiles())} profiles to {path}")
        return EXIT_OK

    profiles, _adjacency = read_style_db(path)
    for profile in profiles:
        print(profile.label)
    return EXIT_OK


# ------------------------------------------------------------------ argparse

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scoreagents",
        description="Multi-agent analysis of symbolic music:"
                    " form, harmony, and style.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH",
                       help="JSON file of agent parameters merged over defaults")
        p.add_argument("--db", metavar="PATH",
                       help="style profile database"
                            f" (default: ${STYLE_DB_ENV} or built-in seed)")

    p = sub.add_parser("analyze", help="analyze one work")
    p.add_argument("path", help="MusicXML, MIDI, or kern file")
    p.add_argument("--format", choices=[f.value for f in SourceFormat],
                   help="parse as this format instead of sniffing the content")
    common(p)
    p.add_argument("--reference", metavar="PATH",
                   help="reference annotation to audit the analysis against")
    p.add_argument("--out-json", metavar="PATH", help="write the machine report")
    p.add_argument("--out-text", metavar="PATH", help="write the human report")
    p.add_argument("--out-musicxml", metavar="PATH",
                   help="write the score as annotated MusicXML")
    p.add_argument("--figures", metavar="DIR", help="render figure PNGs into DIR")
    p.add_argument("--seed", type=int, metavar="N",
                   help="reserved; analysis is deterministic")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("batch", help="analyze every work in a manifest")
    p.add_argument("manifest", help="corpus manifest CSV")
    common(p)
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="works analyzed concurrently (output order is"
                        " manifest order regardless)")
    p.add_argument("--out-dir", metavar="DIR",
                   help="write per-work machine reports into DIR")
    p.add_argument("--figures", metavar="DIR",
                   help="render per-work and corpus figure PNGs into DIR")
    p.add_argument("--seed", type=int, metavar="N",
                   help="reserved; analysis is deterministic")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("compare",
                       help="score a saved machine report against a reference")
    p.add_argument("report", help="machine report JSON")
    p.add_argument("reference", help="reference annotation JSON")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("db", help="create or check a style profile database")
    p.add_argument("action", choices=("init", "validate"))
    p.add_argument("path", nargs="?",
                   help=f"database file (default: ${STYLE_DB_ENV})")
    p.add_argument("--force", action="store_true",
                   help="let init overwrite an existing file")
    p.set_defaults(func=cmd_db)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WorkMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ParseError, UnsupportedFormatError, SchemaError, MetricError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (AnalysisError, PlanError, ScoreAgentsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
