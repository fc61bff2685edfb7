"""Matplotlib renderings of analysis results.

Three per-work panels (structure, key trajectory, style distribution) plus
one corpus-level verdict chart. Each figure is written to its own PNG so the
text reports stay plain; the CLI drops them next to its delimited output.
Rendering the self-similarity panel needs the original Score, so the
per-work entry point takes both the score and its report.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .metrics import VERDICT_VALUES
from .report import work_slug
from .structural import extract_frames, novelty_curve, self_similarity

DPI = 120

_VERDICT_COLORS = {
    "Consistent": "tab:green",
    "MinorError": "tab:orange",
    "Hallucination": "tab:red",
}


def _structure_figure(score, outline, path: Path) -> bool:
    frames = extract_frames(score)
    if len(frames) < 2:
        return False
    S = self_similarity(frames)
    novelty = novelty_curve(S)
    fig, (ax_ssm, ax_nov) = plt.subplots(
        2, 1, figsize=(6.4, 7.2), height_ratios=(4, 1), sharex=True,
        layout="constrained")
    ax_ssm.imshow(S, origin="lower", cmap="magma", aspect="equal",
                  interpolation="nearest")
    ax_ssm.set_ylabel("measure")
    ax_ssm.set_title("self-similarity")
    ax_nov.plot(range(len(novelty)), novelty, color="tab:blue", linewidth=1.2)
    for seg in outline.segments[1:]:
        ax_nov.axvline(seg.start_measure, color="tab:red", linewidth=0.9,
                       linestyle="--")
    ax_nov.set_xlabel("measure")
    ax_nov.set_ylabel("novelty")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return True


def _key_figure(harmony, path: Path) -> bool:
    if not harmony.trajectory:
        return False
    order: list[str] = []
    for _span, key in harmony.trajectory:
        if key.name not in order:
            order.append(key.name)
    fig, ax = plt.subplots(figsize=(6.4, 2.4 + 0.3 * len(order)), layout="constrained")
    for (start, end), key in harmony.trajectory:
        ax.hlines(order.index(key.name), float(start), float(end),
                  color="tab:blue", linewidth=4)
    for beat in harmony.modulations:
        ax.axvline(float(beat), color="tab:red", linewidth=0.9, linestyle="--")
    ax.set_yticks(range(len(order)), order)
    ax.set_ylim(-0.5, len(order) - 0.5)
    ax.set_xlabel("beat")
    ax.set_title(f"key trajectory (global: {harmony.global_key.name})")
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return True


def _style_figure(style, path: Path) -> bool:
    if not style.distribution:
        return False
    ranked = sorted(style.distribution.items(), key=lambda kv: kv[1])
    labels = [label for label, _w in ranked]
    weights = [w for _label, w in ranked]
    colors = ["tab:orange" if label == style.top_label else "tab:blue"
              for label in labels]
    fig, ax = plt.subplots(figsize=(6.4, 0.45 * len(labels) + 1.2),
                           layout="constrained")
    ax.barh(range(len(labels)), weights, color=colors)
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("weight")
    title = f"style attribution: {style.top_label}"
    if style.degenerate:
        title += " (uninformative)"
    ax.set_title(title)
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return True


def save_report_figures(score, report, out_dir: str | Path) -> list[Path]:
    """Render one PNG per available payload; returns the paths written.

    Not thread-safe: pyplot keeps global state, so callers running works
    in parallel must render figures from a single thread.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = work_slug(report.source.get("work_id", "work"))
    written: list[Path] = []
    panels = (
        (report.outline, "structure",
         lambda path: _structure_figure(score, report.outline, path)),
        (report.harmony, "keys",
         lambda path: _key_figure(report.harmony, path)),
        (report.style, "style",
         lambda path: _style_figure(report.style, path)),
    )
    for payload, kind, render in panels:
        if payload is None:
            continue
        path = out_dir / f"{stem}_{kind}.png"
        if render(path):
            written.append(path)
    return written


def save_corpus_figure(summary: dict, path: str | Path) -> Path:
    """Grouped bar chart of verdict counts per audited dimension."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = summary["verdict_counts"]
    dims = list(counts)
    fig, ax = plt.subplots(figsize=(1.8 * max(len(dims), 2) + 2.0, 4.0),
                           layout="constrained")
    width = 0.8 / len(VERDICT_VALUES)
    for vi, verdict in enumerate(VERDICT_VALUES):
        xs = [di + (vi - 1) * width for di in range(len(dims))]
        ys = [counts[dim][verdict] for dim in dims]
        ax.bar(xs, ys, width=width, label=verdict,
               color=_VERDICT_COLORS[verdict])
    ax.set_xticks(range(len(dims)), dims)
    ax.set_ylabel("works")
    ax.set_title(f"consistency verdicts ({summary['scored']} scored works)")
    ax.legend()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path
