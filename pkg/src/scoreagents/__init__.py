"""Multi-agent symbolic music analysis toolkit.

Parses MusicXML / MIDI / Humdrum kern scores into a common score model,
runs structural, harmonic, and stylistic analysis agents under a
coordinator, and evaluates the integrated reports against reference
annotations.
"""

__version__ = "0.1.0"

from .coordinator import (  # noqa: E402
    AnalysisReport,
    audit_consistency,
    plan,
    run_analysis,
    synthesize_report,
)
from .ingest import load_path, parse_bytes  # noqa: E402
from .model import Score, validate  # noqa: E402

__all__ = [
    "AnalysisReport",
    "Score",
    "audit_consistency",
    "load_path",
    "parse_bytes",
    "plan",
    "run_analysis",
    "synthesize_report",
    "validate",
    "__version__",
]
