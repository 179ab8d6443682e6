"""Bridge to the toolchain modules (scripts/ is not a package).

Single place where evaluation code reaches into scripts/: keeps the
sys.path shim out of every module and guarantees the harness and the
command line share one implementation.
"""

from __future__ import annotations

import io
import sys
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent
_SCRIPTS = REPO_ROOT / "scripts"
if str(_SCRIPTS) not in sys.path:
    sys.path.insert(0, str(_SCRIPTS))

import bounded_expansion  # noqa: E402  (needs the path shim above)
import grounding  # noqa: E402
import ltl  # noqa: E402
import ltl_checker  # noqa: E402
import mfstl  # noqa: E402
import smv_backend  # noqa: E402
import smv_syntax  # noqa: E402
import sps_model  # noqa: E402
import sps_parser  # noqa: E402
import spsver  # noqa: E402

FIXTURES_DIR = REPO_ROOT / "fixtures"

__all__ = [
    "FIXTURES_DIR",
    "REPO_ROOT",
    "bounded_expansion",
    "grounding",
    "load_combined",
    "load_formula",
    "load_model",
    "ltl",
    "ltl_checker",
    "mfstl",
    "run_cli",
    "smv_backend",
    "smv_syntax",
    "sps_model",
    "sps_parser",
]


def _value(path: Path, result: sps_parser.ParseResult):
    if not result.ok:
        rendered = "; ".join(d.render(str(path)) for d in result.errors)
        raise ValueError(rendered or f"{path}: no value")
    return result.value


def load_model(path: Path) -> sps_model.Sps:
    path = Path(path)
    return _value(path, sps_parser.parse_sps(path.read_text(encoding="utf-8")))


def load_formula(path: Path, alphabet: sps_model.ServiceAlphabet | None = None) -> mfstl.MfstlFormula:
    path = Path(path)
    return _value(path, sps_parser.parse_mfstl(path.read_text(encoding="utf-8"), alphabet))


def load_combined(path: Path) -> sps_parser.CombinedSpec:
    path = Path(path)
    return _value(path, sps_parser.parse_combined(path.read_text(encoding="utf-8")))


def run_cli(argv: list[str]) -> tuple[int, str, str]:
    """Run the command line in-process; returns (exit code, stdout, stderr)."""
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = spsver.main([str(a) for a in argv])
    return code, out.getvalue(), err.getvalue()
