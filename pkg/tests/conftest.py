import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SCRIPTS = ROOT / "scripts"

for p in (str(SCRIPTS), str(ROOT)):
    if p not in sys.path:
        sys.path.insert(0, p)

import config  # noqa: E402

DEFAULTS = {
    "AT_BOUND": "block",
    "GROUNDING_DOMAIN": "example",
    "MAX_STATES": 200000,
    "BRUTE_STEM_MAX": 6,
    "BRUTE_CYCLE_MAX": 6,
    "BRUTE_MAX_STATES": 200,
    "BRUTE_MAX_LASSOS": 200000,
}


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    """Pin config to its documented defaults, whatever .env.spsver says."""
    for name, value in DEFAULTS.items():
        monkeypatch.setattr(config, name, value)
