# scripts/config.py
"""
Runtime configuration for the spsver verification toolchain.

Env vars (optionally set in .env.spsver at the repository root, git-ignored):
    SPSVER_AT_BOUND          - block | freeze: request at a saturated counter
                               (default block)
    SPSVER_GROUNDING_DOMAIN  - example | prose: expand quantifiers over
                               {1..4r} or {1..r} (default example)
    SPSVER_MAX_STATES        - capacity of the bounded expansion (default 200000)
    SPSVER_BRUTE_STEM_MAX    - lasso oracle stem limit (default 6)
    SPSVER_BRUTE_CYCLE_MAX   - lasso oracle cycle limit (default 6)
    SPSVER_BRUTE_MAX_STATES  - largest structure the oracle accepts (default 200)
    SPSVER_BRUTE_MAX_LASSOS  - largest lasso enumeration (default 200000)
    SPSVER_LOG_LEVEL         - logging level for the CLI and harness (default WARNING)
"""
from __future__ import annotations

import os
from pathlib import Path

from dotenv import load_dotenv

_REPO_ROOT = Path(__file__).parent.parent

# Existing environment variables take precedence over the file.
load_dotenv(_REPO_ROOT / ".env.spsver", override=False)


def _get(key: str, default=None):
    return os.environ.get(key, default)


def _choice(key: str, default: str, allowed: tuple[str, ...]) -> str:
    value = _get(key, default).strip().lower()
    if value not in allowed:
        raise ValueError(f"{key} must be one of {', '.join(allowed)}; got {value!r}")
    return value


AT_BOUND_CHOICES = ("block", "freeze")
GROUNDING_DOMAIN_CHOICES = ("example", "prose")

# Bounded expansion
AT_BOUND          = _choice("SPSVER_AT_BOUND", "block", AT_BOUND_CHOICES)
MAX_STATES        = int(_get("SPSVER_MAX_STATES", "200000"))

# Grounding: "example" expands over {1..n_i} with n_i = 4*r_i, "prose" over {1..r_i}
GROUNDING_DOMAIN  = _choice("SPSVER_GROUNDING_DOMAIN", "example", GROUNDING_DOMAIN_CHOICES)

# Lasso-enumeration oracle
BRUTE_STEM_MAX    = int(_get("SPSVER_BRUTE_STEM_MAX", "6"))
BRUTE_CYCLE_MAX   = int(_get("SPSVER_BRUTE_CYCLE_MAX", "6"))
BRUTE_MAX_STATES  = int(_get("SPSVER_BRUTE_MAX_STATES", "200"))
BRUTE_MAX_LASSOS  = int(_get("SPSVER_BRUTE_MAX_LASSOS", "200000"))

LOG_LEVEL         = _get("SPSVER_LOG_LEVEL", "WARNING").upper()
