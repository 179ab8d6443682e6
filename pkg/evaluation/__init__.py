"""Acceptance harness for the spsver toolchain.

Checks the bound, grounding, SMV, checker, expansion and corpus criteria
over the shipped fixtures.

Run from repo root:
    python -m evaluation.harness
"""

from evaluation.properties import (  # noqa: F401
    adequacy_mismatches,
    flag_assignments,
    invariant_violations,
    random_sentence,
    sampled_flag_assignments,
    simulation_mismatches,
)
