"""Shared numerical tolerance record.

Every accept/reject decision in the package (matrix validation, rank tests,
positive-definiteness checks, tie gaps in the optimality conditions) reads
from a single Tolerances record so that results are reproducible across
modules and runs.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # row-sum / Metzler slack, scaled by max(1, max|entry|) of the matrix
    row_sum: float = 1e-12
    # smallest admissible eigenvalue for a "positive definite" verdict
    positive_definite: float = 1e-10
    # numerical rank threshold, relative to the largest singular value
    rank_rel: float = 1e-9
    # tie gap for the switching-function optimality residual,
    # relative to the sup-norm of the switching functions
    mp_gap_rel: float = 1e-9
    # admissible drift of the costate zero-sum first integral
    adjoint_zero_sum: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()

ENV_TOL_FILE = "CONSENSUS_OPT_TOL_FILE"

_FIELD_NAMES = {f.name for f in dataclasses.fields(Tolerances)}


def load_tolerances(path: str) -> Tolerances:
    """Load a Tolerances record from a JSON file; unknown keys are rejected."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: tolerance file must hold a JSON object")
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ValueError(f"{path}: unknown tolerance keys {sorted(unknown)}")
    return Tolerances(**{k: float(v) for k, v in data.items()})


def tolerances_from_env() -> Tolerances:
    """Return the default record, or the one named by CONSENSUS_OPT_TOL_FILE."""
    path = os.environ.get(ENV_TOL_FILE)
    if path:
        return load_tolerances(path)
    return DEFAULT_TOLERANCES
