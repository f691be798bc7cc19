"""Problem files, run reports, and atomic JSON/CSV emission.

A problem file is a single JSON document with an explicit version field;
unknown fields are rejected with their location so that typos cannot
silently change a run.  All numeric fields round-trip losslessly: floats
are serialized with Python's shortest round-trip representation.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .core import switched_system
from .errors import ProblemFileError
from .optimal_control import OCProblem, OptimizationReport, Sense

PROBLEM_FILE_VERSION = 1

_TOP_FIELDS = {"version", "n", "matrices", "x0", "T", "sense", "options"}
_OPTION_FIELDS = {"max_switches", "grid", "time_bins", "seed"}
_SENSE_ALIASES = {
    "minimize": Sense.MINIMIZE,
    "min": Sense.MINIMIZE,
    "maximize": Sense.MAXIMIZE,
    "max": Sense.MAXIMIZE,
}


@dataclass(frozen=True)
class SolverOptions:
    max_switches: Optional[int] = None
    grid: int = 16
    time_bins: int = 96
    seed: int = 0


@dataclass(frozen=True)
class ProblemFile:
    version: int
    n: int
    matrices: tuple
    x0: tuple
    T: float
    sense: str = "minimize"
    options: SolverOptions = field(default_factory=SolverOptions)


def _require_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError(f"expected a number, got {value!r}", where)
    return float(value)


def _require_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ProblemFileError(f"expected an integer, got {value!r}", where)
    return int(value)


def parse_problem_file(path: str) -> ProblemFile:
    """Parse and structurally validate a problem file.

    Structural problems (malformed JSON, unknown or missing fields, shape
    mismatches) raise ProblemFileError carrying the JSON location; matrix
    semantics (Metzler, row sums) are checked later by validation.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(
            f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            path,
        ) from exc
    except OSError as exc:
        raise ProblemFileError(str(exc), path) from exc

    if not isinstance(doc, dict):
        raise ProblemFileError("top level must be a JSON object", "$")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise ProblemFileError(
            f"unknown fields {sorted(unknown)}", "$." + sorted(unknown)[0]
        )
    for required in ("version", "n", "matrices", "x0", "T"):
        if required not in doc:
            raise ProblemFileError(f"missing required field {required!r}", "$")

    version = _require_int(doc["version"], "$.version")
    if version != PROBLEM_FILE_VERSION:
        raise ProblemFileError(
            f"unsupported version {version}; this tool reads version "
            f"{PROBLEM_FILE_VERSION}",
            "$.version",
        )
    n = _require_int(doc["n"], "$.n")
    if n < 1:
        raise ProblemFileError("n must be positive", "$.n")

    raw_mats = doc["matrices"]
    if not isinstance(raw_mats, list) or not raw_mats:
        raise ProblemFileError("matrices must be a non-empty list", "$.matrices")
    matrices = []
    for mi, mat in enumerate(raw_mats):
        where = f"$.matrices[{mi}]"
        if not isinstance(mat, list) or len(mat) != n:
            raise ProblemFileError(f"expected {n} rows", where)
        rows = []
        for ri, row in enumerate(mat):
            if not isinstance(row, list) or len(row) != n:
                raise ProblemFileError(f"expected {n} entries", f"{where}[{ri}]")
            rows.append(
                tuple(
                    _require_number(v, f"{where}[{ri}][{ci}]")
                    for ci, v in enumerate(row)
                )
            )
        matrices.append(tuple(rows))

    raw_x0 = doc["x0"]
    if not isinstance(raw_x0, list) or len(raw_x0) != n:
        raise ProblemFileError(f"x0 must hold {n} numbers", "$.x0")
    x0 = tuple(_require_number(v, f"$.x0[{i}]") for i, v in enumerate(raw_x0))

    horizon = _require_number(doc["T"], "$.T")
    if not horizon > 0.0:
        raise ProblemFileError("T must be positive", "$.T")

    sense = doc.get("sense", "minimize")
    if not isinstance(sense, str) or sense.lower() not in _SENSE_ALIASES:
        raise ProblemFileError(
            f"sense must be one of {sorted(_SENSE_ALIASES)}, got {sense!r}", "$.sense"
        )

    options = SolverOptions()
    if "options" in doc:
        raw_opts = doc["options"]
        if not isinstance(raw_opts, dict):
            raise ProblemFileError("options must be an object", "$.options")
        unknown = set(raw_opts) - _OPTION_FIELDS
        if unknown:
            raise ProblemFileError(
                f"unknown option {sorted(unknown)}", "$.options." + sorted(unknown)[0]
            )
        kwargs = {}
        for key in _OPTION_FIELDS:
            if key in raw_opts and raw_opts[key] is not None:
                kwargs[key] = _require_int(raw_opts[key], f"$.options.{key}")
        options = SolverOptions(**kwargs)

    return ProblemFile(
        version=version,
        n=n,
        matrices=tuple(matrices),
        x0=x0,
        T=horizon,
        sense=sense.lower(),
        options=options,
    )


def problem_to_dict(pf: ProblemFile) -> dict:
    """Lossless echo of a parsed problem file (numeric fields bit-exact)."""
    return {
        "version": pf.version,
        "n": pf.n,
        "matrices": [[list(row) for row in m] for m in pf.matrices],
        "x0": list(pf.x0),
        "T": pf.T,
        "sense": pf.sense,
        "options": asdict(pf.options),
    }


def build_problem(
    pf: ProblemFile,
    tol: Tolerances = DEFAULT_TOLERANCES,
    sense_override: Optional[Sense] = None,
) -> OCProblem:
    """Semantic validation: build the switched system and the problem."""
    sys = switched_system([np.array(m) for m in pf.matrices], tol)
    sense = sense_override if sense_override is not None else _SENSE_ALIASES[pf.sense]
    return OCProblem(sys=sys, x0=np.array(pf.x0), horizon=pf.T, sense=sense)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


def report_to_dict(report: OptimizationReport, include_paths: bool = True) -> dict:
    """Flatten an OptimizationReport for serialization.

    Dense trajectory samples belong in the CSV emitter; the JSON report
    carries the control, cost, residual, terminal state, and (optionally)
    the sampled switching functions.
    """
    out = {
        "method": report.method.value,
        "cost": report.cost,
        "mp_residual": report.mp_residual,
        "flags": list(report.flags),
        "control": {
            "breakpoints": report.control.breakpoints.tolist(),
            "values": report.control.values.tolist(),
        },
        "final_state": report.trajectory.final_state.tolist(),
        "final_costate": report.adjoint.final_costate.tolist(),
    }
    if include_paths:
        out["switching"] = {
            "times": report.switching.times.tolist(),
            "values": report.switching.values.tolist(),
        }
        if report.switching.values.shape[1] == 2:
            out["switching"]["margin"] = report.switching.margin().tolist()
    return out


def _umask_chmod(path: str) -> None:
    mask = os.umask(0)
    os.umask(mask)
    os.chmod(path, 0o666 & ~mask)


def write_json_atomic(path: str, data: dict) -> None:
    """Serialize deterministically and rename into place."""
    text = json.dumps(data, indent=2, sort_keys=True)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.write("\n")
        _umask_chmod(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(path: str, header: list, rows) -> None:
    """CSV with '.' decimals, ',' separators, LF endings, 17 significant
    digits; written to a temp file and renamed into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        _umask_chmod(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
