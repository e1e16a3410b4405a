"""Per-iteration trace records and their CSV serialization.

Row t describes the iterate x_t: objective, subspace error, orthogonality
violation, and the dual norm of the Riemannian gradient there, plus the
step size and inner-iteration count of the step taken *from* x_t (zero on
the final row, where no step follows). Floats are written with 17
significant digits so traces round-trip bit-faithfully.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

CSV_COLUMNS = (
    "iter",
    "objective",
    "subspace_error",
    "orth_violation",
    "grad_dual_norm",
    "step_size",
    "inner_iters",
    "elapsed_s",
)


@dataclass
class TraceRecord:
    iter: int
    objective: float
    subspace_error: float
    orth_violation: float
    grad_dual_norm: float
    step_size: float
    inner_iters: int
    elapsed_s: float


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_trace_csv(path, records: list[TraceRecord]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    r.iter,
                    _fmt(r.objective),
                    _fmt(r.subspace_error),
                    _fmt(r.orth_violation),
                    _fmt(r.grad_dual_norm),
                    _fmt(r.step_size),
                    r.inner_iters,
                    _fmt(r.elapsed_s),
                ]
            )


def read_trace_csv(path) -> list[TraceRecord]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader, ()))
        if header != CSV_COLUMNS:
            raise ConfigurationError(
                f"trace file {path} has columns {header}, expected {CSV_COLUMNS}"
            )
        records = []
        for row in reader:
            records.append(
                TraceRecord(
                    iter=int(row[0]),
                    objective=float(row[1]),
                    subspace_error=float(row[2]),
                    orth_violation=float(row[3]),
                    grad_dual_norm=float(row[4]),
                    step_size=float(row[5]),
                    inner_iters=int(row[6]),
                    elapsed_s=float(row[7]),
                )
            )
    return records
