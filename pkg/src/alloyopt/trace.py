"""Iterate history shared by both optimizers, with deterministic CSV export.

Result CSVs must be byte-identical across repeated seeded runs, so wall
times are segregated into a ``<stem>.timing.csv`` sidecar by default;
``timing="inline"`` writes the single combined file used for
time-versus-radius reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class TraceRecord:
    index: int
    x: np.ndarray
    objective: float
    max_violation: float
    radius: float
    wall_time: float
    merit: float = math.nan
    g1_abs: float = math.nan
    g2: float = math.nan
    grad_norm: float = math.nan
    cycle: int = 0


@dataclass
class OptTrace:
    """Evaluation (DFO) or iteration (gradient) history of one run."""

    kind: str  # "dfo" | "grad"
    records: list[TraceRecord] = field(default_factory=list)
    termination: str = "running"

    def best_merit_sequence(self) -> np.ndarray:
        """Running minimum of the recorded merit values (NaN-tolerant)."""
        merits = np.array([r.merit for r in self.records])
        return np.fmin.accumulate(merits)

    def best_record(self) -> TraceRecord:
        finite = [r for r in self.records if math.isfinite(r.merit)]
        pool = finite if finite else self.records
        return min(pool, key=lambda r: (r.merit, r.index))

    def final_record(self) -> TraceRecord:
        return self.records[-1]


_COLUMNS = {
    "dfo": ("eval_index", "rho", "merit", "objective", "max_violation"),
    "grad": ("iter", "merit", "objective", "g1_abs", "g2", "trust_radius", "grad_norm"),
}


def _fields(r: TraceRecord, kind: str):
    if kind == "dfo":
        return (r.index, r.radius, r.merit, r.objective, r.max_violation)
    return (r.index, r.merit, r.objective, r.g1_abs, r.g2, r.radius, r.grad_norm)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def export_trace(trace: OptTrace, path, timing: str = "separate") -> None:
    """Write the trace as CSV; floats via repr for stable bytes.

    ``timing="separate"`` (default) keeps the main file deterministic and
    writes wall times next to it; ``timing="inline"`` appends a
    wall_time_s column instead.
    """
    if timing not in ("separate", "inline"):
        raise ValueError(f"timing must be 'separate' or 'inline', got {timing!r}")
    path = Path(path)
    cols = _COLUMNS[trace.kind]
    lines = []
    if timing == "inline":
        lines.append(",".join(cols + ("wall_time_s",)))
        for r in trace.records:
            lines.append(",".join(_fmt(v) for v in (*_fields(r, trace.kind), r.wall_time)))
    else:
        lines.append(",".join(cols))
        for r in trace.records:
            lines.append(",".join(_fmt(v) for v in _fields(r, trace.kind)))
    lines.append(f"# termination: {trace.termination}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if timing == "separate":
        key = cols[0]
        tlines = [f"{key},wall_time_s"]
        for r in trace.records:
            tlines.append(f"{r.index},{repr(float(r.wall_time))}")
        path.with_suffix(".timing.csv").write_text("\n".join(tlines) + "\n", encoding="utf-8")
