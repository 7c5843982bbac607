"""Parsing, validation and per-cycle splitting of raw reset-sweep measurements.

The on-disk format is CSV with a mandatory ``t,v,i`` header (optionally
``t,v,i,cycle``), SI units, ``.`` decimal point and ``#`` comment lines.
An optional ``# units: t=s v=V i=A`` comment is checked; any other unit
declaration is rejected rather than converted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import TraceFormatError, TraceValidationError

HEADER_PLAIN = ("t", "v", "i")
HEADER_CYCLE = ("t", "v", "i", "cycle")
UNITS_COMMENT = "# units: t=s v=V i=A"
_UNITS_RE = re.compile(r"#\s*units\s*:\s*(.*)", re.IGNORECASE)
_EXPECTED_UNITS = {"t": "s", "v": "V", "i": "A"}

MIN_SAMPLES = 4


@dataclass(frozen=True)
class SweepSample:
    """One measured point: time in seconds, voltage in volts, current in amperes."""

    t: float
    v: float
    i: float


@dataclass
class SweepTrace:
    """Time-ordered samples of a single reset cycle.

    ``t`` must be strictly increasing and all values finite; use
    :func:`validate_trace` for a non-raising report.
    """

    t: np.ndarray
    v: np.ndarray
    i: np.ndarray
    cycle_id: int = 0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.i = np.asarray(self.i, dtype=float)
        if not (self.t.shape == self.v.shape == self.i.shape):
            raise TraceValidationError("t, v, i must have identical lengths")

    def __len__(self):
        return self.t.size

    def sample(self, index: int) -> SweepSample:
        return SweepSample(float(self.t[index]), float(self.v[index]), float(self.i[index]))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self) else 0.0


@dataclass
class CycleSet:
    """A collection of per-cycle traces from one source (file, simulation run)."""

    traces: list[SweepTrace] = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        ids = [tr.cycle_id for tr in self.traces]
        if len(ids) != len(set(ids)):
            raise TraceValidationError("cycle_id values must be unique within a CycleSet")

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)


@dataclass(frozen=True)
class TraceIssue:
    """One validation finding: sample index (or -1 for whole-trace issues) and message."""

    index: int
    message: str


def validate_trace(trace: SweepTrace) -> list[TraceIssue]:
    """Report invariant violations without mutating or raising.

    Checks: finite values, strictly increasing time, minimum sample count.
    """
    issues: list[TraceIssue] = []
    n = len(trace)
    if n < MIN_SAMPLES:
        issues.append(TraceIssue(-1, f"trace has {n} samples, minimum is {MIN_SAMPLES}"))
    for name, arr in (("t", trace.t), ("v", trace.v), ("i", trace.i)):
        bad = np.nonzero(~np.isfinite(arr))[0]
        for k in bad:
            issues.append(TraceIssue(int(k), f"non-finite {name} at index {int(k)}"))
    if n >= 2:
        dt = np.diff(trace.t)
        for k in np.nonzero(dt <= 0)[0]:
            kind = "duplicated" if dt[k] == 0 else "decreasing"
            issues.append(TraceIssue(int(k) + 1, f"{kind} timestamp at index {int(k) + 1}"))
    return issues


def _check_units_comment(text: str, line_no: int) -> None:
    m = _UNITS_RE.match(text)
    if not m:
        return
    declared = {}
    for token in m.group(1).split():
        if "=" not in token:
            raise TraceFormatError(f"malformed units declaration {token!r}", line=line_no)
        key, _, unit = token.partition("=")
        declared[key.strip()] = unit.strip()
    for key, expected in _EXPECTED_UNITS.items():
        got = declared.get(key, expected)
        if got != expected:
            raise TraceFormatError(
                f"unit {key}={got!r} not supported; traces must be SI ({key}={expected})",
                line=line_no,
            )


def parse_trace_file(data: bytes | str, source: str = "<memory>") -> CycleSet:
    """Parse CSV trace content into a CycleSet, one trace per ``cycle`` value.

    Without a ``cycle`` column the whole file is a single trace with
    cycle_id 0 (use :func:`split_cycles` to break up concatenated sweeps).
    Raises TraceFormatError with the offending 1-based line number.
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TraceFormatError(f"not valid UTF-8 text: {exc}") from None
    else:
        text = data

    header: tuple[str, ...] | None = None
    order: list[int] = []
    rows: dict[int, list[tuple[float, float, float]]] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _check_units_comment(line, line_no)
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            cols = tuple(f.lower() for f in fields)
            if cols not in (HEADER_PLAIN, HEADER_CYCLE):
                raise TraceFormatError(
                    f"expected header 't,v,i' or 't,v,i,cycle', got {line!r}", line=line_no
                )
            header = cols
            continue
        if len(fields) != len(header):
            raise TraceFormatError(
                f"expected {len(header)} columns, got {len(fields)}", line=line_no
            )
        try:
            t = float(fields[0])
            v = float(fields[1])
            i = float(fields[2])
        except ValueError:
            raise TraceFormatError(f"malformed numeric value in row {line!r}", line=line_no) from None
        if not (math.isfinite(t) and math.isfinite(v) and math.isfinite(i)):
            raise TraceFormatError("non-finite value in row", line=line_no)
        if header is HEADER_CYCLE or len(header) == 4:
            try:
                cyc = int(fields[3])
            except ValueError:
                raise TraceFormatError(f"malformed cycle label {fields[3]!r}", line=line_no) from None
            if cyc < 0:
                raise TraceFormatError("cycle labels must be non-negative", line=line_no)
        else:
            cyc = 0
        if cyc not in rows:
            rows[cyc] = []
            order.append(cyc)
        rows[cyc].append((t, v, i))

    if header is None:
        raise TraceFormatError("empty file: no header found")
    if not rows:
        raise TraceFormatError("empty file: no data rows")

    traces = []
    for cyc in order:
        samples = np.asarray(rows[cyc], dtype=float)
        trace = SweepTrace(samples[:, 0], samples[:, 1], samples[:, 2], cycle_id=cyc)
        if len(trace) < MIN_SAMPLES:
            raise TraceFormatError(
                f"cycle {cyc} has {len(trace)} samples, minimum is {MIN_SAMPLES}"
            )
        dt = np.diff(trace.t)
        bad = np.nonzero(dt <= 0)[0]
        if bad.size:
            k = int(bad[0])
            kind = "duplicate" if dt[k] == 0 else "non-monotone"
            raise TraceFormatError(
                f"{kind} timestamp in cycle {cyc} at sample {k + 1} (t={trace.t[k + 1]!r})"
            )
        traces.append(trace)
    return CycleSet(traces=traces, source=source)


def write_trace_csv(cycles: CycleSet | SweepTrace) -> str:
    """Serialize traces to the CSV format :func:`parse_trace_file` accepts.

    Floats are written with ``repr`` so a parse round-trip is value-exact.
    A ``cycle`` column is emitted whenever the set holds more than one trace.
    """
    if isinstance(cycles, SweepTrace):
        cycles = CycleSet(traces=[cycles], source="")
    multi = len(cycles) > 1
    lines = [UNITS_COMMENT, "t,v,i,cycle" if multi else "t,v,i"]
    for trace in cycles:
        for t, v, i in zip(trace.t, trace.v, trace.i):
            row = f"{t!r},{v!r},{i!r}"
            if multi:
                row += f",{trace.cycle_id}"
            lines.append(row)
    return "\n".join(lines) + "\n"


def split_cycles(trace: SweepTrace, threshold_v: float) -> list[SweepTrace]:
    """Split a concatenated multi-sweep trace at voltage returns to zero.

    A cut is made where |v| drops below ``threshold_v`` after having
    exceeded it; the low-voltage boundary run is assigned to the following
    cycle. A trailing low-voltage run with no later sweep stays with the
    last cycle. Returns ``[trace]`` unchanged when no split point exists.
    """
    if threshold_v <= 0:
        raise ValueError("threshold_v must be positive")
    absv = np.abs(trace.v)
    cuts: list[int] = []
    armed = False
    for k in range(len(trace)):
        if absv[k] > threshold_v:
            armed = True
        elif armed:
            cuts.append(k)
            armed = False
    # a cut with no later above-threshold sample would create a zero-only
    # tail; keep that run attached to the final sweep instead
    while cuts and not np.any(absv[cuts[-1]:] > threshold_v):
        cuts.pop()
    if not cuts:
        return [trace]
    bounds = [0, *cuts, len(trace)]
    pieces = []
    for idx, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
        piece = SweepTrace(trace.t[a:b], trace.v[a:b], trace.i[a:b], cycle_id=idx)
        if len(piece) < MIN_SAMPLES:
            raise TraceValidationError(
                f"split produced a {len(piece)}-sample cycle at samples [{a}, {b}); "
                "threshold_v is likely too aggressive for this trace"
            )
        pieces.append(piece)
    return pieces
