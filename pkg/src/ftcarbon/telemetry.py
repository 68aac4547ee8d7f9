"""Resource-usage traces and time-weighted utilization.

Trace CSV (UTF-8, comma separated, header required)::

    t_seconds,cpu_util,gpu_util,gpu_mem_gb,sys_mem_gb
    0,0.95,1.0,31.2,40.5
    30,0.40,0.98,31.2,40.7

A utilization column whose header ends in ``%`` (``gpu_util%``) holds
percentages and is converted to a fraction on read.

Utilization is integrated with a left-constant hold: the value sampled at
``t[i]`` applies on ``[t[i], t[i+1])``. The last sample only closes the
final interval and carries no weight.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .errors import (
    BadHeader,
    FileUnreadable,
    MalformedRow,
    NonMonotoneTimestamps,
    TraceTooShort,
    ValueOutOfRange,
)
from .estimator import FootprintResult, RunSpec, estimate
from .registry import FacilityProfile, HardwareProfile

COLUMNS = ("t_seconds", "cpu_util", "gpu_util", "gpu_mem_gb", "sys_mem_gb")
_UTIL_COLUMNS = ("cpu_util", "gpu_util")


@dataclass(frozen=True)
class TelemetrySample:
    t_seconds: float
    cpu_util: float
    gpu_util: float
    gpu_mem_gb: float = 0.0
    sys_mem_gb: float = 0.0

    def __post_init__(self):
        for name in _UTIL_COLUMNS:
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueOutOfRange(f"{name} must be in [0, 1], got {v!r}")
        for name in ("t_seconds", "gpu_mem_gb", "sys_mem_gb"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueOutOfRange(f"{name} must be a finite number >= 0, got {v!r}")


@dataclass(frozen=True)
class TelemetryTrace:
    samples: tuple[TelemetrySample, ...]
    source_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for i in range(1, len(self.samples)):
            if not self.samples[i].t_seconds > self.samples[i - 1].t_seconds:
                # +2: header is row 1, first sample row 2
                raise NonMonotoneTimestamps(i + 2)

    @property
    def duration_seconds(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return self.samples[-1].t_seconds - self.samples[0].t_seconds


@dataclass(frozen=True)
class UtilizationSummary:
    u_cpu_eff: float
    u_gpu_eff: float
    duration_hours: float
    peak_gpu_mem_gb: float
    peak_sys_mem_gb: float


def _parse_header(header: Sequence[str], path) -> list[tuple[str, bool]]:
    cols = []
    for raw in header:
        name = raw.strip()
        percent = name.endswith("%")
        base = name[:-1].strip() if percent else name
        if base not in COLUMNS:
            raise BadHeader(f"{path}: unknown column {name!r}; expected {','.join(COLUMNS)}")
        if percent and base not in _UTIL_COLUMNS:
            raise BadHeader(f"{path}: column {base!r} cannot be given in percent")
        cols.append((base, percent))
    names = [c for c, _ in cols]
    missing = [c for c in COLUMNS if c not in names]
    dupes = sorted({c for c in names if names.count(c) > 1})
    if missing or dupes:
        raise BadHeader(f"{path}: header must contain each of {','.join(COLUMNS)} once"
                        + (f"; missing {','.join(missing)}" if missing else "")
                        + (f"; repeated {','.join(dupes)}" if dupes else ""))
    return cols


def parse_trace(path: str | Path, source_label: str | None = None) -> TelemetryTrace:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read trace {str(path)!r}: {exc}") from None
    if not rows:
        raise BadHeader(f"{path}: empty file, header row required")
    cols = _parse_header(rows[0], path)

    samples: list[TelemetrySample] = []
    prev_t = None
    for rowno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise MalformedRow(f"row {rowno}: expected {len(cols)} fields, got {len(row)}")
        values = {}
        for (name, percent), cell in zip(cols, row):
            try:
                v = float(cell)
            except ValueError:
                raise MalformedRow(f"row {rowno}: {name}={cell.strip()!r} is not a number") from None
            if not math.isfinite(v):
                raise ValueOutOfRange(f"row {rowno}: {name}={cell.strip()!r} is not finite")
            values[name] = v / 100.0 if percent else v
        if prev_t is not None and not values["t_seconds"] > prev_t:
            raise NonMonotoneTimestamps(rowno)
        prev_t = values["t_seconds"]
        try:
            samples.append(TelemetrySample(**values))
        except ValueOutOfRange as exc:
            raise ValueOutOfRange(f"row {rowno}: {exc}") from None
    return TelemetryTrace(tuple(samples), source_label if source_label is not None else path.name)


def _hold_mean(values: Sequence[float], widths: Sequence[float], total: float) -> float:
    mean = math.fsum(v * w for v, w in zip(values, widths)) / total
    # rounding can push the mean a hair outside the sampled range
    return min(max(mean, min(values)), max(values))


def summarize(trace: TelemetryTrace) -> UtilizationSummary:
    s = trace.samples
    if len(s) < 2:
        raise TraceTooShort(f"trace {trace.source_label!r} has {len(s)} sample(s); need at least 2")
    widths = [b.t_seconds - a.t_seconds for a, b in zip(s, s[1:])]
    held = s[:-1]
    total = math.fsum(widths)
    return UtilizationSummary(
        u_cpu_eff=_hold_mean([x.cpu_util for x in held], widths, total),
        u_gpu_eff=_hold_mean([x.gpu_util for x in held], widths, total),
        duration_hours=trace.duration_seconds / 3600.0,
        peak_gpu_mem_gb=max(x.gpu_mem_gb for x in s),
        peak_sys_mem_gb=max(x.sys_mem_gb for x in s),
    )


def effective_estimate(trace: TelemetryTrace, profile: HardwareProfile, facility: FacilityProfile,
                       label: str | None = None, epochs: int = 1) -> FootprintResult:
    """Footprint of the traced interval using measured instead of full utilization."""
    summary = summarize(trace)
    run = RunSpec(label or trace.source_label, summary.duration_hours,
                  u_cpu=summary.u_cpu_eff, u_gpu=summary.u_gpu_eff, epochs=epochs,
                  facility_ref=facility.location_id)
    result = estimate(run, profile, facility)
    return replace(result, source_label=trace.source_label)


def full_usage_estimate(trace: TelemetryTrace, profile: HardwareProfile, facility: FacilityProfile,
                        label: str | None = None, epochs: int = 1) -> FootprintResult:
    """The same interval under the 100 % utilization assumption."""
    summary = summarize(trace)
    run = RunSpec(label or trace.source_label, summary.duration_hours, epochs=epochs,
                  facility_ref=facility.location_id)
    result = estimate(run, profile, facility)
    return replace(result, source_label=trace.source_label)
