"""Piecewise-constant bandwidth traces: generation, lookup, integration and CSV I/O.

Randomness comes from numpy's PCG64 bit generator (PCG-XSL-RR 128/64), whose raw
output stream numpy keeps stable across platforms and releases. Each segment draws
from its own child stream, ``SeedSequence(seed).spawn(len(segments))[i]``. Gaussian
steps are built from raw 64-bit words with Box-Muller:

    u1 = (w1 >> 11) * 2**-53,  u2 = (w2 >> 11) * 2**-53
    z  = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)

one normal deviate per pair of words. ``Generator`` methods are deliberately avoided
because their algorithms are not covered by numpy's stream-compatibility policy.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptySegments, InvalidBand, IOFailure, OutOfTraceRange, ReversedInterval, TraceError

DEFAULT_BAND = (8.0, 20.0)
_SNAP = 1e-9
_TWO_POW_53 = float(2**53)


class SegmentKind(str, enum.Enum):
    CONSTANT = "Constant"
    LINEAR_RAMP = "LinearRamp"
    RANDOM_WALK = "RandomWalk"
    STEP_DROP = "StepDrop"


_REQUIRED = {
    SegmentKind.CONSTANT: ("level",),
    SegmentKind.LINEAR_RAMP: ("start", "end"),
    SegmentKind.RANDOM_WALK: ("start", "step_stddev"),
    SegmentKind.STEP_DROP: ("high", "low"),
}
_OPTIONAL = {SegmentKind.STEP_DROP: ("drop_fraction",)}


@dataclass(frozen=True)
class TraceSegmentSpec:
    kind: SegmentKind
    duration_s: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", SegmentKind(self.kind))
        except ValueError:
            raise TraceError(f"unknown segment kind {self.kind!r}") from None
        if not self.duration_s > 0:
            raise TraceError(f"segment duration must be > 0, got {self.duration_s}")
        required = _REQUIRED[self.kind]
        allowed = set(required) | set(_OPTIONAL.get(self.kind, ()))
        for key in required:
            if key not in self.params:
                raise TraceError(f"{self.kind.value} segment needs parameter {key!r}")
        for key, value in self.params.items():
            if key not in allowed:
                raise TraceError(f"{self.kind.value} segment does not take parameter {key!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise TraceError(f"segment parameter {key!r} must be a finite number, got {value!r}")
        if self.kind is SegmentKind.RANDOM_WALK and self.params["step_stddev"] < 0:
            raise TraceError("step_stddev must be >= 0")
        frac = self.params.get("drop_fraction", 0.5)
        if not 0 <= frac <= 1:
            raise TraceError(f"drop_fraction must lie in [0, 1], got {frac}")

    @classmethod
    def from_dict(cls, doc: dict) -> "TraceSegmentSpec":
        if not isinstance(doc, dict):
            raise TraceError(f"segment must be an object, got {doc!r}")
        doc = dict(doc)
        try:
            kind = doc.pop("kind")
            duration = doc.pop("duration_s")
        except KeyError as exc:
            raise TraceError(f"segment is missing {exc.args[0]!r}") from None
        params = doc.pop("params", None)
        if params is None:
            params = doc
        elif doc:
            raise TraceError(f"unexpected segment keys: {sorted(doc)}")
        return cls(kind=kind, duration_s=duration, params=dict(params))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "duration_s": self.duration_s, "params": dict(self.params)}


@dataclass(frozen=True)
class BandwidthTrace:
    samples: tuple
    resolution_s: float = 1.0
    seed: int = 0
    band: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if not self.samples:
            raise TraceError("trace has no samples")
        if not self.resolution_s > 0:
            raise TraceError(f"resolution_s must be > 0, got {self.resolution_s}")
        if any(not math.isfinite(s) or s < 0 for s in self.samples):
            raise TraceError("trace samples must be finite and >= 0")
        if self.band is not None:
            lo, hi = _check_band(self.band)
            object.__setattr__(self, "band", (lo, hi))
            bad = [s for s in self.samples if s < lo or s > hi]
            if bad:
                raise TraceError(f"{len(bad)} samples fall outside band [{lo}, {hi}] (e.g. {bad[0]})")

    @property
    def duration_s(self) -> float:
        return self.resolution_s * len(self.samples)

    def __len__(self):
        return len(self.samples)

    def mean(self) -> float:
        return math.fsum(self.samples) / len(self.samples)

    def fraction_below(self, level: float) -> float:
        return sum(1 for s in self.samples if s < level) / len(self.samples)

    def sample_index(self, t_s: float) -> int:
        """Index of the sample holding at ``t_s``; a sample boundary belongs to the later sample."""
        pos = t_s / self.resolution_s
        nearest = round(pos)
        if abs(pos - nearest) < _SNAP:
            return int(nearest)
        return math.floor(pos)

    def boundary(self, index: int) -> float:
        return index * self.resolution_s


def _check_band(band) -> tuple[float, float]:
    try:
        lo, hi = (float(b) for b in band)
    except (TypeError, ValueError):
        raise InvalidBand(f"band must be a [min, max] pair, got {band!r}") from None
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or not lo < hi:
        raise InvalidBand(f"band needs 0 <= min < max, got [{lo}, {hi}]")
    return lo, hi


def gaussian_stream(seed_seq: np.random.SeedSequence, n: int) -> list[float]:
    words = np.random.PCG64(seed_seq).random_raw(2 * n)
    out = []
    for i in range(n):
        u1 = int(words[2 * i] >> np.uint64(11)) / _TWO_POW_53
        u2 = int(words[2 * i + 1] >> np.uint64(11)) / _TWO_POW_53
        out.append(math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2))
    return out


def _segment_samples(spec: TraceSegmentSpec, n: int, child: np.random.SeedSequence) -> list[float]:
    p = spec.params
    if spec.kind is SegmentKind.CONSTANT:
        return [float(p["level"])] * n
    if spec.kind is SegmentKind.LINEAR_RAMP:
        if n == 1:
            return [float(p["start"])]
        return [p["start"] + (p["end"] - p["start"]) * i / (n - 1) for i in range(n)]
    if spec.kind is SegmentKind.STEP_DROP:
        n_high = round(n * p.get("drop_fraction", 0.5))
        return [float(p["high"])] * n_high + [float(p["low"])] * (n - n_high)
    # RandomWalk: clamping happens inside the walk so it cannot drift outside the band
    return [float(p["start"])] + [float(z) * p["step_stddev"] for z in gaussian_stream(child, n - 1)]


def generate_trace(
    segments: Sequence[TraceSegmentSpec],
    band=DEFAULT_BAND,
    seed: int = 0,
    resolution_s: float = 1.0,
) -> BandwidthTrace:
    if not segments:
        raise EmptySegments("at least one trace segment is required")
    lo, hi = _check_band(band)
    if not resolution_s > 0:
        raise TraceError(f"resolution_s must be > 0, got {resolution_s}")
    if not 0 <= int(seed) < 2**64:
        raise TraceError(f"seed must be an unsigned 64-bit integer, got {seed}")
    children = np.random.SeedSequence(int(seed)).spawn(len(segments))

    def clamp(x):
        return min(hi, max(lo, x))

    samples: list[float] = []
    for spec, child in zip(segments, children):
        spec = spec if isinstance(spec, TraceSegmentSpec) else TraceSegmentSpec.from_dict(spec)
        steps = spec.duration_s / resolution_s
        n = round(steps)
        if n < 1 or abs(steps - n) > 1e-6:
            raise TraceError(
                f"segment duration {spec.duration_s}s is not a whole number of {resolution_s}s samples"
            )
        raw = _segment_samples(spec, n, child)
        if spec.kind is SegmentKind.RANDOM_WALK:
            level = clamp(raw[0])
            walk = [level]
            for step in raw[1:]:
                level = clamp(level + step)
                walk.append(level)
            samples.extend(walk)
        else:
            samples.extend(clamp(x) for x in raw)
    return BandwidthTrace(samples=tuple(samples), resolution_s=resolution_s, seed=int(seed), band=(lo, hi))


def constant_trace(level: float, duration_s: float, resolution_s: float = 1.0) -> BandwidthTrace:
    n = round(duration_s / resolution_s)
    return BandwidthTrace(samples=(float(level),) * n, resolution_s=resolution_s)


def bandwidth_at(trace: BandwidthTrace, t_s: float) -> float:
    if not 0 <= t_s < trace.duration_s:
        raise OutOfTraceRange(f"t={t_s}s outside trace [0, {trace.duration_s})")
    idx = trace.sample_index(t_s)
    if idx >= len(trace.samples):
        raise OutOfTraceRange(f"t={t_s}s outside trace [0, {trace.duration_s})")
    return trace.samples[idx]


def integrate_megabits(trace: BandwidthTrace, t0_s: float, t1_s: float) -> float:
    """Megabits the link carries over ``[t0_s, t1_s]`` under sample-and-hold bandwidth."""
    if t1_s < t0_s:
        raise ReversedInterval(f"interval end {t1_s} precedes start {t0_s}")
    duration = trace.duration_s
    if t0_s < 0 or t1_s > duration + _SNAP:
        raise OutOfTraceRange(f"interval [{t0_s}, {t1_s}] outside trace [0, {duration}]")
    if t1_s == t0_s:
        return 0.0
    res = trace.resolution_s
    i0 = trace.sample_index(t0_s)
    i1 = trace.sample_index(t1_s)
    if i0 >= len(trace.samples):  # t0 snapped onto the end boundary
        return trace.samples[-1] * (t1_s - t0_s)
    if i0 == i1:
        return trace.samples[i0] * (t1_s - t0_s)
    head = 0.0
    first_full = i0
    if abs(t0_s - trace.boundary(i0)) > _SNAP:
        head = trace.samples[i0] * (trace.boundary(i0 + 1) - t0_s)
        first_full = i0 + 1
    tail = 0.0
    if i1 < len(trace.samples) and abs(t1_s - trace.boundary(i1)) > _SNAP:
        tail = trace.samples[i1] * (t1_s - trace.boundary(i1))
    middle = res * math.fsum(trace.samples[first_full:i1])
    return head + middle + tail


TRACE_CSV_HEADER = ("time_s", "bandwidth_mbps")


def trace_to_csv(trace: BandwidthTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_CSV_HEADER)
    for i, value in enumerate(trace.samples):
        writer.writerow((f"{trace.boundary(i):.6f}", f"{value:.6f}"))
    return buf.getvalue()


def write_trace_csv(trace: BandwidthTrace, path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="")


def read_trace_csv(path, band=None) -> BandwidthTrace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read trace file {path}: {exc}") from exc
    return parse_trace_csv(text, band=band)


def parse_trace_csv(text: str, band=None) -> BandwidthTrace:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(c.strip() for c in rows[0]) != TRACE_CSV_HEADER:
        raise TraceError(f"trace CSV must start with header {','.join(TRACE_CSV_HEADER)}")
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise TraceError(f"line {lineno}: expected 2 columns, got {len(row)}")
        try:
            times.append(float(row[0]))
            values.append(float(row[1]))
        except ValueError:
            raise TraceError(f"line {lineno}: non-numeric value") from None
    if not values:
        raise TraceError("trace CSV has no samples")
    if abs(times[0]) > 1e-6:
        raise TraceError(f"trace must start at time 0, starts at {times[0]}")
    if len(times) == 1:
        resolution = 1.0
    else:
        resolution = times[1] - times[0]
        if resolution <= 0:
            raise TraceError("trace times must increase")
        for i, t in enumerate(times):
            if abs(t - i * resolution) > 1e-6:
                raise TraceError(f"row {i + 2}: time {t} breaks the uniform {resolution}s step")
    return BandwidthTrace(samples=tuple(values), resolution_s=resolution, seed=0, band=band)
