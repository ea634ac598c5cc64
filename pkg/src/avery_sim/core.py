"""Domain types shared across the simulator: tiers, the lookup table, packets and stage profiles."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import (
    DuplicateTier,
    InvalidLUT,
    IOFailure,
    MissingTier,
    MonotonicityViolation,
    NonPositiveField,
    NonPositiveInput,
)

DATA_DIR = Path(__file__).parent / "data"
TABLE1_PATH = DATA_DIR / "table1.lut.json"

# accuracy columns are percentages; sizes are megabytes.
MB_TO_MEGABITS = 8.0


class Tier(str, enum.Enum):
    HIGH_ACCURACY = "HighAccuracy"
    BALANCED = "Balanced"
    HIGH_THROUGHPUT = "HighThroughput"


TIER_ORDER = (Tier.HIGH_ACCURACY, Tier.BALANCED, Tier.HIGH_THROUGHPUT)


class MissionGoal(str, enum.Enum):
    PRIORITIZE_ACCURACY = "PrioritizeAccuracy"
    PRIORITIZE_THROUGHPUT = "PrioritizeThroughput"


class StreamKind(str, enum.Enum):
    CONTEXT = "Context"
    INSIGHT = "Insight"


class Dataset(str, enum.Enum):
    ORIGINAL = "Original"
    FINETUNED = "Finetuned"


class Policy(str, enum.Enum):
    AVERY = "Avery"
    STATIC_HIGH_ACCURACY = "StaticHighAccuracy"
    STATIC_BALANCED = "StaticBalanced"
    STATIC_HIGH_THROUGHPUT = "StaticHighThroughput"
    FULL_EDGE = "FullEdge"

    @property
    def static_tier(self) -> Optional[Tier]:
        return _STATIC_TIERS.get(self)


_STATIC_TIERS = {
    Policy.STATIC_HIGH_ACCURACY: Tier.HIGH_ACCURACY,
    Policy.STATIC_BALANCED: Tier.BALANCED,
    Policy.STATIC_HIGH_THROUGHPUT: Tier.HIGH_THROUGHPUT,
}

COMPARISON_POLICIES = (
    Policy.AVERY,
    Policy.STATIC_HIGH_ACCURACY,
    Policy.STATIC_BALANCED,
    Policy.STATIC_HIGH_THROUGHPUT,
)


def _parse_enum(enum_cls, value, what):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise InvalidLUT(f"unknown {what} {value!r} (expected one of: {allowed})", field=what) from None


@dataclass(frozen=True)
class TierSpec:
    name: Tier
    compression_ratio: float
    accuracy_original: float
    accuracy_finetuned: float
    data_size_mb: float

    def __post_init__(self):
        label = self.name.value
        if not 0.0 < self.compression_ratio <= 1.0:
            raise NonPositiveField(
                f"{label}.compression_ratio must lie in (0, 1], got {self.compression_ratio}",
                field="compression_ratio",
            )
        for attr in ("accuracy_original", "accuracy_finetuned"):
            value = getattr(self, attr)
            if not 0.0 <= value <= 100.0:
                raise NonPositiveField(f"{label}.{attr} must lie in [0, 100], got {value}", field=attr)
        if not self.data_size_mb > 0:
            raise NonPositiveField(
                f"{label}.data_size_mb must be > 0, got {self.data_size_mb}", field="data_size_mb"
            )

    def accuracy(self, dataset: Dataset) -> float:
        if dataset is Dataset.ORIGINAL:
            return self.accuracy_original
        return self.accuracy_finetuned

    @property
    def data_size_megabits(self) -> float:
        return self.data_size_mb * MB_TO_MEGABITS


def derive_threshold(high_accuracy_size_mb: float, min_insight_pps: float) -> float:
    """Bandwidth (Mbps) needed to ship the HighAccuracy payload at ``min_insight_pps``.

    >>> derive_threshold(2.92, 0.5)
    11.68
    """
    if not (high_accuracy_size_mb > 0 and min_insight_pps > 0):
        raise NonPositiveInput(
            f"size and rate must both be > 0 (got size={high_accuracy_size_mb}, pps={min_insight_pps})"
        )
    return high_accuracy_size_mb * MB_TO_MEGABITS * min_insight_pps


@dataclass(frozen=True)
class SystemLUT:
    tiers: tuple[TierSpec, ...]
    bandwidth_threshold_mbps: float
    min_insight_pps: Optional[float] = None

    def __post_init__(self):
        seen = set()
        for spec in self.tiers:
            if spec.name in seen:
                raise DuplicateTier(f"tier {spec.name.value} listed more than once", field="name")
            seen.add(spec.name)
        for tier in TIER_ORDER:
            if tier not in seen:
                raise MissingTier(f"tier {tier.value} is missing", field="tiers")
        # canonical order regardless of document order
        object.__setattr__(self, "tiers", tuple(self._by_name(t) for t in TIER_ORDER))

        for attr in ("data_size_mb", "accuracy_original", "accuracy_finetuned", "compression_ratio"):
            for hi, lo in zip(self.tiers, self.tiers[1:]):
                if not getattr(lo, attr) < getattr(hi, attr):
                    raise MonotonicityViolation(
                        f"{lo.name.value}.{attr} ({getattr(lo, attr)}) must be < "
                        f"{hi.name.value}.{attr} ({getattr(hi, attr)})",
                        field=attr,
                    )
        if not self.bandwidth_threshold_mbps > 0:
            raise NonPositiveField(
                f"bandwidth_threshold_mbps must be > 0, got {self.bandwidth_threshold_mbps}",
                field="bandwidth_threshold_mbps",
            )
        if self.min_insight_pps is not None:
            if not self.min_insight_pps > 0:
                raise NonPositiveField(
                    f"min_insight_pps must be > 0, got {self.min_insight_pps}", field="min_insight_pps"
                )
            derived = derive_threshold(self.tier(Tier.HIGH_ACCURACY).data_size_mb, self.min_insight_pps)
            if abs(derived - self.bandwidth_threshold_mbps) > 1e-6:
                raise InvalidLUT(
                    f"bandwidth_threshold_mbps {self.bandwidth_threshold_mbps} disagrees with "
                    f"derived value {derived} (HighAccuracy size x 8 x min_insight_pps)",
                    field="bandwidth_threshold_mbps",
                )

    def _by_name(self, name: Tier) -> TierSpec:
        for spec in self.tiers:
            if spec.name is name:
                return spec
        raise MissingTier(f"tier {name.value} is missing", field="tiers")

    def tier(self, name: Tier) -> TierSpec:
        return self._by_name(Tier(name))

    def __iter__(self):
        return iter(self.tiers)

    @property
    def accuracy_bounds(self) -> tuple[float, float]:
        values = [s.accuracy(d) for s in self.tiers for d in Dataset]
        return min(values), max(values)

    def to_dict(self) -> dict:
        doc = {
            "tiers": [
                {
                    "name": s.name.value,
                    "compression_ratio": s.compression_ratio,
                    "accuracy_original": s.accuracy_original,
                    "accuracy_finetuned": s.accuracy_finetuned,
                    "data_size_mb": s.data_size_mb,
                }
                for s in self.tiers
            ],
            "bandwidth_threshold_mbps": self.bandwidth_threshold_mbps,
        }
        if self.min_insight_pps is not None:
            doc["min_insight_pps"] = self.min_insight_pps
        return doc


_TIER_FIELDS = ("compression_ratio", "accuracy_original", "accuracy_finetuned", "data_size_mb")


def _number(raw, where):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise InvalidLUT(f"{where} must be a number, got {raw!r}", field=where.rsplit(".", 1)[-1])
    value = float(raw)
    if not math.isfinite(value):
        raise NonPositiveField(f"{where} must be finite", field=where.rsplit(".", 1)[-1])
    return value


def lut_from_dict(doc: dict) -> SystemLUT:
    if not isinstance(doc, dict):
        raise InvalidLUT("LUT document must be an object")
    raw_tiers = doc.get("tiers")
    if not isinstance(raw_tiers, list):
        raise MissingTier("LUT document has no 'tiers' list", field="tiers")
    specs = []
    for i, raw in enumerate(raw_tiers):
        if not isinstance(raw, dict) or "name" not in raw:
            raise InvalidLUT(f"tiers[{i}] must be an object with a 'name'", field="name")
        name = _parse_enum(Tier, raw["name"], "name")
        values = {}
        for key in _TIER_FIELDS:
            if key not in raw:
                raise InvalidLUT(f"{name.value}.{key} is missing", field=key)
            values[key] = _number(raw[key], f"{name.value}.{key}")
        specs.append(TierSpec(name=name, **values))
    if "bandwidth_threshold_mbps" not in doc:
        raise InvalidLUT("bandwidth_threshold_mbps is missing", field="bandwidth_threshold_mbps")
    threshold = _number(doc["bandwidth_threshold_mbps"], "bandwidth_threshold_mbps")
    pps = doc.get("min_insight_pps")
    if pps is not None:
        pps = _number(pps, "min_insight_pps")
    return SystemLUT(tiers=tuple(specs), bandwidth_threshold_mbps=threshold, min_insight_pps=pps)


def load_lut(document) -> SystemLUT:
    """Parse and validate a LUT from JSON text, a dict, or a path to a JSON file."""
    if isinstance(document, dict):
        return lut_from_dict(document)
    if isinstance(document, Path):
        try:
            document = document.read_text(encoding="utf-8")
        except OSError as exc:
            raise IOFailure(f"cannot read LUT file: {exc}") from exc
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise InvalidLUT(f"LUT is not valid JSON: {exc}") from exc
    return lut_from_dict(doc)


def dump_lut(lut: SystemLUT) -> str:
    return json.dumps(lut.to_dict(), indent=2) + "\n"


def table1_lut() -> SystemLUT:
    return load_lut(TABLE1_PATH)


# Per-frame on-device energy at two split depths (split after ViT block 1 vs block 10), joules.
SPLIT_DEPTH_ENERGY_J = {1: 3.12, 10: 13.81}
SPLIT_ENERGY_REDUCTION = 0.9398
CONTEXT_SPEEDUP = 6.4


def full_edge_energy_from_reduction(split_energy_j: float, reduction: float) -> float:
    """Invert ``reduction = 1 - split / full`` for the full on-device energy.

    With 3.12 J per split frame and a 93.98% reduction this gives 3.12 / 0.0602 = 51.827 J.
    """
    return split_energy_j / (1.0 - reduction)


def relative_increase(before: float, after: float) -> float:
    return after / before - 1.0


DEFAULT_INSIGHT_ENERGY_J = SPLIT_DEPTH_ENERGY_J[1]
DEFAULT_FULL_EDGE_ENERGY_J = full_edge_energy_from_reduction(DEFAULT_INSIGHT_ENERGY_J, SPLIT_ENERGY_REDUCTION)


@dataclass(frozen=True)
class StageProfile:
    """On-device latency and energy per frame.

    Context latency is not stored: it is the Insight latency divided by ``context_speedup``.
    ``insight_compute_latency_s``, ``context_size_mb`` and ``full_edge_latency_s`` have no
    published value; the defaults are modeling choices.
    """

    insight_compute_latency_s: float = 0.5
    insight_energy_j: float = DEFAULT_INSIGHT_ENERGY_J
    context_energy_j: float = DEFAULT_INSIGHT_ENERGY_J / CONTEXT_SPEEDUP
    full_edge_energy_j: float = DEFAULT_FULL_EDGE_ENERGY_J
    context_size_mb: float = 0.10
    tx_energy_j_per_mb: float = 0.0
    context_speedup: float = CONTEXT_SPEEDUP
    # equal-power assumption: latency scales with energy
    full_edge_latency_s: float = 0.5 * DEFAULT_FULL_EDGE_ENERGY_J / DEFAULT_INSIGHT_ENERGY_J

    def __post_init__(self):
        for name in (
            "insight_compute_latency_s",
            "insight_energy_j",
            "context_energy_j",
            "full_edge_energy_j",
            "context_size_mb",
            "context_speedup",
            "full_edge_latency_s",
        ):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise NonPositiveField(f"stage_profile.{name} must be > 0, got {value!r}", field=name)
        if not self.tx_energy_j_per_mb >= 0:
            raise NonPositiveField(
                f"stage_profile.tx_energy_j_per_mb must be >= 0, got {self.tx_energy_j_per_mb}",
                field="tx_energy_j_per_mb",
            )
        if not self.insight_energy_j < self.full_edge_energy_j:
            raise NonPositiveField(
                "stage_profile.insight_energy_j must be below full_edge_energy_j", field="insight_energy_j"
            )

    @property
    def context_compute_latency_s(self) -> float:
        return self.insight_compute_latency_s / self.context_speedup

    @property
    def energy_reduction(self) -> float:
        return 1.0 - self.insight_energy_j / self.full_edge_energy_j


@dataclass(frozen=True)
class Packet:
    """One transmission unit. FullEdge frames are recorded with ``offloaded=False``, no tier and zero size."""

    id: int
    stream: StreamKind
    tier: Optional[Tier]
    size_mb: float
    dataset: Dataset
    t_capture_s: float
    t_compute_done_s: Optional[float] = None
    t_tx_start_s: Optional[float] = None
    t_tx_done_s: Optional[float] = None
    offloaded: bool = True

    def __post_init__(self):
        if self.offloaded:
            if (self.stream is StreamKind.INSIGHT) != (self.tier is not None):
                raise ValueError("Insight packets carry a tier and Context packets do not")
            if not self.size_mb > 0:
                raise ValueError(f"packet size must be > 0, got {self.size_mb}")
        stamps = [
            t
            for t in (self.t_capture_s, self.t_compute_done_s, self.t_tx_start_s, self.t_tx_done_s)
            if t is not None
        ]
        if any(b < a for a, b in zip(stamps, stamps[1:])):
            raise ValueError(f"packet {self.id} timestamps out of order: {stamps}")

    @property
    def megabits(self) -> float:
        return self.size_mb * MB_TO_MEGABITS

    @property
    def delivered(self) -> bool:
        if self.offloaded:
            return self.t_tx_done_s is not None
        return self.t_compute_done_s is not None


@dataclass(frozen=True)
class AccuracySample:
    packet_id: int
    iou_percent: float

