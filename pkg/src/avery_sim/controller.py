"""On-board split controller: tier selection for the Insight Stream and stream scheduling."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .core import MB_TO_MEGABITS, MissionGoal, Policy, StreamKind, SystemLUT, Tier, TIER_ORDER
from .errors import InvalidLUT, NonPositiveDataSize
from .traces import BandwidthTrace, bandwidth_at


@dataclass(frozen=True)
class ControllerDecision:
    tier: Tier
    target_pps: float
    evaluated_points: tuple[tuple[Tier, float], ...]
    bandwidth_mbps: float = 0.0

    def pps_for(self, tier: Tier) -> float:
        return dict(self.evaluated_points)[tier]


def compute_max_pps(bandwidth_mbps: float, data_size_mb: float) -> float:
    """Highest packet rate a link of ``bandwidth_mbps`` sustains for ``data_size_mb`` payloads."""
    if not data_size_mb > 0:
        raise NonPositiveDataSize(f"data size must be > 0, got {data_size_mb}")
    if bandwidth_mbps < 0:
        raise ValueError(f"bandwidth must be >= 0, got {bandwidth_mbps}")
    return (bandwidth_mbps / MB_TO_MEGABITS) / data_size_mb


def _evaluate(bandwidth_mbps: float, lut: SystemLUT):
    return tuple((spec.name, compute_max_pps(bandwidth_mbps, spec.data_size_mb)) for spec in lut.tiers)


def select_optimal_tier(bandwidth_mbps: float, goal: MissionGoal, lut: SystemLUT) -> ControllerDecision:
    """Sense, evaluate every tier's feasible rate, then decide by mission goal.

    Accuracy goal: HighAccuracy when ``bandwidth >= threshold`` (tie goes to HighAccuracy),
    otherwise Balanced; HighThroughput is never chosen. Throughput goal: always HighThroughput.
    """
    if not isinstance(lut, SystemLUT) or tuple(s.name for s in lut.tiers) != TIER_ORDER:
        raise InvalidLUT("controller needs a validated three-tier SystemLUT")
    points = _evaluate(bandwidth_mbps, lut)

    goal = MissionGoal(goal)
    if goal is MissionGoal.PRIORITIZE_ACCURACY:
        if bandwidth_mbps >= lut.bandwidth_threshold_mbps:
            chosen = Tier.HIGH_ACCURACY
        else:
            chosen = Tier.BALANCED
    else:
        chosen = Tier.HIGH_THROUGHPUT

    return ControllerDecision(
        tier=chosen, target_pps=dict(points)[chosen], evaluated_points=points, bandwidth_mbps=bandwidth_mbps
    )


def fixed_tier_decision(bandwidth_mbps: float, tier: Tier, lut: SystemLUT) -> ControllerDecision:
    """Static baseline: always ``tier``, paced at that tier's feasible rate."""
    points = _evaluate(bandwidth_mbps, lut)
    return ControllerDecision(
        tier=tier, target_pps=dict(points)[tier], evaluated_points=points, bandwidth_mbps=bandwidth_mbps
    )


def decide(policy: Policy, bandwidth_mbps: float, goal: MissionGoal, lut: SystemLUT) -> ControllerDecision:
    if policy is Policy.AVERY:
        return select_optimal_tier(bandwidth_mbps, goal, lut)
    tier = policy.static_tier
    if tier is None:
        raise ValueError(f"policy {policy.value} does not select tiers")
    return fixed_tier_decision(bandwidth_mbps, tier, lut)


def sense_bandwidth(trace: BandwidthTrace, now_s: float) -> float:
    """Oracle sensing: the trace value at ``now_s``."""
    return bandwidth_at(trace, now_s)


class EwmaEstimator:
    """Bandwidth estimate smoothed over observed per-packet goodput."""

    def __init__(self, alpha: float = 0.3, initial: Optional[float] = None):
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        self.alpha = alpha
        self.estimate = initial

    def observe(self, megabits: float, duration_s: float) -> None:
        if duration_s <= 0:
            return
        sample = megabits / duration_s
        if self.estimate is None:
            self.estimate = sample
        else:
            self.estimate = self.alpha * sample + (1 - self.alpha) * self.estimate


class SchedulerMode(str, enum.Enum):
    CONTEXT_ONLY = "ContextOnly"
    DUAL_STREAM = "DualStream"


class NoSend(enum.Enum):
    NO_SEND = "NoSend"


NO_SEND = NoSend.NO_SEND

# slack for comparing accumulated float timestamps
_EPS = 1e-9


@dataclass
class SchedulerState:
    """Stream-selection state owned by the event loop.

    ``context_period_s`` of ``None`` disables the Context Stream.
    """

    mode: SchedulerMode = SchedulerMode.CONTEXT_ONLY
    context_period_s: Optional[float] = 1.0
    insight_request_log: list = field(default_factory=list)
    target_pps: float = 0.0
    last_insight_s: Optional[float] = None
    last_context_s: Optional[float] = None

    def insight_due_at(self) -> Optional[float]:
        if self.mode is not SchedulerMode.DUAL_STREAM or self.target_pps <= 0:
            return None
        if self.last_insight_s is None:
            return 0.0
        return self.last_insight_s + 1.0 / self.target_pps

    def context_due_at(self) -> Optional[float]:
        if self.context_period_s is None:
            return None
        if self.last_context_s is None:
            return 0.0
        return self.last_context_s + self.context_period_s


def select_stream(state: SchedulerState, now_s: float, link_idle: bool) -> Union[StreamKind, NoSend]:
    """Pick the stream to capture next; Insight wins when both are due.

    ``link_idle`` means nothing is waiting in the link queue (a packet may still be in flight),
    so Insight frames never pile up behind one another.
    """
    insight_due = state.insight_due_at()
    if link_idle and insight_due is not None and now_s + _EPS >= insight_due:
        return StreamKind.INSIGHT
    context_due = state.context_due_at()
    if context_due is not None and now_s + _EPS >= context_due:
        return StreamKind.CONTEXT
    return NO_SEND
