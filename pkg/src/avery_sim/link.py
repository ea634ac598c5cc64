"""Discrete-event mission clock and fluid-flow uplink.

The link is serial and non-preemptive: one packet drains at the instantaneous trace
bandwidth, the rest wait FIFO. Because bandwidth is exogenous, a packet's completion
time is fixed the moment it starts and is solved in closed form per trace sample.

The on-board compute stage is also serial, but it runs alongside the link, so frame
k+1 can be encoded while frame k is on the air.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .accounting import assign_dataset, frame_energy
from .controller import (
    EwmaEstimator,
    SchedulerMode,
    SchedulerState,
    decide,
    select_stream,
    sense_bandwidth,
)
from .core import Dataset, MissionGoal, Packet, Policy, StageProfile, StreamKind, SystemLUT, Tier
from .errors import OutOfTraceRange, TraceTooShort
from .traces import _SNAP, BandwidthTrace, bandwidth_at, integrate_megabits


class EventKind(str, enum.Enum):
    SENSE = "Sense"
    INSIGHT_REQUEST_ON = "InsightRequestOn"
    INSIGHT_REQUEST_OFF = "InsightRequestOff"
    CAPTURE = "Capture"
    COMPUTE_DONE = "ComputeDone"
    TX_DONE = "TxDone"
    MISSION_END = "MissionEnd"


_RANK = {
    EventKind.SENSE: 0,
    EventKind.INSIGHT_REQUEST_ON: 1,
    EventKind.INSIGHT_REQUEST_OFF: 1,
    EventKind.CAPTURE: 2,
    EventKind.COMPUTE_DONE: 3,
    EventKind.TX_DONE: 4,
    EventKind.MISSION_END: 5,
}


@dataclass(frozen=True, order=True)
class Event:
    t_s: float
    rank: int
    seq: int
    kind: EventKind = field(compare=False)
    payload: object = field(default=None, compare=False)


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._seq = itertools.count()

    def push(self, t_s: float, kind: EventKind, payload=None) -> Event:
        event = Event(t_s, _RANK[kind], next(self._seq), kind, payload)
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def __bool__(self):
        return bool(self._heap)

    def __len__(self):
        return len(self._heap)


def completion_time(trace: BandwidthTrace, t_start: float, megabits: float) -> Optional[float]:
    """When ``megabits`` starting at ``t_start`` finish draining, or None if the trace ends first."""
    if megabits <= 0:
        return t_start
    if not 0 <= t_start <= trace.duration_s:
        raise OutOfTraceRange(f"transmission start {t_start}s outside trace")
    n = len(trace.samples)
    i = trace.sample_index(t_start)
    t = t_start
    remaining = megabits
    while i < n:
        end = trace.boundary(i + 1)
        rate = trace.samples[i]
        capacity = rate * (end - t)
        if rate > 0 and remaining <= capacity:
            return t + remaining / rate
        remaining -= capacity
        t = end
        i += 1
    return None


@dataclass(frozen=True)
class LinkState:
    in_flight: Optional[tuple] = None  # (packet id, remaining megabits)
    queue: tuple = ()  # ((packet id, megabits), ...)

    def __post_init__(self):
        if self.in_flight is not None and not self.in_flight[1] > 0:
            raise ValueError("in-flight packet must have remaining megabits > 0")

    @property
    def idle(self) -> bool:
        return self.in_flight is None

    def enqueue(self, packet_id: int, megabits: float) -> "LinkState":
        if self.in_flight is None and not self.queue:
            return LinkState(in_flight=(packet_id, megabits))
        return replace(self, queue=self.queue + ((packet_id, megabits),))

    def advance(self) -> "LinkState":
        """Drop the in-flight packet and promote the head of the queue."""
        if not self.queue:
            return LinkState()
        return LinkState(in_flight=self.queue[0], queue=self.queue[1:])


def step_transmission(link: LinkState, trace: BandwidthTrace, t0_s: float, t1_s: float):
    """Drain the link over ``[t0_s, t1_s]``; return the new state and (packet id, done time) pairs."""
    if t1_s < t0_s:
        raise ValueError(f"interval end {t1_s} precedes start {t0_s}")
    if t0_s < 0 or t1_s > trace.duration_s:
        raise OutOfTraceRange(f"interval [{t0_s}, {t1_s}] outside trace [0, {trace.duration_s}]")
    completed = []
    t = t0_s
    while link.in_flight is not None:
        packet_id, remaining = link.in_flight
        done = completion_time(trace, t, remaining)
        if done is not None and done <= t1_s:
            completed.append((packet_id, done))
            t = done
            link = link.advance()
            continue
        left = remaining - integrate_megabits(trace, t, t1_s)
        if left <= 0:
            completed.append((packet_id, t1_s))
            link = link.advance()
            t = t1_s
            continue
        link = replace(link, in_flight=(packet_id, left))
        break
    return link, completed


@dataclass(frozen=True)
class TimelineRow:
    t_s: float
    event: EventKind
    stream: Optional[StreamKind] = None
    tier: Optional[Tier] = None
    dataset: Optional[Dataset] = None
    packet_id: Optional[int] = None
    size_mb: Optional[float] = None
    bandwidth_mbps: Optional[float] = None
    target_pps: Optional[float] = None
    energy_j: Optional[float] = None


@dataclass(frozen=True)
class DecisionRecord:
    t_s: float
    tier: Optional[Tier]
    target_pps: float
    bandwidth_mbps: float
    evaluated_points: tuple = ()


@dataclass
class SimWorld:
    trace: BandwidthTrace
    lut: SystemLUT
    profile: StageProfile
    goal: MissionGoal
    policy: Policy
    duration_s: float
    sensing_period_s: float = 1.0
    context_period_s: Optional[float] = 1.0
    # (time, mode) operator-intent changes; before the first one the mission is ContextOnly
    schedule: tuple = ()
    sensing: str = "oracle"
    ewma_alpha: float = 0.3


@dataclass
class MissionTimeline:
    policy: Policy
    goal: MissionGoal
    duration_s: float
    rows: list = field(default_factory=list)
    packets: dict = field(default_factory=dict)
    decisions: list = field(default_factory=list)

    def delivered(self, stream: StreamKind = StreamKind.INSIGHT) -> list:
        out = [p for p in self.packets.values() if p.stream is stream and p.delivered]
        return sorted(out, key=lambda p: p.id)


class _Mission:
    """Mutable run state. One instance per call to :func:`run_event_loop`."""

    def __init__(self, world: SimWorld):
        self.w = world
        self.q = EventQueue()
        self.timeline = MissionTimeline(policy=world.policy, goal=world.goal, duration_s=world.duration_s)
        self.sched = SchedulerState(context_period_s=world.context_period_s)
        self.link = LinkState()
        self.compute_busy = False
        self.next_id = 0
        self.insight_index = 0
        self.context_index = 0
        self.decision = None
        self.pending_wake = None  # (time, generation) of the outstanding Capture
        self.generation = 0
        self.ewma = EwmaEstimator(world.ewma_alpha) if world.sensing == "ewma" else None
        self.full_edge = world.policy is Policy.FULL_EDGE

    # -- helpers -----------------------------------------------------------------

    def trace_value(self, t):
        # times within the snap tolerance of the end belong to the end boundary
        if t < self.w.trace.duration_s - _SNAP:
            return bandwidth_at(self.w.trace, t)
        return None

    def row(self, t, kind, packet=None, **extra):
        fields = {}
        if packet is not None:
            fields = dict(
                stream=packet.stream,
                tier=packet.tier,
                dataset=packet.dataset,
                packet_id=packet.id,
                size_mb=packet.size_mb,
            )
        fields.setdefault("bandwidth_mbps", self.trace_value(t))
        fields.update(extra)
        self.timeline.rows.append(TimelineRow(t_s=t, event=kind, **fields))

    def set_packet(self, packet):
        self.timeline.packets[packet.id] = packet

    def link_idle(self):
        return not self.link.queue

    # -- event handlers ------------------------------------------------------------

    def on_sense(self, t):
        w = self.w
        if self.full_edge:
            target = 1.0 / w.profile.full_edge_latency_s
            self.sched.target_pps = target
            self.timeline.decisions.append(DecisionRecord(t, None, target, self.trace_value(t)))
            self.row(t, EventKind.SENSE, target_pps=target)
            return
        if self.ewma is not None:
            if self.ewma.estimate is None:
                self.ewma.estimate = sense_bandwidth(w.trace, t)
            bandwidth = self.ewma.estimate
        else:
            bandwidth = sense_bandwidth(w.trace, t)
        self.decision = decide(w.policy, bandwidth, w.goal, w.lut)
        self.sched.target_pps = self.decision.target_pps
        self.timeline.decisions.append(
            DecisionRecord(t, self.decision.tier, self.decision.target_pps, bandwidth, self.decision.evaluated_points)
        )
        self.row(
            t, EventKind.SENSE, tier=self.decision.tier, bandwidth_mbps=bandwidth, target_pps=self.decision.target_pps
        )

    def on_request(self, t, kind):
        self.sched.mode = SchedulerMode.DUAL_STREAM if kind is EventKind.INSIGHT_REQUEST_ON else SchedulerMode.CONTEXT_ONLY
        self.sched.insight_request_log.append((t, self.sched.mode))
        self.row(t, kind)

    def on_capture(self, t, generation):
        if self.pending_wake is None or generation != self.pending_wake[1]:
            return  # superseded wake-up
        self.pending_wake = None
        if self.compute_busy:
            return
        choice = select_stream(self.sched, t, self.link_idle())
        if choice is StreamKind.INSIGHT:
            packet = self.capture_insight(t)
        elif choice is StreamKind.CONTEXT:
            packet = self.capture_context(t)
        else:
            return
        self.set_packet(packet)
        self.compute_busy = True
        target = self.sched.target_pps if packet.stream is StreamKind.INSIGHT else None
        self.row(t, EventKind.CAPTURE, packet, target_pps=target)
        latency = self.compute_latency(packet)
        self.q.push(t + latency, EventKind.COMPUTE_DONE, packet.id)

    def capture_insight(self, t):
        dataset = assign_dataset(self.insight_index)
        self.insight_index += 1
        self.sched.last_insight_s = t
        pid = self.next_id
        self.next_id += 1
        if self.full_edge:
            return Packet(pid, StreamKind.INSIGHT, None, 0.0, dataset, t, offloaded=False)
        spec = self.w.lut.tier(self.decision.tier)
        return Packet(pid, StreamKind.INSIGHT, spec.name, spec.data_size_mb, dataset, t)

    def capture_context(self, t):
        dataset = assign_dataset(self.context_index)
        self.context_index += 1
        self.sched.last_context_s = t
        pid = self.next_id
        self.next_id += 1
        return Packet(pid, StreamKind.CONTEXT, None, self.w.profile.context_size_mb, dataset, t)

    def compute_latency(self, packet):
        profile = self.w.profile
        if packet.stream is StreamKind.CONTEXT:
            return profile.context_compute_latency_s
        if not packet.offloaded:
            return profile.full_edge_latency_s
        return profile.insight_compute_latency_s

    def on_compute_done(self, t, pid):
        packet = replace(self.timeline.packets[pid], t_compute_done_s=t)
        self.set_packet(packet)
        self.compute_busy = False
        energy = frame_energy(packet, self.w.profile, self.w.policy)
        self.row(t, EventKind.COMPUTE_DONE, packet, energy_j=energy)
        if not packet.offloaded:
            return
        was_idle = self.link.idle
        self.link = self.link.enqueue(pid, packet.megabits)
        if was_idle:
            self.start_tx(t)

    def start_tx(self, t):
        pid, megabits = self.link.in_flight
        self.set_packet(replace(self.timeline.packets[pid], t_tx_start_s=t))
        done = completion_time(self.w.trace, t, megabits)
        if done is not None:
            self.q.push(done, EventKind.TX_DONE, pid)

    def on_tx_done(self, t, pid):
        packet = replace(self.timeline.packets[pid], t_tx_done_s=t)
        self.set_packet(packet)
        self.row(t, EventKind.TX_DONE, packet)
        if self.ewma is not None:
            self.ewma.observe(packet.megabits, t - packet.t_tx_start_s)
        self.link = self.link.advance()
        if self.link.in_flight is not None:
            self.start_tx(t)

    # -- capture scheduling --------------------------------------------------------

    def next_wake(self, now):
        if self.compute_busy:
            return None
        candidates = []
        due = self.sched.insight_due_at()
        if due is not None and self.link_idle():
            candidates.append(due)
        due = self.sched.context_due_at()
        if due is not None:
            candidates.append(due)
        if not candidates:
            return None
        wake = max(now, min(candidates))
        return wake if wake < self.w.duration_s else None

    def reschedule(self, now):
        wake = self.next_wake(now)
        current = self.pending_wake[0] if self.pending_wake else None
        if wake == current:
            return
        self.generation += 1
        if wake is None:
            self.pending_wake = None
            return
        self.pending_wake = (wake, self.generation)
        self.q.push(wake, EventKind.CAPTURE, self.generation)

    # -- main loop -----------------------------------------------------------------

    def run(self) -> MissionTimeline:
        w = self.w
        n_sense = math.ceil(w.duration_s / w.sensing_period_s - 1e-9)
        for k in range(n_sense):
            self.q.push(k * w.sensing_period_s, EventKind.SENSE)
        for t, mode in sorted(w.schedule, key=lambda c: (c[0], SchedulerMode(c[1]).value)):
            if t < w.duration_s:
                kind = (
                    EventKind.INSIGHT_REQUEST_ON
                    if SchedulerMode(mode) is SchedulerMode.DUAL_STREAM
                    else EventKind.INSIGHT_REQUEST_OFF
                )
                self.q.push(t, kind)
        self.q.push(w.duration_s, EventKind.MISSION_END)

        while self.q:
            ev = self.q.pop()
            t = ev.t_s
            if ev.kind is EventKind.MISSION_END:
                self.row(t, EventKind.MISSION_END)
                break
            if ev.kind is EventKind.SENSE:
                self.on_sense(t)
            elif ev.kind in (EventKind.INSIGHT_REQUEST_ON, EventKind.INSIGHT_REQUEST_OFF):
                self.on_request(t, ev.kind)
            elif ev.kind is EventKind.CAPTURE:
                self.on_capture(t, ev.payload)
            elif ev.kind is EventKind.COMPUTE_DONE:
                self.on_compute_done(t, ev.payload)
            elif ev.kind is EventKind.TX_DONE:
                self.on_tx_done(t, ev.payload)
            # wake-ups before the first decision would capture with no tier
            if self.decision is not None or self.full_edge:
                self.reschedule(t)
        return self.timeline


def run_event_loop(world: SimWorld) -> MissionTimeline:
    if not world.duration_s > 0:
        raise ValueError(f"mission duration must be > 0, got {world.duration_s}")
    if world.trace.duration_s + 1e-9 < world.duration_s:
        raise TraceTooShort(
            f"trace covers {world.trace.duration_s}s but the mission lasts {world.duration_s}s"
        )
    if not world.sensing_period_s > 0:
        raise ValueError("sensing period must be > 0")
    return _Mission(world).run()
