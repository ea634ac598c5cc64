"""Scenarios, policy runs, baseline comparison and mission metrics."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .accounting import assign_dataset, frame_energy, score_packet  # noqa: F401  (re-exported)
from .controller import SchedulerMode
from .core import (
    COMPARISON_POLICIES,
    DATA_DIR,
    Dataset,
    MissionGoal,
    Policy,
    StageProfile,
    StreamKind,
    SystemLUT,
    load_lut,
)
from .errors import InputError, InvalidScenario, IOFailure, LUTError, TraceError, TraceTooShort
from .link import MissionTimeline, SimWorld, run_event_loop
from .traces import (
    DEFAULT_BAND,
    BandwidthTrace,
    TraceSegmentSpec,
    constant_trace,
    gaussian_stream,
    generate_trace,
    read_trace_csv,
)

THREADS_ENV = "AVERY_SIM_THREADS"


@dataclass(frozen=True)
class TraceSource:
    segments: tuple = ()
    band: tuple = DEFAULT_BAND
    resolution_s: float = 1.0
    file: Optional[Path] = None

    def build(self, seed: int) -> BandwidthTrace:
        if self.file is not None:
            return read_trace_csv(self.file, band=self.band)
        return generate_trace(self.segments, band=self.band, seed=seed, resolution_s=self.resolution_s)


@dataclass(frozen=True)
class Scenario:
    trace: object  # TraceSource or an already built BandwidthTrace
    goal: MissionGoal = MissionGoal.PRIORITIZE_ACCURACY
    policy: Policy = Policy.AVERY
    duration_s: float = 1200.0
    lut: Optional[SystemLUT] = None
    lut_path: Optional[Path] = None
    stage_profile: StageProfile = field(default_factory=StageProfile)
    sensing_period_s: float = 1.0
    context_period_s: Optional[float] = 1.0
    insight_schedule: tuple = ()
    sensing: str = "oracle"
    ewma_alpha: float = 0.3
    iou_jitter_std: float = 0.0
    seed: int = 0
    name: str = "scenario"

    def resolve_lut(self) -> SystemLUT:
        if self.lut is not None:
            return self.lut
        if self.lut_path is None:
            return load_lut(DATA_DIR / "table1.lut.json")
        if not Path(self.lut_path).is_file():
            raise IOFailure(f"LUT file not found: {self.lut_path}")
        return load_lut(Path(self.lut_path))

    def resolve_trace(self) -> BandwidthTrace:
        if isinstance(self.trace, BandwidthTrace):
            return self.trace
        return self.trace.build(self.seed)

    def with_policy(self, policy: Policy) -> "Scenario":
        return replace(self, policy=Policy(policy))


@dataclass
class MissionSummary:
    policy: Policy
    goal: MissionGoal
    avg_iou_percent: float
    avg_pps: float
    total_energy_j: float
    energy_per_insight_frame_j: float
    tier_switch_count: int
    switch_times: tuple
    delivered_insight: int
    per_dataset: dict  # Dataset -> (count, mean IoU)
    context_delivered: int = 0

    def dataset_iou(self, dataset: Dataset) -> float:
        return self.per_dataset[dataset][1]

    def frontier_point(self) -> tuple[float, float]:
        return self.avg_iou_percent, self.avg_pps


def _mean(values):
    return math.fsum(values) / len(values) if values else math.nan


def _jittered(scores, std, seed):
    if std <= 0 or not scores:
        return scores
    # the jitter stream is the last child so trace segment streams are untouched
    child = np.random.SeedSequence(seed).spawn(1024)[-1]
    noise = gaussian_stream(child, len(scores))
    return [min(100.0, max(0.0, s + std * z)) for s, z in zip(scores, noise)]


def summarize(
    timeline: MissionTimeline, lut: SystemLUT, profile: StageProfile, iou_jitter_std=0.0, seed=0
) -> MissionSummary:
    policy = timeline.policy
    delivered = timeline.delivered(StreamKind.INSIGHT)
    scorable = [p for p in delivered if p.tier is not None]
    scores = [score_packet(p, lut).iou_percent for p in scorable]
    scores = _jittered(scores, iou_jitter_std, seed)

    per_dataset = {}
    for dataset in Dataset:
        subset = [s for p, s in zip(scorable, scores) if p.dataset is dataset]
        per_dataset[dataset] = (len(subset), _mean(subset))

    computed = [p for p in timeline.packets.values() if p.t_compute_done_s is not None]
    total_energy = math.fsum(frame_energy(p, profile, policy) for p in computed)
    insight_computed = [p for p in computed if p.stream is StreamKind.INSIGHT]
    insight_energy = math.fsum(frame_energy(p, profile, policy) for p in insight_computed)

    switch_times = []
    previous = None
    for record in timeline.decisions:
        if previous is not None and record.tier != previous:
            switch_times.append(record.t_s)
        previous = record.tier

    return MissionSummary(
        policy=policy,
        goal=timeline.goal,
        avg_iou_percent=_mean(scores),
        avg_pps=len(delivered) / timeline.duration_s,
        total_energy_j=total_energy,
        energy_per_insight_frame_j=insight_energy / len(insight_computed) if insight_computed else math.nan,
        tier_switch_count=len(switch_times),
        switch_times=tuple(switch_times),
        delivered_insight=len(delivered),
        per_dataset=per_dataset,
        context_delivered=len(timeline.delivered(StreamKind.CONTEXT)),
    )


def build_world(scenario: Scenario, trace: Optional[BandwidthTrace] = None, lut=None) -> SimWorld:
    return SimWorld(
        trace=trace if trace is not None else scenario.resolve_trace(),
        lut=lut if lut is not None else scenario.resolve_lut(),
        profile=scenario.stage_profile,
        goal=scenario.goal,
        policy=scenario.policy,
        duration_s=scenario.duration_s,
        sensing_period_s=scenario.sensing_period_s,
        context_period_s=scenario.context_period_s,
        schedule=scenario.insight_schedule,
        sensing=scenario.sensing,
        ewma_alpha=scenario.ewma_alpha,
    )


def run_scenario(scenario: Scenario, trace: Optional[BandwidthTrace] = None, lut=None):
    """Run one policy over one mission and return ``(timeline, summary)``."""
    world = build_world(scenario, trace, lut)
    timeline = run_event_loop(world)
    summary = summarize(timeline, world.lut, world.profile, scenario.iou_jitter_std, scenario.seed)
    return timeline, summary


def _run_policy(args):
    scenario, trace, lut, policy = args
    return run_scenario(scenario.with_policy(policy), trace, lut)


def worker_count(n_jobs: int, requested: Optional[int] = None) -> int:
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        try:
            requested = int(raw) if raw else 0
        except ValueError:
            raise InputError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if requested <= 0:
        requested = os.cpu_count() or 1
    return max(1, min(requested, n_jobs))


def run_many(jobs, workers: Optional[int] = None):
    """Run ``(scenario, trace, lut, policy)`` jobs, in parallel processes when allowed; order is kept."""
    jobs = list(jobs)
    n = worker_count(len(jobs), workers)
    if n == 1:
        return [_run_policy(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_policy, jobs))


def run_comparison(scenario: Scenario, workers: Optional[int] = None, policies=COMPARISON_POLICIES):
    """Avery plus the three static baselines over the identical trace and schedule."""
    trace = scenario.resolve_trace()
    lut = scenario.resolve_lut()
    if trace.duration_s + 1e-9 < scenario.duration_s:
        raise TraceTooShort(f"trace covers {trace.duration_s}s but the mission lasts {scenario.duration_s}s")
    results = run_many(((scenario, trace, lut, p) for p in policies), workers)
    return dict(zip(policies, results))


def sweep(
    bandwidths,
    goal: MissionGoal = MissionGoal.PRIORITIZE_ACCURACY,
    duration_s: float = 1200.0,
    base: Optional[Scenario] = None,
    workers: Optional[int] = None,
    policies=COMPARISON_POLICIES,
):
    """Constant-bandwidth frontier: ``[(bandwidth, policy, summary), ...]``."""
    base = base or Scenario(trace=None, context_period_s=None, insight_schedule=((0.0, SchedulerMode.DUAL_STREAM),))
    base = replace(base, goal=MissionGoal(goal), duration_s=duration_s)
    lut = base.resolve_lut()
    jobs, keys = [], []
    for b in bandwidths:
        trace = constant_trace(b, duration_s)
        for policy in policies:
            jobs.append((base, trace, lut, policy))
            keys.append((b, policy))
    results = run_many(jobs, workers)
    return [(b, policy, summary) for (b, policy), (_, summary) in zip(keys, results)]


# -- scenario files ------------------------------------------------------------------

_SCENARIO_KEYS = {
    "name",
    "description",
    "duration_s",
    "goal",
    "policy",
    "lut_path",
    "stage_profile",
    "trace",
    "seed",
    "sensing_period_s",
    "sensing",
    "context_period_s",
    "insight_schedule",
    "iou_jitter_std",
}


def resolve_path(raw: str, base_dir: Path) -> Path:
    """Relative paths resolve against ``base_dir``, then against the bundled data directory."""
    path = Path(raw)
    if path.is_absolute():
        return path
    candidate = base_dir / path
    if candidate.exists():
        return candidate
    bundled = DATA_DIR / path
    if bundled.exists():
        return bundled
    return candidate


def _enum(enum_cls, value, key):
    try:
        return enum_cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in enum_cls)
        raise InvalidScenario(f"{key}: unknown value {value!r} (expected one of: {allowed})") from None


def _positive(doc, key, default):
    value = doc.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise InvalidScenario(f"{key} must be a positive number, got {value!r}")
    return float(value)


def scenario_from_dict(doc: dict, base_dir: Path = Path(".")) -> Scenario:
    if not isinstance(doc, dict):
        raise InvalidScenario("scenario must be a JSON object")
    unknown = set(doc) - _SCENARIO_KEYS
    if unknown:
        raise InvalidScenario(f"unknown scenario keys: {sorted(unknown)}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise InvalidScenario(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    raw_trace = doc.get("trace")
    if not isinstance(raw_trace, dict):
        raise InvalidScenario("trace must be an object with 'segments' or 'file'")
    band = tuple(raw_trace.get("band", DEFAULT_BAND))
    try:
        if "file" in raw_trace:
            path = resolve_path(raw_trace["file"], base_dir)
            if not path.is_file():
                raise IOFailure(f"trace file not found: {path}")
            source = TraceSource(band=band, file=path)
        else:
            segments = raw_trace.get("segments")
            if not isinstance(segments, list) or not segments:
                raise InvalidScenario("trace.segments must be a non-empty list")
            source = TraceSource(
                segments=tuple(TraceSegmentSpec.from_dict(s) for s in segments),
                band=band,
                resolution_s=_positive(raw_trace, "resolution_s", 1.0),
            )
    except TraceError as exc:
        raise InvalidScenario(f"trace: {exc}") from exc

    lut_path = None
    if doc.get("lut_path") is not None:
        lut_path = resolve_path(doc["lut_path"], base_dir)
        if not lut_path.is_file():
            raise IOFailure(f"LUT file not found: {lut_path}")

    profile_doc = doc.get("stage_profile") or {}
    if not isinstance(profile_doc, dict):
        raise InvalidScenario("stage_profile must be an object")
    try:
        profile = StageProfile(**profile_doc)
    except TypeError as exc:
        raise InvalidScenario(f"stage_profile: {exc}") from exc
    except LUTError as exc:
        raise InvalidScenario(str(exc)) from exc

    context_period = doc.get("context_period_s", 1.0)
    if context_period is not None:
        context_period = _positive(doc, "context_period_s", 1.0)
        if context_period < profile.context_compute_latency_s:
            raise InvalidScenario(
                f"context_period_s {context_period} is shorter than the Context compute latency "
                f"{profile.context_compute_latency_s}"
            )

    schedule = []
    for i, item in enumerate(doc.get("insight_schedule", [])):
        if not isinstance(item, dict) or "t_s" not in item or "mode" not in item:
            raise InvalidScenario(f"insight_schedule[{i}] needs 't_s' and 'mode'")
        t = item["t_s"]
        if isinstance(t, bool) or not isinstance(t, (int, float)) or t < 0:
            raise InvalidScenario(f"insight_schedule[{i}].t_s must be >= 0")
        schedule.append((float(t), _enum(SchedulerMode, item["mode"], f"insight_schedule[{i}].mode")))

    sensing = doc.get("sensing", {"mode": "oracle"})
    if isinstance(sensing, str):
        sensing = {"mode": sensing}
    mode = sensing.get("mode", "oracle")
    if mode not in ("oracle", "ewma"):
        raise InvalidScenario(f"sensing.mode must be 'oracle' or 'ewma', got {mode!r}")
    alpha = sensing.get("alpha", 0.3)
    if not isinstance(alpha, (int, float)) or not 0 < alpha <= 1:
        raise InvalidScenario(f"sensing.alpha must lie in (0, 1], got {alpha!r}")

    jitter = doc.get("iou_jitter_std", 0.0)
    if not isinstance(jitter, (int, float)) or jitter < 0:
        raise InvalidScenario(f"iou_jitter_std must be >= 0, got {jitter!r}")

    return Scenario(
        trace=source,
        goal=_enum(MissionGoal, doc.get("goal", MissionGoal.PRIORITIZE_ACCURACY.value), "goal"),
        policy=_enum(Policy, doc.get("policy", Policy.AVERY.value), "policy"),
        duration_s=_positive(doc, "duration_s", 1200.0),
        lut_path=lut_path,
        stage_profile=profile,
        sensing_period_s=_positive(doc, "sensing_period_s", 1.0),
        context_period_s=context_period,
        insight_schedule=tuple(schedule),
        sensing=mode,
        ewma_alpha=float(alpha),
        iou_jitter_std=float(jitter),
        seed=seed,
        name=str(doc.get("name", "scenario")),
    )


def load_scenario(path) -> Scenario:
    path = resolve_path(str(path), Path("."))
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidScenario(f"{path.name} is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc, base_dir=path.parent)


def bundled_scenario(name: str) -> Scenario:
    return load_scenario(DATA_DIR / name)


# -- CSV output ----------------------------------------------------------------------

TIMELINE_HEADER = (
    "t_s",
    "event",
    "stream",
    "tier",
    "dataset",
    "packet_id",
    "size_mb",
    "bandwidth_mbps",
    "target_pps",
    "energy_j",
)
SUMMARY_HEADER = ("policy", "goal", "avg_iou", "avg_pps", "total_energy_j", "switches")
FRONTIER_HEADER = ("bandwidth_mbps", "policy", "avg_iou", "avg_pps")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6f}"
    return getattr(value, "value", str(value))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def timeline_csv(timeline: MissionTimeline) -> str:
    return _csv(
        TIMELINE_HEADER,
        (
            (
                r.t_s,
                r.event,
                r.stream,
                r.tier,
                r.dataset,
                r.packet_id,
                r.size_mb,
                r.bandwidth_mbps,
                r.target_pps,
                r.energy_j,
            )
            for r in timeline.rows
        ),
    )


def summary_csv(summaries) -> str:
    return _csv(
        SUMMARY_HEADER,
        (
            (s.policy, s.goal, s.avg_iou_percent, s.avg_pps, s.total_energy_j, s.tier_switch_count)
            for s in summaries
        ),
    )


def frontier_csv(points) -> str:
    return _csv(FRONTIER_HEADER, ((float(b), p, s.avg_iou_percent, s.avg_pps) for b, p, s in points))


def pps_series(timeline: MissionTimeline, window_s: float = 60.0):
    """Delivered Insight packets per second in consecutive windows, as ``(window_mid, pps)``."""
    n = max(1, math.ceil(timeline.duration_s / window_s - 1e-9))
    counts = [0] * n
    for p in timeline.delivered(StreamKind.INSIGHT):
        t = p.t_tx_done_s if p.offloaded else p.t_compute_done_s
        counts[min(n - 1, int(t // window_s))] += 1
    out = []
    for i, c in enumerate(counts):
        width = min(window_s, timeline.duration_s - i * window_s)
        out.append((i * window_s + width / 2, c / width))
    return out
