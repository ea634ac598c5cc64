"""Trace-driven simulator for an adaptive dual-stream split-computing controller on a UAV uplink."""

from .accounting import assign_dataset, frame_energy, score_packet
from .controller import ControllerDecision, compute_max_pps, select_optimal_tier, select_stream, sense_bandwidth
from .core import (
    Dataset,
    MissionGoal,
    Packet,
    Policy,
    StageProfile,
    StreamKind,
    SystemLUT,
    Tier,
    TierSpec,
    derive_threshold,
    load_lut,
    table1_lut,
)
from .harness import MissionSummary, Scenario, load_scenario, run_comparison, run_scenario
from .link import LinkState, run_event_loop, step_transmission
from .traces import BandwidthTrace, TraceSegmentSpec, bandwidth_at, generate_trace, integrate_megabits

__version__ = "0.1.0"
