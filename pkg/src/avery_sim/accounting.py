"""Per-packet bookkeeping: round-robin dataset assignment, accuracy scoring and frame energy."""

from __future__ import annotations

from .core import AccuracySample, Dataset, Packet, Policy, StageProfile, StreamKind, SystemLUT
from .errors import ContextPacketNotScorable


def assign_dataset(packet_index: int) -> Dataset:
    """Strict alternation: even indices stream Original frames, odd ones Finetuned."""
    if packet_index < 0:
        raise ValueError(f"packet index must be >= 0, got {packet_index}")
    return Dataset.ORIGINAL if packet_index % 2 == 0 else Dataset.FINETUNED


def score_packet(packet: Packet, lut: SystemLUT) -> AccuracySample:
    if packet.stream is not StreamKind.INSIGHT or packet.tier is None:
        raise ContextPacketNotScorable(f"packet {packet.id} ({packet.stream.value}) carries no mask")
    return AccuracySample(packet_id=packet.id, iou_percent=lut.tier(packet.tier).accuracy(packet.dataset))


def frame_energy(packet: Packet, profile: StageProfile, policy: Policy) -> float:
    tx = profile.tx_energy_j_per_mb * packet.size_mb if packet.offloaded else 0.0
    if packet.stream is StreamKind.CONTEXT:
        return profile.context_energy_j + tx
    if Policy(policy) is Policy.FULL_EDGE:
        return profile.full_edge_energy_j
    return profile.insight_energy_j + tx
