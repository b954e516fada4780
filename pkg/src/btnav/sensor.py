"""Sensor-side scan cycle: periodic inquiry, report framing, message push.

Push is confirmation-gated (a device that does not accept connections is
still reported, just never messaged) and deduplicated per (address, zone)
pair, so a device entering a zone is greeted once, not on every rescan.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NotDue
from .protocol import ScanReport
from .world import SensorSpec, World, sample_inquiry


@dataclass(frozen=True)
class PushMessage:
    addr: str
    text: str
    timestamp_ms: int


@dataclass(frozen=True)
class SensorState:
    spec: SensorSpec
    next_scan_at: float = 0.0
    seq: int = 0
    pushed: frozenset = frozenset()


def schedule_next_scan(state: SensorState, now: float) -> float:
    return now + state.spec.scan_interval_s


def run_scan_cycle(
    state: SensorState, world: World, t: float, rng: np.random.Generator
) -> tuple[SensorState, ScanReport, list[PushMessage]]:
    """Execute one due scan: inquiry, framed report, push messages.

    Returns the successor state (seq incremented, next scan scheduled,
    push ledger extended), the scan report whose detections are exactly the
    inquiry result, and one PushMessage per newly greeted device.
    """
    if t < state.next_scan_at:
        raise NotDue(
            f"sensor {state.spec.id}: t={t} is before next_scan_at={state.next_scan_at}"
        )
    detections = sample_inquiry(world, state.spec.id, t, rng)
    seq = state.seq + 1
    timestamp_ms = round(t * 1000)
    report = ScanReport(
        sensor_id=state.spec.id,
        seq=seq,
        timestamp_ms=timestamp_ms,
        detections=tuple(detections),
    )
    pushes: list[PushMessage] = []
    pushed = set(state.pushed)
    text = state.spec.message_template.format(zone=state.spec.zone, sensor=state.spec.id)
    for det in detections:
        key = (det.addr, state.spec.zone)
        if world.device(det.addr).accepts_push and key not in pushed:
            pushes.append(PushMessage(addr=det.addr, text=text, timestamp_ms=timestamp_ms))
            pushed.add(key)
    new_state = replace(
        state,
        seq=seq,
        next_scan_at=schedule_next_scan(state, t),
        pushed=frozenset(pushed),
    )
    return new_state, report, pushes
