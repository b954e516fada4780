"""Localization quality metrics against scripted ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .positioning import zone_of_position
from .world import World, device_position


@dataclass(frozen=True)
class DeviceErrorStats:
    mean_m: float
    median_m: float
    p95_m: float
    zone_accuracy: float
    count: int


@dataclass(frozen=True)
class Metrics:
    per_device: dict
    detection_counts: dict


def compute_metrics(estimates, world: World, detection_counts=None) -> Metrics:
    """Aggregate position error and zone accuracy per device.

    ``estimates`` is an iterable of (timestamp_ms, addr, LocationEstimate).
    Position error compares the estimate against the scripted device
    position at the estimate's timestamp; zone accuracy compares the
    estimate's zone with the zone containing the true position.
    """
    errors: dict[str, list[float]] = {}
    zone_hits: dict[str, list[bool]] = {}
    for timestamp_ms, addr, est in estimates:
        true_pos = device_position(world, addr, timestamp_ms / 1000.0)
        errors.setdefault(addr, []).append(est.pos.distance_to(true_pos))
        true_zone = zone_of_position(world.zones, true_pos)
        zone_hits.setdefault(addr, []).append(est.zone == true_zone)
    per_device = {}
    for addr in sorted(errors):
        errs = np.array(errors[addr])
        hits = zone_hits[addr]
        per_device[addr] = DeviceErrorStats(
            mean_m=float(np.mean(errs)),
            median_m=float(np.median(errs)),
            p95_m=float(np.percentile(errs, 95)),
            zone_accuracy=sum(hits) / len(hits),
            count=len(errs),
        )
    return Metrics(per_device=per_device, detection_counts=dict(detection_counts or {}))


def render_metrics(metrics: Metrics) -> str:
    lines = ["== position error vs ground truth (m) =="]
    for addr, s in metrics.per_device.items():
        lines.append(
            f"{addr}  mean={s.mean_m:.6f}  median={s.median_m:.6f}  "
            f"p95={s.p95_m:.6f}  zone_acc={s.zone_accuracy:.4f}  n={s.count}"
        )
    if not metrics.per_device:
        lines.append("(no estimates)")
    lines.append("== detections per sensor ==")
    for sid in sorted(metrics.detection_counts):
        lines.append(f"{sid}  {metrics.detection_counts[sid]}")
    if not metrics.detection_counts:
        lines.append("(none)")
    return "\n".join(lines) + "\n"
