"""Scenario execution: the deterministic discrete event loop.

Per tick, in declared order: every due sensor scans (sensors in id order),
each report is encoded to wire bytes and ingested, the store commits, then
fusion runs once per device detected this tick (device-address order) over
that device's fresh committed rows, feeding the tracker and the logs.
The whole run is a pure function of (config, seed): two runs with the same
inputs produce byte-identical output directories.

Output directory layout:

    reports.log            raw wire bytes of every report, concatenated
    estimates.csv          timestamp_ms,addr,x,y,accuracy_m,method,zone
    push.csv               timestamp_ms,sensor_id,addr,text
    metrics.txt            per-device error stats and per-sensor counts
    snapshots/             map_<t_ms>.txt / .svg at the snapshot interval
    store/                 staging files and per-sensor table CSVs
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import median

import numpy as np

from .errors import NoObservations
from .mapping import render_svg_map, render_text_map
from .metrics import Metrics, compute_metrics, render_metrics
from .positioning import (
    AnchoredDetection,
    LocationEstimate,
    SampleVector,
    Trajectory,
    build_location_map,
    fingerprint_locate,
    fuse,
    track,
    zone_of_position,
)
from .protocol import encode_report
from .scenario import ScenarioConfig, build_world
from .sensor import SensorState, run_scan_cycle
from .store import Store
from .world import World

ESTIMATES_HEADER = "timestamp_ms,addr,x,y,accuracy_m,method,zone"
PUSH_HEADER = "timestamp_ms,sensor_id,addr,text"


@dataclass
class RunOutputs:
    out_dir: Path
    world: World
    estimates: list = field(default_factory=list)
    pushes: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)
    report_count: int = 0
    detection_count: int = 0
    rejected_count: int = 0
    metrics: Metrics | None = None
    snapshot_paths: list = field(default_factory=list)


def _estimate_csv_row(timestamp_ms: int, addr: str, est: LocationEstimate) -> str:
    zone = est.zone if est.zone is not None else ""
    return (
        f"{timestamp_ms},{addr},{est.pos.x!r},{est.pos.y!r},"
        f"{est.accuracy_m!r},{est.method},{zone}\n"
    )


def _push_csv_row(timestamp_ms: int, sensor_id: str, addr: str, text: str) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [str(timestamp_ms), sensor_id, addr, text]
    )
    return buf.getvalue()


def run_scenario(
    config: ScenarioConfig,
    out_dir,
    map_format: str = "text",
    map_width: int = 40,
) -> RunOutputs:
    """Execute a scenario and write all artifacts under ``out_dir``.

    ``out_dir`` must not already contain files (byte-identical reruns need a
    clean target). map_format is "text", "svg" or "both".
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        raise FileExistsError(f"output directory {out} is not empty")
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots"
    snap_dir.mkdir()

    world = build_world(config)
    run = config.run
    rng = np.random.default_rng(run.seed)
    store = Store(out / "store")
    states = {
        s.id: SensorState(spec=s) for s in world.sensors
    }
    locmap = (
        build_location_map(world, run.cell_size_m) if run.mode == "fingerprint" else None
    )
    outputs = RunOutputs(out_dir=out, world=world)
    cell_m = max(world.bounds.width, 1e-9) / max(map_width, 1)

    n_ticks = int(run.duration_s / run.tick_s + 1e-9)
    snap_every_ms = round(run.snapshot_every_s * 1000)

    reports_fh = (out / "reports.log").open("wb")
    estimates_fh = (out / "estimates.csv").open("w", encoding="utf-8", newline="")
    push_fh = (out / "push.csv").open("w", encoding="utf-8", newline="")
    estimates_fh.write(ESTIMATES_HEADER + "\n")
    push_fh.write(PUSH_HEADER + "\n")
    try:
        for k in range(n_ticks + 1):
            t = k * run.tick_s
            t_ms = round(t * 1000)
            detected: set[str] = set()
            for sid in sorted(states):
                state = states[sid]
                if t + 1e-9 < state.next_scan_at:
                    continue
                state, report, pushes = run_scan_cycle(state, world, t, rng)
                states[sid] = state
                raw = encode_report(report)
                reports_fh.write(raw)
                store.ingest(sid, raw, received_at_ms=t_ms)
                outputs.report_count += 1
                outputs.detection_count += len(report.detections)
                detected.update(d.addr for d in report.detections)
                for msg in pushes:
                    outputs.pushes.append((msg.timestamp_ms, sid, msg))
                    push_fh.write(_push_csv_row(msg.timestamp_ms, sid, msg.addr, msg.text))
            summary = store.commit()
            outputs.rejected_count += len(summary.rejected)

            for addr in sorted(detected):
                rows = store.query_detections(
                    addr, t_ms - run.fusion.max_sample_age_ms, t_ms
                )
                est = _estimate_for(world, run, locmap, rows, t_ms)
                if est is None:
                    continue
                outputs.estimates.append((t_ms, addr, est))
                estimates_fh.write(_estimate_csv_row(t_ms, addr, est))
                history = outputs.trajectories.get(addr) or Trajectory(addr=addr)
                outputs.trajectories[addr] = track(history, est)

            if t_ms % snap_every_ms == 0:
                tick_estimates = [e for ts, _, e in outputs.estimates if ts == t_ms]
                counts = store.retrieve_counts()
                if map_format in ("text", "both"):
                    path = snap_dir / f"map_{t_ms:09d}.txt"
                    path.write_text(
                        render_text_map(world, t, tick_estimates, counts, cell_m),
                        encoding="utf-8",
                    )
                    outputs.snapshot_paths.append(path)
                if map_format in ("svg", "both"):
                    path = snap_dir / f"map_{t_ms:09d}.svg"
                    path.write_text(
                        render_svg_map(world, t, tick_estimates, counts),
                        encoding="utf-8",
                    )
                    outputs.snapshot_paths.append(path)
    finally:
        reports_fh.close()
        estimates_fh.close()
        push_fh.close()

    outputs.metrics = compute_metrics(
        outputs.estimates, world, detection_counts=store.retrieve_counts()
    )
    (out / "metrics.txt").write_text(render_metrics(outputs.metrics), encoding="utf-8")
    return outputs


def _estimate_for(world, run, locmap, rows, t_ms) -> LocationEstimate | None:
    anchored = [
        AnchoredDetection(
            sensor_id=r.sensor_id,
            anchor=world.sensor(r.sensor_id).pos,
            zone=world.sensor(r.sensor_id).zone,
            rssi_dbm=r.rssi_dbm,
            timestamp_ms=r.timestamp_ms,
        )
        for r in rows
    ]
    try:
        if run.mode == "fusion":
            return fuse(anchored, run.fusion, world.radio, world.zones, t_ms)
        fresh = [
            a for a in anchored if a.timestamp_ms >= t_ms - run.fusion.max_sample_age_ms
        ]
        if not fresh:
            return None
        by_sensor: dict[str, list[float]] = {}
        for a in fresh:
            by_sensor.setdefault(a.sensor_id, []).append(a.rssi_dbm)
        vector = SampleVector(
            values={sid: median(v) for sid, v in by_sensor.items()}, timestamp_ms=t_ms
        )
        est = fingerprint_locate(locmap, vector)
        zone = zone_of_position(world.zones, est.pos)
        if zone is None and world.sensors:
            nearest = min(
                world.sensors, key=lambda s: (s.pos.distance_to(est.pos), s.id)
            )
            zone = nearest.zone
        return replace(est, zone=zone)
    except NoObservations:
        return None
