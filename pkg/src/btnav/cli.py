"""Command-line entry points.

    btnav run --scenario <path> --out <dir> [--seed N] [--mode fusion|fingerprint]
              [--snapshot-every S] [--map-format text|svg|both] [--map-width N]
    btnav calibrate --scenario <path> --cell-size M --out <path>
    btnav locate --map <path> --vector "S1:-55,S2:-61"

Exit codes: 0 success, 1 configuration error, 2 I/O error.

The calibrate subcommand writes a location-map file: one header line
``cell_size_m=<v>,nx=<n>,ny=<n>`` followed by one line per cell,
``cell_index,cx,cy,<sensor>:<rssi>,...`` with sensors in sorted id order.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .positioning import (
    LocationMap,
    MapCell,
    SampleVector,
    fingerprint_locate,
    match_cell,
    build_location_map,
)
from .runner import run_scenario
from .scenario import MODES, build_world, load_scenario
from .world import Point2D


def save_location_map(locmap: LocationMap, path) -> None:
    lines = [f"cell_size_m={locmap.cell_size_m!r},nx={locmap.nx},ny={locmap.ny}"]
    for cell in locmap.cells:
        entries = ",".join(
            f"{sid}:{cell.rssi[sid]!r}" for sid in locmap.sensor_ids
        )
        line = f"{cell.index},{cell.centroid.x!r},{cell.centroid.y!r}"
        if entries:
            line += f",{entries}"
        lines.append(line)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_location_map(path) -> LocationMap:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    if not lines:
        raise ConfigError(f"{path}: empty location map file")
    header = dict(part.split("=", 1) for part in lines[0].split(","))
    try:
        cell_size_m = float(header["cell_size_m"])
        nx = int(header["nx"])
        ny = int(header["ny"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: bad location map header ({exc})") from None
    cells = []
    sensor_ids: tuple[str, ...] | None = None
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) < 3:
            raise ConfigError(f"{path}: line {i}: expected index,cx,cy,...")
        try:
            index = int(parts[0])
            cx, cy = float(parts[1]), float(parts[2])
            vec = {}
            for entry in parts[3:]:
                sid, _, value = entry.partition(":")
                vec[sid] = float(value)
        except ValueError as exc:
            raise ConfigError(f"{path}: line {i}: {exc}") from None
        ids = tuple(sorted(vec))
        if sensor_ids is None:
            sensor_ids = ids
        elif ids != sensor_ids:
            raise ConfigError(f"{path}: line {i}: sensor set differs between cells")
        cells.append(MapCell(index=index, centroid=Point2D(cx, cy), rssi=vec))
    if len(cells) != nx * ny:
        raise ConfigError(f"{path}: cell count {len(cells)} does not match nx*ny={nx * ny}")
    return LocationMap(
        cells=tuple(cells),
        sensor_ids=sensor_ids or (),
        cell_size_m=cell_size_m,
        nx=nx,
        ny=ny,
    )


def parse_vector(text: str) -> dict[str, float]:
    """Parse 'S1:-55,S2:-61' into {'S1': -55.0, 'S2': -61.0}."""
    values: dict[str, float] = {}
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        sid, sep, value = chunk.partition(":")
        if not sep:
            raise ConfigError(f"vector entry {chunk!r} is not '<sensor>:<rssi>'")
        try:
            values[sid.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"vector entry {chunk!r}: not a number") from None
    if not values:
        raise ConfigError("empty RSSI vector")
    return values


def _cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    run = config.run
    if args.seed is not None:
        run = replace(run, seed=args.seed)
    if args.mode is not None:
        run = replace(run, mode=args.mode)
    if args.snapshot_every is not None:
        if args.snapshot_every <= 0:
            raise ConfigError("--snapshot-every must be > 0")
        run = replace(run, snapshot_every_s=args.snapshot_every)
    config = replace(config, run=run)
    outputs = run_scenario(
        config, args.out, map_format=args.map_format, map_width=args.map_width
    )
    print(
        f"run complete: {outputs.report_count} reports, "
        f"{outputs.detection_count} detections, "
        f"{len(outputs.estimates)} estimates, {len(outputs.pushes)} pushes -> {args.out}"
    )
    return 0


def _cmd_calibrate(args) -> int:
    if args.cell_size <= 0:
        raise ConfigError("--cell-size must be > 0")
    config = load_scenario(args.scenario)
    world = build_world(config)
    locmap = build_location_map(world, args.cell_size)
    save_location_map(locmap, args.out)
    print(f"calibrated {len(locmap.cells)} cells ({locmap.nx}x{locmap.ny}) -> {args.out}")
    return 0


def _cmd_locate(args) -> int:
    locmap = load_location_map(args.map)
    vector = SampleVector(values=parse_vector(args.vector))
    estimate = fingerprint_locate(locmap, vector)
    cell, signal_distance = match_cell(locmap, vector)
    print(
        f"cell={cell.index} x={estimate.pos.x!r} y={estimate.pos.y!r} "
        f"accuracy_m={estimate.accuracy_m!r} method={estimate.method} "
        f"signal_distance_db={signal_distance!r}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btnav",
        description="Bluetooth sensor-network simulator and positioning engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario and write run artifacts")
    p_run.add_argument("--scenario", required=True, help="scenario file path")
    p_run.add_argument("--out", required=True, help="output directory (must be empty)")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--mode", choices=MODES, default=None, help="positioning mode")
    p_run.add_argument(
        "--snapshot-every", type=float, default=None, help="map snapshot interval (s)"
    )
    p_run.add_argument(
        "--map-format", choices=("text", "svg", "both"), default="text"
    )
    p_run.add_argument(
        "--map-width", type=int, default=40, help="text map width in characters"
    )
    p_run.set_defaults(func=_cmd_run)

    p_cal = sub.add_parser("calibrate", help="write a fingerprint location map")
    p_cal.add_argument("--scenario", required=True)
    p_cal.add_argument("--cell-size", type=float, required=True, help="cell size (m)")
    p_cal.add_argument("--out", required=True, help="location map output path")
    p_cal.set_defaults(func=_cmd_calibrate)

    p_loc = sub.add_parser("locate", help="one-shot fingerprint lookup")
    p_loc.add_argument("--map", required=True, help="location map file")
    p_loc.add_argument("--vector", required=True, help='e.g. "S1:-55,S2:-61"')
    p_loc.set_defaults(func=_cmd_locate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
