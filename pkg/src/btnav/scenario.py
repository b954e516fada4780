"""Scenario file parsing and world construction.

A scenario is a line-oriented, sectioned plain-text file. Blank lines and
whole lines starting with '#' are ignored (no inline comments):

    [radio]
    p0_dbm = -40
    detect_threshold_dbm = -60

    [zone]
    id = A
    # rect is min_x,min_y,max_x,max_y
    rect = 0,0,10,10

    [sensor]
    id = S1
    pos = 5,3
    zone = A
    scan_interval_s = 10
    message_template = You are in {zone}

    [device]
    addr = AA:BB:CC:DD:EE:01
    name = Walker
    discoverable = true
    accepts_push = true
    # wp is t_seconds,x,y — one line per waypoint
    wp = 0,1,5
    wp = 280,29,5

    [run]
    duration_s = 300
    tick_s = 1
    seed = 42
    mode = fusion

``[zone]``, ``[sensor]`` and ``[device]`` repeat, one block per entity.
``[world]`` (optional) sets explicit bounds; by default the bounds are the
envelope of all sensors, waypoints and zone rectangles. ``[radio]`` and
``[run]`` appear at most once. Unknown sections or keys are errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .positioning import FusionConfig
from .world import (
    DeviceSpec,
    Point2D,
    RadioParams,
    Rect,
    SensorSpec,
    Waypoint,
    World,
    ZoneSpec,
    make_world,
)

MODES = ("fusion", "fingerprint")


@dataclass(frozen=True)
class RunParams:
    duration_s: float = 60.0
    tick_s: float = 1.0
    seed: int = 0
    mode: str = "fusion"
    cell_size_m: float = 1.0
    snapshot_every_s: float = 10.0
    fusion: FusionConfig = FusionConfig()


@dataclass(frozen=True)
class ScenarioConfig:
    radio: RadioParams = RadioParams()
    zones: tuple[ZoneSpec, ...] = ()
    sensors: tuple[SensorSpec, ...] = ()
    devices: tuple[DeviceSpec, ...] = ()
    bounds: Rect | None = None
    run: RunParams = RunParams()


def _fail(line_no: int, msg: str):
    raise ConfigError(f"line {line_no}: {msg}")


def _floats(value: str, n: int, line_no: int) -> list[float]:
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != n:
        _fail(line_no, f"expected {n} comma-separated numbers, got {value!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        _fail(line_no, f"not a number in {value!r}")


def _float(value: str, line_no: int) -> float:
    try:
        return float(value)
    except ValueError:
        _fail(line_no, f"not a number: {value!r}")


def _int(value: str, line_no: int) -> int:
    try:
        return int(value)
    except ValueError:
        _fail(line_no, f"not an integer: {value!r}")


def _bool(value: str, line_no: int) -> bool:
    low = value.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    _fail(line_no, f"not a boolean: {value!r}")


class _Section:
    def __init__(self, name: str, line_no: int):
        self.name = name
        self.line_no = line_no
        self.entries: list[tuple[int, str, str]] = []

    def single(self, key: str, default: str | None = None) -> tuple[int, str] | None:
        found = [(n, v) for n, k, v in self.entries if k == key]
        if not found:
            if default is None:
                return None
            return (self.line_no, default)
        if len(found) > 1:
            _fail(found[1][0], f"duplicate key {key!r} in [{self.name}]")
        return found[0]

    def require(self, key: str) -> tuple[int, str]:
        got = self.single(key)
        if got is None:
            _fail(self.line_no, f"[{self.name}] is missing required key {key!r}")
        return got

    def check_keys(self, allowed: set[str]) -> None:
        for n, k, _ in self.entries:
            if k not in allowed:
                _fail(n, f"unknown key {k!r} in [{self.name}]")


def _split_sections(text: str) -> list[_Section]:
    sections: list[_Section] = []
    current: _Section | None = None
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = _Section(line[1:-1].strip(), line_no)
            sections.append(current)
            continue
        if "=" not in line:
            _fail(line_no, f"expected 'key = value', got {line!r}")
        if current is None:
            _fail(line_no, "key/value before any [section]")
        key, _, value = line.partition("=")
        current.entries.append((line_no, key.strip(), value.strip()))
    return sections


def _parse_radio(sec: _Section) -> RadioParams:
    sec.check_keys(
        {
            "p0_dbm",
            "d0_m",
            "path_loss_exponent",
            "noise_sigma_db",
            "detect_threshold_dbm",
            "detect_prob",
        }
    )
    params = RadioParams()
    for key in (
        "p0_dbm",
        "d0_m",
        "path_loss_exponent",
        "noise_sigma_db",
        "detect_threshold_dbm",
        "detect_prob",
    ):
        got = sec.single(key)
        if got is not None:
            params = replace(params, **{key: _float(got[1], got[0])})
    return params


def _parse_zone(sec: _Section) -> ZoneSpec:
    sec.check_keys({"id", "rect"})
    _, zid = sec.require("id")
    line_no, rect = sec.require("rect")
    x0, y0, x1, y1 = _floats(rect, 4, line_no)
    return ZoneSpec(id=zid, rect=Rect(x0, y0, x1, y1))


def _parse_sensor(sec: _Section) -> SensorSpec:
    sec.check_keys({"id", "pos", "zone", "scan_interval_s", "message_template"})
    _, sid = sec.require("id")
    line_no, pos = sec.require("pos")
    x, y = _floats(pos, 2, line_no)
    _, zone = sec.require("zone")
    spec = SensorSpec(id=sid, pos=Point2D(x, y), zone=zone)
    got = sec.single("scan_interval_s")
    if got is not None:
        spec = replace(spec, scan_interval_s=_float(got[1], got[0]))
    got = sec.single("message_template")
    if got is not None:
        spec = replace(spec, message_template=got[1])
    return spec


def _parse_device(sec: _Section) -> DeviceSpec:
    sec.check_keys({"addr", "name", "discoverable", "accepts_push", "wp"})
    _, addr = sec.require("addr")
    _, name = sec.require("name")
    waypoints = []
    for line_no, key, value in sec.entries:
        if key == "wp":
            t, x, y = _floats(value, 3, line_no)
            waypoints.append(Waypoint(t=t, pos=Point2D(x, y)))
    if not waypoints:
        _fail(sec.line_no, "[device] needs at least one 'wp = t,x,y' line")
    spec = DeviceSpec(addr=addr, friendly_name=name, trajectory=tuple(waypoints))
    got = sec.single("discoverable")
    if got is not None:
        spec = replace(spec, discoverable=_bool(got[1], got[0]))
    got = sec.single("accepts_push")
    if got is not None:
        spec = replace(spec, accepts_push=_bool(got[1], got[0]))
    return spec


def _parse_run(sec: _Section) -> RunParams:
    sec.check_keys(
        {
            "duration_s",
            "tick_s",
            "seed",
            "mode",
            "cell_size_m",
            "snapshot_every_s",
            "min_anchors",
            "max_sample_age_ms",
            "collinearity_tol",
        }
    )
    run = RunParams()
    for key in ("duration_s", "tick_s", "cell_size_m", "snapshot_every_s"):
        got = sec.single(key)
        if got is not None:
            run = replace(run, **{key: _float(got[1], got[0])})
    got = sec.single("seed")
    if got is not None:
        run = replace(run, seed=_int(got[1], got[0]))
    got = sec.single("mode")
    if got is not None:
        if got[1] not in MODES:
            _fail(got[0], f"mode must be one of {MODES}, got {got[1]!r}")
        run = replace(run, mode=got[1])
    fusion = run.fusion
    got = sec.single("min_anchors")
    if got is not None:
        try:
            fusion = replace(fusion, min_anchors=_int(got[1], got[0]))
        except Exception as exc:
            _fail(got[0], str(exc))
    got = sec.single("max_sample_age_ms")
    if got is not None:
        fusion = replace(fusion, max_sample_age_ms=_int(got[1], got[0]))
    got = sec.single("collinearity_tol")
    if got is not None:
        fusion = replace(fusion, collinearity_tol=_float(got[1], got[0]))
    return replace(run, fusion=fusion)


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse scenario text into a ScenarioConfig; raises ConfigError with a
    line reference for anything outside the grammar."""
    zones: list[ZoneSpec] = []
    sensors: list[SensorSpec] = []
    devices: list[DeviceSpec] = []
    radio = RadioParams()
    bounds: Rect | None = None
    run = RunParams()
    seen_single: set[str] = set()
    for sec in _split_sections(text):
        if sec.name in ("radio", "run", "world"):
            if sec.name in seen_single:
                _fail(sec.line_no, f"duplicate [{sec.name}] section")
            seen_single.add(sec.name)
        if sec.name == "radio":
            radio = _parse_radio(sec)
        elif sec.name == "zone":
            zones.append(_parse_zone(sec))
        elif sec.name == "sensor":
            sensors.append(_parse_sensor(sec))
        elif sec.name == "device":
            devices.append(_parse_device(sec))
        elif sec.name == "world":
            sec.check_keys({"bounds"})
            line_no, value = sec.require("bounds")
            x0, y0, x1, y1 = _floats(value, 4, line_no)
            bounds = Rect(x0, y0, x1, y1)
        elif sec.name == "run":
            run = _parse_run(sec)
        else:
            _fail(sec.line_no, f"unknown section [{sec.name}]")
    config = ScenarioConfig(
        radio=radio,
        zones=tuple(zones),
        sensors=tuple(sensors),
        devices=tuple(devices),
        bounds=bounds,
        run=run,
    )
    _validate_run(config.run)
    return config


def _validate_run(run: RunParams) -> None:
    if run.duration_s <= 0:
        raise ConfigError(f"run.duration_s: must be > 0, got {run.duration_s}")
    if run.tick_s <= 0:
        raise ConfigError(f"run.tick_s: must be > 0, got {run.tick_s}")
    if run.cell_size_m <= 0:
        raise ConfigError(f"run.cell_size_m: must be > 0, got {run.cell_size_m}")
    if run.snapshot_every_s <= 0:
        raise ConfigError(f"run.snapshot_every_s: must be > 0, got {run.snapshot_every_s}")


def load_scenario(path) -> ScenarioConfig:
    """Read and parse a scenario file. OSError propagates for missing or
    unreadable files; ConfigError for bad content."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text)


def build_world(config: ScenarioConfig) -> World:
    """Construct and validate the World described by a ScenarioConfig."""
    return make_world(
        sensors=config.sensors,
        devices=config.devices,
        zones=config.zones,
        radio=config.radio,
        bounds=config.bounds,
    )
