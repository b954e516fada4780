"""Scene model and radio channel: sensors, mobile devices, zones, RSSI sampling.

The channel is log-distance path loss with additive Gaussian shadowing:

    mean_rssi(d) = p0_dbm - 10 * n * log10(max(d, d0) / d0)

Distance is clamped below at the reference distance d0 so the model stays
finite and invertible. A sample is "detected" when the noisy value reaches
the detection threshold (inclusive) and an independent Bernoulli(detect_prob)
trial succeeds. RSSI is produced at inquiry time — a simulation convenience,
not a statement about when real hardware measures signal strength.

A built World is immutable and every sampling function takes an explicit
numpy Generator, so identical (world, seed, query sequence) triples yield
bit-identical observations. For each discoverable device, ``rssi_at``
consumes exactly one Gaussian and one uniform draw regardless of the
detection outcome, which keeps the stream aligned across outcomes.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, UnknownDevice, UnknownSensor
from .protocol import Detection, canonical_address, is_token, name_problem

RSSI_FLOOR_DBM = -120.0
RSSI_CEIL_DBM = 0.0


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle. Zone membership is half-open ([min, max) on
    both axes) so adjacent zones never both contain a boundary point."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    def contains(self, p: Point2D) -> bool:
        return self.min_x <= p.x < self.max_x and self.min_y <= p.y < self.max_y

    def contains_inclusive(self, p: Point2D) -> bool:
        return self.min_x <= p.x <= self.max_x and self.min_y <= p.y <= self.max_y

    def overlaps_interior(self, other: "Rect") -> bool:
        return (
            self.min_x < other.max_x
            and other.min_x < self.max_x
            and self.min_y < other.max_y
            and other.min_y < self.max_y
        )


@dataclass(frozen=True)
class RadioParams:
    """Log-distance path-loss channel parameters.

    Defaults approximate a class-2 Bluetooth link: -40 dBm at the 1 m
    reference, free-space exponent 2.0 and a -60 dBm detection cutoff,
    i.e. about 10 m of range.
    """

    p0_dbm: float = -40.0
    d0_m: float = 1.0
    path_loss_exponent: float = 2.0
    noise_sigma_db: float = 0.0
    detect_threshold_dbm: float = -60.0
    detect_prob: float = 1.0


@dataclass(frozen=True)
class Waypoint:
    t: float
    pos: Point2D


@dataclass(frozen=True)
class DeviceSpec:
    addr: str
    friendly_name: str
    trajectory: tuple[Waypoint, ...]
    discoverable: bool = True
    accepts_push: bool = True


@dataclass(frozen=True)
class SensorSpec:
    id: str
    pos: Point2D
    zone: str
    scan_interval_s: float = 10.0
    message_template: str = "You are in {zone}"


@dataclass(frozen=True)
class ZoneSpec:
    id: str
    rect: Rect


@dataclass(frozen=True)
class World:
    sensors: tuple[SensorSpec, ...]
    devices: tuple[DeviceSpec, ...]
    zones: tuple[ZoneSpec, ...]
    radio: RadioParams
    bounds: Rect
    _sensor_index: dict = field(default_factory=dict, repr=False, compare=False)
    _device_index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._sensor_index.update({s.id: s for s in self.sensors})
        self._device_index.update({d.addr: d for d in self.devices})

    def sensor(self, sensor_id: str) -> SensorSpec:
        try:
            return self._sensor_index[sensor_id]
        except KeyError:
            raise UnknownSensor(f"no sensor with id {sensor_id!r}") from None

    def device(self, addr: str) -> DeviceSpec:
        try:
            return self._device_index[addr]
        except KeyError:
            raise UnknownDevice(f"no device with address {addr!r}") from None


def _check_finite(path: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ConfigError(f"{path}: value must be finite, got {v!r}")


def _validate_radio(radio: RadioParams) -> None:
    _check_finite(
        "radio",
        radio.p0_dbm,
        radio.d0_m,
        radio.path_loss_exponent,
        radio.noise_sigma_db,
        radio.detect_threshold_dbm,
        radio.detect_prob,
    )
    if radio.d0_m <= 0:
        raise ConfigError(f"radio.d0_m: must be > 0, got {radio.d0_m}")
    if radio.path_loss_exponent <= 0:
        raise ConfigError(
            f"radio.path_loss_exponent: must be > 0, got {radio.path_loss_exponent}"
        )
    if radio.noise_sigma_db < 0:
        raise ConfigError(f"radio.noise_sigma_db: must be >= 0, got {radio.noise_sigma_db}")
    if not 0.0 <= radio.detect_prob <= 1.0:
        raise ConfigError(f"radio.detect_prob: must be in [0, 1], got {radio.detect_prob}")


def _validate_zones(zones: tuple[ZoneSpec, ...]) -> None:
    seen: dict[str, int] = {}
    for i, z in enumerate(zones):
        path = f"zone[{i}]"
        if not is_token(z.id):
            raise ConfigError(f"{path}.id: not a valid identifier: {z.id!r}")
        if z.id in seen:
            raise ConfigError(f"{path}.id: duplicate zone id {z.id!r}")
        seen[z.id] = i
        r = z.rect
        _check_finite(f"{path}.rect", r.min_x, r.min_y, r.max_x, r.max_y)
        if not (r.min_x < r.max_x and r.min_y < r.max_y):
            raise ConfigError(f"{path}.rect: min corner must be below max corner")
    for i, a in enumerate(zones):
        for j in range(i + 1, len(zones)):
            b = zones[j]
            if a.rect.overlaps_interior(b.rect):
                raise ConfigError(
                    f"zone[{i}]/zone[{j}]: zones {a.id!r} and {b.id!r} overlap"
                )


def _validate_sensors(sensors: tuple[SensorSpec, ...], zone_ids: set[str]) -> None:
    seen: set[str] = set()
    for i, s in enumerate(sensors):
        path = f"sensor[{i}]"
        if not is_token(s.id):
            raise ConfigError(f"{path}.id: not a valid identifier: {s.id!r}")
        if s.id in seen:
            raise ConfigError(f"{path}.id: duplicate sensor id {s.id!r}")
        seen.add(s.id)
        _check_finite(f"{path}.pos", s.pos.x, s.pos.y)
        if s.zone not in zone_ids:
            raise ConfigError(f"{path}.zone: unknown zone id {s.zone!r}")
        if not (math.isfinite(s.scan_interval_s) and s.scan_interval_s > 0):
            raise ConfigError(
                f"{path}.scan_interval_s: must be > 0, got {s.scan_interval_s}"
            )
        try:
            s.message_template.format(zone=s.zone, sensor=s.id)
        except (KeyError, IndexError, ValueError) as exc:
            raise ConfigError(
                f"{path}.message_template: only {{zone}} and {{sensor}} placeholders "
                f"are supported ({exc})"
            ) from None


def _validate_devices(devices: tuple[DeviceSpec, ...]) -> tuple[DeviceSpec, ...]:
    out = []
    seen: set[str] = set()
    for i, d in enumerate(devices):
        path = f"device[{i}]"
        try:
            addr = canonical_address(d.addr)
        except ValueError as exc:
            raise ConfigError(f"{path}.addr: {exc}") from None
        if addr in seen:
            raise ConfigError(f"{path}.addr: duplicate address {addr}")
        seen.add(addr)
        problem = name_problem(d.friendly_name)
        if problem is not None:
            raise ConfigError(f"{path}.friendly_name: {problem}")
        if not d.trajectory:
            raise ConfigError(f"{path}.trajectory: at least one waypoint required")
        if d.trajectory[0].t != 0:
            raise ConfigError(
                f"{path}.wp[0]: first waypoint must be at t=0, got t={d.trajectory[0].t}"
            )
        prev_t = None
        for k, wp in enumerate(d.trajectory):
            _check_finite(f"{path}.wp[{k}]", wp.t, wp.pos.x, wp.pos.y)
            if prev_t is not None and wp.t <= prev_t:
                raise ConfigError(f"{path}.wp[{k}]: non-increasing waypoint time")
            prev_t = wp.t
        out.append(
            DeviceSpec(
                addr=addr,
                friendly_name=d.friendly_name,
                trajectory=d.trajectory,
                discoverable=d.discoverable,
                accepts_push=d.accepts_push,
            )
        )
    return tuple(out)


def _default_bounds(
    sensors: tuple[SensorSpec, ...],
    devices: tuple[DeviceSpec, ...],
    zones: tuple[ZoneSpec, ...],
) -> Rect:
    xs: list[float] = []
    ys: list[float] = []
    for s in sensors:
        xs.append(s.pos.x)
        ys.append(s.pos.y)
    for d in devices:
        for wp in d.trajectory:
            xs.append(wp.pos.x)
            ys.append(wp.pos.y)
    for z in zones:
        xs.extend([z.rect.min_x, z.rect.max_x])
        ys.extend([z.rect.min_y, z.rect.max_y])
    if not xs:
        raise ConfigError("bounds: cannot be derived from an empty world; set them explicitly")
    min_x, max_x = min(xs), max(xs)
    min_y, max_y = min(ys), max(ys)
    if max_x - min_x <= 0:
        min_x, max_x = min_x - 0.5, max_x + 0.5
    if max_y - min_y <= 0:
        min_y, max_y = min_y - 0.5, max_y + 0.5
    return Rect(min_x, min_y, max_x, max_y)


def make_world(
    sensors=(),
    devices=(),
    zones=(),
    radio: RadioParams = RadioParams(),
    bounds: Rect | None = None,
) -> World:
    """Validate all scene invariants and return an immutable World.

    Raises ConfigError (message prefixed with the offending field path) for
    duplicate ids or addresses, overlapping zones, unknown zone references,
    non-monotone waypoint times, out-of-bounds positions and bad radio
    parameters.
    """
    sensors = tuple(sensors)
    zones = tuple(zones)
    _validate_radio(radio)
    _validate_zones(zones)
    _validate_sensors(sensors, {z.id for z in zones})
    devices = _validate_devices(tuple(devices))

    if bounds is None:
        bounds = _default_bounds(sensors, devices, zones)
    else:
        _check_finite("bounds", bounds.min_x, bounds.min_y, bounds.max_x, bounds.max_y)
        if not (bounds.min_x < bounds.max_x and bounds.min_y < bounds.max_y):
            raise ConfigError("bounds: min corner must be below max corner")
        for i, s in enumerate(sensors):
            if not bounds.contains_inclusive(s.pos):
                raise ConfigError(f"sensor[{i}].pos: outside world bounds")
        for i, d in enumerate(devices):
            for k, wp in enumerate(d.trajectory):
                if not bounds.contains_inclusive(wp.pos):
                    raise ConfigError(f"device[{i}].wp[{k}]: outside world bounds")
    return World(sensors=sensors, devices=devices, zones=zones, radio=radio, bounds=bounds)


def mean_rssi_dbm(radio: RadioParams, distance_m: float) -> float:
    """Noiseless forward model; distance clamped below at d0_m."""
    d = max(radio.d0_m, distance_m)
    return radio.p0_dbm - 10.0 * radio.path_loss_exponent * math.log10(d / radio.d0_m)


def device_position(world: World, addr: str, t: float) -> Point2D:
    """Ground-truth device position at time t (seconds).

    Piecewise-linear interpolation between bracketing waypoints; the last
    waypoint's position is held for t beyond it.
    """
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    dev = world.device(addr)
    wps = dev.trajectory
    if t >= wps[-1].t:
        return wps[-1].pos
    times = [wp.t for wp in wps]
    i = bisect_right(times, t)
    a, b = wps[i - 1], wps[i]
    frac = (t - a.t) / (b.t - a.t)
    return Point2D(
        a.pos.x + frac * (b.pos.x - a.pos.x),
        a.pos.y + frac * (b.pos.y - a.pos.y),
    )


def rssi_at(
    world: World, sensor_id: str, addr: str, t: float, rng: np.random.Generator
) -> float | None:
    """One RSSI observation of a device by a sensor, or None if undetected.

    None when the device is not discoverable, the noisy value falls below
    the detection threshold (threshold itself is detected), or the
    Bernoulli(detect_prob) trial fails. The returned sample is clamped into
    [-120, 0] dBm, the representable receiver range.
    """
    sensor = world.sensor(sensor_id)
    dev = world.device(addr)
    if not dev.discoverable:
        return None
    pos = device_position(world, addr, t)
    value = mean_rssi_dbm(world.radio, sensor.pos.distance_to(pos))
    value += rng.normal(0.0, world.radio.noise_sigma_db)
    trial = rng.random()
    if value < world.radio.detect_threshold_dbm:
        return None
    if trial >= world.radio.detect_prob:
        return None
    return min(RSSI_CEIL_DBM, max(RSSI_FLOOR_DBM, value))


def sample_inquiry(
    world: World, sensor_id: str, t: float, rng: np.random.Generator
) -> list[Detection]:
    """One inquiry scan: a Detection per discovered device.

    Devices are sampled (and therefore listed) in canonical address order,
    so the result is sorted and duplicate-free by construction.
    """
    world.sensor(sensor_id)
    detections = []
    for dev in sorted(world.devices, key=lambda d: d.addr):
        value = rssi_at(world, sensor_id, dev.addr, t, rng)
        if value is not None:
            detections.append(
                Detection(addr=dev.addr, rssi_dbm=value, friendly_name=dev.friendly_name)
            )
    return detections
