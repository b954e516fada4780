"""Position estimation from RSSI observations.

Three estimators and a fusion front end:

* ``trilaterate`` — weighted nonlinear least squares over range residuals
  ``sum_i w_i * (||p - a_i|| - d_i)^2``, solved by Gauss-Newton from a
  linearized initialization (subtract the first anchor's circle equation
  from the rest).
* ``proximity_locate`` — strongest observed sensor wins; with a noiseless
  log-distance channel that sensor is also the geometrically nearest one.
* ``fingerprint_locate`` — nearest cell of a calibration grid in signal
  space (Euclidean distance over dBm vectors, missing readings imputed at
  the -100 dBm map floor).

``fuse`` aggregates fresh rows per sensor (median RSSI), trilaterates when
enough non-degenerate anchors exist and falls back to proximity otherwise.
All tie-breaks are lexicographic / lowest-index so outputs are fully
deterministic. ``track`` appends an estimate to a per-device trajectory,
deriving segment speed, course, and zone-transition events.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from statistics import median

import numpy as np

from .errors import (
    DegenerateGeometry,
    EmptyMap,
    InsufficientAnchors,
    InvalidCellSize,
    InvalidParams,
    NoConvergence,
    NoObservations,
    NonMonotoneTimestamp,
)
from .world import Point2D, RadioParams, World, ZoneSpec, mean_rssi_dbm

METHOD_TRILATERATION = "trilateration"
METHOD_PROXIMITY = "proximity"
METHOD_FINGERPRINT = "fingerprint"

MAP_FLOOR_DBM = -100.0

GN_MAX_ITERATIONS = 50
GN_STEP_TOL_M = 1e-9
GN_FAIL_STEP_M = 1e-6


@dataclass(frozen=True)
class DistanceEstimate:
    sensor_id: str
    anchor: Point2D
    distance_m: float
    weight: float = 1.0


@dataclass(frozen=True)
class LocationEstimate:
    pos: Point2D
    accuracy_m: float
    method: str
    timestamp_ms: int
    zone: str | None = None


@dataclass(frozen=True)
class AnchoredDetection:
    """A detection row joined with the observing sensor's position and zone."""

    sensor_id: str
    anchor: Point2D
    zone: str | None
    rssi_dbm: float
    timestamp_ms: int = 0


@dataclass(frozen=True)
class SampleVector:
    """Observed RSSI per sensor id at one instant."""

    values: dict
    timestamp_ms: int = 0


@dataclass(frozen=True)
class MapCell:
    index: int
    centroid: Point2D
    rssi: dict


@dataclass(frozen=True, eq=False)
class LocationMap:
    """Calibration grid: expected RSSI vector per cell over a fixed sensor set."""

    cells: tuple[MapCell, ...]
    sensor_ids: tuple[str, ...]
    cell_size_m: float
    nx: int
    ny: int
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mat = np.array(
            [[cell.rssi[sid] for sid in self.sensor_ids] for cell in self.cells],
            dtype=float,
        ).reshape(len(self.cells), len(self.sensor_ids))
        object.__setattr__(self, "_matrix", mat)

    @property
    def half_cell_diagonal_m(self) -> float:
        return self.cell_size_m * math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class FusionConfig:
    min_anchors: int = 3
    max_sample_age_ms: int = 15000
    aggregation: str = "median"
    collinearity_tol: float = 1e-6

    def __post_init__(self):
        if self.min_anchors < 3:
            raise InvalidParams(f"min_anchors must be >= 3, got {self.min_anchors}")
        if self.aggregation != "median":
            raise InvalidParams(f"unsupported aggregation: {self.aggregation!r}")


@dataclass(frozen=True)
class ZoneTransition:
    timestamp_ms: int
    from_zone: str | None
    to_zone: str | None


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered location estimates for one device with derived motion."""

    addr: str
    estimates: tuple[LocationEstimate, ...] = ()
    speeds_mps: tuple[float, ...] = ()
    courses_deg: tuple[float, ...] = ()
    transitions: tuple[ZoneTransition, ...] = ()


def estimate_distance(rssi_dbm: float, params: RadioParams) -> float:
    """Invert the noiseless log-distance model; clamped below at d0_m."""
    if params.path_loss_exponent <= 0:
        raise InvalidParams(
            f"path_loss_exponent must be > 0, got {params.path_loss_exponent}"
        )
    d = params.d0_m * 10.0 ** (
        (params.p0_dbm - rssi_dbm) / (10.0 * params.path_loss_exponent)
    )
    return max(params.d0_m, d)


def trilaterate(anchors, collinearity_tol: float = 1e-6) -> tuple[Point2D, float]:
    """Least-squares position from >= 3 anchor distances.

    Returns (point, rms_residual_m) where the residual is the RMS of the
    weighted range residuals at the solution. Raises InsufficientAnchors,
    DegenerateGeometry (anchors collinear: smallest singular value of the
    centered anchor matrix below collinearity_tol), or NoConvergence.
    """
    anchors = list(anchors)
    if len({a.sensor_id for a in anchors}) < 3:
        raise InsufficientAnchors(
            f"need >= 3 anchors with distinct sensor ids, got {len(anchors)}"
        )
    pts = np.array([[a.anchor.x, a.anchor.y] for a in anchors])
    dists = np.array([a.distance_m for a in anchors])
    sqrt_w = np.sqrt(np.array([a.weight for a in anchors]))

    singular = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if singular[-1] < collinearity_tol:
        raise DegenerateGeometry(
            f"anchors are collinear (smallest singular value {singular[-1]:.3g})"
        )

    # Linearized initialization: subtract the first circle equation.
    a0, d0 = pts[0], dists[0]
    lhs = 2.0 * (pts[1:] - a0)
    rhs = d0**2 - dists[1:] ** 2 + np.sum(pts[1:] ** 2, axis=1) - np.sum(a0**2)
    p, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)

    step_norm = math.inf
    for _ in range(GN_MAX_ITERATIONS):
        delta = p - pts
        ranges = np.maximum(np.hypot(delta[:, 0], delta[:, 1]), 1e-12)
        residuals = sqrt_w * (ranges - dists)
        jac = sqrt_w[:, None] * delta / ranges[:, None]
        step, *_ = np.linalg.lstsq(jac, -residuals, rcond=None)
        p = p + step
        step_norm = float(np.hypot(step[0], step[1]))
        if step_norm < GN_STEP_TOL_M:
            break
    else:
        if step_norm > GN_FAIL_STEP_M:
            raise NoConvergence(
                f"step norm {step_norm:.3g} m after {GN_MAX_ITERATIONS} iterations"
            )
    delta = p - pts
    ranges = np.hypot(delta[:, 0], delta[:, 1])
    residuals = sqrt_w * (ranges - dists)
    rms = float(np.sqrt(np.mean(residuals**2)))
    return Point2D(float(p[0]), float(p[1])), rms


def proximity_locate(samples, radio: RadioParams, timestamp_ms: int) -> LocationEstimate:
    """Locate at the strongest sensor (tie: lexicographically smallest id).

    The reported accuracy is the distance the observed RSSI implies.
    """
    samples = list(samples)
    if not samples:
        raise NoObservations("proximity needs at least one sample")
    best = min(samples, key=lambda s: (-s.rssi_dbm, s.sensor_id))
    return LocationEstimate(
        pos=best.anchor,
        accuracy_m=estimate_distance(best.rssi_dbm, radio),
        method=METHOD_PROXIMITY,
        timestamp_ms=timestamp_ms,
        zone=best.zone,
    )


def build_location_map(world: World, cell_size_m: float) -> LocationMap:
    """Tile the world bounds with square cells and record the noiseless
    forward-model RSSI from every sensor to each cell centroid.

    Values below the detection threshold are floored at -100 dBm, matching
    the imputation used for missing query readings.
    """
    if not (math.isfinite(cell_size_m) and cell_size_m > 0):
        raise InvalidCellSize(f"cell size must be > 0, got {cell_size_m!r}")
    b = world.bounds
    nx = max(1, math.ceil(b.width / cell_size_m - 1e-9))
    ny = max(1, math.ceil(b.height / cell_size_m - 1e-9))
    sensor_ids = tuple(sorted(s.id for s in world.sensors))
    sensors = [world.sensor(sid) for sid in sensor_ids]
    cells = []
    for iy in range(ny):
        for ix in range(nx):
            centroid = Point2D(
                b.min_x + (ix + 0.5) * cell_size_m,
                b.min_y + (iy + 0.5) * cell_size_m,
            )
            vec = {}
            for s in sensors:
                v = mean_rssi_dbm(world.radio, s.pos.distance_to(centroid))
                vec[s.id] = v if v >= world.radio.detect_threshold_dbm else MAP_FLOOR_DBM
            cells.append(MapCell(index=iy * nx + ix, centroid=centroid, rssi=vec))
    return LocationMap(
        cells=tuple(cells), sensor_ids=sensor_ids, cell_size_m=cell_size_m, nx=nx, ny=ny
    )


def match_cell(locmap: LocationMap, vector: SampleVector) -> tuple[MapCell, float]:
    """Best-matching cell and its signal-space (dBm) Euclidean distance.

    Readings missing from the vector are imputed at the -100 dBm floor;
    ties go to the lowest cell index.
    """
    if not locmap.cells:
        raise EmptyMap("location map has no cells")
    obs = np.array(
        [vector.values.get(sid, MAP_FLOOR_DBM) for sid in locmap.sensor_ids], dtype=float
    )
    d2 = np.sum((locmap._matrix - obs) ** 2, axis=1)
    best = int(np.argmin(d2))
    return locmap.cells[best], float(math.sqrt(d2[best]))


def fingerprint_locate(locmap: LocationMap, vector: SampleVector) -> LocationEstimate:
    """Nearest calibration cell in signal space; accuracy is half the cell
    diagonal."""
    cell, _ = match_cell(locmap, vector)
    return LocationEstimate(
        pos=cell.centroid,
        accuracy_m=locmap.half_cell_diagonal_m,
        method=METHOD_FINGERPRINT,
        timestamp_ms=vector.timestamp_ms,
    )


def zone_of_position(zones, pos: Point2D) -> str | None:
    """Id of the (unique, half-open) zone containing pos, or None."""
    for z in zones:
        if z.rect.contains(pos):
            return z.id
    return None


def fuse(
    rows,
    cfg: FusionConfig,
    radio: RadioParams,
    zones,
    now_ms: int,
) -> LocationEstimate:
    """Combine one device's detection rows into a single location estimate.

    Rows older than ``max_sample_age_ms`` before ``now_ms`` are discarded;
    the rest are aggregated per sensor by median RSSI and converted to
    distances. With at least ``min_anchors`` sensors of usable geometry the
    result is the trilateration fix (accuracy = RMS range residual),
    otherwise the proximity fix. The zone is the zone containing the fused
    position, else the nearest observing sensor's zone.

    All rows must belong to one device (the caller queries per address).
    """
    fresh = [r for r in rows if r.timestamp_ms >= now_ms - cfg.max_sample_age_ms]
    if not fresh:
        raise NoObservations(f"no rows within {cfg.max_sample_age_ms} ms of t={now_ms}")

    by_sensor: dict[str, list[AnchoredDetection]] = {}
    for r in fresh:
        by_sensor.setdefault(r.sensor_id, []).append(r)
    aggregated = []
    for sid in sorted(by_sensor):
        group = by_sensor[sid]
        aggregated.append(
            AnchoredDetection(
                sensor_id=sid,
                anchor=group[0].anchor,
                zone=group[0].zone,
                rssi_dbm=median(r.rssi_dbm for r in group),
                timestamp_ms=max(r.timestamp_ms for r in group),
            )
        )

    estimate = None
    if len(aggregated) >= cfg.min_anchors:
        anchors = [
            DistanceEstimate(
                sensor_id=a.sensor_id,
                anchor=a.anchor,
                distance_m=estimate_distance(a.rssi_dbm, radio),
            )
            for a in aggregated
        ]
        try:
            pos, rms = trilaterate(anchors, cfg.collinearity_tol)
            estimate = LocationEstimate(
                pos=pos,
                accuracy_m=rms,
                method=METHOD_TRILATERATION,
                timestamp_ms=now_ms,
            )
        except (DegenerateGeometry, NoConvergence):
            estimate = None
    if estimate is None:
        estimate = replace(proximity_locate(aggregated, radio, now_ms), timestamp_ms=now_ms)

    zone = zone_of_position(zones, estimate.pos)
    if zone is None:
        nearest = min(
            aggregated,
            key=lambda a: (a.anchor.distance_to(estimate.pos), a.sensor_id),
        )
        zone = nearest.zone
    return replace(estimate, zone=zone)


def track(history: Trajectory, estimate: LocationEstimate) -> Trajectory:
    """Append an estimate to a trajectory, deriving speed/course for the new
    segment and a zone-transition event when the zone changed."""
    if not history.estimates:
        return replace(history, estimates=(estimate,))
    last = history.estimates[-1]
    if estimate.timestamp_ms <= last.timestamp_ms:
        raise NonMonotoneTimestamp(
            f"estimate at t={estimate.timestamp_ms} ms does not follow t={last.timestamp_ms} ms"
        )
    dt_s = (estimate.timestamp_ms - last.timestamp_ms) / 1000.0
    dx = estimate.pos.x - last.pos.x
    dy = estimate.pos.y - last.pos.y
    dist = math.hypot(dx, dy)
    course = math.degrees(math.atan2(dy, dx)) % 360.0 if dist > 0 else 0.0
    transitions = history.transitions
    if estimate.zone != last.zone:
        transitions += (
            ZoneTransition(
                timestamp_ms=estimate.timestamp_ms,
                from_zone=last.zone,
                to_zone=estimate.zone,
            ),
        )
    return Trajectory(
        addr=history.addr,
        estimates=history.estimates + (estimate,),
        speeds_mps=history.speeds_mps + (dist / dt_s,),
        courses_deg=history.courses_deg + (course,),
        transitions=transitions,
    )
