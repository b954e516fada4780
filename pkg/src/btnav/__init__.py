"""btnav: deterministic Bluetooth sensor-network simulation and positioning.

A seed-reproducible simulator of inquiry-scanning Bluetooth sensors, a
bit-exact sensor-to-server wire protocol, a file-backed detection store,
and a positioning engine (RSSI distance inversion, least-squares
trilateration, proximity, calibration-grid fingerprinting) with per-device
trajectory tracking.
"""

from .errors import (
    BtnavError,
    ConfigError,
    DegenerateGeometry,
    DuplicateRow,
    EmptyMap,
    InsufficientAnchors,
    InvalidCellSize,
    InvalidParams,
    InvalidReport,
    NoConvergence,
    NoObservations,
    NonMonotoneTimestamp,
    NotDue,
    ParseError,
    PositioningError,
    UnknownDevice,
    UnknownSensor,
)
from .mapping import render_map, render_svg_map, render_text_map
from .metrics import DeviceErrorStats, Metrics, compute_metrics, render_metrics
from .positioning import (
    AnchoredDetection,
    DistanceEstimate,
    FusionConfig,
    LocationEstimate,
    LocationMap,
    MapCell,
    SampleVector,
    Trajectory,
    ZoneTransition,
    build_location_map,
    estimate_distance,
    fingerprint_locate,
    fuse,
    match_cell,
    proximity_locate,
    track,
    trilaterate,
    zone_of_position,
)
from .protocol import (
    Detection,
    ScanReport,
    canonical_address,
    decode_report,
    encode_report,
    quantize_rssi,
)
from .runner import RunOutputs, run_scenario
from .scenario import (
    RunParams,
    ScenarioConfig,
    build_world,
    load_scenario,
    parse_scenario,
)
from .sensor import PushMessage, SensorState, run_scan_cycle, schedule_next_scan
from .store import CommitSummary, DetectionRow, StagedItem, Store
from .world import (
    DeviceSpec,
    Point2D,
    RadioParams,
    Rect,
    SensorSpec,
    Waypoint,
    World,
    ZoneSpec,
    device_position,
    make_world,
    mean_rssi_dbm,
    rssi_at,
    sample_inquiry,
)

__version__ = "0.1.0"
