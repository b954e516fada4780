"""Sensor-to-server scan report wire format.

The format is a line protocol, UTF-8 with LF endings:

    report    = header LF detection* "END" LF
    header    = "RPT|" sensor_id "|" seq "|" timestamp_ms "|" count
    detection = "DET|" address "|" rssi "|" name LF    (exactly `count` lines)
    address   = HH ":" HH ":" HH ":" HH ":" HH ":" HH  (HH = two hex digits)
    rssi      = "-"? digits "." digit                  (one decimal digit)
    name      = 1-248 bytes of UTF-8, no control characters, no "|"

Detections are sorted ascending by canonical (uppercase) address with no
duplicates, integers carry no leading zeros, and RSSI is quantized to one
decimal (ties rounded away from zero) at encode time. The decoder is
strict — it accepts the encoder's image, plus lowercase hex in addresses
(normalized to uppercase) — so ``decode_report(encode_report(r)) == r``
for every report whose RSSI values are already at wire precision.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_UP

from .errors import InvalidReport, ParseError

MAX_NAME_BYTES = 248
MAX_SENSOR_ID_LEN = 64
RSSI_MIN_DBM = -120.0
RSSI_MAX_DBM = 0.0

_ADDR_RE = re.compile(r"[0-9A-Fa-f]{2}(?::[0-9A-Fa-f]{2}){5}")
_TOKEN_RE = re.compile(r"[A-Za-z0-9_-]{1,64}")
_UINT_RE = re.compile(r"0|[1-9][0-9]*")
_RSSI_RE = re.compile(r"-?(?:0|[1-9][0-9]*)\.[0-9]")


def canonical_address(text: str) -> str:
    """Normalize a Bluetooth address to uppercase colon-separated hex.

    Accepts lowercase hex digits; raises ValueError for anything that is
    not six colon-separated octets.
    """
    if not _ADDR_RE.fullmatch(text):
        raise ValueError(f"invalid BT address: {text!r}")
    return text.upper()


def is_token(text: str) -> bool:
    """True if ``text`` is a wire-safe identifier ([A-Za-z0-9_-], 1-64 chars)."""
    return bool(_TOKEN_RE.fullmatch(text))


def name_problem(name: str) -> str | None:
    """Reason a friendly name cannot travel on the wire, or None if it can."""
    if not name:
        return "empty name"
    if len(name.encode("utf-8")) > MAX_NAME_BYTES:
        return "name too long"
    for ch in name:
        o = ord(ch)
        if o < 0x20 or 0x7F <= o <= 0x9F:
            return "control character in name"
        if ch == "|":
            return "'|' in name"
    return None


def quantize_rssi(value: float) -> float:
    """Round to one decimal place, ties away from zero; -0.0 becomes 0.0."""
    q = float(Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))
    return 0.0 if q == 0.0 else q


def format_rssi(value: float) -> str:
    q = Decimal(repr(value)).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    if q.is_zero():
        q = abs(q)
    return str(q)


@dataclass(frozen=True)
class Detection:
    addr: str
    rssi_dbm: float
    friendly_name: str


@dataclass(frozen=True)
class ScanReport:
    sensor_id: str
    seq: int
    timestamp_ms: int
    detections: tuple[Detection, ...]


def encode_report(report: ScanReport) -> bytes:
    """Serialize a report, validating every type invariant first.

    Raises InvalidReport on any violation (bad sensor id, negative counters,
    unsorted or duplicate addresses, RSSI outside [-120, 0], unencodable
    friendly name).
    """
    if not is_token(report.sensor_id):
        raise InvalidReport(f"invalid sensor id: {report.sensor_id!r}")
    if not isinstance(report.seq, int) or report.seq < 0:
        raise InvalidReport(f"seq must be a nonnegative integer, got {report.seq!r}")
    if not isinstance(report.timestamp_ms, int) or report.timestamp_ms < 0:
        raise InvalidReport(
            f"timestamp_ms must be a nonnegative integer, got {report.timestamp_ms!r}"
        )
    lines = [
        f"RPT|{report.sensor_id}|{report.seq}|{report.timestamp_ms}|{len(report.detections)}"
    ]
    prev_addr = None
    for det in report.detections:
        try:
            addr = canonical_address(det.addr)
        except ValueError as exc:
            raise InvalidReport(str(exc)) from None
        if prev_addr is not None and addr <= prev_addr:
            kind = "duplicate" if addr == prev_addr else "unsorted"
            raise InvalidReport(f"{kind} detection address: {addr}")
        prev_addr = addr
        if not (RSSI_MIN_DBM <= det.rssi_dbm <= RSSI_MAX_DBM):
            raise InvalidReport(f"RSSI out of range: {det.rssi_dbm!r}")
        problem = name_problem(det.friendly_name)
        if problem is not None:
            raise InvalidReport(f"{problem}: {det.friendly_name!r}")
        lines.append(f"DET|{addr}|{format_rssi(det.rssi_dbm)}|{det.friendly_name}")
    lines.append("END")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_uint(text: str, line: int, what: str) -> int:
    if not _UINT_RE.fullmatch(text):
        raise ParseError(line, f"invalid {what}: {text!r}")
    return int(text)


def _parse_detection(line_text: str, line_no: int, prev_addr: str | None) -> Detection:
    parts = line_text.split("|")
    if parts[0] != "DET":
        raise ParseError(line_no, f"expected detection line, got {line_text[:20]!r}")
    if len(parts) != 4:
        raise ParseError(line_no, f"detection line has {len(parts)} fields, expected 4")
    try:
        addr = canonical_address(parts[1])
    except ValueError:
        raise ParseError(line_no, f"invalid address: {parts[1]!r}") from None
    if prev_addr is not None:
        if addr == prev_addr:
            raise ParseError(line_no, f"duplicate address: {addr}")
        if addr < prev_addr:
            raise ParseError(line_no, "detections out of address order")
    if not _RSSI_RE.fullmatch(parts[2]):
        raise ParseError(line_no, f"invalid RSSI: {parts[2]!r}")
    rssi = float(parts[2])
    if not (RSSI_MIN_DBM <= rssi <= RSSI_MAX_DBM):
        raise ParseError(line_no, f"RSSI out of range: {parts[2]}")
    if rssi == 0.0:
        rssi = 0.0  # normalize -0.0
    name = parts[3]
    problem = name_problem(name)
    if problem is not None:
        raise ParseError(line_no, problem)
    return Detection(addr=addr, rssi_dbm=rssi, friendly_name=name)


def decode_report(data: bytes) -> ScanReport:
    """Parse wire bytes back into a ScanReport.

    Strict: anything outside the canonical grammar raises ParseError with a
    1-based line number and a reason. Never raises anything else, no matter
    the input bytes.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        line = data[: exc.start].count(b"\n") + 1
        raise ParseError(line, "invalid UTF-8") from None
    lines = text.split("\n")
    if lines[-1] != "":
        raise ParseError(len(lines), "report does not end with a line feed")
    lines.pop()
    if not lines:
        raise ParseError(1, "empty report")

    parts = lines[0].split("|")
    if parts[0] != "RPT":
        raise ParseError(1, f"bad magic: {parts[0][:10]!r}")
    if len(parts) != 5:
        raise ParseError(1, f"header has {len(parts)} fields, expected 5")
    if not is_token(parts[1]):
        raise ParseError(1, f"invalid sensor id: {parts[1]!r}")
    sensor_id = parts[1]
    seq = _parse_uint(parts[2], 1, "sequence number")
    timestamp_ms = _parse_uint(parts[3], 1, "timestamp")
    count = _parse_uint(parts[4], 1, "detection count")

    detections: list[Detection] = []
    prev_addr = None
    for i in range(count):
        line_no = 2 + i
        if line_no - 1 >= len(lines):
            raise ParseError(line_no, "truncated report (missing detection line)")
        line_text = lines[line_no - 1]
        if line_text == "END":
            raise ParseError(line_no, "detection count mismatch")
        det = _parse_detection(line_text, line_no, prev_addr)
        prev_addr = det.addr
        detections.append(det)

    end_no = 2 + count
    if end_no - 1 >= len(lines):
        raise ParseError(end_no, "missing END")
    end_line = lines[end_no - 1]
    if end_line != "END":
        if end_line.startswith("DET|"):
            raise ParseError(end_no, "detection count mismatch")
        raise ParseError(end_no, f"missing END, got {end_line[:20]!r}")
    if len(lines) != end_no:
        raise ParseError(end_no + 1, "trailing bytes after END")
    return ScanReport(
        sensor_id=sensor_id,
        seq=seq,
        timestamp_ms=timestamp_ms,
        detections=tuple(detections),
    )
