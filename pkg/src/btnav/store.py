"""Server-side ingestion and persistence.

Two stages, mirroring receive-then-commit:

* ``ingest`` is content-blind: raw bytes are appended to the staging area
  and written through to ``staging/<source_id>.<NNNN>``. Nothing is parsed.
* ``commit`` decodes every staged item; valid reports expand into rows of
  the per-sensor table (created on first report), invalid or replayed items
  are reported in the summary and leave the tables untouched.

Tables live on disk as one CSV per sensor under ``tables/`` with the fixed
header ``sensor_id,seq,timestamp_ms,addr,rssi_dbm,friendly_name``. Rows are
kept ordered by (seq, addr) with (seq, addr) unique per table, so a file is
normally append-only; an out-of-order arrival triggers a rewrite of that
table to preserve the ordering on disk. Constructing a Store over a root
that already holds table files reloads them, which is how a store is
rebuilt after a restart.
"""

from __future__ import annotations

import csv
import io
import re
import threading
from bisect import bisect_left, bisect_right, insort
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateRow, ParseError
from .protocol import canonical_address, decode_report, format_rssi

TABLE_COLUMNS = ["sensor_id", "seq", "timestamp_ms", "addr", "rssi_dbm", "friendly_name"]
TABLE_HEADER = ",".join(TABLE_COLUMNS)

_SOURCE_RE = re.compile(r"[A-Za-z0-9_.-]{1,128}")


@dataclass(frozen=True)
class StagedItem:
    source_id: str
    raw: bytes
    received_at_ms: int
    path: Path


@dataclass(frozen=True)
class DetectionRow:
    sensor_id: str
    seq: int
    timestamp_ms: int
    addr: str
    rssi_dbm: float
    friendly_name: str


@dataclass
class CommitSummary:
    committed: int
    rejected: list


def _row_csv(row: DetectionRow) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            row.sensor_id,
            str(row.seq),
            str(row.timestamp_ms),
            row.addr,
            format_rssi(row.rssi_dbm),
            row.friendly_name,
        ]
    )
    return buf.getvalue()


class Store:
    """Staging area plus per-sensor detection tables, persisted under ``root``.

    Mutations are serialized by a lock, so concurrent ingest from many
    sources is safe and commit runs exclusively.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.staging_dir = self.root / "staging"
        self.tables_dir = self.root / "tables"
        self.staging_dir.mkdir(parents=True, exist_ok=True)
        self.tables_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._staging: list[StagedItem] = []
        self._stage_counts: dict[str, int] = {}
        self._tables: dict[str, list[DetectionRow]] = {}
        self._keys: dict[str, set] = {}
        self._by_addr: dict[str, list[DetectionRow]] = {}
        self._load_tables()
        self._scan_staging_counters()

    # -- construction from disk ------------------------------------------

    def _load_tables(self) -> None:
        for path in sorted(self.tables_dir.glob("*.csv")):
            sensor_id = path.stem
            rows: list[DetectionRow] = []
            with path.open("r", encoding="utf-8", newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header != TABLE_COLUMNS:
                    raise ValueError(f"{path}: unexpected table header {header!r}")
                for rec in reader:
                    rows.append(
                        DetectionRow(
                            sensor_id=rec[0],
                            seq=int(rec[1]),
                            timestamp_ms=int(rec[2]),
                            addr=rec[3],
                            rssi_dbm=float(rec[4]),
                            friendly_name=rec[5],
                        )
                    )
            self._tables[sensor_id] = rows
            self._keys[sensor_id] = {(r.seq, r.addr) for r in rows}
            for r in rows:
                self._index_row(r)

    def _scan_staging_counters(self) -> None:
        for path in self.staging_dir.iterdir():
            name = path.name
            if "." not in name:
                continue
            prefix, _, suffix = name.rpartition(".")
            if suffix.isdigit():
                n = int(suffix)
                if n > self._stage_counts.get(prefix, 0):
                    self._stage_counts[prefix] = n

    # -- ingestion ---------------------------------------------------------

    def ingest(self, source_id: str, raw: bytes, received_at_ms: int = 0) -> StagedItem:
        """Stage raw bytes from a source; no parsing, write-through to disk."""
        if not raw:
            raise ValueError("raw bytes must be non-empty")
        if not _SOURCE_RE.fullmatch(source_id):
            raise ValueError(f"source_id is not a safe file label: {source_id!r}")
        with self._lock:
            n = self._stage_counts.get(source_id, 0) + 1
            self._stage_counts[source_id] = n
            path = self.staging_dir / f"{source_id}.{n:04d}"
            path.write_bytes(raw)
            item = StagedItem(
                source_id=source_id, raw=bytes(raw), received_at_ms=received_at_ms, path=path
            )
            self._staging.append(item)
            return item

    @property
    def staging(self) -> tuple[StagedItem, ...]:
        return tuple(self._staging)

    # -- commit ------------------------------------------------------------

    def commit(self) -> CommitSummary:
        """Decode all staged items into table rows; empty the staging list.

        Per-item failures (ParseError, DuplicateRow) land in the summary's
        ``rejected`` list as (source_id, error) and never touch the tables.
        """
        with self._lock:
            committed = 0
            rejected: list = []
            for item in self._staging:
                try:
                    report = decode_report(item.raw)
                except ParseError as exc:
                    rejected.append((item.source_id, exc))
                    continue
                keys = self._keys.setdefault(report.sensor_id, set())
                table = self._tables.setdefault(report.sensor_id, [])
                dup = next(
                    (d for d in report.detections if (report.seq, d.addr) in keys), None
                )
                if dup is not None:
                    rejected.append(
                        (
                            item.source_id,
                            DuplicateRow(
                                f"table {report.sensor_id}: duplicate row "
                                f"(seq={report.seq}, addr={dup.addr})"
                            ),
                        )
                    )
                    continue
                rows = [
                    DetectionRow(
                        sensor_id=report.sensor_id,
                        seq=report.seq,
                        timestamp_ms=report.timestamp_ms,
                        addr=d.addr,
                        rssi_dbm=d.rssi_dbm,
                        friendly_name=d.friendly_name,
                    )
                    for d in report.detections
                ]
                self._append_rows(report.sensor_id, table, keys, rows)
                committed += 1
            self._staging.clear()
            return CommitSummary(committed=committed, rejected=rejected)

    def _append_rows(self, sensor_id, table, keys, rows) -> None:
        path = self.tables_dir / f"{sensor_id}.csv"
        in_order = not rows or not table or (
            (table[-1].seq, table[-1].addr) < (rows[0].seq, rows[0].addr)
        )
        table.extend(rows)
        keys.update((r.seq, r.addr) for r in rows)
        for r in rows:
            self._index_row(r)
        if in_order:
            mode = "a" if path.exists() else "w"
            with path.open(mode, encoding="utf-8", newline="") as fh:
                if mode == "w":
                    fh.write(TABLE_HEADER + "\n")
                for r in rows:
                    fh.write(_row_csv(r))
        else:
            table.sort(key=lambda r: (r.seq, r.addr))
            self._write_table(path, table)

    def _write_table(self, path: Path, table) -> None:
        with path.open("w", encoding="utf-8", newline="") as fh:
            fh.write(TABLE_HEADER + "\n")
            for r in table:
                fh.write(_row_csv(r))

    def _index_row(self, row: DetectionRow) -> None:
        lst = self._by_addr.setdefault(row.addr, [])
        key = (row.timestamp_ms, row.sensor_id)
        if not lst or (lst[-1].timestamp_ms, lst[-1].sensor_id) <= key:
            lst.append(row)
        else:
            insort(lst, row, key=lambda r: (r.timestamp_ms, r.sensor_id))

    # -- queries -------------------------------------------------------------

    def tables(self) -> dict[str, tuple[DetectionRow, ...]]:
        with self._lock:
            return {sid: tuple(rows) for sid, rows in sorted(self._tables.items())}

    def retrieve_counts(self) -> dict[str, int]:
        """Per-sensor committed row counts; sensors without a table are absent."""
        with self._lock:
            return {sid: len(rows) for sid, rows in sorted(self._tables.items())}

    def query_detections(self, addr: str, t_from_ms: int, t_to_ms: int):
        """All rows for a device within [t_from_ms, t_to_ms], inclusive,
        ordered by (timestamp_ms, sensor_id)."""
        if t_from_ms > t_to_ms:
            raise ValueError(f"inverted window: {t_from_ms} > {t_to_ms}")
        addr = canonical_address(addr)
        with self._lock:
            lst = self._by_addr.get(addr, [])
            ts = [r.timestamp_ms for r in lst]
            lo = bisect_left(ts, t_from_ms)
            hi = bisect_right(ts, t_to_ms)
            return list(lst[lo:hi])

    def export_tables(self, dest_dir) -> list[Path]:
        """Write canonical table files into dest_dir; returns the paths."""
        dest = Path(dest_dir)
        dest.mkdir(parents=True, exist_ok=True)
        written = []
        with self._lock:
            for sid in sorted(self._tables):
                path = dest / f"{sid}.csv"
                self._write_table(path, self._tables[sid])
                written.append(path)
        return written
