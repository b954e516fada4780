import pytest

from btnav import (
    Detection,
    DuplicateRow,
    ParseError,
    ScanReport,
    Store,
    encode_report,
)


def raw_report(sensor="S1", seq=1, ts=1000, addrs=("AA:BB:CC:DD:EE:FF",), rssi=-57.0):
    dets = tuple(Detection(a, rssi, "Tag") for a in sorted(addrs))
    return encode_report(ScanReport(sensor, seq, ts, dets))


@pytest.fixture
def store(tmp_path):
    return Store(tmp_path / "store")


class TestIngest:
    def test_write_through_identity(self, store):
        raw = raw_report()
        item = store.ingest("S1", raw, received_at_ms=5)
        assert item.path.name == "S1.0001"
        assert item.path.read_bytes() == raw
        assert store.staging == (item,)

    def test_garbage_bytes_staged_without_parsing(self, store):
        item = store.ingest("S1", b"not a report\n")
        assert item.raw == b"not a report\n"

    def test_empty_bytes_rejected(self, store):
        with pytest.raises(ValueError):
            store.ingest("S1", b"")

    def test_sequential_file_names_per_source(self, store):
        store.ingest("S1", b"a\n")
        store.ingest("S2", b"b\n")
        store.ingest("S1", b"c\n")
        names = sorted(p.name for p in store.staging_dir.iterdir())
        assert names == ["S1.0001", "S1.0002", "S2.0001"]

    def test_unsafe_source_id_rejected(self, store):
        with pytest.raises(ValueError):
            store.ingest("../evil", b"x\n")


class TestCommit:
    def test_valid_report_expands_to_rows(self, store):
        store.ingest("S1", raw_report(addrs=("AA:00:00:00:00:01", "AA:00:00:00:00:02")))
        summary = store.commit()
        assert summary.committed == 1 and summary.rejected == []
        assert store.retrieve_counts() == {"S1": 2}
        assert store.staging == ()

    def test_malformed_item_rejected_with_line_number(self, store):
        store.ingest("S1", raw_report())
        store.ingest("S2", b"RPT|S2|1|0|9\nEND\n")
        summary = store.commit()
        assert summary.committed == 1
        [(source, err)] = summary.rejected
        assert source == "S2"
        assert isinstance(err, ParseError) and err.line == 2

    def test_duplicate_replay_rejected_table_unchanged(self, store):
        raw = raw_report()
        store.ingest("S1", raw)
        store.commit()
        before = store.tables()
        store.ingest("S1", raw)
        summary = store.commit()
        [(_, err)] = summary.rejected
        assert isinstance(err, DuplicateRow)
        assert store.tables() == before

    def test_table_created_on_first_report(self, store):
        store.ingest("feed", raw_report(sensor="S7", addrs=()))
        store.commit()
        assert store.retrieve_counts() == {"S7": 0}
        assert (store.tables_dir / "S7.csv").exists()

    def test_sensor_id_comes_from_report_not_source(self, store):
        store.ingest("gateway-9", raw_report(sensor="S3"))
        store.commit()
        assert store.retrieve_counts() == {"S3": 1}


class TestQueries:
    def test_counts_multiple_sensors(self, store):
        for sensor, n in (("S1", 3), ("S2", 5)):
            for seq in range(1, n + 1):
                store.ingest(sensor, raw_report(sensor=sensor, seq=seq, ts=seq * 1000))
        store.commit()
        assert store.retrieve_counts() == {"S1": 3, "S2": 5}

    def test_empty_store(self, store):
        assert store.retrieve_counts() == {}
        assert store.query_detections("AA:BB:CC:DD:EE:FF", 0, 10**9) == []

    def test_query_ordering_across_sensors(self, store):
        addr = "AA:BB:CC:DD:EE:FF"
        for sensor in ("S3", "S1", "S2"):
            store.ingest(sensor, raw_report(sensor=sensor, ts=1000, addrs=(addr,)))
        store.commit()
        rows = store.query_detections(addr, 1000, 1000)
        assert [r.sensor_id for r in rows] == ["S1", "S2", "S3"]

    def test_query_window_inclusive(self, store):
        addr = "AA:BB:CC:DD:EE:FF"
        for seq, ts in enumerate((500, 1000, 1500), start=1):
            store.ingest("S1", raw_report(seq=seq, ts=ts, addrs=(addr,)))
        store.commit()
        assert [r.timestamp_ms for r in store.query_detections(addr, 500, 1000)] == [500, 1000]
        assert store.query_detections(addr, 1600, 2000) == []

    def test_inverted_window_rejected(self, store):
        with pytest.raises(ValueError):
            store.query_detections("AA:BB:CC:DD:EE:FF", 10, 5)


class TestDurability:
    def test_rebuild_from_disk_identical(self, tmp_path):
        root = tmp_path / "store"
        s1 = Store(root)
        addr = "AA:BB:CC:DD:EE:FF"
        for seq in range(1, 4):
            s1.ingest("S1", raw_report(seq=seq, ts=seq * 1000, addrs=(addr,)))
        s1.ingest("S2", raw_report(sensor="S2", ts=2500, addrs=(addr,)))
        s1.commit()

        s2 = Store(root)
        assert s2.retrieve_counts() == s1.retrieve_counts()
        assert s2.query_detections(addr, 0, 10**9) == s1.query_detections(addr, 0, 10**9)

        e1 = s1.export_tables(tmp_path / "e1")
        e2 = s2.export_tables(tmp_path / "e2")
        assert [p.name for p in e1] == [p.name for p in e2]
        for a, b in zip(e1, e2):
            assert a.read_bytes() == b.read_bytes()
        # exports are byte-identical to the live table files
        for p in e1:
            assert p.read_bytes() == (root / "tables" / p.name).read_bytes()

    def test_double_commit_idempotent(self, tmp_path):
        raw = raw_report(addrs=("AA:00:00:00:00:01", "AA:00:00:00:00:02"))
        once = Store(tmp_path / "once")
        once.ingest("S1", raw)
        once.commit()
        twice = Store(tmp_path / "twice")
        twice.ingest("S1", raw)
        twice.commit()
        twice.ingest("S1", raw)
        twice.commit()
        assert twice.tables() == once.tables()

    def test_out_of_order_seq_keeps_table_sorted(self, store):
        addr = "AA:BB:CC:DD:EE:FF"
        store.ingest("S1", raw_report(seq=5, ts=5000, addrs=(addr,)))
        store.commit()
        store.ingest("S1", raw_report(seq=2, ts=2000, addrs=(addr,)))
        store.commit()
        rows = store.tables()["S1"]
        assert [r.seq for r in rows] == [2, 5]
        text = (store.tables_dir / "S1.csv").read_text()
        lines = text.strip().split("\n")
        assert lines[1].startswith("S1,2,") and lines[2].startswith("S1,5,")

    def test_conservation(self, store):
        committed_detections = 0
        for seq in range(1, 6):
            addrs = tuple(f"AA:00:00:00:00:{k:02X}" for k in range(1, seq + 1))
            store.ingest("S1", raw_report(seq=seq, ts=seq * 1000, addrs=addrs))
            committed_detections += len(addrs)
        summary = store.commit()
        assert summary.committed == 5
        assert sum(store.retrieve_counts().values()) == committed_detections

    def test_name_with_comma_round_trips_through_csv(self, tmp_path):
        root = tmp_path / "store"
        s1 = Store(root)
        det = Detection("AA:BB:CC:DD:EE:FF", -57.0, "Phone, mine")
        s1.ingest("S1", encode_report(ScanReport("S1", 1, 1000, (det,))))
        s1.commit()
        s2 = Store(root)
        assert s2.tables()["S1"][0].friendly_name == "Phone, mine"
