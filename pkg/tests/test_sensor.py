import numpy as np
import pytest

from btnav import (
    DeviceSpec,
    NotDue,
    Point2D,
    RadioParams,
    Rect,
    SensorSpec,
    SensorState,
    Waypoint,
    ZoneSpec,
    make_world,
    run_scan_cycle,
    sample_inquiry,
    schedule_next_scan,
)


def make_test_world(devices):
    return make_world(
        sensors=[
            SensorSpec("S1", Point2D(0, 0), "A", scan_interval_s=5,
                       message_template="You are in {zone}"),
        ],
        devices=devices,
        zones=[ZoneSpec("A", Rect(-1, -1, 20, 20))],
        radio=RadioParams(),
        bounds=Rect(-1, -1, 20, 20),
    )


def device(addr, x=1.0, y=0.0, **kw):
    return DeviceSpec(addr, "Tag", (Waypoint(0, Point2D(x, y)),), **kw)


def state_for(world):
    return SensorState(spec=world.sensor("S1"))


class TestScanCycle:
    def test_first_visit_pushes_all_accepting_devices(self):
        w = make_test_world([device("AA:00:00:00:00:01"), device("AA:00:00:00:00:02", 2)])
        st, report, pushes = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(0))
        assert len(report.detections) == 2
        assert [p.addr for p in pushes] == ["AA:00:00:00:00:01", "AA:00:00:00:00:02"]
        assert all(p.text == "You are in A" for p in pushes)
        assert report.seq == 1 and st.seq == 1
        assert st.next_scan_at == 5.0

    def test_refusing_device_detected_but_not_pushed(self):
        w = make_test_world([device("AA:00:00:00:00:01", accepts_push=False)])
        _, report, pushes = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(0))
        assert len(report.detections) == 1
        assert pushes == []

    def test_no_duplicate_push_on_rescan(self):
        w = make_test_world([device("AA:00:00:00:00:01")])
        st, _, pushes1 = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(0))
        st, report2, pushes2 = run_scan_cycle(st, w, 5.0, np.random.default_rng(0))
        assert len(pushes1) == 1
        assert pushes2 == []
        assert len(report2.detections) == 1

    def test_not_due(self):
        w = make_test_world([device("AA:00:00:00:00:01")])
        st, _, _ = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(0))
        with pytest.raises(NotDue):
            run_scan_cycle(st, w, 3.0, np.random.default_rng(0))

    def test_seq_gapless_and_timestamps(self):
        w = make_test_world([device("AA:00:00:00:00:01")])
        st = state_for(w)
        rng = np.random.default_rng(0)
        seqs, stamps = [], []
        for t in (0.0, 5.0, 10.0, 15.5):
            st, report, _ = run_scan_cycle(st, w, t, rng)
            seqs.append(report.seq)
            stamps.append(report.timestamp_ms)
        assert seqs == [1, 2, 3, 4]
        assert stamps == [0, 5000, 10000, 15500]

    def test_report_matches_inquiry_exactly(self):
        w = make_test_world([device("AA:00:00:00:00:01"), device("AA:00:00:00:00:02", 3)])
        _, report, _ = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(12))
        expected = sample_inquiry(w, "S1", 0.0, np.random.default_rng(12))
        assert list(report.detections) == expected

    def test_push_only_for_devices_in_report(self):
        w = make_test_world([device("AA:00:00:00:00:01"), device("AA:00:00:00:00:02", 15, 15)])
        # second device is ~21 m away, out of range
        _, report, pushes = run_scan_cycle(state_for(w), w, 0.0, np.random.default_rng(0))
        reported = {d.addr for d in report.detections}
        assert {p.addr for p in pushes} <= reported
        assert "AA:00:00:00:00:02" not in reported


class TestSchedule:
    @pytest.mark.parametrize("now,interval,expected", [(10, 5, 15), (0, 30, 30)])
    def test_schedule_arithmetic(self, now, interval, expected):
        spec = SensorSpec("S1", Point2D(0, 0), "A", scan_interval_s=interval)
        assert schedule_next_scan(SensorState(spec=spec), now) == expected

    def test_zero_interval_rejected_at_build(self):
        from btnav import ConfigError

        with pytest.raises(ConfigError, match="scan_interval_s"):
            make_world(
                sensors=[SensorSpec("S1", Point2D(0, 0), "A", scan_interval_s=0)],
                zones=[ZoneSpec("A", Rect(0, 0, 1, 1))],
                bounds=Rect(0, 0, 1, 1),
            )
