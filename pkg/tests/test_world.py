import math

import numpy as np
import pytest

from btnav import (
    ConfigError,
    DeviceSpec,
    Point2D,
    RadioParams,
    Rect,
    SensorSpec,
    UnknownDevice,
    UnknownSensor,
    Waypoint,
    ZoneSpec,
    device_position,
    estimate_distance,
    make_world,
    mean_rssi_dbm,
    rssi_at,
    sample_inquiry,
)

ZONE = ZoneSpec("A", Rect(0, 0, 40, 40))


def world_with(sensors=(), devices=(), radio=RadioParams(), bounds=Rect(0, 0, 40, 40)):
    return make_world(sensors=sensors, devices=devices, zones=[ZONE], radio=radio, bounds=bounds)


def static_device(addr, x, y, **kw):
    return DeviceSpec(addr, "Tag", (Waypoint(0, Point2D(x, y)),), **kw)


class TestBuildWorld:
    def test_minimal_world(self):
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(1, 1), "A")],
            devices=[static_device("AA:BB:CC:DD:EE:FF", 3, 4)],
        )
        assert len(w.sensors) == 1
        assert w.sensor("S1").zone == "A"
        assert w.device("AA:BB:CC:DD:EE:FF").friendly_name == "Tag"

    def test_duplicate_device_address_names_the_address(self):
        with pytest.raises(ConfigError, match="AA:BB:CC:DD:EE:FF"):
            world_with(
                devices=[
                    static_device("AA:BB:CC:DD:EE:FF", 1, 1),
                    static_device("aa:bb:cc:dd:ee:ff", 2, 2),
                ]
            )

    def test_non_increasing_waypoint_time(self):
        traj = (
            Waypoint(0, Point2D(0, 0)),
            Waypoint(5, Point2D(1, 0)),
            Waypoint(5, Point2D(2, 0)),
        )
        with pytest.raises(ConfigError, match="non-increasing waypoint time"):
            world_with(devices=[DeviceSpec("AA:BB:CC:DD:EE:FF", "Tag", traj)])

    def test_duplicate_sensor_id(self):
        with pytest.raises(ConfigError, match="duplicate sensor id"):
            world_with(
                sensors=[
                    SensorSpec("S1", Point2D(0, 0), "A"),
                    SensorSpec("S1", Point2D(1, 1), "A"),
                ]
            )

    def test_unknown_zone_reference(self):
        with pytest.raises(ConfigError, match=r"sensor\[0\].zone"):
            world_with(sensors=[SensorSpec("S1", Point2D(0, 0), "B")])

    def test_overlapping_zones_rejected(self):
        with pytest.raises(ConfigError, match="overlap"):
            make_world(
                zones=[
                    ZoneSpec("A", Rect(0, 0, 10, 10)),
                    ZoneSpec("B", Rect(5, 5, 15, 15)),
                ],
                bounds=Rect(0, 0, 20, 20),
            )

    def test_touching_zones_allowed(self):
        w = make_world(
            zones=[ZoneSpec("A", Rect(0, 0, 10, 10)), ZoneSpec("B", Rect(10, 0, 20, 10))],
            bounds=Rect(0, 0, 20, 10),
        )
        assert len(w.zones) == 2

    def test_first_waypoint_must_start_at_zero(self):
        traj = (Waypoint(1, Point2D(0, 0)),)
        with pytest.raises(ConfigError, match="t=0"):
            world_with(devices=[DeviceSpec("AA:BB:CC:DD:EE:FF", "Tag", traj)])

    def test_invalid_radio(self):
        with pytest.raises(ConfigError, match="detect_prob"):
            world_with(radio=RadioParams(detect_prob=1.5))
        with pytest.raises(ConfigError, match="d0_m"):
            world_with(radio=RadioParams(d0_m=0))

    def test_out_of_bounds_position(self):
        with pytest.raises(ConfigError, match="outside world bounds"):
            world_with(devices=[static_device("AA:BB:CC:DD:EE:FF", 99, 0)])

    def test_default_bounds_enclose_everything(self):
        w = make_world(
            sensors=[SensorSpec("S1", Point2D(-3, 2), "A")],
            zones=[ZONE],
        )
        assert w.bounds.min_x <= -3
        assert w.bounds.max_x >= 40


class TestDevicePosition:
    W = world_with(
        devices=[
            DeviceSpec(
                "AA:BB:CC:DD:EE:FF",
                "Tag",
                (Waypoint(0, Point2D(0, 0)), Waypoint(10, Point2D(10, 0))),
            ),
            static_device("AA:BB:CC:DD:EE:01", 3, 4),
        ]
    )

    def test_midpoint_interpolation(self):
        assert device_position(self.W, "AA:BB:CC:DD:EE:FF", 5) == Point2D(5, 0)

    def test_hold_after_last_waypoint(self):
        assert device_position(self.W, "AA:BB:CC:DD:EE:FF", 20) == Point2D(10, 0)

    def test_static_device(self):
        assert device_position(self.W, "AA:BB:CC:DD:EE:01", 7) == Point2D(3, 4)

    def test_unknown_device(self):
        with pytest.raises(UnknownDevice):
            device_position(self.W, "00:00:00:00:00:00", 0)

    def test_negative_time_rejected(self):
        with pytest.raises(ValueError):
            device_position(self.W, "AA:BB:CC:DD:EE:FF", -1)


class TestRssiAt:
    def world_at_distance(self, d, **device_kw):
        return world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[static_device("AA:BB:CC:DD:EE:FF", d, 0, **device_kw)],
        )

    def rssi(self, world, seed=0):
        return rssi_at(world, "S1", "AA:BB:CC:DD:EE:FF", 0.0, np.random.default_rng(seed))

    def test_reference_distance(self):
        assert self.rssi(self.world_at_distance(1)) == -40.0

    def test_ten_meters_is_threshold_and_detected(self):
        # -40 - 20*log10(10) = -60.0, exactly at the inclusive threshold
        assert self.rssi(self.world_at_distance(10)) == -60.0

    def test_twenty_meters_below_threshold(self):
        assert mean_rssi_dbm(RadioParams(), 20) == pytest.approx(-66.0206, abs=1e-4)
        assert self.rssi(self.world_at_distance(20)) is None

    def test_not_discoverable(self):
        assert self.rssi(self.world_at_distance(1, discoverable=False)) is None

    def test_clamped_below_reference_distance(self):
        assert self.rssi(self.world_at_distance(0.25)) == -40.0

    def test_detect_prob_zero(self):
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[static_device("AA:BB:CC:DD:EE:FF", 1, 0)],
            radio=RadioParams(detect_prob=0.0),
        )
        assert self.rssi(w) is None

    def test_unknown_sensor_and_device(self):
        w = self.world_at_distance(1)
        with pytest.raises(UnknownSensor):
            rssi_at(w, "S9", "AA:BB:CC:DD:EE:FF", 0, np.random.default_rng(0))
        with pytest.raises(UnknownDevice):
            rssi_at(w, "S1", "00:00:00:00:00:00", 0, np.random.default_rng(0))

    def test_deterministic_given_seed(self):
        w = self.world_at_distance(3)
        w = make_world(
            sensors=w.sensors, devices=w.devices, zones=w.zones,
            radio=RadioParams(noise_sigma_db=2.0), bounds=w.bounds,
        )
        a = [self.rssi(w, seed=42) for _ in range(5)]
        b = [self.rssi(w, seed=42) for _ in range(5)]
        assert a == b

    def test_monotone_decreasing_beyond_reference(self):
        r = RadioParams()
        values = [mean_rssi_dbm(r, d) for d in (1, 2, 3, 5, 8, 10, 15)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_forward_inverse_round_trip(self):
        r = RadioParams(p0_dbm=-38.5, d0_m=0.8, path_loss_exponent=2.3)
        for d in (0.8, 1.0, 2.5, 3.7, 6.0, 9.9):
            rt = estimate_distance(mean_rssi_dbm(r, d), r)
            assert rt == pytest.approx(d, rel=1e-9)


class TestSampleInquiry:
    def test_two_devices_in_address_order(self):
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[
                static_device("BB:00:00:00:00:01", 2, 0),
                static_device("AA:00:00:00:00:02", 1, 0),
            ],
        )
        dets = sample_inquiry(w, "S1", 0.0, np.random.default_rng(0))
        assert [d.addr for d in dets] == ["AA:00:00:00:00:02", "BB:00:00:00:00:01"]

    def test_not_discoverable_excluded(self):
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[
                static_device("AA:00:00:00:00:01", 1, 0),
                static_device("AA:00:00:00:00:02", 1, 1, discoverable=False),
            ],
        )
        dets = sample_inquiry(w, "S1", 0.0, np.random.default_rng(0))
        assert [d.addr for d in dets] == ["AA:00:00:00:00:01"]

    def test_detect_prob_zero_empty(self):
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[static_device("AA:00:00:00:00:01", 1, 0)],
            radio=RadioParams(detect_prob=0.0),
        )
        assert sample_inquiry(w, "S1", 0.0, np.random.default_rng(0)) == []

    def test_matches_per_device_sampling(self):
        # The inquiry is exactly rssi_at per device in address order.
        radio = RadioParams(noise_sigma_db=1.5)
        w = world_with(
            sensors=[SensorSpec("S1", Point2D(0, 0), "A")],
            devices=[
                static_device("AA:00:00:00:00:01", 2, 0),
                static_device("AA:00:00:00:00:02", 3, 0),
            ],
            radio=radio,
        )
        dets = sample_inquiry(w, "S1", 0.0, np.random.default_rng(9))
        rng = np.random.default_rng(9)
        expected = [
            rssi_at(w, "S1", "AA:00:00:00:00:01", 0.0, rng),
            rssi_at(w, "S1", "AA:00:00:00:00:02", 0.0, rng),
        ]
        assert [d.rssi_dbm for d in dets] == [v for v in expected if v is not None]
