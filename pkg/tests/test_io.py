import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from photoradar import io as fio
from photoradar.estimator import Direction, RangeVelocityEstimate
from photoradar.isar import IsarImage
from photoradar.receiver import DechirpCapture


def small_image(floor=-40.0):
    mag = np.array([[0.0, -10.0, -40.0], [-20.0, -50.0, -3.0]])
    return IsarImage(np.maximum(mag, floor), np.array([1.0, 1.0375]), np.array([-0.1, 0.0, 0.1]), 0.03, 0.256, 2.0, 1.0, floor)


class TestCapture:
    def test_round_trip(self, tmp_path):
        samples = np.random.default_rng(1).standard_normal(1000).astype(np.float32).astype(float)
        cap = DechirpCapture(4e6, samples, 1e-4, 8e-5, 0.1 + 0.2)
        path = tmp_path / "c.bin"
        fio.write_capture(path, cap)
        raw = path.read_bytes()
        assert len(raw) == fio.HEADER_SIZE + 4 * samples.size
        assert raw.startswith(b"PHOTORADAR-CAPTURE 1\n") and raw[fio.HEADER_SIZE - 1 : fio.HEADER_SIZE] == b"\n"
        back = fio.read_capture(path)
        assert np.array_equal(back.samples, samples)
        assert (back.sample_rate, back.pulse_period, back.pulse_width, back.start_time) == (4e6, 1e-4, 8e-5, 0.1 + 0.2)

    def test_samples_are_little_endian_float32(self, tmp_path):
        cap = DechirpCapture(1.0, np.array([1.0, -2.5]), 1.0, 0.5)
        path = tmp_path / "c.bin"
        fio.write_capture(path, cap)
        assert path.read_bytes()[fio.HEADER_SIZE :] == np.array([1.0, -2.5], "<f4").tobytes()

    def test_rejects_bad_files(self, tmp_path):
        bad = tmp_path / "bad.bin"
        bad.write_bytes(b"x" * 10)
        with pytest.raises(ValueError):
            fio.read_capture(bad)
        bad.write_bytes(b"NOT-A-CAPTURE\n".ljust(fio.HEADER_SIZE, b" "))
        with pytest.raises(ValueError):
            fio.read_capture(bad)
        good = tmp_path / "good.bin"
        fio.write_capture(good, DechirpCapture(1.0, np.ones(4), 1.0, 0.5))
        good.write_bytes(good.read_bytes()[:-4])
        with pytest.raises(ValueError):
            fio.read_capture(good)


class TestCsv:
    @given(st.floats(allow_nan=True, allow_infinity=False))
    def test_fmt_round_trip(self, x):
        text = fio.fmt(x)
        if math.isnan(x):
            assert text == "nan"
        else:
            assert float(text) == x

    def test_track_round_trip(self, tmp_path):
        est = [
            RangeVelocityEstimate(1.0, 1.77, 0.115, Direction.RECEDING, 0.115),
            RangeVelocityEstimate(2.0, 1.5, 0.0),
        ]
        path = tmp_path / "track.csv"
        path.write_text(fio.track_csv(est))
        assert path.read_text().splitlines()[0] == "timestamp_s,range_m,speed_mps,direction,signed_velocity_mps"
        rows = fio.read_track_csv(path)
        assert rows[0]["direction"] == "receding" and float(rows[0]["range_m"]) == 1.77
        assert rows[1]["direction"] == "indeterminate" and rows[1]["signed_velocity_mps"] == "nan"

    def test_track_header_checked(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            fio.read_track_csv(path)

    def test_table(self):
        assert fio.table_csv(("a", "b"), [("x", 0.5)]) == "a,b\nx,0.5\n"

    def test_image_csv_round_trip(self, tmp_path):
        img = small_image()
        path = tmp_path / "img.csv"
        path.write_text(fio.image_csv(img))
        assert path.read_text().splitlines()[0] == "range_m\\crossrange_m,-0.1,0.0,0.1"
        r, x, mag = fio.read_image_csv(path)
        assert np.array_equal(r, img.range_axis) and np.array_equal(x, img.crossrange_axis)
        assert np.array_equal(mag, img.magnitudes)


class TestPgm:
    def test_header_and_mapping(self, tmp_path):
        img = small_image()
        data = fio.pgm_bytes(img)
        assert data.startswith(b"P5\n3 2\n65535\n")
        path = tmp_path / "i.pgm"
        path.write_bytes(data)
        px = fio.read_pgm(path)
        assert px.shape == (2, 3)
        assert px[0, 0] == 65535 and px[0, 2] == 0 and px[1, 1] == 0
        assert px[0, 1] == round(65535 * 30 / 40)
        # big-endian sample order
        assert data[-2:] == int(px[1, 2]).to_bytes(2, "big")

    @given(st.floats(-80.0, -1.0), st.lists(st.floats(-100.0, 0.0), min_size=1, max_size=20))
    def test_monotone(self, floor, levels):
        mag = np.maximum(np.array([levels]), floor)
        img = IsarImage(mag, np.array([1.0]), np.arange(len(levels), dtype=float), 0.03, 1.0, 1.0, 0.0, floor)
        data = fio.pgm_bytes(img)
        header = f"P5\n{len(levels)} 1\n65535\n".encode()
        px = np.frombuffer(data[len(header) :], ">u2")
        order = np.argsort(mag[0], kind="stable")
        assert np.all(np.diff(px[order].astype(int)) >= 0)
        expected = np.round(65535 * (mag[0] - floor) / -floor)
        np.testing.assert_array_equal(px, expected)

    def test_rejects_8bit(self, tmp_path):
        path = tmp_path / "x.pgm"
        path.write_bytes(b"P5\n1 1\n255\n\x00")
        with pytest.raises(ValueError):
            fio.read_pgm(path)
