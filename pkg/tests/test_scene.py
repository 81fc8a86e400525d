import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, signal

from photoradar._validation import NyquistError
from photoradar.scene import (
    NOISE_BLOCK,
    EchoConfig,
    PointScatterer,
    TurntableScene,
    gaussian_noise,
    nominal_echo_power,
    radial_state,
    synthesize_echo,
)
from photoradar.waveform import C, CompositeTxParams, CwParams, LfmParams, synthesize_transmit

SHORT = LfmParams(period=100e-9)
FS = 40e9


def turntable(radius, angle=0.0, L=1.32, period=24.56):
    s = PointScatterer.on_turntable(radius, angle)
    return TurntableScene(L, period, (s,)), s


class TestGeometry:
    def test_center_scatterer_sits_at_L(self):
        scene, s = turntable(0.0)
        for t in (0.0, 1.0, 7.3):
            r, v = radial_state(scene, s, t)
            assert r == pytest.approx(1.32, abs=1e-15)
            assert v == 0.0

    def test_nearest_and_farthest(self):
        scene, s = turntable(0.45)
        assert radial_state(scene, s, 0.0)[0] == pytest.approx(1.77, abs=1e-12)
        half_turn = 0.5 * scene.rotation_period
        assert radial_state(scene, s, half_turn)[0] == pytest.approx(0.87, abs=1e-12)

    def test_peak_radial_speed(self):
        scene, s = turntable(0.45)
        res = optimize.minimize_scalar(
            lambda t: -abs(radial_state(scene, s, t)[1]), bounds=(0, 0.5 * scene.rotation_period), method="bounded",
            options={"xatol": 1e-9},
        )
        v_max = -res.fun
        assert v_max == pytest.approx(0.1151, abs=5e-4)
        doppler = 2 * v_max * 8e9 / C
        assert doppler == pytest.approx(6.14, abs=0.01)

    @given(
        st.floats(0.0, 0.9),
        st.floats(-math.pi, math.pi),
        st.floats(0.0, 30.0),
        st.booleans(),
    )
    def test_velocity_is_range_derivative(self, radius, angle, t, far):
        s = PointScatterer.on_turntable(radius, angle)
        scene = TurntableScene(1.32, 24.56, (s,), far_field=far)
        h = 1e-4
        diff = (radial_state(scene, s, t + h)[0] - radial_state(scene, s, t - h)[0]) / (2 * h)
        assert radial_state(scene, s, t)[1] == pytest.approx(diff, abs=1e-7)

    def test_free_motion(self):
        s = PointScatterer.free(2.0, -0.3)
        scene = TurntableScene(1.32, math.inf, (s,))
        r, v = radial_state(scene, s, np.array([0.0, 1.0, 2.0]))
        np.testing.assert_allclose(r, [2.0, 1.7, 1.4])
        np.testing.assert_allclose(v, -0.3)

    def test_stationary_turntable(self):
        scene, s = turntable(0.3, period=math.inf)
        assert scene.omega == 0.0
        assert radial_state(scene, s, 5.0) == (pytest.approx(1.62), 0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            PointScatterer(reflectivity=1.0)
        with pytest.raises(ValueError):
            PointScatterer(radius=0.1, range0=1.0)
        with pytest.raises(ValueError):
            PointScatterer.on_turntable(0.1, reflectivity=-1)
        with pytest.raises(ValueError):
            TurntableScene(1.0, 24.56, (PointScatterer.on_turntable(1.0),))


class TestNoise:
    @given(st.integers(0, 2**32), st.integers(0, 3 * NOISE_BLOCK), st.lists(st.integers(1, NOISE_BLOCK), max_size=4))
    def test_partition_invariance(self, seed, start, cuts):
        total = sum(cuts) + 17
        whole = gaussian_noise(seed, start, total, stream=1)
        parts, pos = [], start
        for c in cuts + [17]:
            parts.append(gaussian_noise(seed, pos, c, stream=1))
            pos += c
        assert np.array_equal(np.concatenate(parts), whole)

    def test_streams_and_seeds_differ(self):
        a = gaussian_noise(1, 0, 1000, stream=0)
        assert not np.array_equal(a, gaussian_noise(1, 0, 1000, stream=1))
        assert not np.array_equal(a, gaussian_noise(2, 0, 1000, stream=0))

    def test_unit_variance(self):
        x = gaussian_noise(7, 0, 1_000_000)
        assert abs(x.mean()) < 5e-3
        assert x.var() == pytest.approx(1.0, abs=5e-3)

    def test_empty(self):
        assert gaussian_noise(0, 5, 0).size == 0


class TestEcho:
    def _scene(self, *targets):
        return TurntableScene(1.32, math.inf, targets)

    def test_superposition(self):
        tx = CompositeTxParams(SHORT)
        a, b = PointScatterer.free(0.4, reflectivity=0.7), PointScatterer.free(0.9, 2.0)
        both = synthesize_echo(tx, self._scene(a, b), EchoConfig(), FS, (0, 300e-9)).samples
        sa = synthesize_echo(tx, self._scene(a), EchoConfig(), FS, (0, 300e-9)).samples
        sb = synthesize_echo(tx, self._scene(b), EchoConfig(), FS, (0, 300e-9)).samples
        np.testing.assert_allclose(both, sa + sb, rtol=0, atol=1e-12)

    def test_snr(self):
        tx = CompositeTxParams(SHORT)
        scene = self._scene(PointScatterer.free(0.5))
        window = (0, 1_000_000 / FS)
        clean = synthesize_echo(tx, scene, EchoConfig(), FS, window).samples
        noisy = synthesize_echo(tx, scene, EchoConfig(snr=20.0, rng_seed=11), FS, window).samples
        noise = noisy - clean
        measured = 10 * math.log10(nominal_echo_power(tx, scene, EchoConfig()) / np.mean(noise**2))
        assert measured == pytest.approx(20.0, abs=0.2)
        # the nominal power matches the clean echo power
        assert 10 * math.log10(np.mean(clean**2) / nominal_echo_power(tx, scene, EchoConfig())) == pytest.approx(0, abs=0.2)

    def test_partitioned_windows_concatenate(self):
        tx = CompositeTxParams(SHORT)
        scene = self._scene(PointScatterer.free(0.5, 3.0))
        cfg = EchoConfig(snr=10.0, rng_seed=5)
        whole = synthesize_echo(tx, scene, cfg, FS, (0, 400e-9)).samples
        first = synthesize_echo(tx, scene, cfg, FS, (0, 137e-9)).samples
        second = synthesize_echo(tx, scene, cfg, FS, (137e-9, 400e-9)).samples
        assert np.array_equal(np.concatenate([first, second]), whole)

    def test_delay_from_cross_correlation(self):
        lfm_only = CompositeTxParams(SHORT, CwParams(), 1.0, 0.0)
        r = 0.6
        scene = self._scene(PointScatterer.free(r))
        tx = synthesize_transmit(lfm_only, FS, 100e-9).samples
        echo = synthesize_echo(lfm_only, scene, EchoConfig(), FS, (0, 100e-9)).samples
        xc = signal.correlate(echo, tx, mode="full", method="fft")
        lag = np.argmax(xc) - (tx.size - 1)
        assert abs(lag - 2 * r / C * FS) <= 1.0

    def test_tone_doppler(self):
        v = 300.0
        tone_only = CompositeTxParams(SHORT, CwParams(), 0.0, 1.0)
        scene = self._scene(PointScatterer.free(0.5, v))
        echo = synthesize_echo(tone_only, scene, EchoConfig(), FS, (0, 2e-6))
        n = echo.samples.size
        t = echo.start_time + np.arange(n) / FS
        base = signal.hilbert(echo.samples) * np.exp(-2j * np.pi * 8e9 * t)
        keep = slice(n // 10, n - n // 10)
        slope = np.polyfit(t[keep], np.unwrap(np.angle(base[keep])), 1)[0] / (2 * np.pi)
        expected = -8e9 * 2 * v / C
        assert slope == pytest.approx(expected, rel=1e-3)

    def test_errors(self):
        tx = CompositeTxParams(SHORT)
        with pytest.raises(ValueError):
            synthesize_echo(tx, self._scene(), EchoConfig(), FS, (0, 1e-7))
        with pytest.raises(NyquistError):
            synthesize_echo(tx, self._scene(PointScatterer.free(1.0)), EchoConfig(), 20e9, (0, 1e-7))
        with pytest.raises(ValueError):
            synthesize_echo(tx, self._scene(PointScatterer.free(1.0)), EchoConfig(), FS, (1e-7, 1e-7))
