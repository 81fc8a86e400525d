import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import stft

from photoradar._validation import NyquistError
from photoradar.waveform import (
    CompositeTxParams,
    CwParams,
    LfmParams,
    chirp_component,
    instantaneous_frequency,
    lfm_phase,
    magnitude_spectrum,
    measure_transmit_band,
    synthesize_transmit,
)

DEFAULT_LFM = LfmParams(2.5e9, 4e9, 100e-6, 0.8)


@st.composite
def lfm_params(draw):
    bandwidth = draw(st.floats(1e6, 1e10))
    center = bandwidth / 2 + draw(st.floats(1e3, 1e10))
    period = draw(st.floats(1e-7, 1e-3))
    duty = draw(st.floats(0.05, 1.0))
    return LfmParams(center, bandwidth, period, duty)


class TestParams:
    def test_chirp_rate(self):
        assert DEFAULT_LFM.chirp_rate == pytest.approx(5e13, rel=1e-15)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(bandwidth=0.0),
            dict(period=-1e-6),
            dict(duty=0.0),
            dict(duty=1.2),
            dict(center_frequency=1e9, bandwidth=4e9),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LfmParams(**kwargs)

    def test_cw_and_amplitudes_validated(self):
        with pytest.raises(ValueError):
            CwParams(0.0)
        with pytest.raises(ValueError):
            CompositeTxParams(lfm_amplitude=-1.0)


class TestInstantaneousFrequency:
    def test_start(self):
        assert instantaneous_frequency(DEFAULT_LFM, 1e-15) == pytest.approx(0.5e9, rel=1e-9)

    def test_stop(self):
        assert instantaneous_frequency(DEFAULT_LFM, 80e-6) == pytest.approx(4.5e9, rel=1e-12)

    def test_gap(self):
        assert instantaneous_frequency(DEFAULT_LFM, 90e-6) == 0.0

    def test_periodic(self):
        assert instantaneous_frequency(DEFAULT_LFM, 3 * 100e-6 + 40e-6) == pytest.approx(2.5e9, rel=1e-9)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            instantaneous_frequency(DEFAULT_LFM, math.nan)

    @given(lfm_params())
    def test_endpoints_exact(self, lfm):
        assert instantaneous_frequency(lfm, 0.0) == lfm.start_frequency
        assert instantaneous_frequency(lfm, lfm.pulse_width) == lfm.stop_frequency


class TestPhase:
    def test_zero(self):
        assert lfm_phase(DEFAULT_LFM, 0.0) == 0.0

    def test_arithmetic(self):
        expect = 2 * math.pi * 40000 + math.pi * 320000
        assert lfm_phase(DEFAULT_LFM, 80e-6) == pytest.approx(expect, rel=1e-12)

    def test_finite_difference_at_40us(self):
        t, d = 40e-6, 1e-10
        fd = (lfm_phase(DEFAULT_LFM, t + d) - lfm_phase(DEFAULT_LFM, t - d)) / (4 * math.pi * d)
        assert fd == pytest.approx(instantaneous_frequency(DEFAULT_LFM, t), rel=1e-6)

    def test_outside_window(self):
        with pytest.raises(ValueError):
            lfm_phase(DEFAULT_LFM, 85e-6)
        with pytest.raises(ValueError):
            lfm_phase(DEFAULT_LFM, -1e-9)

    @given(lfm_params(), st.floats(0.05, 0.95))
    def test_phase_frequency_consistency(self, lfm, frac):
        t = frac * lfm.pulse_width
        d = 1e-5 * lfm.pulse_width
        fd = (lfm_phase(lfm, t + d) - lfm_phase(lfm, t - d)) / (4 * math.pi * d)
        assert fd == pytest.approx(instantaneous_frequency(lfm, t), rel=1e-6)


class TestSynthesis:
    def test_nyquist(self):
        with pytest.raises(NyquistError):
            synthesize_transmit(CompositeTxParams(), 20e9, 1e-6)

    def test_zero_length(self):
        with pytest.raises(ValueError):
            synthesize_transmit(CompositeTxParams(), 40e9, 1e-12)
        with pytest.raises(ValueError):
            synthesize_transmit(CompositeTxParams(), 40e9, 0.0)

    def test_default_band(self):
        sig = synthesize_transmit(CompositeTxParams(), 40e9, 100e-6)
        band = measure_transmit_band(sig)
        assert abs(band.band_low - 8.5e9) <= band.resolution
        assert abs(band.band_high - 12.5e9) <= band.resolution
        assert abs(band.tone_frequency - 8e9) <= band.tone_bin

    def test_pure_tone(self):
        sig = synthesize_transmit(CompositeTxParams(lfm_amplitude=0.0, cw_amplitude=1.0), 40e9, 1e-6)
        f, mag = magnitude_spectrum(sig)
        assert abs(f[np.argmax(mag)] - 8e9) <= f[1]

    def test_pure_chirp_rises(self):
        lfm = LfmParams(period=100e-9)
        sig = synthesize_transmit(CompositeTxParams(lfm, CwParams(), 1.0, 0.0), 40e9, 100e-9)
        f, t, z = stft(sig.samples, fs=40e9, nperseg=256, noverlap=224)
        active = (t > 10e-9) & (t < 70e-9)
        ridge = f[np.argmax(np.abs(z[:, active]), axis=0)]
        assert np.all(np.diff(ridge) >= 0)
        assert ridge[-1] - ridge[0] > 2e9

    def test_gap_is_pure_tone(self):
        lfm = LfmParams(period=100e-9)
        p = CompositeTxParams(lfm, CwParams(), 1.3, 0.7)
        sig = synthesize_transmit(p, 40e9, 300e-9)
        t = sig.times
        gap = np.mod(t, lfm.period) > lfm.pulse_width * (1 + 1e-9)
        assert np.array_equal(sig.samples[gap], 0.7 * np.sin(2 * np.pi * 8e9 * t[gap]))

    def test_chirp_periods_identical(self):
        # f_LO * T is an integer here, so consecutive pulses of the chirp term coincide
        lfm = LfmParams(period=100e-9)
        n = 4000
        t = np.arange(3 * n) / 40e9
        x = chirp_component(lfm, 8e9, t)
        np.testing.assert_allclose(x[:n], x[n : 2 * n], atol=1e-9)
        np.testing.assert_allclose(x[n : 2 * n], x[2 * n :], atol=1e-9)

    def test_partition_invariant(self):
        p = CompositeTxParams(LfmParams(period=100e-9))
        whole = synthesize_transmit(p, 40e9, 200e-9).samples
        a = synthesize_transmit(p, 40e9, 100e-9).samples
        b = synthesize_transmit(p, 40e9, 100e-9, start_time=100e-9).samples
        np.testing.assert_array_equal(whole, np.concatenate([a, b]))
