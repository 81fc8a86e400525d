import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from photoradar._validation import NyquistError
from photoradar.photonics import (
    ModulatorConfig,
    OpticalField,
    PolarizedPair,
    bessel_j,
    detected_coefficients,
    modulate_dpol_dpmzm,
    pbs_split,
    photodetect,
    transmit_band_filter,
)
from photoradar.selftest import demodulated_coefficients, measured_sideband_suppression, photonic_correlation
from photoradar.waveform import CompositeTxParams, CwParams, LfmParams, SampledSignal, synthesize_transmit

FS = 40e9
SHORT = LfmParams(period=100e-9)
CW = CwParams()


def bessel_series(n, x, terms=60):
    """Power-series oracle: sum_k (-1)^k (x/2)^(2k+n) / (k! (k+n)!)."""
    total = 0.0
    for k in range(terms):
        total += (-1) ** k * (x / 2) ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n))
    return total


def line_level(samples, fs, freq):
    spec = np.fft.fft(samples) / samples.size
    f = np.fft.fftfreq(samples.size, 1 / fs)
    return abs(spec[np.argmin(abs(f - freq))])


class TestBessel:
    def test_identities(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0

    def test_j0_of_one(self):
        assert bessel_j(0, 1.0) == pytest.approx(0.7651976866, abs=1e-10)

    @given(st.sampled_from([0, 1]), st.floats(-10, 10))
    def test_matches_series(self, n, x):
        assert abs(bessel_j(n, x) - bessel_series(n, x)) < 1e-10

    def test_unsupported_order(self):
        with pytest.raises(ValueError):
            bessel_j(2, 0.5)


class TestModulator:
    def test_zero_modulation_is_carrier(self):
        pair = modulate_dpol_dpmzm(SHORT, CW, ModulatorConfig(0.0, 0.3), FS, 200e-9)
        np.testing.assert_allclose(np.abs(pair.x.samples), 1.0, rtol=0, atol=1e-15)

    def test_ideal_y_single_line(self):
        pair = modulate_dpol_dpmzm(SHORT, CW, ModulatorConfig(), FS, 1e-6)
        y = pair.y.samples
        wanted = line_level(y, FS, -8e9)
        assert wanted == pytest.approx(bessel_j(1, 0.3), rel=1e-12)
        assert line_level(y, FS, 8e9) < 1e-12 * wanted
        assert line_level(y, FS, 0.0) < 1e-12 * wanted

    def test_sideband_suppression(self):
        assert measured_sideband_suppression(25.89) == pytest.approx(25.89, abs=0.1)

    def test_carrier_suppression(self):
        pair = modulate_dpol_dpmzm(SHORT, CW, ModulatorConfig(carrier_suppression=30.0), FS, 1e-6)
        y = pair.y.samples
        ratio = 20 * math.log10(line_level(y, FS, -8e9) / line_level(y, FS, 0.0))
        assert ratio == pytest.approx(30.0, abs=1e-6)

    def test_nyquist(self):
        with pytest.raises(NyquistError):
            modulate_dpol_dpmzm(SHORT, CW, ModulatorConfig(), 12e9, 1e-6)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ModulatorConfig(m1=-0.1)
        with pytest.raises(ValueError):
            ModulatorConfig(unwanted_sideband_suppression=0.0)

    def test_spectral_support(self):
        # only the carrier, the IF chirp sideband (0.5-4.5 GHz) and -f_LO may carry energy
        pair = modulate_dpol_dpmzm(SHORT, CW, ModulatorConfig(), FS, 1e-6)
        for field_ in (pair.x.samples, pair.y.samples):
            spec = np.abs(np.fft.fft(field_)) ** 2
            f = np.fft.fftfreq(field_.size, 1 / FS)
            allowed = (np.abs(f) < 1.0) | ((f > 0) & (f < 20e9)) | (np.abs(f + 8e9) < 1.0)
            # chirp gating spreads energy, so only the negative half (other than -f_LO) must be empty
            assert spec[(f < 0) & ~allowed].sum() < 1e-3 * spec.sum()


class TestPbs:
    def _field(self, values):
        return OpticalField(FS, np.asarray(values, dtype=complex))

    def test_y_zero(self):
        x = self._field([1 + 2j, 3 - 1j])
        t, r = pbs_split(PolarizedPair(x, self._field([0, 0])))
        np.testing.assert_allclose(t.samples, x.samples / math.sqrt(2))
        np.testing.assert_allclose(r.samples, x.samples / math.sqrt(2))

    def test_cancellation(self):
        x = self._field([1 + 2j, 3 - 1j])
        _, r = pbs_split(PolarizedPair(x, x))
        assert np.all(r.samples == 0)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            PolarizedPair(self._field([1, 2]), self._field([1]))

    @given(
        st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False), min_size=1, max_size=50).flatmap(
            lambda xs: st.tuples(
                st.just(xs),
                st.lists(st.complex_numbers(max_magnitude=1e3, allow_nan=False), min_size=len(xs), max_size=len(xs)),
            )
        )
    )
    def test_power_conservation(self, xy):
        x, y = (self._field(v) for v in xy)
        t, r = pbs_split(PolarizedPair(x, y))
        lhs = np.abs(t.samples) ** 2 + np.abs(r.samples) ** 2
        rhs = np.abs(x.samples) ** 2 + np.abs(y.samples) ** 2
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-300)


class TestDetection:
    def test_constant_field(self):
        out = photodetect(OpticalField(FS, np.full(64, 0.5 + 0.5j)))
        np.testing.assert_allclose(out.samples, 0.5)
        assert np.all(photodetect(OpticalField(FS, np.full(64, 0.5 + 0.5j)), remove_dc=True).samples == 0)

    def test_three_bands(self):
        e_t, _ = pbs_split(modulate_dpol_dpmzm(LfmParams(), CW, ModulatorConfig(), FS, 100e-6))
        det = photodetect(e_t, remove_dc=True)
        spec = np.abs(np.fft.rfft(det.samples)) ** 2
        f = np.fft.rfftfreq(det.samples.size, 1 / FS)

        def power(lo, hi):
            return spec[(f >= lo) & (f <= hi)].sum()

        total = spec.sum()
        up, base = power(8.5e9, 12.5e9), power(0.5e9, 4.5e9)
        tone = spec[np.argmin(abs(f - 8e9))]
        # gating transients spread a small fraction of power outside the nominal bands
        assert up + base + tone > 0.99 * total
        assert min(up, base, tone) > 1e-3 * total

    def test_line_ratio(self):
        meas = demodulated_coefficients(0.3, 0.3)
        ratio = meas["upconverted"][0] / meas["tone"][0]
        expect = math.sqrt(2) * bessel_series(1, 0.3) / bessel_series(0, 0.3)
        assert ratio == pytest.approx(expect, rel=1e-3)

    def test_coefficients_formula(self):
        c = detected_coefficients(ModulatorConfig(0.3, 0.3))
        j0, j1 = bessel_series(0, 0.3), bessel_series(1, 0.3)
        assert c["upconverted"] == pytest.approx(math.sqrt(2) * j1 * j1, rel=1e-12)
        assert c["baseband"] == pytest.approx(math.sqrt(2) * j0 * j1, rel=1e-12)
        assert c["tone"] == pytest.approx(j0 * j1, rel=1e-12)

    def test_term_phases(self):
        meas = demodulated_coefficients(0.3, 0.3)
        assert meas["upconverted"][1] == pytest.approx(math.pi / 4, abs=1e-3)
        assert meas["baseband"][1] == pytest.approx(3 * math.pi / 4, abs=1e-3)
        # sin(2 pi f t) demodulates to phase -pi/2
        assert meas["tone"][1] == pytest.approx(-math.pi / 2, abs=1e-3)

    def test_bandwidth_gate(self):
        field_ = OpticalField(FS, np.exp(1j * 2 * np.pi * 10e9 * np.arange(400) / FS) + 1.0)
        full = photodetect(field_, remove_dc=True)
        limited = photodetect(field_, remove_dc=True, bandwidth=5e9)
        assert np.max(np.abs(full.samples)) > 1.9
        assert np.max(np.abs(limited.samples)) < 1e-9


class TestBandFilter:
    def test_baseband_removed(self):
        e_t, _ = pbs_split(modulate_dpol_dpmzm(LfmParams(), CW, ModulatorConfig(), FS, 100e-6))
        out = transmit_band_filter(photodetect(e_t, remove_dc=True), (5.85e9, 14.5e9))
        spec = np.abs(np.fft.rfft(out.samples))
        f = np.fft.rfftfreq(out.samples.size, 1 / FS)
        base = spec[(f >= 0.5e9) & (f <= 4.5e9)].max()
        assert 20 * math.log10(base / spec.max()) < -60

    def test_all_pass_identity(self):
        sig = SampledSignal(FS, 0.0, np.random.default_rng(0).standard_normal(1000))
        out = transmit_band_filter(sig, (0.0, FS / 2))
        assert np.array_equal(out.samples, sig.samples)

    def test_invalid_passband(self):
        sig = SampledSignal(FS, 0.0, np.zeros(10))
        with pytest.raises(ValueError):
            transmit_band_filter(sig, (5e9, 5e9))
        with pytest.raises(ValueError):
            transmit_band_filter(sig, (5e9, 30e9))

    def test_matches_ideal_synthesis(self):
        cfg = ModulatorConfig(0.3, 0.3)
        e_t, _ = pbs_split(modulate_dpol_dpmzm(LfmParams(), CW, cfg, FS, 100e-6))
        out = transmit_band_filter(photodetect(e_t, remove_dc=True), (5.85e9, 14.5e9)).samples
        c = detected_coefficients(cfg)
        ideal = synthesize_transmit(CompositeTxParams(LfmParams(), CW, c["upconverted"], c["tone"]), FS, 100e-6).samples
        nrmse = math.sqrt(np.mean((out - ideal) ** 2) / np.mean(ideal**2))
        assert nrmse < 1e-3

    def test_short_pulse_correlation(self):
        assert photonic_correlation() > 0.999
