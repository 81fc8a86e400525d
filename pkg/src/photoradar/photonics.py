"""Complex-envelope model of the photonic transmitter.

Optical fields are represented relative to the laser carrier ``f_0``: a
component at ``f_0 + df`` is a complex exponential at ``df``.  The modulator
model keeps the carrier and first-order sidebands only (small-signal
expansion); imperfect carrier/sideband suppression on the Y polarization is
injected as explicit residual lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from ._validation import check_interval, check_nyquist, check_positive
from .waveform import CwParams, LfmParams, SampledSignal, chirp_gate, pulse_local_time

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class OpticalField:
    sample_rate: float
    samples: np.ndarray
    carrier_frequency: float = 193.33e12
    start_time: float = 0.0

    def __post_init__(self):
        check_positive(self.sample_rate, "sample_rate")
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("field samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("field samples must be finite")
        object.__setattr__(self, "samples", samples)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class ModulatorConfig:
    """DPol-DPMZM drive settings.

    ``unwanted_sideband_suppression`` and ``carrier_suppression`` are in dB
    below the wanted -1st-order sideband of the Y polarization; ``inf``
    means ideal carrier-suppressed single-sideband operation.
    """

    m1: float = 0.3
    m2: float = 0.3
    unwanted_sideband_suppression: float = math.inf
    carrier_suppression: float = math.inf

    def __post_init__(self):
        if not (self.m1 >= 0 and self.m2 >= 0):
            raise ValueError("modulation indices must be >= 0")
        for name in ("unwanted_sideband_suppression", "carrier_suppression"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0 dB")


@dataclass(frozen=True)
class PolarizedPair:
    x: OpticalField
    y: OpticalField

    def __post_init__(self):
        if self.x.sample_rate != self.y.sample_rate or self.x.samples.size != self.y.samples.size:
            raise ValueError("X and Y fields must share sample rate and length")


def bessel_j(n: int, x):
    """Bessel function of the first kind, orders 0 and 1."""
    if n not in (0, 1):
        raise ValueError(f"unsupported Bessel order {n!r}; only 0 and 1 are used")
    out = special.j0(x) if n == 0 else special.j1(x)
    return float(out) if np.ndim(out) == 0 else out


def _residual_gain(suppression_db: float) -> float:
    return 0.0 if math.isinf(suppression_db) else 10.0 ** (-suppression_db / 20.0)


def modulate_dpol_dpmzm(
    lfm: LfmParams,
    cw: CwParams,
    cfg: ModulatorConfig,
    sample_rate: float,
    duration: float,
    start_time: float = 0.0,
) -> PolarizedPair:
    """Output fields of the two polarizations of the dual-polarization modulator.

    X carries the optical carrier (phase pi/2) and the +1st-order sideband of
    the IF chirp; Y carries the -1st-order sideband of the LO tone plus any
    configured residual +1st-order sideband and carrier.
    """
    check_positive(duration, "duration")
    check_nyquist(sample_rate, lfm.stop_frequency, "the IF chirp sideband")
    check_nyquist(sample_rate, cw.frequency, "the LO sideband")
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration is shorter than one sample")
    n0 = int(round(start_time * sample_rate))
    start_time = n0 / sample_rate
    t = (n0 + np.arange(n)) / sample_rate
    tau = pulse_local_time(lfm, t)

    j0_1, j1_1, j1_2 = bessel_j(0, cfg.m1), bessel_j(1, cfg.m1), bessel_j(1, cfg.m2)
    chirp = np.exp(
        1j * (2 * np.pi * lfm.start_frequency * tau + np.pi * lfm.chirp_rate * tau**2 + np.pi / 4)
    )
    x = j0_1 * np.exp(1j * np.pi / 2) - SQRT2 * j1_1 * np.where(chirp_gate(lfm, tau), chirp, 0.0)

    lo = 2 * np.pi * cw.frequency * t
    y = j1_2 * np.exp(1j * (np.pi - lo))
    sideband = _residual_gain(cfg.unwanted_sideband_suppression)
    if sideband:
        y = y + j1_2 * sideband * np.exp(1j * (np.pi + lo))
    carrier = _residual_gain(cfg.carrier_suppression)
    if carrier:
        y = y + j1_2 * carrier * np.exp(1j * np.pi)

    return PolarizedPair(
        OpticalField(sample_rate, x, start_time=start_time),
        OpticalField(sample_rate, y, start_time=start_time),
    )


def pbs_split(pair: PolarizedPair) -> tuple[OpticalField, OpticalField]:
    """Polarization beam splitter at 45 degrees: ``E_T = (x+y)/sqrt2``, ``E_R = (x-y)/sqrt2``."""
    x, y = pair.x, pair.y
    if x.sample_rate != y.sample_rate or x.samples.size != y.samples.size:
        raise ValueError("X and Y fields must share sample rate and length")
    e_t = (x.samples + y.samples) / SQRT2
    e_r = (x.samples - y.samples) / SQRT2
    return (
        OpticalField(x.sample_rate, e_t, x.carrier_frequency, x.start_time),
        OpticalField(x.sample_rate, e_r, x.carrier_frequency, x.start_time),
    )


def photodetect(
    field: OpticalField,
    responsivity: float = 1.0,
    remove_dc: bool = False,
    bandwidth: float | None = None,
) -> SampledSignal:
    """Ideal square-law detection ``responsivity * |E|**2``.

    ``bandwidth`` applies a brick-wall low-pass response (e.g. 16e9 for the
    16 GHz detector); ``remove_dc`` subtracts the mean photocurrent.
    """
    current = responsivity * np.abs(field.samples) ** 2
    if not np.all(np.isfinite(current)):
        raise ValueError("field produced a non-finite photocurrent")
    if bandwidth is not None and bandwidth < field.sample_rate / 2:
        current = _fft_gate(current, field.sample_rate, 0.0, bandwidth)
    if remove_dc:
        current = current - current.mean()
    return SampledSignal(field.sample_rate, field.start_time, current)


def _fft_gate(x: np.ndarray, sample_rate: float, lo: float, hi: float) -> np.ndarray:
    spec = np.fft.rfft(x)
    f = np.fft.rfftfreq(x.size, 1.0 / sample_rate)
    spec[(f < lo) | (f > hi)] = 0.0
    return np.fft.irfft(spec, n=x.size)


def transmit_band_filter(sig: SampledSignal, passband=(5.85e9, 14.5e9)) -> SampledSignal:
    """Ideal frequency-domain gate standing in for the transmit amplifier/antenna passband."""
    lo, hi = check_interval(passband, "passband")
    nyquist = sig.sample_rate / 2
    if lo < 0 or hi > nyquist * (1 + 1e-12):
        raise ValueError(f"passband must lie within [0, {nyquist:.6g}] Hz")
    if lo <= 0 and hi >= nyquist:
        return SampledSignal(sig.sample_rate, sig.start_time, sig.samples.copy())
    out = _fft_gate(np.asarray(sig.samples, dtype=float), sig.sample_rate, lo, hi)
    return SampledSignal(sig.sample_rate, sig.start_time, out)


def detected_coefficients(cfg: ModulatorConfig) -> dict[str, float]:
    """Amplitudes of the three beat terms produced by detecting ``E_T``.

    Keys: ``"upconverted"`` (chirp at f_LO + IF), ``"baseband"`` (IF chirp),
    ``"tone"`` (line at f_LO).
    """
    j0_1, j1_1, j1_2 = bessel_j(0, cfg.m1), bessel_j(1, cfg.m1), bessel_j(1, cfg.m2)
    return {
        "upconverted": SQRT2 * j1_1 * j1_2,
        "baseband": SQRT2 * j0_1 * j1_1,
        "tone": j0_1 * j1_2,
    }
