"""Composite transmit waveform: a gated up-chirp plus a continuous single tone.

The chirp occupies the first ``duty`` fraction of every pulse period and its
intermediate-frequency phase restarts at each pulse start; the single tone at
``f_LO`` runs continuously.  The up-converted chirp therefore carries the LO
phase in absolute time and the IF sweep in pulse-local time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_nyquist, check_positive

C = 299_792_458.0
"""Speed of light in vacuum, m/s."""

# relative slack on the closed right edge of the chirp window
_EDGE_RTOL = 1e-12


@dataclass(frozen=True)
class LfmParams:
    """Intermediate-frequency chirp parameters.

    Parameters
    ----------
    center_frequency : float
        IF chirp centre frequency ``f_c`` in Hz.
    bandwidth : float
        Swept bandwidth ``f_B`` in Hz.
    period : float
        Pulse repetition period ``T`` in seconds.
    duty : float
        Fraction of ``T`` that is chirped.
    """

    center_frequency: float = 2.5e9
    bandwidth: float = 4.0e9
    period: float = 100e-6
    duty: float = 0.8

    def __post_init__(self):
        check_positive(self.bandwidth, "bandwidth")
        check_positive(self.period, "period")
        if not 0.0 < float(self.duty) <= 1.0:
            raise ValueError(f"duty must lie in (0, 1], got {self.duty!r}")
        if not self.center_frequency - 0.5 * self.bandwidth > 0:
            raise ValueError("chirp start frequency f_c - f_B/2 must be positive")

    @property
    def pulse_width(self) -> float:
        return self.duty * self.period

    @property
    def chirp_rate(self) -> float:
        """k = f_B / (duty * T), Hz/s."""
        return self.bandwidth / self.pulse_width

    @property
    def start_frequency(self) -> float:
        return self.center_frequency - 0.5 * self.bandwidth

    @property
    def stop_frequency(self) -> float:
        return self.center_frequency + 0.5 * self.bandwidth


@dataclass(frozen=True)
class CwParams:
    frequency: float = 8.0e9

    def __post_init__(self):
        check_positive(self.frequency, "frequency")


@dataclass(frozen=True)
class CompositeTxParams:
    lfm: LfmParams = field(default_factory=LfmParams)
    cw: CwParams = field(default_factory=CwParams)
    lfm_amplitude: float = 1.0
    cw_amplitude: float = 1.0

    def __post_init__(self):
        check_nonnegative(self.lfm_amplitude, "lfm_amplitude")
        check_nonnegative(self.cw_amplitude, "cw_amplitude")

    @property
    def max_frequency(self) -> float:
        """Highest frequency present in the transmitted signal."""
        return self.cw.frequency + self.lfm.stop_frequency


@dataclass(frozen=True)
class SampledSignal:
    """Uniformly sampled signal; sample ``n`` sits at ``start_time + n / sample_rate``."""

    sample_rate: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self):
        check_positive(self.sample_rate, "sample_rate")
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        object.__setattr__(self, "samples", samples)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.start_time + np.arange(self.samples.size) / self.sample_rate


def pulse_local_time(lfm: LfmParams, t) -> np.ndarray:
    """Time since the most recent pulse start (``t`` modulo ``T``)."""
    return np.mod(np.asarray(t, dtype=float), lfm.period)


def chirp_gate(lfm: LfmParams, tau) -> np.ndarray:
    """Boolean mask of pulse-local times inside the chirped window ``[0, duty*T]``."""
    tau = np.asarray(tau, dtype=float)
    return (tau >= 0.0) & (tau <= lfm.pulse_width * (1.0 + _EDGE_RTOL))


def instantaneous_frequency(lfm: LfmParams, t):
    """IF chirp instantaneous frequency; zero in the gap between pulses.

    ``t`` is reduced to the pulse interval ``(0, T]`` holding it.  ``t = 0``
    returns the chirp start frequency and ``t = duty*T`` returns the stop
    frequency exactly.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    tau = pulse_local_time(lfm, t_arr)
    # pulses are (0, T] intervals; only t = 0 itself opens a pulse at tau = 0
    tau = np.where((tau == 0) & (t_arr > 0), lfm.period, tau)
    f = lfm.start_frequency + lfm.chirp_rate * tau
    f = np.where(tau >= lfm.pulse_width, lfm.stop_frequency, f)
    f = np.where(chirp_gate(lfm, tau), f, 0.0)
    return float(f) if f.ndim == 0 else f


def lfm_phase(lfm: LfmParams, t):
    """IF chirp phase ``2*pi*(f_c - f_B/2)*t + pi*k*t**2`` on the active window."""
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("t must be finite")
    if np.any(t_arr < 0) or np.any(t_arr > lfm.pulse_width * (1.0 + _EDGE_RTOL)):
        raise ValueError("lfm_phase is defined only on the chirp window [0, duty*T]")
    phase = 2.0 * np.pi * lfm.start_frequency * t_arr + np.pi * lfm.chirp_rate * t_arr**2
    return float(phase) if phase.ndim == 0 else phase


def chirp_component(lfm: LfmParams, f_lo: float, t, phase_offset: float = math.pi / 4):
    """Unit-amplitude up-converted chirp, gated to the active window of each pulse."""
    t = np.asarray(t, dtype=float)
    tau = pulse_local_time(lfm, t)
    phase = (
        2.0 * np.pi * f_lo * t
        + 2.0 * np.pi * lfm.start_frequency * tau
        + np.pi * lfm.chirp_rate * tau**2
        + phase_offset
    )
    return np.where(chirp_gate(lfm, tau), np.cos(phase), 0.0)


def tone_component(f_lo: float, t, phase_offset: float = 0.0):
    """Unit-amplitude continuous ``sin(2*pi*f_LO*t + phase_offset)``."""
    return np.sin(2.0 * np.pi * f_lo * np.asarray(t, dtype=float) + phase_offset)


def transmit_waveform(p: CompositeTxParams, t, rf_phase_offsets=(math.pi / 4, 0.0)):
    """Evaluate the composite transmit signal at arbitrary times ``t``."""
    lfm_offset, cw_offset = rf_phase_offsets
    out = np.zeros(np.shape(t))
    if p.lfm_amplitude:
        out += p.lfm_amplitude * chirp_component(p.lfm, p.cw.frequency, t, lfm_offset)
    if p.cw_amplitude:
        out += p.cw_amplitude * tone_component(p.cw.frequency, t, cw_offset)
    return out


def synthesize_transmit(
    p: CompositeTxParams,
    sample_rate: float,
    duration: float,
    rf_phase_offsets=(math.pi / 4, 0.0),
    start_time: float = 0.0,
) -> SampledSignal:
    """Sample the real transmit signal over ``[start_time, start_time + duration)``.

    Samples sit on the absolute grid ``n / sample_rate`` (``start_time`` is
    rounded to it), so adjacent windows concatenate bit-identically.
    """
    check_positive(duration, "duration")
    check_nyquist(sample_rate, p.max_frequency, "the transmit signal")
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration is shorter than one sample")
    n0 = int(round(start_time * sample_rate))
    t = (n0 + np.arange(n)) / sample_rate
    return SampledSignal(sample_rate, n0 / sample_rate, transmit_waveform(p, t, rf_phase_offsets))


@dataclass(frozen=True)
class BandMeasurement:
    """Occupied chirp band and strongest line of a transmit spectrum."""

    band_low: float
    band_high: float
    tone_frequency: float
    resolution: float
    tone_bin: float

    @property
    def bandwidth(self) -> float:
        return self.band_high - self.band_low


def magnitude_spectrum(sig: SampledSignal):
    """One-sided DFT magnitude (rectangular window) and its bin frequencies."""
    x = np.asarray(sig.samples, dtype=float)
    mag = np.abs(np.fft.rfft(x)) * (2.0 / x.size)
    freqs = np.fft.rfftfreq(x.size, 1.0 / sig.sample_rate)
    return freqs, mag


def cell_power_spectrum(sig: SampledSignal, resolution: float = 10e6):
    """Power spectrum averaged over contiguous cells of width ``resolution``.

    Returns the cell lower edges and the mean DFT power in each cell.  This
    mimics a swept analyser whose resolution bandwidth exceeds the chirp's
    Fresnel edge width, so the band edges are sharp at the cell scale.
    """
    freqs, mag = magnitude_spectrum(sig)
    df = freqs[1] - freqs[0]
    per_cell = max(1, int(round(resolution / df)))
    n_cells = mag.size // per_cell
    if n_cells < 3:
        raise ValueError("signal too short for the requested resolution")
    power = (mag[: n_cells * per_cell] ** 2).reshape(n_cells, per_cell).mean(axis=1)
    return np.arange(n_cells) * per_cell * df, power


def measure_transmit_band(
    sig: SampledSignal, resolution: float = 10e6, line_margin_db: float = 10.0
) -> BandMeasurement:
    """Locate the chirp band edges and the single-tone line in a transmit signal.

    The tone is the largest full-resolution DFT bin.  Band edges are the
    outer boundaries of the cells whose power exceeds half (-3 dB) of the
    median in-band cell power, after masking the cells holding the tone.
    """
    freqs, mag = magnitude_spectrum(sig)
    k_tone = int(np.argmax(mag[1:])) + 1
    tone = float(freqs[k_tone])

    edges, power = cell_power_spectrum(sig, resolution)
    cell = edges[1] - edges[0]
    masked = power.copy()
    k_cell = min(int(tone // cell), power.size - 1)
    lo_nb = masked[max(k_cell - 2, 0)]
    hi_nb = masked[min(k_cell + 2, power.size - 1)]
    if masked[k_cell] > 10 ** (line_margin_db / 10) * max(lo_nb, hi_nb, 1e-300):
        for j in range(max(k_cell - 1, 0), min(k_cell + 2, power.size)):
            masked[j] = min(lo_nb, hi_nb)
    strong = masked[masked > 0.1 * masked.max()]
    level = float(np.median(strong))
    above = np.nonzero(masked > 0.5 * level)[0]
    return BandMeasurement(
        band_low=float(edges[above[0]]),
        band_high=float(edges[above[-1]] + cell),
        tone_frequency=tone,
        resolution=float(cell),
        tone_bin=float(freqs[1] - freqs[0]),
    )
