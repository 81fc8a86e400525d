"""Range and radial-velocity recovery from de-chirp captures.

The LFM beat gives range, ``R = c f / (2 k)``; the single-tone beat gives
speed, ``|v| = c f / (2 f_LO)``.  The sign of the velocity is not visible in
a real-valued tone, so direction comes from the range trend across
consecutive captures.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import get_window
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import NoPeakError, check_interval
from .receiver import DechirpCapture
from .waveform import C, CwParams, LfmParams

DEFAULT_DOPPLER_BAND = (0.0, 100.0)
DEFAULT_DHPF_CUTOFF = 1e3
# Half the RMS static range error of the full-capture estimator (see tests).
DEFAULT_DIRECTION_THRESHOLD = 4e-3
DOPPLER_DYNAMIC_RANGE_DB = 60.0


class Direction(str, enum.Enum):
    RECEDING = "receding"
    APPROACHING = "approaching"
    INDETERMINATE = "indeterminate"

    @property
    def sign(self) -> int:
        return {"receding": 1, "approaching": -1}.get(self.value, 0)


@dataclass(frozen=True)
class Spectrum:
    frequencies: np.ndarray
    magnitudes: np.ndarray
    window: str
    duration: float
    zero_pad: int = 1

    @property
    def bin_spacing(self) -> float:
        return 1.0 / (self.duration * self.zero_pad)


@dataclass(frozen=True)
class PeakInfo:
    refined_frequency: float
    magnitude: float
    bin_index: int
    offset: float


@dataclass(frozen=True)
class RangeVelocityEstimate:
    timestamp: float
    range: float
    speed: float
    direction: Direction = Direction.INDETERMINATE
    signed_velocity: float = math.nan
    status: str = "ok"


def compute_spectrum(samples, sample_rate: float, window: str = "hann", zero_pad: int = 1) -> Spectrum:
    """Windowed one-sided magnitude spectrum, scaled so a tone of amplitude A reads A."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D record with at least two samples")
    w = get_window(window, x.size)
    nfft = x.size * int(zero_pad)
    mag = np.abs(np.fft.rfft(x * w, n=nfft)) * (2.0 / w.sum())
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    return Spectrum(freqs, mag, window, x.size / sample_rate, int(zero_pad))


def find_peak(spec: Spectrum, band) -> PeakInfo:
    """Largest in-band bin, refined by a parabola through the log magnitudes.

    The DC bin is never reported.  Neighbours outside ``band`` still take
    part in the interpolation.
    """
    lo, hi = check_interval(band, "band")
    f = spec.frequencies
    if lo > f[-1]:
        raise ValueError("band lies above the Nyquist frequency")
    i0 = max(int(np.searchsorted(f, lo, side="left")), 1)
    i1 = int(np.searchsorted(f, hi, side="right"))
    if i1 <= i0:
        raise NoPeakError(f"band ({lo:g}, {hi:g}) Hz contains no spectral bins")
    seg = spec.magnitudes[i0:i1]
    j = int(np.argmax(seg))
    if not seg[j] > 0:
        raise NoPeakError("signal has no energy in the band")
    k = i0 + j
    offset = 0.0
    if 0 < k < spec.magnitudes.size - 1:
        tiny = np.finfo(float).tiny
        a, b, c = np.log(np.maximum(spec.magnitudes[k - 1 : k + 2], tiny))
        denom = a - 2.0 * b + c
        if denom < 0:
            offset = float(np.clip(0.5 * (a - c) / denom, -0.4999, 0.4999))
    df = f[1] - f[0]
    return PeakInfo(float(f[k] + offset * df), float(spec.magnitudes[k]), k, offset)


def spectrum_peak(capture: DechirpCapture, band, window: str = "hann", zero_pad: int = 1) -> PeakInfo:
    """Refined frequency of the strongest spectral peak of ``capture`` inside ``band``."""
    lo, hi = check_interval(band, "band")
    if lo >= 0.5 * capture.sample_rate:
        raise ValueError("band lies above the Nyquist frequency")
    x = capture.samples - capture.samples.mean()
    return find_peak(compute_spectrum(x, capture.sample_rate, window, zero_pad), (lo, hi))


def estimate_range(f_dlfm: float, lfm: LfmParams, delay_offset: float = 0.0) -> float:
    """``R = c f / (2k)``, after removing a calibrated system delay in seconds."""
    if not math.isfinite(f_dlfm) or f_dlfm < 0:
        raise ValueError(f"de-chirp frequency must be finite and >= 0, got {f_dlfm!r}")
    return 0.5 * C * (f_dlfm / lfm.chirp_rate - delay_offset)


def estimate_speed(f_dcw: float, cw: CwParams) -> float:
    """``|v| = c f / (2 f_LO)``."""
    if not math.isfinite(f_dcw) or f_dcw < 0:
        raise ValueError(f"Doppler frequency must be finite and >= 0, got {f_dcw!r}")
    return C * f_dcw / (2.0 * cw.frequency)


def velocity_direction(ranges, threshold: float = DEFAULT_DIRECTION_THRESHOLD) -> list[Direction]:
    """Direction of motion at each sample from the next range change.

    A change larger than ``threshold`` means receding, smaller than
    ``-threshold`` approaching, otherwise indeterminate.  The last sample
    has no successor and reuses the most recent determinate direction.
    """
    r = np.asarray(ranges, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("direction needs at least two range samples")
    out = []
    for dr in np.diff(r):
        if dr > threshold:
            out.append(Direction.RECEDING)
        elif dr < -threshold:
            out.append(Direction.APPROACHING)
        else:
            out.append(Direction.INDETERMINATE)
    last = next((d for d in reversed(out) if d is not Direction.INDETERMINATE), Direction.INDETERMINATE)
    out.append(last)
    return out


def dechirp_frequency_model(lfm: LfmParams, cw: CwParams, r0: float, v: float, t):
    """Exact LFM beat frequency and its ``k * delay`` approximation.

    ``t`` is pulse-local time.  Returns ``(exact, approx)`` with
    ``delay = 2 (r0 + v t) / c``.
    """
    t = np.asarray(t, dtype=float)
    delay = 2.0 * (r0 + v * t) / C
    k = lfm.chirp_rate
    beta = 2.0 * v / C
    exact = beta * (cw.frequency + lfm.start_frequency) + k * t - k * (t - delay) * (1.0 - beta)
    approx = k * delay
    if exact.ndim == 0:
        return float(exact), float(approx)
    return exact, approx


def _doppler_speed(spec: Spectrum, band, cw: CwParams, threshold_db: float):
    # A Doppler line must stand threshold_db above the in-band median and be
    # no more than DOPPLER_DYNAMIC_RANGE_DB below the strongest line anywhere;
    # the second test rejects window leakage of a static target's residual DC.
    peak = find_peak(spec, band)
    lo, hi = band
    sel = (spec.frequencies > lo) & (spec.frequencies <= hi)
    floor = float(np.median(spec.magnitudes[sel]))
    strongest = float(spec.magnitudes[1:].max())
    if peak.magnitude <= max(
        floor * 10 ** (threshold_db / 20.0),
        strongest * 10 ** (-DOPPLER_DYNAMIC_RANGE_DB / 20.0),
    ):
        return 0.0, "no-doppler"
    return estimate_speed(peak.refined_frequency, cw), "ok"


def estimate_capture(
    capture: DechirpCapture,
    lfm: LfmParams,
    cw: CwParams,
    doppler_band=DEFAULT_DOPPLER_BAND,
    lfm_band=None,
    window: str = "hann",
    delay_offset: float = 0.0,
    doppler_threshold_db: float = 15.0,
) -> RangeVelocityEstimate:
    """Range and speed from one capture; direction is left indeterminate."""
    x = capture.samples - capture.samples.mean()
    spec = compute_spectrum(x, capture.sample_rate, window)
    return estimate_from_spectrum(
        spec, capture.center_time, lfm, cw, doppler_band, lfm_band, delay_offset, doppler_threshold_db
    )


def estimate_from_spectrum(
    spec: Spectrum,
    timestamp: float,
    lfm: LfmParams,
    cw: CwParams,
    doppler_band=DEFAULT_DOPPLER_BAND,
    lfm_band=None,
    delay_offset: float = 0.0,
    doppler_threshold_db: float = 15.0,
) -> RangeVelocityEstimate:
    """Range from the strongest peak in ``lfm_band``, speed from the Doppler band."""
    if lfm_band is None:
        lfm_band = (DEFAULT_DHPF_CUTOFF, spec.frequencies[-1])
    status = []
    try:
        f_r = find_peak(spec, lfm_band).refined_frequency
        rng = estimate_range(f_r, lfm, delay_offset)
    except ValueError:
        rng = math.nan
        status.append("no-range-peak")
    try:
        speed, st = _doppler_speed(spec, doppler_band, cw, doppler_threshold_db)
        if st != "ok":
            status.append(st)
    except ValueError:
        speed = math.nan
        status.append("no-doppler-peak")
    return RangeVelocityEstimate(timestamp, rng, speed, status=";".join(status) or "ok")


def assign_directions(estimates, threshold: float = DEFAULT_DIRECTION_THRESHOLD):
    """Attach direction and signed velocity to a time-ordered estimate list."""
    est = list(estimates)
    if len(est) < 2:
        return est
    dirs = velocity_direction([e.range for e in est], threshold)
    out = []
    for e, d in zip(est, dirs):
        signed = d.sign * e.speed if d is not Direction.INDETERMINATE else math.nan
        out.append(
            RangeVelocityEstimate(e.timestamp, e.range, e.speed, d, signed, e.status)
        )
    return out


def track_scene(
    captures,
    lfm: LfmParams,
    cw: CwParams,
    doppler_band=DEFAULT_DOPPLER_BAND,
    lfm_band=None,
    window: str = "hann",
    delay_offset: float = 0.0,
    direction_threshold: float = DEFAULT_DIRECTION_THRESHOLD,
    doppler_threshold_db: float = 15.0,
) -> list[RangeVelocityEstimate]:
    """Per-capture range/speed estimates with directions from the range trend.

    Captures are sorted by start time.  A capture whose peaks cannot be
    found yields NaN fields and a status string instead of an exception.
    """
    caps = sorted(captures, key=lambda c: c.start_time)
    est = [
        estimate_capture(c, lfm, cw, doppler_band, lfm_band, window, delay_offset, doppler_threshold_db)
        for c in caps
    ]
    return assign_directions(est, direction_threshold)


class RangeVelocityTracker(BaseEstimator):
    """Estimator form of :func:`track_scene`.

    Rows of ``X`` are captures sampled at ``sample_rate``; ``predict``
    returns an ``(n_captures, 2)`` array of ``[range_m, speed_mps]``.
    ``fit`` optionally calibrates the system delay from captures of targets
    at known ranges ``y``.
    """

    def __init__(
        self,
        lfm=None,
        cw=None,
        sample_rate=4e6,
        doppler_band=DEFAULT_DOPPLER_BAND,
        lfm_cutoff=DEFAULT_DHPF_CUTOFF,
        window="hann",
        direction_threshold=DEFAULT_DIRECTION_THRESHOLD,
    ):
        self.lfm = lfm
        self.cw = cw
        self.sample_rate = sample_rate
        self.doppler_band = doppler_band
        self.lfm_cutoff = lfm_cutoff
        self.window = window
        self.direction_threshold = direction_threshold

    def _params(self):
        return (self.lfm or LfmParams(), self.cw or CwParams())

    def _captures(self, X):
        lfm, _ = self._params()
        X = check_array(X, ensure_2d=True)
        return [DechirpCapture(self.sample_rate, row, lfm.period, lfm.pulse_width) for row in X]

    def _estimate(self, cap, delay_offset):
        lfm, cw = self._params()
        return estimate_capture(
            cap, lfm, cw, self.doppler_band, (self.lfm_cutoff, 0.5 * self.sample_rate),
            self.window, delay_offset,
        )

    def fit(self, X, y=None):
        caps = self._captures(X)
        self.n_features_in_ = caps[0].samples.size
        self.delay_offset_ = 0.0
        if y is not None:
            truth = np.asarray(y, dtype=float)
            if truth.shape != (len(caps),):
                raise ValueError("y must hold one known range per capture")
            measured = np.array([self._estimate(c, 0.0).range for c in caps])
            self.delay_offset_ = float(np.mean(2.0 * (measured - truth) / C))
        return self

    def predict(self, X):
        check_is_fitted(self, "delay_offset_")
        est = [self._estimate(c, self.delay_offset_) for c in self._captures(X)]
        return np.array([[e.range, e.speed] for e in est])

    def track(self, captures):
        """Full estimates (with directions) for a list of :class:`DechirpCapture`."""
        check_is_fitted(self, "delay_offset_")
        lfm, cw = self._params()
        return track_scene(
            captures, lfm, cw, self.doppler_band, (self.lfm_cutoff, 0.5 * self.sample_rate),
            self.window, self.delay_offset_, self.direction_threshold,
        )
