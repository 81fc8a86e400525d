"""Range-Doppler ISAR imaging of de-chirped pulse trains.

The high-passed capture is cut into an ``M x N`` matrix (``M`` in-pulse
samples, ``N`` pulses).  A fast-time DFT down each column gives range
profiles, ``R = c f / (2 k)``, and a slow-time DFT along each range bin
gives Doppler, mapped to cross-range by ``x = lambda f_d / (2 Omega)``.
Positive cross-range corresponds to positive Doppler (a receding
scatterer).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import get_window, zoom_fft
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_interval, check_positive
from .receiver import DechirpCapture
from .scene import radial_state
from .waveform import C, CwParams, LfmParams


@dataclass(frozen=True)
class SlowTimeMatrix:
    """In-pulse samples of consecutive pulses; ``data[m, n]`` is sample ``m`` of pulse ``n``.

    ``pulse_times`` are the absolute start times of the pulses and
    ``first_offset`` the pulse-local index of row 0.
    """

    data: np.ndarray
    sample_rate: float
    pulse_period: float
    pulse_times: np.ndarray
    first_offset: int = 1

    @property
    def M(self) -> int:
        return self.data.shape[0]

    @property
    def N(self) -> int:
        return self.data.shape[1]

    @property
    def center_time(self) -> float:
        return float(self.pulse_times[0] + 0.5 * self.N * self.pulse_period)


@dataclass(frozen=True)
class ImagingConfig:
    """Image-formation settings.

    ``integration_time=None`` uses every complete pulse.  Windows are any
    name accepted by :func:`scipy.signal.get_window`; ``boxcar`` keeps the
    narrowest main lobe.  ``range_limits`` and ``crossrange_limits`` (m)
    crop the output grid.
    """

    integration_time: float | None = None
    fast_window: str = "boxcar"
    slow_window: str = "boxcar"
    range_zero_pad: int = 1
    doppler_zero_pad: int = 1
    floor_db: float = -40.0
    range_limits: tuple | None = None
    crossrange_limits: tuple = (-0.5, 0.5)

    def __post_init__(self):
        if self.integration_time is not None:
            check_positive(self.integration_time, "integration_time")
        if int(self.range_zero_pad) < 1 or int(self.doppler_zero_pad) < 1:
            raise ValueError("zero-padding factors must be >= 1")
        if not self.floor_db < 0:
            raise ValueError("floor_db must be negative")
        if self.range_limits is not None:
            check_interval(self.range_limits, "range_limits")
        check_interval(self.crossrange_limits, "crossrange_limits")


@dataclass(frozen=True)
class IsarImage:
    """Peak-normalized dB image; rows follow ``range_axis``, columns ``crossrange_axis``."""

    magnitudes: np.ndarray
    range_axis: np.ndarray
    crossrange_axis: np.ndarray
    wavelength: float
    omega: float
    integration_time: float
    center_time: float
    floor_db: float

    def __post_init__(self):
        if self.magnitudes.shape != (self.range_axis.size, self.crossrange_axis.size):
            raise ValueError("image shape does not match its axes")

    @property
    def range_spacing(self) -> float:
        return float(self.range_axis[1] - self.range_axis[0])

    @property
    def crossrange_spacing(self) -> float:
        return float(self.crossrange_axis[1] - self.crossrange_axis[0])


def rearrange_slow_time(capture: DechirpCapture, first_offset: int = 1) -> SlowTimeMatrix:
    """Slice a capture into its complete pulses.

    Row ``m`` holds pulse-local sample ``first_offset + m``; the default
    skips the ``tau = 0`` sample, where the de-chirp beat is inactive, so the
    ``M = round(pulse_width * fs)`` rows span ``(0, pulse_width]``.  Pulses
    cut by either end of the capture are dropped.
    """
    fs = capture.sample_rate
    per = fs * capture.pulse_period
    if abs(per - round(per)) > 1e-9 * per:
        raise ValueError("pulse period must be an integer number of capture samples")
    per = int(round(per))
    m = int(round(capture.pulse_width * fs))
    if m < 1 or first_offset < 0 or first_offset + m > per:
        raise ValueError("pulse width does not fit in the pulse period")
    n0 = int(round(capture.start_time * fs))
    first_pulse = -(-n0 // per)
    skip = first_pulse * per - n0
    n = (capture.samples.size - skip) // per
    if n < 1:
        raise ValueError("capture is shorter than one pulse period")
    block = capture.samples[skip : skip + n * per].reshape(n, per)
    data = block[:, first_offset : first_offset + m].T.copy()
    pulse_times = (first_pulse + np.arange(n)) * per / fs
    return SlowTimeMatrix(data, fs, capture.pulse_period, pulse_times, first_offset)


def wavelength(lfm: LfmParams, cw: CwParams) -> float:
    """Wavelength at the centre of the transmitted chirp band, ``c / (f_LO + f_c)``."""
    return C / (cw.frequency + lfm.center_frequency)


def theoretical_resolution(lfm: LfmParams, cw: CwParams, integration_time: float, omega: float):
    """Range and cross-range resolution ``(c / (2 f_B), lambda / (2 T_r Omega))``."""
    check_positive(integration_time, "integration_time")
    check_positive(omega, "omega")
    return C / (2.0 * lfm.bandwidth), wavelength(lfm, cw) / (2.0 * integration_time * omega)


def form_image(
    m: SlowTimeMatrix,
    lfm: LfmParams,
    cw: CwParams,
    cfg: ImagingConfig,
    omega: float,
) -> IsarImage:
    """Range-Doppler image of a (high-passed) slow-time matrix."""
    if not (math.isfinite(omega) and omega > 0):
        raise ValueError("omega must be positive; the cross-range axis is undefined otherwise")
    n_use = m.N
    if cfg.integration_time is not None:
        n_use = int(round(cfg.integration_time / m.pulse_period))
        if n_use > m.N:
            raise ValueError(
                f"integration time {cfg.integration_time:g} s exceeds the {m.N * m.pulse_period:g} s of data"
            )
        if n_use < 1:
            raise ValueError("integration time is shorter than one pulse period")
    start = (m.N - n_use) // 2
    data = m.data[:, start : start + n_use]
    t_r = n_use * m.pulse_period
    center_time = float(m.pulse_times[start] + 0.5 * t_r)

    # fast time -> range
    nfft = m.M * int(cfg.range_zero_pad)
    wf = get_window(cfg.fast_window, m.M)
    profiles = np.fft.rfft(data * wf[:, None], n=nfft, axis=0)
    f_fast = np.fft.rfftfreq(nfft, 1.0 / m.sample_rate)
    ranges = C * f_fast / (2.0 * lfm.chirp_rate)
    if cfg.range_limits is not None:
        lo, hi = cfg.range_limits
        keep = (ranges >= lo) & (ranges <= hi)
        if not keep.any():
            raise ValueError("range_limits select no range bins")
        profiles, ranges = profiles[keep], ranges[keep]

    # slow time -> Doppler, evaluated only over the requested cross-range span
    lam = wavelength(lfm, cw)
    ws = get_window(cfg.slow_window, n_use)
    prf = 1.0 / m.pulse_period
    df = prf / (n_use * int(cfg.doppler_zero_pad))
    x_lo, x_hi = cfg.crossrange_limits
    k_lo = math.floor(2.0 * omega * x_lo / lam / df)
    k_hi = math.ceil(2.0 * omega * x_hi / lam / df)
    n_dop = k_hi - k_lo + 1
    if k_hi * df >= 0.5 * prf or k_lo * df < -0.5 * prf:
        raise ValueError("cross-range span exceeds the unambiguous Doppler band")
    doppler = (k_lo + np.arange(n_dop)) * df
    # The slow-time sample n sits at pulse start n * T; zoom_fft evaluates
    # sum_n x[n] exp(-j 2 pi f n / prf) on the requested grid.
    spec = zoom_fft(profiles * ws[None, :], [doppler[0], doppler[-1] + df], m=n_dop, fs=prf, endpoint=False, axis=1)
    crossrange = lam * doppler / (2.0 * omega)

    mag = np.abs(spec)
    peak = mag.max()
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(mag / peak) if peak > 0 else np.full(mag.shape, cfg.floor_db)
    db = np.maximum(db, cfg.floor_db)
    return IsarImage(db, ranges, crossrange, lam, float(omega), t_r, center_time, cfg.floor_db)


def image_peaks(img: IsarImage, threshold_db: float = -20.0, neighborhood: int = 3):
    """Local maxima above ``threshold_db`` as ``(range, crossrange, dB)`` tuples, strongest first."""
    mag = img.magnitudes
    local = maximum_filter(mag, size=neighborhood, mode="constant", cval=-np.inf)
    rows, cols = np.nonzero((mag == local) & (mag > threshold_db))
    order = np.argsort(-mag[rows, cols], kind="stable")
    return [(float(img.range_axis[rows[i]]), float(img.crossrange_axis[cols[i]]), float(mag[rows[i], cols[i]])) for i in order]


def valley_depth(img: IsarImage, p1, p2, samples: int = 64) -> float:
    """Depth (dB) of the deepest point on the segment between two ``(range, crossrange)`` points.

    Measured below the weaker endpoint, sampling the grid at the nearest cell
    to each of ``samples`` points along the segment.
    """

    def cell(r, x):
        return (
            int(np.argmin(np.abs(img.range_axis - r))),
            int(np.argmin(np.abs(img.crossrange_axis - x))),
        )

    a, b = cell(*p1), cell(*p2)
    levels = [
        img.magnitudes[
            int(round(a[0] + (b[0] - a[0]) * u)),
            int(round(a[1] + (b[1] - a[1]) * u)),
        ]
        for u in np.linspace(0.0, 1.0, samples)
    ]
    weaker = min(img.magnitudes[a], img.magnitudes[b])
    return float(weaker - min(levels))


def _width_3db(profile_db: np.ndarray, k: int, spacing: float) -> float:
    p = 10.0 ** (profile_db / 20.0)
    half = p[k] / math.sqrt(2.0)
    left = k
    while left > 0 and p[left - 1] > half:
        left -= 1
    right = k
    while right < p.size - 1 and p[right + 1] > half:
        right += 1

    def crossing(i_in, i_out):
        if i_out < 0 or i_out >= p.size:
            return float(i_in)
        return i_in + (i_out - i_in) * (p[i_in] - half) / (p[i_in] - p[i_out])

    return (crossing(right, right + 1) - crossing(left, left - 1)) * spacing


def peak_widths(img: IsarImage):
    """-3 dB widths (m) of the strongest peak along range and cross-range.

    Widths come from linear interpolation between grid samples, so
    zero-padded images give finer estimates.
    """
    i, j = np.unravel_index(np.argmax(img.magnitudes), img.magnitudes.shape)
    return (
        _width_3db(img.magnitudes[:, j], i, img.range_spacing),
        _width_3db(img.magnitudes[i, :], j, img.crossrange_spacing),
    )


def crossrange_truth(scene, scatterer, t: float) -> float:
    """Cross-range at which ``scatterer`` images at time ``t``: ``v_r(t) / Omega``."""
    if scene.omega == 0:
        raise ValueError("cross-range is undefined for a stationary turntable")
    return radial_state(scene, scatterer, t)[1] / scene.omega


class IsarImager(BaseEstimator):
    """Estimator form of the imaging chain for batches of equal-length captures.

    ``transform`` maps rows of ``X`` (captures starting at ``start_time``
    + row * ``capture_spacing``) to a stack of dB images.
    """

    def __init__(
        self,
        lfm=None,
        cw=None,
        omega=2 * math.pi / 24.56,
        sample_rate=4e6,
        start_time=0.0,
        capture_spacing=0.0,
        config=None,
    ):
        self.lfm = lfm
        self.cw = cw
        self.omega = omega
        self.sample_rate = sample_rate
        self.start_time = start_time
        self.capture_spacing = capture_spacing
        self.config = config

    def fit(self, X=None, y=None):
        check_positive(self.omega, "omega")
        self.config_ = self.config or ImagingConfig()
        self.lfm_ = self.lfm or LfmParams()
        self.cw_ = self.cw or CwParams()
        return self

    def image(self, capture: DechirpCapture) -> IsarImage:
        check_is_fitted(self, "config_")
        return form_image(rearrange_slow_time(capture), self.lfm_, self.cw_, self.config_, self.omega)

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be 2-D: one capture per row")
        lfm = self.lfm or LfmParams()
        imgs = []
        for i, row in enumerate(X):
            cap = DechirpCapture(
                self.sample_rate, row, lfm.period, lfm.pulse_width, self.start_time + i * self.capture_spacing
            )
            imgs.append(self.image(cap).magnitudes)
        return np.stack(imgs)
