"""De-chirp reception.

Two routes produce the same low-rate capture.  :func:`dechirp_analytic`
evaluates the two low-frequency beat terms directly at the capture rate and
is the workhorse for long (seconds) captures.  :func:`dechirp_field_level`
single-sideband modulates an RF echo onto the optical reference, square-law
detects it, low-pass filters and decimates; it is only practical for short
windows and serves to validate the analytic route.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import NyquistError, check_positive, check_nyquist
from .photonics import OpticalField
from .scene import EchoConfig, TurntableScene, gaussian_noise, noise_sigma, radial_state
from .waveform import C, CwParams, LfmParams, SampledSignal

CHUNK = 1 << 20


@dataclass(frozen=True)
class CaptureSpec:
    """Where and how a de-chirp capture is sampled."""

    sample_rate: float = 4e6
    duration: float = 2.0
    start_time: float = 0.0

    def __post_init__(self):
        check_positive(self.sample_rate, "sample_rate")
        check_positive(self.duration, "duration")

    @property
    def num_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def center_time(self) -> float:
        return self.start_time + 0.5 * self.duration


@dataclass(frozen=True)
class DechirpCapture:
    """Real low-rate de-chirped samples plus the pulse timing needed to slice them."""

    sample_rate: float
    samples: np.ndarray
    pulse_period: float
    pulse_width: float
    start_time: float = 0.0

    def __post_init__(self):
        check_positive(self.sample_rate, "sample_rate")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("capture samples must be a non-empty 1-D array")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def center_time(self) -> float:
        return self.start_time + 0.5 * self.duration

    def with_samples(self, samples) -> "DechirpCapture":
        return DechirpCapture(self.sample_rate, samples, self.pulse_period, self.pulse_width, self.start_time)


@dataclass(frozen=True)
class FilterConfig:
    """Receiver filters.

    ``kind`` is ``"gate"`` (ideal zero-phase frequency-domain gate) or
    ``"fir"`` (linear-phase Kaiser FIR, delay-compensated).  ``num_taps=None``
    sizes the FIR for ``fir_attenuation`` dB over a transition of 90% of the
    cutoff.
    """

    elpf_cutoff: float = 1.4e9
    dhpf_cutoff: float = 1e3
    kind: str = "gate"
    num_taps: int | None = None
    fir_attenuation: float = 80.0

    def __post_init__(self):
        check_positive(self.elpf_cutoff, "elpf_cutoff")
        check_positive(self.dhpf_cutoff, "dhpf_cutoff")
        if self.kind not in ("gate", "fir"):
            raise ValueError(f"filter kind must be 'gate' or 'fir', got {self.kind!r}")


def max_dechirp_frequency(scene: TurntableScene, lfm: LfmParams, cw: CwParams, t0: float, t1: float) -> float:
    """Upper bound on the beat frequencies a scene produces over ``[t0, t1]``."""
    r_max, v_max = 0.0, 0.0
    for s in scene.scatterers:
        if s.is_free:
            r_max = max(r_max, s.range0 + max(s.velocity * t0, s.velocity * t1))
            v_max = max(v_max, abs(s.velocity))
        else:
            r_max = max(r_max, scene.antenna_to_center + s.radius)
            v_max = max(v_max, s.radius * scene.omega)
    doppler = 2.0 * v_max / C * (cw.frequency + lfm.center_frequency + 0.5 * lfm.bandwidth)
    return lfm.chirp_rate * 2.0 * r_max / C + doppler


def _pulse_local(idx: np.ndarray, sample_rate: float, period: float) -> np.ndarray:
    per = sample_rate * period
    if abs(per - round(per)) < 1e-9 * per:
        return np.mod(idx, int(round(per))) / sample_rate
    return np.mod(idx / sample_rate, period)


def dechirp_analytic(
    scene: TurntableScene,
    lfm: LfmParams,
    cw: CwParams,
    spec: CaptureSpec,
    amplitudes=(1.0, 1.0),
    noise: EchoConfig | None = None,
    propagation_loss: bool = False,
) -> DechirpCapture:
    """Evaluate the two de-chirped beat terms of every scatterer at the capture rate.

    Per scatterer, with ``d = 2 R(t) / c`` and pulse-local time ``tau``::

        A1 sin(2 pi f_LO d)
        + A2 sin(2 pi (f_LO + f_c - f_B/2) d + pi k tau**2 - pi k (tau - d)**2)

    where the second term is gated to ``d < tau <= duty*T``.  ``R(t)`` is
    the exact scene range at each absolute sample time.  ``noise`` adds
    white Gaussian noise at ``noise.snr`` relative to the nominal capture
    power, keyed by absolute sample index.
    """
    if not scene.scatterers:
        raise ValueError("scene has no scatterers")
    fs = spec.sample_rate
    n0 = int(round(spec.start_time * fs))
    n = spec.num_samples
    f_max = max_dechirp_frequency(scene, lfm, cw, n0 / fs, (n0 + n) / fs)
    check_nyquist(fs, f_max, "the de-chirped beat")
    a1, a2 = amplitudes
    f_up = cw.frequency + lfm.start_frequency
    k = lfm.chirp_rate

    out = np.zeros(n)
    for a in range(0, n, CHUNK):
        idx = n0 + np.arange(a, min(a + CHUNK, n))
        t = idx / fs
        tau = _pulse_local(idx, fs, lfm.period)
        acc = out[a : a + idx.size]
        for s in scene.scatterers:
            gain = s.reflectivity
            r_t, _ = radial_state(scene, s, t)
            if propagation_loss:
                gain = gain / r_t**2
            d = 2.0 * r_t / C
            if a1:
                acc += gain * a1 * np.sin(2 * np.pi * cw.frequency * d)
            if a2:
                beat = np.sin(2 * np.pi * f_up * d + np.pi * k * d * (2.0 * tau - d))
                active = (tau > d) & (tau <= lfm.pulse_width * (1 + 1e-12))
                acc += np.where(active, gain * a2 * beat, 0.0)

    if noise is not None and not math.isinf(noise.snr):
        power = sum(s.reflectivity**2 for s in scene.scatterers) * (0.5 * a1**2 + 0.5 * a2**2 * lfm.duty)
        out += noise_sigma(power, noise.snr) * gaussian_noise(noise.rng_seed, n0, n, stream=1)
    return DechirpCapture(fs, out, lfm.period, lfm.pulse_width, n0 / fs)


def _lowpass_decimate(x: np.ndarray, fs: float, cutoff: float, factor: int) -> np.ndarray:
    spec = np.fft.rfft(x)
    spec[np.fft.rfftfreq(x.size, 1.0 / fs) > cutoff] = 0.0
    return np.fft.irfft(spec, n=x.size)[::factor]


def dechirp_field_level(
    echo: SampledSignal,
    reference: OpticalField,
    filt: FilterConfig,
    lfm: LfmParams,
    capture_rate: float,
    modulation_index: float = 1e-3,
) -> DechirpCapture:
    """Photonic de-chirp of an RF echo against the optical reference ``E_R``.

    The quadrature-biased MZM with a 90 degree hybrid imposes the echo's
    analytic signal as a +1st-order sideband, ``E_R (1 + m * echo_analytic)``.
    After square-law detection the target-free reference photocurrent
    ``|E_R|**2`` is subtracted, the ELPF is applied, and the result is
    low-passed to the capture Nyquist rate and decimated.
    """
    fs = echo.sample_rate
    if fs != reference.sample_rate or echo.samples.size != reference.samples.size:
        raise ValueError("echo and reference must share sample rate and length")
    if abs(echo.start_time - reference.start_time) > 0.5 / fs:
        raise ValueError("echo and reference cover different time windows")
    if echo.is_complex:
        raise ValueError("echo must be a real RF signal")
    factor = fs / capture_rate
    if factor < 1 or abs(factor - round(factor)) > 1e-9 * factor:
        raise ValueError("field sample rate must be an integer multiple of the capture rate")
    factor = int(round(factor))

    analytic = signal.hilbert(echo.samples)
    ref = reference.samples
    detected = np.abs(ref * (1.0 + modulation_index * analytic)) ** 2 - np.abs(ref) ** 2
    cutoff = min(filt.elpf_cutoff, 0.5 * capture_rate)
    low = _lowpass_decimate(detected, fs, cutoff, factor)
    return DechirpCapture(capture_rate, low, lfm.period, lfm.pulse_width, echo.start_time)


def overlap_mask(capture: DechirpCapture, max_delay: float, guard_samples: int = 2) -> np.ndarray:
    """Samples where every scatterer's chirp beat is active: ``max_delay < tau <= duty*T``."""
    fs = capture.sample_rate
    idx = int(round(capture.start_time * fs)) + np.arange(capture.samples.size)
    tau = _pulse_local(idx, fs, capture.pulse_period)
    guard = guard_samples / fs
    return (tau > max_delay + guard) & (tau < capture.pulse_width - guard)


def envelope_correlation(a, b, mask=None) -> float:
    """Phase-insensitive normalized correlation of two real records.

    Both records are mean-removed and converted to analytic signals; the
    magnitude of their normalized inner product (optionally over ``mask``)
    is returned.  A constant phase offset between the records, such as the
    sine/cosine difference between the two de-chirp routes, leaves it at 1.
    """
    za = signal.hilbert(np.asarray(a, float) - np.mean(a))
    zb = signal.hilbert(np.asarray(b, float) - np.mean(b))
    if mask is not None:
        za, zb = za[mask], zb[mask]
    denom = np.linalg.norm(za) * np.linalg.norm(zb)
    return float(abs(np.vdot(za, zb)) / denom) if denom else 0.0


def design_dhpf(cfg: FilterConfig, sample_rate: float) -> np.ndarray:
    """Odd-length linear-phase Kaiser high-pass taps for ``kind='fir'``."""
    nyq = 0.5 * sample_rate
    if cfg.num_taps is None:
        numtaps, beta = signal.kaiserord(cfg.fir_attenuation, 0.9 * cfg.dhpf_cutoff / nyq)
    else:
        numtaps, beta = cfg.num_taps, signal.kaiser_beta(cfg.fir_attenuation)
    numtaps |= 1
    return signal.firwin(numtaps, cfg.dhpf_cutoff, window=("kaiser", beta), pass_zero=False, fs=sample_rate)


def _highpass(x: np.ndarray, fs: float, cfg: FilterConfig) -> np.ndarray:
    x = x - x.mean()
    if cfg.kind == "gate":
        spec = np.fft.rfft(x)
        spec[np.fft.rfftfreq(x.size, 1.0 / fs) < cfg.dhpf_cutoff] = 0.0
        return np.fft.irfft(spec, n=x.size)
    return signal.oaconvolve(x, design_dhpf(cfg, fs), mode="same")


def dhpf(
    capture: DechirpCapture,
    cfg: FilterConfig = FilterConfig(),
    min_expected_tone: float | None = None,
    strict: bool = False,
) -> DechirpCapture:
    """Remove DC and the slow Doppler beat before imaging.

    The capture mean is subtracted first, then the high-pass of ``cfg`` is
    applied.  If ``min_expected_tone`` is given and the cutoff is not below
    it, a warning is issued (``ValueError`` when ``strict``).
    """
    if cfg.dhpf_cutoff >= 0.5 * capture.sample_rate:
        raise NyquistError("DHPF cutoff must be below the capture Nyquist frequency")
    if min_expected_tone is not None and cfg.dhpf_cutoff >= min_expected_tone:
        msg = (
            f"DHPF cutoff {cfg.dhpf_cutoff:g} Hz would remove the de-chirp tone "
            f"expected at {min_expected_tone:g} Hz"
        )
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, stacklevel=2)
    return capture.with_samples(_highpass(capture.samples, capture.sample_rate, cfg))


class DechirpHighPass(TransformerMixin, BaseEstimator):
    """Transformer form of :func:`dhpf` over a batch of captures (rows of ``X``)."""

    def __init__(self, sample_rate=4e6, cutoff=1e3, kind="gate", num_taps=None):
        self.sample_rate = sample_rate
        self.cutoff = cutoff
        self.kind = kind
        self.num_taps = num_taps

    def _config(self) -> FilterConfig:
        return FilterConfig(dhpf_cutoff=self.cutoff, kind=self.kind, num_taps=self.num_taps)

    def fit(self, X, y=None):
        X = check_array(X, ensure_2d=True)
        if self.cutoff >= 0.5 * self.sample_rate:
            raise ValueError("cutoff must be below the Nyquist frequency")
        self.filter_config_ = self._config()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "filter_config_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} samples per capture, got {X.shape[1]}")
        return np.vstack([_highpass(row, self.sample_rate, self.filter_config_) for row in X])
