"""Point-scatterer targets, their range histories, and received echoes.

Geometry: the antenna pair sits at the origin looking along +x; a turntable
centred at ``(L, 0)`` rotates counter-clockwise at ``omega``.  A scatterer at
radius ``r`` and initial angle ``theta0`` is at
``(L + r cos(theta0 + omega t), r sin(theta0 + omega t))``.  Radial velocity
is positive when the range is increasing (target receding).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_nonnegative, check_nyquist, check_positive
from .waveform import C, CompositeTxParams, SampledSignal, chirp_component, tone_component

NOISE_BLOCK = 1 << 16


@dataclass(frozen=True)
class PointScatterer:
    """A point target, either riding the turntable or in free linear motion.

    Use :meth:`on_turntable` or :meth:`free` rather than setting the fields
    directly.
    """

    reflectivity: float = 1.0
    radius: float | None = None
    angle: float = 0.0
    range0: float | None = None
    velocity: float = 0.0

    def __post_init__(self):
        check_nonnegative(self.reflectivity, "reflectivity")
        if (self.radius is None) == (self.range0 is None):
            raise ValueError("give exactly one of radius (turntable) or range0 (free)")
        if self.radius is not None:
            check_nonnegative(self.radius, "radius")
        else:
            check_positive(self.range0, "range0")

    @classmethod
    def on_turntable(cls, radius: float, angle: float = 0.0, reflectivity: float = 1.0):
        return cls(reflectivity=reflectivity, radius=radius, angle=angle)

    @classmethod
    def free(cls, range0: float, velocity: float = 0.0, reflectivity: float = 1.0):
        return cls(reflectivity=reflectivity, range0=range0, velocity=velocity)

    @property
    def is_free(self) -> bool:
        return self.range0 is not None


@dataclass(frozen=True)
class TurntableScene:
    """Scatterers on a turntable (free-moving scatterers may be mixed in).

    ``rotation_period = inf`` gives a stationary turntable.
    """

    antenna_to_center: float = 1.32
    rotation_period: float = 24.56
    scatterers: tuple = ()
    far_field: bool = False

    def __post_init__(self):
        check_positive(self.antenna_to_center, "antenna_to_center")
        check_positive(self.rotation_period, "rotation_period", allow_inf=True)
        object.__setattr__(self, "scatterers", tuple(self.scatterers))
        for s in self.scatterers:
            if not s.is_free and s.radius >= self.antenna_to_center:
                raise ValueError("turntable scatterer radius must be smaller than L")

    @property
    def omega(self) -> float:
        """Rotation rate in rad/s."""
        return 0.0 if math.isinf(self.rotation_period) else 2.0 * math.pi / self.rotation_period


@dataclass(frozen=True)
class EchoConfig:
    """Noise and amplitude settings for echo synthesis.

    ``amplitude_scale`` multiplies the transmit amplitudes ``(E_1, E_2)`` to
    give the received ``(E'_1, E'_2)``.
    """

    snr: float = math.inf
    rng_seed: int = 0
    amplitude_scale: tuple = (1.0, 1.0)


def radial_state(scene: TurntableScene, s: PointScatterer, t):
    """Range ``R(t)`` and radial velocity ``dR/dt`` of one scatterer.

    Exact 2-D Euclidean range unless the scene requests the far-field
    approximation ``R = L + r cos(phi)``.
    """
    t = np.asarray(t, dtype=float)
    if s.is_free:
        r_t = s.range0 + s.velocity * t
        v_t = np.full_like(r_t, s.velocity)
    else:
        L, r, w = scene.antenna_to_center, s.radius, scene.omega
        phi = s.angle + w * t
        if scene.far_field:
            r_t = L + r * np.cos(phi)
            v_t = -r * w * np.sin(phi)
        else:
            x = L + r * np.cos(phi)
            y = r * np.sin(phi)
            r_t = np.hypot(x, y)
            v_t = -r * w * L * np.sin(phi) / r_t
    if r_t.ndim == 0:
        return float(r_t), float(v_t)
    return r_t, v_t


def gaussian_noise(seed: int, start_index: int, count: int, stream: int = 0) -> np.ndarray:
    """Unit-variance white noise for global sample indices ``[start_index, start_index + count)``.

    Noise is drawn in fixed blocks keyed by ``(seed, stream, block index)``, so
    any partition of an index range reproduces the same samples bit for bit.
    """
    if count <= 0:
        return np.zeros(0)
    first = start_index // NOISE_BLOCK
    last = (start_index + count - 1) // NOISE_BLOCK
    chunks = []
    for b in range(first, last + 1):
        ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), b + (1 << 40)))
        chunks.append(np.random.Generator(np.random.Philox(ss)).standard_normal(NOISE_BLOCK))
    block = np.concatenate(chunks)
    offset = start_index - first * NOISE_BLOCK
    return block[offset : offset + count]


def noise_sigma(signal_power: float, snr_db: float) -> float:
    if math.isinf(snr_db):
        return 0.0
    return math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))


def nominal_echo_power(tx: CompositeTxParams, scene: TurntableScene, cfg: EchoConfig, propagation_loss: bool = False) -> float:
    """Mean echo power assuming incoherent scatterers, used to set the noise level."""
    e1 = tx.lfm_amplitude * cfg.amplitude_scale[0]
    e2 = tx.cw_amplitude * cfg.amplitude_scale[1]
    per_unit = 0.5 * e1**2 * tx.lfm.duty + 0.5 * e2**2
    total = 0.0
    for s in scene.scatterers:
        gain = s.reflectivity
        if propagation_loss:
            gain /= radial_state(scene, s, 0.0)[0] ** 2
        total += gain**2
    return per_unit * total


def _delay(scene, s, t, period, linearize):
    if linearize and not s.is_free:
        t_p = np.floor(t / period) * period
        r_p, v_p = radial_state(scene, s, t_p)
        return 2.0 * (r_p + v_p * (t - t_p)) / C
    return 2.0 * radial_state(scene, s, t)[0] / C


def synthesize_echo(
    tx: CompositeTxParams,
    scene: TurntableScene,
    cfg: EchoConfig,
    sample_rate: float,
    window,
    propagation_loss: bool = False,
    linearize: bool = True,
) -> SampledSignal:
    """Received RF echo: delayed, scaled copies of the transmit signal plus noise.

    Samples sit on the absolute grid ``n / sample_rate``; ``window`` selects
    ``n`` in ``[round(t0*fs), round(t1*fs))``.  Turntable delays are
    linearized per pulse unless ``linearize`` is false.
    """
    if not scene.scatterers:
        raise ValueError("scene has no scatterers")
    check_nyquist(sample_rate, tx.max_frequency, "the echo")
    t0, t1 = window
    n0 = int(round(t0 * sample_rate))
    n = int(round(t1 * sample_rate)) - n0
    if n < 1:
        raise ValueError("echo window contains no samples")
    t = (n0 + np.arange(n)) / sample_rate
    e1 = tx.lfm_amplitude * cfg.amplitude_scale[0]
    e2 = tx.cw_amplitude * cfg.amplitude_scale[1]
    f_lo = tx.cw.frequency

    out = np.zeros(n)
    for s in scene.scatterers:
        gain = s.reflectivity
        if propagation_loss:
            gain /= radial_state(scene, s, 0.0)[0] ** 2
        if gain == 0:
            continue
        td = t - _delay(scene, s, t, tx.lfm.period, linearize)
        if e1:
            out += gain * e1 * chirp_component(tx.lfm, f_lo, td)
        if e2:
            out += gain * e2 * tone_component(f_lo, td)

    sigma = noise_sigma(nominal_echo_power(tx, scene, cfg, propagation_loss), cfg.snr)
    if sigma:
        out += sigma * gaussian_noise(cfg.rng_seed, n0, n, stream=0)
    start = n0 / sample_rate
    return SampledSignal(sample_rate, start, out)
