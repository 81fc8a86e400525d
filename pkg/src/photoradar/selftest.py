"""Acceptance criteria, runnable from the CLI (``photoradar selftest``) and pytest.

Each ``criterion_N`` function returns a :class:`CriterionResult`; tolerance
constants sit next to the code that applies them.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import load_preset
from .estimator import dechirp_frequency_model, estimate_capture, track_scene
from .isar import (
    ImagingConfig,
    crossrange_truth,
    form_image,
    image_peaks,
    peak_widths,
    rearrange_slow_time,
    theoretical_resolution,
    valley_depth,
)
from .photonics import (
    ModulatorConfig,
    detected_coefficients,
    modulate_dpol_dpmzm,
    pbs_split,
    photodetect,
    transmit_band_filter,
)
from .pipeline import run_scenario
from .receiver import CaptureSpec, dechirp_analytic, dhpf
from .scene import EchoConfig, PointScatterer, TurntableScene, radial_state
from .waveform import (
    C,
    CompositeTxParams,
    CwParams,
    LfmParams,
    chirp_gate,
    measure_transmit_band,
    pulse_local_time,
    synthesize_transmit,
)

RANGE_HALF_BIN = 0.01875
DOPPLER_HALF_BIN = 0.0047
REFERENCE_OMEGA = 0.256


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    elapsed: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.title}: {self.detail} ({self.elapsed:.1f} s)"


class _Context:
    def __init__(self, jobs: int = 1, seed: int | None = None, workdir=None):
        self.jobs = jobs
        self.seed = seed
        self._tmp = None
        if workdir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="photoradar-selftest-")
            workdir = self._tmp.name
        self.workdir = Path(workdir)
        self._runs = {}

    def run(self, preset: str, jobs: int | None = None, tag: str = ""):
        jobs = self.jobs if jobs is None else jobs
        key = (preset, jobs, tag)
        if key not in self._runs:
            out = self.workdir / f"{preset}-j{jobs}{tag}"
            self._runs[key] = run_scenario(load_preset(preset), out, jobs=jobs, seed=self.seed)
        return self._runs[key]

    def close(self):
        if self._tmp is not None:
            self._tmp.cleanup()


def _timed(number, title, fn, ctx):
    t0 = time.perf_counter()
    try:
        passed, detail = fn(ctx)
    except Exception as exc:  # a crash is a failed criterion, reported not raised
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    return CriterionResult(number, title, bool(passed), detail, time.perf_counter() - t0)


# ------------------------------------------------------------------ 1


def transmit_synthesis(ctx):
    t0 = time.perf_counter()
    tx = CompositeTxParams()
    sig = synthesize_transmit(tx, 40e9, 100e-6)
    band = measure_transmit_band(sig, 10e6)
    elapsed = time.perf_counter() - t0
    lo_err = abs(band.band_low - 8.5e9) / band.resolution
    hi_err = abs(band.band_high - 12.5e9) / band.resolution
    tone_err = abs(band.tone_frequency - 8e9) / band.tone_bin
    ok = lo_err <= 1 and hi_err <= 1 and tone_err <= 1 and elapsed < 10
    return ok, (
        f"band {band.band_low / 1e9:.3f}-{band.band_high / 1e9:.3f} GHz "
        f"(edge errors {lo_err:.0f}, {hi_err:.0f} cells), tone {band.tone_frequency / 1e9:.6f} GHz "
        f"({tone_err:.0f} bins), {elapsed:.2f} s"
    )


# ------------------------------------------------------------------ 2


def photonic_correlation(period=100e-9, pulses=10, sample_rate=40e9):
    """Normalized zero-lag correlation of the filtered photonic output with the ideal transmit signal."""
    lfm, cw = LfmParams(period=period), CwParams()
    cfg = ModulatorConfig(0.3, 0.3)
    e_t, _ = pbs_split(modulate_dpol_dpmzm(lfm, cw, cfg, sample_rate, pulses * period))
    out = transmit_band_filter(photodetect(e_t, remove_dc=True), (5.85e9, 14.5e9)).samples
    coef = detected_coefficients(cfg)
    ideal = synthesize_transmit(
        CompositeTxParams(lfm, cw, coef["upconverted"], coef["tone"]), sample_rate, pulses * period
    ).samples
    return float(np.dot(out, ideal) / (np.linalg.norm(out) * np.linalg.norm(ideal)))


def demodulated_coefficients(m1=0.3, m2=0.3, period=100e-6, sample_rate=40e9):
    """Amplitudes and phases of the three detected terms, by complex demodulation."""
    lfm, cw = LfmParams(period=period), CwParams()
    e_t, _ = pbs_split(modulate_dpol_dpmzm(lfm, cw, ModulatorConfig(m1, m2), sample_rate, period))
    det = photodetect(e_t, remove_dc=True)
    t = det.times
    tau = pulse_local_time(lfm, t)
    gate = chirp_gate(lfm, tau)
    ph_if = 2 * np.pi * lfm.start_frequency * tau + np.pi * lfm.chirp_rate * tau**2
    lo = 2 * np.pi * cw.frequency * t
    terms = {
        "upconverted": np.mean((det.samples * np.exp(-1j * (lo + ph_if)))[gate]),
        "baseband": np.mean((det.samples * np.exp(-1j * ph_if))[gate]),
        "tone": np.mean(det.samples * np.exp(-1j * lo)),
    }
    return {k: (2 * abs(v), float(np.angle(v))) for k, v in terms.items()}


def photonic_equivalence(ctx):
    corr = photonic_correlation()
    meas = demodulated_coefficients()
    expect = detected_coefficients(ModulatorConfig(0.3, 0.3))
    ratios = [
        (meas["upconverted"][0] / meas["tone"][0]) / (expect["upconverted"] / expect["tone"]) - 1,
        (meas["baseband"][0] / meas["tone"][0]) / (expect["baseband"] / expect["tone"]) - 1,
    ]
    worst = max(abs(r) for r in ratios)
    return corr >= 0.999 and worst <= 5e-3, f"correlation {corr:.5f}, worst coefficient-ratio error {worst:.2e}"


# ------------------------------------------------------------------ 3


def measured_sideband_suppression(suppression_db=25.89, sample_rate=40e9, duration=1e-6):
    cw = CwParams()
    pair = modulate_dpol_dpmzm(
        LfmParams(period=100e-9), cw, ModulatorConfig(unwanted_sideband_suppression=suppression_db), sample_rate, duration
    )
    spec = np.fft.fft(pair.y.samples)
    f = np.fft.fftfreq(spec.size, 1 / sample_rate)
    wanted = abs(spec[np.argmin(abs(f + cw.frequency))])
    unwanted = abs(spec[np.argmin(abs(f - cw.frequency))])
    return 20 * math.log10(wanted / unwanted)


def sideband_suppression(ctx):
    db = measured_sideband_suppression()
    return abs(db - 25.89) <= 0.1, f"measured {db:.4f} dB"


# ------------------------------------------------------------------ 4


def static_range_trials(n=20, snr_db=None, seed=2024, duration=0.5):
    rng = np.random.default_rng(seed)
    lfm, cw = LfmParams(), CwParams()
    errors = []
    for i, r0 in enumerate(rng.uniform(0.2, 3.0, n)):
        scene = TurntableScene(1.0, math.inf, (PointScatterer.free(r0),))
        noise = None if snr_db is None else EchoConfig(snr=snr_db, rng_seed=seed + i)
        cap = dechirp_analytic(scene, lfm, cw, CaptureSpec(4e6, duration), noise=noise)
        errors.append(estimate_capture(cap, lfm, cw).range - r0)
    return np.array(errors)


def static_range(ctx):
    t0 = time.perf_counter()
    clean = static_range_trials()
    noisy = static_range_trials(snr_db=10.0)
    elapsed = time.perf_counter() - t0
    frac = float(np.mean(np.abs(noisy) <= 2 * RANGE_HALF_BIN))
    ok = np.all(np.abs(clean) <= RANGE_HALF_BIN) and frac >= 0.95 and elapsed < 60
    return ok, (
        f"noiseless max |err| {np.max(np.abs(clean)) * 100:.2f} cm, "
        f"10 dB SNR within 3.75 cm: {frac * 100:.0f}%, {elapsed:.1f} s"
    )


# ------------------------------------------------------------------ 5


def constant_velocity_tracks(speeds=(0.05, 0.115, 0.3), captures=3, duration=2.0):
    lfm, cw = LfmParams(), CwParams()
    rows = []
    for speed in speeds:
        for sign in (1, -1):
            v = sign * speed
            r0 = 0.5 if v > 0 else 2.5
            scene = TurntableScene(1.0, math.inf, (PointScatterer.free(r0, v),))
            caps = [dechirp_analytic(scene, lfm, cw, CaptureSpec(4e6, duration, i * duration)) for i in range(captures)]
            for e in track_scene(caps, lfm, cw):
                rows.append((v, e))
    return rows


def speed_accuracy(ctx):
    rows = constant_velocity_tracks()
    worst = max(abs(e.speed - abs(v)) for v, e in rows)
    determinate = [(v, e) for v, e in rows if e.direction.sign != 0]
    correct = sum(e.direction.sign == np.sign(v) for v, e in determinate)
    ok = worst <= DOPPLER_HALF_BIN and correct == len(determinate) and determinate
    return ok, (
        f"max |speed err| {worst * 100:.3f} cm/s, direction {correct}/{len(determinate)} determinate samples correct"
    )


# ------------------------------------------------------------------ 6


def turntable_replay(ctx):
    t0 = time.perf_counter()
    parts, ok = [], True
    for preset in ("scenario_34a", "scenario_34b"):
        res = ctx.run(preset)
        s = res.summary
        est = s["estimates"]
        first_last = abs(est[0].range - est[-1].range)
        good = (
            s["captures"] == 17
            and s["max_range_error_m"] <= 0.059
            and s["max_speed_error_mps"] <= 0.028
            and first_last <= 2 * RANGE_HALF_BIN
        )
        ok &= good
        parts.append(
            f"{preset} range {s['max_range_error_m'] * 100:.2f} cm, speed {s['max_speed_error_mps'] * 100:.2f} cm/s, "
            f"first/last {first_last * 100:.2f} cm"
        )
    elapsed = time.perf_counter() - t0
    return ok and elapsed < 300, "; ".join(parts) + f", {elapsed:.0f} s"


# ------------------------------------------------------------------ 7


def approximation_deviation(v=0.115, r0=1.77):
    lfm, cw = LfmParams(), CwParams()
    tau = np.linspace(2 * r0 / C, lfm.pulse_width, 1001)
    exact, approx = dechirp_frequency_model(lfm, cw, r0, v, tau)
    return float(np.max(np.abs(exact - approx) / approx))


def dechirp_approximation(ctx):
    rel = approximation_deviation()
    return rel < 1e-4, f"max relative deviation {rel:.2e}"


# ------------------------------------------------------------------ 8


def _image(scatterers, L=1.5, integration=2.0, crossrange=(-0.3, 0.3), zero_pad=1):
    lfm, cw = LfmParams(), CwParams()
    scene = TurntableScene(L, 2 * math.pi / REFERENCE_OMEGA, tuple(scatterers))
    cap = dhpf(dechirp_analytic(scene, lfm, cw, CaptureSpec(4e6, integration, -0.5 * integration)))
    cfg = ImagingConfig(
        range_limits=(L - 0.4, L + 0.4),
        crossrange_limits=crossrange,
        range_zero_pad=zero_pad,
        doppler_zero_pad=zero_pad,
        floor_db=-60.0,
    )
    img = form_image(rearrange_slow_time(cap), lfm, cw, cfg, scene.omega)
    truth = [(radial_state(scene, s, img.center_time)[0], crossrange_truth(scene, s, img.center_time)) for s in scatterers]
    return img, truth


def _pair_valley(img, truth):
    """Valley between the two strongest peaks, provided each lies within half a cell of a truth point."""
    peaks = image_peaks(img, -20.0)[:2]
    if len(peaks) < 2:
        return -math.inf
    half_r, half_x = 0.5 * img.range_spacing, 0.5 * img.crossrange_spacing
    for r, x in truth:
        if not any(abs(p[0] - r) <= half_r and abs(p[1] - x) <= half_x for p in peaks):
            return -math.inf
    return valley_depth(img, peaks[0][:2], peaks[1][:2])


def isar_resolution(ctx, integration=2.0):
    lfm, cw = LfmParams(), CwParams()
    r_l, r_c = theoretical_resolution(lfm, cw, 2.0, REFERENCE_OMEGA)
    printed = round(r_l * 100, 2) == 3.75 and round(r_c * 100, 2) == 2.79
    r_c_run = theoretical_resolution(lfm, cw, integration, REFERENCE_OMEGA)[1]

    half_range = 0.5 * 2 * r_l
    rng_img, rng_truth = _image(
        [PointScatterer.on_turntable(half_range, 0.0), PointScatterer.on_turntable(half_range, math.pi)],
        integration=integration,
    )
    half_cross = 0.5 * 2 * r_c_run
    xr_img, xr_truth = _image(
        [PointScatterer.on_turntable(half_cross, math.pi / 2), PointScatterer.on_turntable(half_cross, -math.pi / 2)],
        integration=integration,
        crossrange=(-max(0.3, 4 * r_c_run), max(0.3, 4 * r_c_run)),
    )
    v_range, v_cross = _pair_valley(rng_img, rng_truth), _pair_valley(xr_img, xr_truth)

    single, _ = _image([PointScatterer.on_turntable(0.0, 0.0)], integration=integration, zero_pad=8,
                       crossrange=(-max(0.3, 4 * r_c_run), max(0.3, 4 * r_c_run)))
    w_r, w_c = peak_widths(single)
    ok = printed and v_range >= 3 and v_cross >= 3 and w_r <= 1.6 * r_l and w_c <= 1.6 * r_c_run
    return ok, (
        f"R_L {r_l * 100:.4f} cm, R_c {r_c * 100:.4f} cm; valleys {v_range:.1f} dB (range), "
        f"{v_cross:.1f} dB (cross-range); -3 dB widths {w_r / r_l:.2f} R_L, {w_c / r_c_run:.2f} R_c"
    )


# ------------------------------------------------------------------ 9


def four_cluster_image(ctx):
    res = ctx.run("scenario_35a")
    frame = res.summary["frames"][0]
    located = frame["matched_targets"]
    return located >= 4, f"{located}/{frame['targets']} targets located within half a cell, {frame['peaks']} peaks above -20 dB"


# ------------------------------------------------------------------ 10

SWEEP_EXPECT = {
    "sweep_lo": [(6.5e9, 10.5e9), (8.5e9, 12.5e9), (10.5e9, 14.5e9)],
    "sweep_bw": [(10.0e9, 11.0e9), (9.5e9, 11.5e9), (8.5e9, 12.5e9)],
}


def sweep_fidelity(ctx):
    ok, parts = True, []
    for preset, expect in SWEEP_EXPECT.items():
        bands = ctx.run(preset).summary["bands"]
        for band, (lo, hi) in zip(bands, expect):
            cell = band.resolution
            good = (
                abs(band.band_low - lo) <= cell
                and abs(band.band_high - hi) <= cell
                and abs(band.bandwidth - (hi - lo)) <= cell
            )
            ok &= good
            parts.append(f"{band.band_low / 1e9:.2f}-{band.band_high / 1e9:.2f}")
        ok &= len(bands) == len(expect)
    return ok, "bands " + ", ".join(parts) + " GHz"


# ------------------------------------------------------------------ 11

DETERMINISM_PRESETS = ("quick_track", "quick_image", "sweep_lo", "reference_tx")


def determinism(ctx):
    mismatches = []
    for preset in DETERMINISM_PRESETS:
        a = ctx.run(preset, jobs=1)
        b = ctx.run(preset, jobs=1, tag="-again")
        c = ctx.run(preset, jobs=3)
        if not (a.outputs == b.outputs == c.outputs):
            mismatches.append(preset)
    return not mismatches, (
        f"{len(DETERMINISM_PRESETS)} presets byte-identical across re-runs and --jobs 1/3"
        if not mismatches
        else "outputs differ for " + ", ".join(mismatches)
    )


CRITERIA = [
    (1, "transmit synthesis", transmit_synthesis),
    (2, "photonic-chain equivalence", photonic_equivalence),
    (3, "sideband suppression", sideband_suppression),
    (4, "static range accuracy", static_range),
    (5, "speed accuracy and direction", speed_accuracy),
    (6, "turntable replay", turntable_replay),
    (7, "de-chirp frequency approximation", dechirp_approximation),
    (8, "ISAR resolution", isar_resolution),
    (9, "four-cluster image", four_cluster_image),
    (10, "sweep fidelity", sweep_fidelity),
    (11, "determinism", determinism),
]


def run_criterion(number: int, ctx: _Context | None = None) -> CriterionResult:
    own = ctx is None
    ctx = ctx or _Context()
    try:
        for n, title, fn in CRITERIA:
            if n == number:
                return _timed(n, title, fn, ctx)
        raise ValueError(f"no acceptance criterion {number}")
    finally:
        if own:
            ctx.close()


def run_all(only=None, jobs: int = 1, seed: int | None = None, workdir=None) -> list[CriterionResult]:
    ctx = _Context(jobs, seed, workdir)
    try:
        return [_timed(n, title, fn, ctx) for n, title, fn in CRITERIA if not only or n in only]
    finally:
        ctx.close()
