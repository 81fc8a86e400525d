"""Scenario runner: synthesis, de-chirp, tracking or imaging, and file output.

Every run writes its products plus ``manifest.json`` into one directory.
Captures are processed concurrently up to ``jobs`` workers; results are
gathered in capture order and written by the calling thread, so the output
bytes do not depend on ``jobs``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as fio
from .config import ScenarioConfig, resolved_text
from .estimator import (
    assign_directions,
    compute_spectrum,
    estimate_from_spectrum,
)
from .isar import IsarImage, crossrange_truth, form_image, image_peaks, rearrange_slow_time
from .receiver import CaptureSpec, DechirpCapture, dechirp_analytic, dhpf
from .scene import radial_state
from .waveform import CompositeTxParams, LfmParams, CwParams, measure_transmit_band, synthesize_transmit, cell_power_spectrum

LFM_SPECTRUM_CELL = 1e3


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@dataclass
class RunResult:
    out_dir: Path
    mode: str
    outputs: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)


# ---------------------------------------------------------------- helpers


def _capture(cfg: ScenarioConfig, start: float, seed: int) -> DechirpCapture:
    c = cfg.values["capture"]
    w = cfg.values["waveform"]
    amplitudes = (w["cw_amplitude"] * c["cw_gain"], w["lfm_amplitude"] * c["lfm_gain"])
    return dechirp_analytic(
        cfg.scene(),
        cfg.lfm(),
        cfg.cw(),
        CaptureSpec(c["sample_rate"], c["duration"], start),
        amplitudes=amplitudes,
        noise=cfg.echo(seed),
        propagation_loss=cfg.values["scene"]["propagation_loss"],
    )


def reference_scatterer(cfg: ScenarioConfig) -> int:
    """Index of the strongest scatterer (first on ties), used as track ground truth."""
    refl = [s.reflectivity for s in cfg.scene().scatterers]
    return int(np.argmax(refl))


def _ordered_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (ValueError, ArithmeticError) as exc:
        raise StageError(name, exc) from exc


class _Writer:
    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.outputs: dict[str, str] = {}

    def write(self, name: str, data):
        raw = data.encode() if isinstance(data, str) else bytes(data)
        path = self.out_dir / name
        with open(path, "wb") as fh:
            fh.write(raw)
        self.outputs[name] = hashlib.sha256(raw).hexdigest()
        return path


def write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".manifest-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- modes


def _track(cfg: ScenarioConfig, w: _Writer, jobs: int, seed: int) -> dict:
    lfm, cw = cfg.lfm(), cfg.cw()
    est_cfg = cfg.values["estimator"]
    cutoff = cfg.values["filter"]["dhpf_cutoff"]
    scene = cfg.scene()
    ref = scene.scatterers[reference_scatterer(cfg)]

    def one(start):
        cap = _stage("de-chirp", _capture, cfg, start, seed)
        x = cap.samples - cap.samples.mean()
        spec = compute_spectrum(x, cap.sample_rate, est_cfg["window"])
        est = estimate_from_spectrum(
            spec,
            cap.center_time,
            lfm,
            cw,
            (0.0, est_cfg["doppler_band_max"]),
            (cutoff, 0.5 * cap.sample_rate),
            est_cfg["delay_offset"],
            est_cfg["doppler_threshold_db"],
        )
        return est, _spectrum_rows(spec, est_cfg["doppler_band_max"], cutoff)

    results = _ordered_map(one, cfg.capture_starts(), jobs)
    estimates = assign_directions([r[0] for r in results], est_cfg["direction_threshold"])
    w.write("track.csv", fio.track_csv(estimates))

    truth_rows, range_err, speed_err = [], [], []
    for e in estimates:
        r, v = radial_state(scene, ref, e.timestamp)
        truth_rows.append((e.timestamp, r, v, abs(v)))
        range_err.append(abs(e.range - r))
        speed_err.append(abs(e.speed - abs(v)))
    w.write(
        "truth.csv",
        fio.table_csv(("timestamp_s", "range_m", "radial_velocity_mps", "speed_mps"), truth_rows),
    )
    rows = [(str(i), band, f, db) for i, (_, spec_rows) in enumerate(results) for band, f, db in spec_rows]
    w.write("spectra.csv", fio.table_csv(("capture", "band", "frequency_hz", "magnitude_db"), rows))
    return {
        "captures": len(estimates),
        "max_range_error_m": max(range_err, default=math.nan),
        "max_speed_error_mps": max(speed_err, default=math.nan),
        "estimates": estimates,
        "truth": truth_rows,
    }


def _spectrum_rows(spec, doppler_max: float, lfm_min: float):
    tiny = 1e-300
    rows = []
    f, mag = spec.frequencies, spec.magnitudes
    sel = (f > 0) & (f <= doppler_max)
    rows += [("doppler", fi, 20 * math.log10(max(m, tiny))) for fi, m in zip(f[sel], mag[sel])]
    # LFM band: maximum magnitude within each 1 kHz cell
    per = max(1, int(round(LFM_SPECTRUM_CELL / spec.bin_spacing)))
    i0 = int(np.searchsorted(f, lfm_min))
    n = (mag.size - i0) // per
    if n > 0:
        pooled = mag[i0 : i0 + n * per].reshape(n, per).max(axis=1)
        starts = f[i0 : i0 + n * per : per]
        rows += [("lfm", fi, 20 * math.log10(max(m, tiny))) for fi, m in zip(starts, pooled)]
    return rows


def image_truth(cfg: ScenarioConfig, t: float):
    """``(target, scatterer index, range, cross-range)`` of every scatterer at time ``t``."""
    scene = cfg.scene()
    rows = []
    for name, idx in cfg.target_groups():
        for i in idx:
            s = scene.scatterers[i]
            rows.append((name, i, radial_state(scene, s, t)[0], crossrange_truth(scene, s, t)))
    return rows


def match_targets(img: IsarImage, truth, threshold_db: float):
    """For each target, the strongest image peak within half a cell of one of its scatterers.

    Returns ``{target: (range, crossrange, dB) or None}``; a peak is matched
    to at most one target.
    """
    peaks = image_peaks(img, threshold_db)
    half_r, half_x = 0.5 * img.range_spacing, 0.5 * img.crossrange_spacing
    used, out = set(), {}
    for name in dict.fromkeys(t[0] for t in truth):
        pts = [(r, x) for t, _, r, x in truth if t == name]
        out[name] = None
        for k, p in enumerate(peaks):
            if k in used:
                continue
            if any(abs(p[0] - r) <= half_r and abs(p[1] - x) <= half_x for r, x in pts):
                out[name] = p
                used.add(k)
                break
    return out


def _image(cfg: ScenarioConfig, w: _Writer, jobs: int, seed: int) -> dict:
    lfm, cw = cfg.lfm(), cfg.cw()
    scene = cfg.scene()
    if scene.omega == 0:
        raise StageError("imaging", ValueError("image mode needs a rotating turntable"))
    filt = cfg.filter_config()
    icfg = cfg.imaging_config()
    use_dhpf = cfg.values["filter"]["enabled"]
    threshold = cfg.values["imaging"]["peak_threshold_db"]

    def one(start):
        cap = _stage("de-chirp", _capture, cfg, start, seed)
        if use_dhpf:
            cap = _stage("dhpf", dhpf, cap, filt)
        m = _stage("rearrange", rearrange_slow_time, cap)
        return _stage("imaging", form_image, m, lfm, cw, icfg, scene.omega)

    images = _ordered_map(one, cfg.capture_starts(), jobs)
    peak_rows, truth_rows, frames = [], [], []
    for k, img in enumerate(images):
        w.write(f"image_{k:03d}.pgm", fio.pgm_bytes(img))
        w.write(f"image_{k:03d}.csv", fio.image_csv(img))
        truth = image_truth(cfg, img.center_time)
        truth_rows += [(str(k), name, str(i), r, x) for name, i, r, x in truth]
        peaks = image_peaks(img, threshold)
        peak_rows += [(str(k), r, x, db) for r, x, db in peaks]
        matched = match_targets(img, truth, threshold)
        frames.append(
            {
                "center_time": img.center_time,
                "peaks": len(peaks),
                "matched_targets": sum(v is not None for v in matched.values()),
                "targets": len(matched),
                "matches": matched,
            }
        )
    w.write("peaks.csv", fio.table_csv(("frame", "range_m", "crossrange_m", "level_db"), peak_rows))
    w.write("truth.csv", fio.table_csv(("frame", "target", "scatterer", "range_m", "crossrange_m"), truth_rows))
    return {"frames": frames, "images": images}


def _simulate(cfg: ScenarioConfig, w: _Writer, jobs: int, seed: int) -> dict:
    caps = _ordered_map(lambda s: _stage("de-chirp", _capture, cfg, s, seed), cfg.capture_starts(), jobs)
    for k, cap in enumerate(caps):
        path = w.out_dir / f"capture_{k:03d}.bin"
        fio.write_capture(path, cap)
        w.outputs[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return {"captures": len(caps)}


def transmit_measurement(tx: CompositeTxParams, sample_rate: float, duration: float, resolution: float):
    sig = synthesize_transmit(tx, sample_rate, duration)
    return sig, measure_transmit_band(sig, resolution)


def _tx_rows(sig, resolution, point=None):
    edges, power = cell_power_spectrum(sig, resolution)
    db = 10.0 * np.log10(np.maximum(power, 1e-300))
    prefix = () if point is None else (str(point),)
    return [prefix + (f, d) for f, d in zip(edges, db)]


def _tx_spectrum(cfg: ScenarioConfig, w: _Writer, jobs: int, seed: int) -> dict:
    t = cfg.values["tx"]
    sig, band = _stage("synthesis", transmit_measurement, cfg.tx(), t["sample_rate"], t["duration"], t["resolution"])
    w.write("spectrum.csv", fio.table_csv(("frequency_hz", "power_db"), _tx_rows(sig, t["resolution"])))
    row = (band.band_low, band.band_high, band.bandwidth, band.tone_frequency, band.resolution)
    w.write(
        "tx_summary.csv",
        fio.table_csv(("band_low_hz", "band_high_hz", "bandwidth_hz", "tone_hz", "resolution_hz"), [row]),
    )
    return {"band": band}


def _sweep(cfg: ScenarioConfig, w: _Writer, jobs: int, seed: int) -> dict:
    t = cfg.values["tx"]
    axis = cfg.values["sweep"]["axis"]
    values = cfg.sweep_values()
    if not values:
        return {"points": 0, "bands": [], "statuses": []}

    def one(value):
        try:
            if axis == "lo_frequency":
                tx = CompositeTxParams(cfg.lfm(), CwParams(value), *_amps(cfg))
            else:
                base = cfg.lfm()
                tx = CompositeTxParams(
                    LfmParams(base.center_frequency, value, base.period, base.duty), cfg.cw(), *_amps(cfg)
                )
            sig, band = transmit_measurement(tx, t["sample_rate"], t["duration"], t["resolution"])
            return band, _tx_rows(sig, t["resolution"]), "ok"
        except ValueError as exc:
            return None, [], f"error: {exc}"

    results = _ordered_map(one, values, jobs)
    spectra, summary = [], []
    for k, (value, (band, rows, status)) in enumerate(zip(values, results)):
        spectra += [(str(k), value) + r for r in rows]
        if band is None:
            summary.append((str(k), axis, value, math.nan, math.nan, math.nan, math.nan, status))
        else:
            summary.append(
                (str(k), axis, value, band.band_low, band.band_high, band.bandwidth, band.tone_frequency, status)
            )
    w.write("sweep_spectra.csv", fio.table_csv(("point", "value", "frequency_hz", "power_db"), spectra))
    w.write(
        "sweep_summary.csv",
        fio.table_csv(
            ("point", "axis", "value", "band_low_hz", "band_high_hz", "bandwidth_hz", "tone_hz", "status"), summary
        ),
    )
    return {"points": len(values), "bands": [r[0] for r in results], "statuses": [r[2] for r in results]}


def _amps(cfg):
    wv = cfg.values["waveform"]
    return wv["lfm_amplitude"], wv["cw_amplitude"]


MODE_RUNNERS = {
    "track": _track,
    "image": _image,
    "simulate": _simulate,
    "tx-spectrum": _tx_spectrum,
    "sweep": _sweep,
}


def _summary_text(mode: str, summary: dict) -> str:
    lines = [f"mode: {mode}"]
    if mode == "track":
        lines.append(f"captures: {summary['captures']}")
        lines.append(f"max range error: {summary['max_range_error_m'] * 100:.3f} cm")
        lines.append(f"max speed error: {summary['max_speed_error_mps'] * 100:.3f} cm/s")
    elif mode == "image":
        for k, fr in enumerate(summary["frames"]):
            lines.append(
                f"frame {k}: t={fr['center_time']:.3f} s, {fr['peaks']} peaks, "
                f"{fr['matched_targets']}/{fr['targets']} targets located"
            )
    elif mode == "tx-spectrum":
        b = summary["band"]
        lines.append(f"band: {b.band_low / 1e9:.3f}-{b.band_high / 1e9:.3f} GHz, tone {b.tone_frequency / 1e9:.4f} GHz")
    elif mode == "sweep":
        lines.append(f"points: {summary['points']}")
        for band, status in zip(summary["bands"], summary["statuses"]):
            if band is None:
                lines.append(status)
            else:
                lines.append(f"band {band.band_low / 1e9:.3f}-{band.band_high / 1e9:.3f} GHz, tone {band.tone_frequency / 1e9:.4f} GHz")
    else:
        lines.append(f"captures: {summary['captures']}")
    return "\n".join(lines) + "\n"


def run_scenario(
    cfg: ScenarioConfig,
    out_dir,
    jobs: int = 1,
    mode: str | None = None,
    seed: int | None = None,
) -> RunResult:
    """Run ``cfg`` (optionally forcing ``mode`` and ``seed``) and write outputs to ``out_dir``."""
    overrides = {}
    if mode is not None:
        overrides["mode"] = mode
    if seed is not None:
        overrides["seed"] = int(seed)
    if overrides:
        cfg = cfg.with_overrides(run=overrides)
    mode = cfg.values["run"]["mode"]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    w = _Writer(out)
    t0 = time.perf_counter()
    summary = MODE_RUNNERS[mode](cfg, w, max(1, int(jobs)), cfg.seed)
    elapsed = time.perf_counter() - t0
    w.write("summary.txt", _summary_text(mode, summary))

    manifest = {
        "toolkit": "photoradar",
        "version": __version__,
        "mode": mode,
        "seed": cfg.seed,
        "jobs": int(jobs),
        "config": resolved_text(cfg),
        "outputs": dict(sorted(w.outputs.items())),
        **({"points": summary["points"]} if mode == "sweep" else {}),
        "timings_s": {"total": round(elapsed, 6)},
    }
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return RunResult(out, mode, dict(w.outputs), manifest, summary)
