"""Scenario configuration files.

A scenario is an INI file.  Fixed sections hold scalar settings; every
``[target.NAME]`` section adds one target.  Unknown sections and keys are
rejected with the line they appear on.

Target kinds (``kind =``)

``point``
    Turntable scatterer at ``x``, ``y`` (m, turntable frame at t = 0).
``cuboid``
    Four scatterers at the horizontal corners of a ``size_x`` by ``size_y``
    box centred on ``x``, ``y``.
``free``
    Scatterer in linear motion, ``range0`` (m) and ``velocity`` (m/s).

Numbers may be written as fractions, e.g. ``spacing_periods = 17/16``.
Capture ``k`` starts at ``start_time + k * spacing_periods * rotation_period``
(or ``k * spacing_periods * duration`` on a stationary turntable), rounded
to the nearest pulse start.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .estimator import DEFAULT_DIRECTION_THRESHOLD
from .isar import ImagingConfig
from .receiver import FilterConfig
from .scene import EchoConfig, PointScatterer, TurntableScene
from .waveform import CompositeTxParams, CwParams, LfmParams

MODES = ("track", "image", "simulate", "tx-spectrum", "sweep")

# section -> key -> (type, default)
SCHEMA = {
    "run": {
        "mode": (str, "track"),
        "seed": (int, 0),
        "description": (str, ""),
    },
    "waveform": {
        "center_frequency": (float, 2.5e9),
        "bandwidth": (float, 4e9),
        "period": (float, 100e-6),
        "duty": (float, 0.8),
        "lo_frequency": (float, 8e9),
        "lfm_amplitude": (float, 1.0),
        "cw_amplitude": (float, 1.0),
    },
    "scene": {
        "antenna_to_center": (float, 1.32),
        "rotation_period": (float, 24.56),
        "far_field": (bool, False),
        "propagation_loss": (bool, False),
    },
    "capture": {
        "sample_rate": (float, 4e6),
        "duration": (float, 2.0),
        "count": (int, 1),
        "start_time": (float, 0.0),
        "spacing_periods": (float, 1.0),
        "snr_db": (float, math.inf),
        "lfm_gain": (float, 1.0),
        "cw_gain": (float, 1.0),
    },
    "filter": {
        "dhpf_cutoff": (float, 1e3),
        "kind": (str, "gate"),
        "num_taps": (int, 0),
        "enabled": (bool, True),
    },
    "estimator": {
        "window": (str, "hann"),
        "doppler_band_max": (float, 100.0),
        "direction_threshold": (float, DEFAULT_DIRECTION_THRESHOLD),
        "delay_offset": (float, 0.0),
        "doppler_threshold_db": (float, 15.0),
    },
    "imaging": {
        "integration_time": (float, 0.0),
        "fast_window": (str, "boxcar"),
        "slow_window": (str, "boxcar"),
        "range_zero_pad": (int, 1),
        "doppler_zero_pad": (int, 1),
        "floor_db": (float, -40.0),
        "range_min": (float, 0.0),
        "range_max": (float, math.inf),
        "crossrange_min": (float, -0.5),
        "crossrange_max": (float, 0.5),
        "peak_threshold_db": (float, -20.0),
    },
    "tx": {
        "sample_rate": (float, 40e9),
        "duration": (float, 100e-6),
        "resolution": (float, 10e6),
    },
    "sweep": {
        "axis": (str, "lo_frequency"),
        "values": (str, ""),
    },
    "acceptance": {
        "max_range_error": (float, math.inf),
        "max_speed_error": (float, math.inf),
        "min_peaks": (int, 0),
    },
}

TARGET_KEYS = {
    "kind": (str, "point"),
    "x": (float, 0.0),
    "y": (float, 0.0),
    "size_x": (float, 0.0),
    "size_y": (float, 0.0),
    "range0": (float, 0.0),
    "velocity": (float, 0.0),
    "reflectivity": (float, 1.0),
}


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the field and line."""


@dataclass(frozen=True)
class TargetSpec:
    name: str
    kind: str
    values: dict

    def scatterers(self) -> list[PointScatterer]:
        v = self.values
        refl = v["reflectivity"]
        if self.kind == "free":
            return [PointScatterer.free(v["range0"], v["velocity"], refl)]
        if self.kind == "point":
            corners = [(v["x"], v["y"])]
        else:
            hx, hy = 0.5 * v["size_x"], 0.5 * v["size_y"]
            corners = [(v["x"] + sx * hx, v["y"] + sy * hy) for sx in (-1, 1) for sy in (-1, 1)]
        return [
            PointScatterer.on_turntable(math.hypot(x, y), math.atan2(y, x), refl) for x, y in corners
        ]


@dataclass(frozen=True)
class ScenarioConfig:
    values: dict
    targets: tuple = ()
    source: str = "<memory>"
    text: str = ""
    lines: dict = field(default_factory=dict, compare=False)

    def get(self, section: str, key: str):
        return self.values[section][key]

    # -- domain objects ------------------------------------------------
    def lfm(self) -> LfmParams:
        w = self.values["waveform"]
        return LfmParams(w["center_frequency"], w["bandwidth"], w["period"], w["duty"])

    def cw(self) -> CwParams:
        return CwParams(self.values["waveform"]["lo_frequency"])

    def tx(self) -> CompositeTxParams:
        w = self.values["waveform"]
        return CompositeTxParams(self.lfm(), self.cw(), w["lfm_amplitude"], w["cw_amplitude"])

    def scene(self) -> TurntableScene:
        s = self.values["scene"]
        scats = [p for t in self.targets for p in t.scatterers()]
        return TurntableScene(s["antenna_to_center"], s["rotation_period"], tuple(scats), s["far_field"])

    def target_groups(self) -> list[tuple[str, list[int]]]:
        """Target name and the indices of its scatterers in :meth:`scene`."""
        out, i = [], 0
        for t in self.targets:
            n = len(t.scatterers())
            out.append((t.name, list(range(i, i + n))))
            i += n
        return out

    def echo(self, seed: int | None = None) -> EchoConfig:
        c = self.values["capture"]
        return EchoConfig(c["snr_db"], self.seed if seed is None else seed, (c["lfm_gain"], c["cw_gain"]))

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]

    def filter_config(self) -> FilterConfig:
        f = self.values["filter"]
        return FilterConfig(dhpf_cutoff=f["dhpf_cutoff"], kind=f["kind"], num_taps=f["num_taps"] or None)

    def imaging_config(self) -> ImagingConfig:
        m = self.values["imaging"]
        r_lim = None
        if m["range_min"] > 0 or math.isfinite(m["range_max"]):
            r_lim = (m["range_min"], m["range_max"])
        return ImagingConfig(
            integration_time=m["integration_time"] or None,
            fast_window=m["fast_window"],
            slow_window=m["slow_window"],
            range_zero_pad=m["range_zero_pad"],
            doppler_zero_pad=m["doppler_zero_pad"],
            floor_db=m["floor_db"],
            range_limits=r_lim,
            crossrange_limits=(m["crossrange_min"], m["crossrange_max"]),
        )

    def capture_starts(self) -> list[float]:
        c = self.values["capture"]
        period = self.values["scene"]["rotation_period"]
        step = c["spacing_periods"] * period if math.isfinite(period) else c["spacing_periods"] * c["duration"]
        # Starts snap to the nearest pulse boundary so every capture holds whole pulses.
        period_t = self.values["waveform"]["period"]
        return [round((c["start_time"] + i * step) / period_t) * period_t for i in range(c["count"])]

    def sweep_values(self) -> list[float]:
        raw = self.values["sweep"]["values"]
        items = [v for v in re.split(r"[,\s]+", raw.strip()) if v]
        return [_parse_number(v, "sweep.values", self.lines.get(("sweep", "values"))) for v in items]

    def with_overrides(self, **sections) -> "ScenarioConfig":
        """Copy with ``{section: {key: value}}`` overrides applied and validated."""
        values = {s: dict(kv) for s, kv in self.values.items()}
        for section, kv in sections.items():
            for key, value in kv.items():
                if section not in values or key not in values[section]:
                    raise ConfigError(f"unknown setting {section}.{key}")
                values[section][key] = value
        cfg = replace(self, values=values, text=render(values, self.targets))
        validate(cfg)
        return cfg


def _parse_number(raw: str, where: str, line) -> float:
    text = raw.strip().lower()
    try:
        if text in ("inf", "+inf", "infinity"):
            return math.inf
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: cannot parse number {raw!r}{_at(line)}") from None


def _at(line) -> str:
    return f" (line {line})" if line else ""


def _convert(kind, raw: str, where: str, line):
    if kind is float:
        return _parse_number(raw, where, line)
    if kind is int:
        value = _parse_number(raw, where, line)
        if not value.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {raw!r}{_at(line)}")
        return int(value)
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{where}: expected true/false, got {raw!r}{_at(line)}")
    return raw.strip()


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), no)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
        out.setdefault((section, key), no)
    return out


def loads(text: str, source: str = "<memory>") -> ScenarioConfig:
    lines = _line_index(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    values = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    targets = []
    for section in parser.sections():
        line = lines.get((section, None))
        if section.startswith("target."):
            schema = TARGET_KEYS
        elif section in SCHEMA:
            schema = SCHEMA[section]
        else:
            raise ConfigError(f"{source}: unknown section [{section}]{_at(line)}")
        parsed = {k: d for k, (_, d) in schema.items()}
        for key, raw in parser.items(section):
            kline = lines.get((section, key))
            if key not in schema:
                raise ConfigError(f"{source}: unknown key {section}.{key}{_at(kline)}")
            parsed[key] = _convert(schema[key][0], raw, f"{source}: {section}.{key}", kline)
        if schema is TARGET_KEYS:
            name = section[len("target.") :]
            if parsed["kind"] not in ("point", "cuboid", "free"):
                raise ConfigError(f"{source}: {section}.kind must be point, cuboid or free{_at(line)}")
            targets.append(TargetSpec(name, parsed.pop("kind"), parsed))
        else:
            values[section] = parsed
    cfg = ScenarioConfig(values, tuple(targets), source, text, lines)
    validate(cfg)
    return cfg


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text, str(path))


def preset_names() -> list[str]:
    files = resources.files("photoradar").joinpath("presets").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".ini"))


def load_preset(name: str) -> ScenarioConfig:
    res = resources.files("photoradar").joinpath("presets", f"{name}.ini")
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return loads(res.read_text(), f"preset:{name}")


def render(values: dict, targets=()) -> str:
    """Canonical INI text for a resolved configuration."""

    def show(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return "inf" if v == math.inf else ("-inf" if v == -math.inf else repr(v))
        return str(v)

    out = []
    for section in SCHEMA:
        out.append(f"[{section}]")
        out.extend(f"{k} = {show(v)}" for k, v in values[section].items())
        out.append("")
    for t in targets:
        out.append(f"[target.{t.name}]")
        out.append(f"kind = {t.kind}")
        out.extend(f"{k} = {show(v)}" for k, v in t.values.items())
        out.append("")
    return "\n".join(out)


def resolved_text(cfg: ScenarioConfig) -> str:
    return render(cfg.values, cfg.targets)


def validate(cfg: ScenarioConfig) -> None:
    """Build every domain object once so module invariants surface as :class:`ConfigError`."""

    def where(section, key):
        return f"{cfg.source}: {section}.{key}{_at(cfg.lines.get((section, key)))}"

    v = cfg.values
    if v["run"]["mode"] not in MODES:
        raise ConfigError(f"{where('run', 'mode')} must be one of {', '.join(MODES)}")
    if not 0 <= v["run"]["seed"] < 2**64:
        raise ConfigError(f"{where('run', 'seed')} must be an unsigned 64-bit integer")
    checks = [
        ("waveform", "center_frequency", cfg.lfm),
        ("waveform", "lo_frequency", cfg.cw),
        ("waveform", "lfm_amplitude", cfg.tx),
        ("filter", "dhpf_cutoff", cfg.filter_config),
        ("imaging", "integration_time", cfg.imaging_config),
    ]
    for section, key, build in checks:
        try:
            build()
        except ValueError as exc:
            raise ConfigError(f"{where(section, key)}: {exc}") from None
    c = v["capture"]
    for key in ("sample_rate", "duration"):
        if not (math.isfinite(c[key]) and c[key] > 0):
            raise ConfigError(f"{where('capture', key)} must be positive")
    if c["count"] < 0:
        raise ConfigError(f"{where('capture', 'count')} must be >= 0")
    if not c["spacing_periods"] >= 0:
        raise ConfigError(f"{where('capture', 'spacing_periods')} must be >= 0")
    if math.isnan(c["snr_db"]):
        raise ConfigError(f"{where('capture', 'snr_db')} must be a number")
    per = c["sample_rate"] * v["waveform"]["period"]
    if abs(per - round(per)) > 1e-9 * per:
        raise ConfigError(f"{where('capture', 'sample_rate')}: pulse period must span an integer number of samples")
    if v["filter"]["kind"] not in ("gate", "fir"):
        raise ConfigError(f"{where('filter', 'kind')} must be gate or fir")
    if v["sweep"]["axis"] not in ("lo_frequency", "bandwidth"):
        raise ConfigError(f"{where('sweep', 'axis')} must be lo_frequency or bandwidth")
    cfg.sweep_values()
    for t in cfg.targets:
        tv = t.values
        if t.kind == "free" and not tv["range0"] > 0:
            raise ConfigError(f"{cfg.source}: target.{t.name}.range0 must be positive")
        if t.kind == "cuboid" and not (tv["size_x"] > 0 and tv["size_y"] > 0):
            raise ConfigError(f"{cfg.source}: target.{t.name} needs positive size_x and size_y")
    try:
        if cfg.targets:
            cfg.scene()
        elif v["run"]["mode"] in ("track", "image", "simulate"):
            raise ValueError("scenario has no targets")
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: scene: {exc}") from None
