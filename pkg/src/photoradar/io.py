"""File formats: capture binaries, track/spectra/image CSV, and 16-bit PGM.

Capture file
    A 512-byte ASCII header followed by the samples as little-endian
    IEEE-754 float32.  The header is ``key=value`` lines, the first line
    being the magic ``PHOTORADAR-CAPTURE 1``; keys are ``sample_rate``,
    ``duration``, ``pulse_period``, ``pulse_width``, ``start_time`` and
    ``num_samples`` (floats written with ``repr``).  The remainder of the 512
    bytes is space padding and the final header byte is ``\\n``.

PGM image
    Binary ``P5`` with maxval 65535, so each pixel is a big-endian uint16.
    Pixel value ``round(65535 * (dB - floor) / (0 - floor))`` after clipping
    to ``[floor, 0]``.  Row 0 is the first (nearest) range bin and column 0
    the most negative cross-range.

Image CSV
    Line 1: ``range_m\\crossrange_m`` then the cross-range axis values.
    Each further line: the range value then that row's dB magnitudes.
"""

from __future__ import annotations

import csv
import io as _io
import math
from pathlib import Path

import numpy as np

from .estimator import RangeVelocityEstimate
from .isar import IsarImage
from .receiver import DechirpCapture

CAPTURE_MAGIC = "PHOTORADAR-CAPTURE 1"
HEADER_SIZE = 512
TRACK_HEADER = ("timestamp_s", "range_m", "speed_mps", "direction", "signed_velocity_mps")
_CAPTURE_KEYS = ("sample_rate", "duration", "pulse_period", "pulse_width", "start_time", "num_samples")


def fmt(x) -> str:
    """Shortest round-trip text for a float; ``nan`` for missing values."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_capture(path, capture: DechirpCapture) -> None:
    values = {
        "sample_rate": fmt(capture.sample_rate),
        "duration": fmt(capture.duration),
        "pulse_period": fmt(capture.pulse_period),
        "pulse_width": fmt(capture.pulse_width),
        "start_time": fmt(capture.start_time),
        "num_samples": str(capture.samples.size),
    }
    text = CAPTURE_MAGIC + "\n" + "".join(f"{k}={values[k]}\n" for k in _CAPTURE_KEYS)
    raw = text.encode("ascii")
    if len(raw) > HEADER_SIZE - 1:
        raise ValueError("capture header does not fit in 512 bytes")
    header = raw + b" " * (HEADER_SIZE - 1 - len(raw)) + b"\n"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(capture.samples.astype("<f4").tobytes())


def read_capture(path) -> DechirpCapture:
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise ValueError(f"{path}: file shorter than the capture header")
    lines = data[:HEADER_SIZE].decode("ascii").rstrip().splitlines()
    if not lines or lines[0] != CAPTURE_MAGIC:
        raise ValueError(f"{path}: not a capture file")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.strip().partition("=")
        fields[key] = value
    missing = [k for k in _CAPTURE_KEYS if k not in fields]
    if missing:
        raise ValueError(f"{path}: header lacks {', '.join(missing)}")
    n = int(fields["num_samples"])
    samples = np.frombuffer(data, dtype="<f4", count=n, offset=HEADER_SIZE)
    if samples.size != n or len(data) != HEADER_SIZE + 4 * n:
        raise ValueError(f"{path}: expected {n} samples")
    return DechirpCapture(
        float(fields["sample_rate"]),
        samples.astype(float),
        float(fields["pulse_period"]),
        float(fields["pulse_width"]),
        float(fields["start_time"]),
    )


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def track_csv(estimates) -> str:
    rows = [
        (fmt(e.timestamp), fmt(e.range), fmt(e.speed), e.direction.value, fmt(e.signed_velocity))
        for e in estimates
    ]
    return _csv_text(TRACK_HEADER, rows)


def read_track_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACK_HEADER:
            raise ValueError(f"{path}: unexpected track header {reader.fieldnames}")
        return list(reader)


def table_csv(header, rows) -> str:
    """CSV text for a table whose numeric cells are written round-trip exact."""
    return _csv_text(header, [[c if isinstance(c, str) else fmt(c) for c in row] for row in rows])


def image_csv(img: IsarImage) -> str:
    rows = [["range_m\\crossrange_m"] + [fmt(x) for x in img.crossrange_axis]]
    for r, line in zip(img.range_axis, img.magnitudes):
        rows.append([fmt(r)] + [fmt(v) for v in line])
    return _csv_text(None, rows)


def read_image_csv(path):
    """Returns ``(range_axis, crossrange_axis, magnitudes_db)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    x = np.array([float(v) for v in rows[0][1:]])
    r = np.array([float(row[0]) for row in rows[1:]])
    mag = np.array([[float(v) for v in row[1:]] for row in rows[1:]])
    return r, x, mag


def pgm_bytes(img: IsarImage) -> bytes:
    floor = img.floor_db
    scaled = (np.clip(img.magnitudes, floor, 0.0) - floor) / (-floor)
    pixels = np.round(scaled * 65535.0).astype(">u2")
    h, w = pixels.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + pixels.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    pos += 1
    if tokens[0] != "P5" or tokens[3] != "65535":
        raise ValueError(f"{path}: not a 16-bit P5 image")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data, dtype=">u2", count=w * h, offset=pos).reshape(h, w).astype(np.uint16)
