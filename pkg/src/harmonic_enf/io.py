"""File formats: PCM WAV, reference ENF text, ENF CSV, diagnostics JSON, config."""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import struct
import tempfile
import wave
from pathlib import Path

import numpy as np

from .model import NORMALIZED, FrameConfig, IfSeries, SampleBuffer, frame_centers

ENF_CSV_HEADER = ("frame_index", "time_sec", "freq_hz")
_PCM = 1
_EXTENSIBLE = 0xFFFE
_PCM_GUID_TAIL = b"\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


class WavDecodeError(ValueError):
    """Malformed or unsupported WAV; ``offset`` is the byte position."""

    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


class ReferenceParseError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def read_wav(path) -> SampleBuffer:
    """Decode a 16-bit PCM WAV into ``[-1, 1)`` samples; stereo is averaged.

    The whole file is validated: a data chunk shorter than its header
    claims is rejected rather than silently truncated.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise WavDecodeError("file too short for a RIFF header", len(data))
    if data[0:4] != b"RIFF":
        raise WavDecodeError("missing RIFF signature", 0)
    if data[8:12] != b"WAVE":
        raise WavDecodeError("RIFF form type is not WAVE", 8)
    fmt = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = pos + 8
        if body + size > len(data):
            raise WavDecodeError(f"chunk {cid!r} declares {size} bytes but the file ends early", pos)
        if cid == b"fmt ":
            if size < 16:
                raise WavDecodeError("fmt chunk too short", pos)
            tag, channels, rate, _, align, bits = struct.unpack_from("<HHIIHH", data, body)
            if tag == _EXTENSIBLE and size >= 40:
                if data[body + 26:body + 40] != _PCM_GUID_TAIL or struct.unpack_from("<H", data, body + 24)[0] != _PCM:
                    raise WavDecodeError("extensible format is not PCM", body + 24)
            elif tag != _PCM:
                raise WavDecodeError(f"unsupported codec tag {tag:#06x}", body)
            if bits != 16:
                raise WavDecodeError(f"unsupported bit depth {bits}", body + 14)
            if channels < 1 or rate < 1 or align != 2 * channels:
                raise WavDecodeError("inconsistent fmt fields", body)
            fmt = (channels, rate)
        elif cid == b"data":
            if fmt is None:
                raise WavDecodeError("data chunk before fmt chunk", pos)
            channels, rate = fmt
            if size % (2 * channels):
                raise WavDecodeError("data size is not a whole number of frames", pos + 4)
            pcm = np.frombuffer(data, dtype="<i2", count=size // 2, offset=body)
            x = pcm.reshape(-1, channels).astype(np.float64) / 32768.0
            if x.shape[0] == 0:
                raise WavDecodeError("data chunk holds no samples", pos)
            return SampleBuffer(x.mean(axis=1), float(rate))
        pos = body + size + (size & 1)
    raise WavDecodeError("no data chunk found", pos)


def write_wav(path, buffer: SampleBuffer, peak: float | None = None) -> float:
    """Write 16-bit mono PCM; returns the gain applied.

    Samples are scaled by ``1 / peak`` (default: the buffer's own peak with
    a little headroom) so they fit the PCM range.
    """
    x = buffer.samples
    if peak is None:
        peak = float(np.max(np.abs(x))) * 1.01 or 1.0
    gain = 1.0 / peak
    pcm = np.clip(np.round(x * gain * 32767.0), -32768, 32767).astype("<i2")
    sr = int(round(buffer.sample_rate_hz))

    def _write(f):
        with wave.open(f, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(sr)
            w.writeframes(pcm.tobytes())

    _atomic_write(path, _write, binary=True)
    return gain


def _atomic_write(path, writer, binary: bool = False):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb" if binary else "w", newline=None if binary else "") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _split(line: str) -> list[str]:
    return [p for p in line.replace(",", " ").replace(";", " ").split() if p]


def read_reference_enf(path) -> IfSeries:
    """Reference ENF, one Hz value per line or ``time,freq`` rows.

    A non-numeric first row is taken as a header. Values are fundamental
    frequencies and are returned scaled to the 2nd-harmonic band.
    """
    values = []
    seen_row = False
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = _split(line)
            try:
                nums = [float(p) for p in parts]
            except ValueError:
                if not seen_row:
                    seen_row = True
                    continue
                raise ReferenceParseError(f"non-numeric value in {line!r}", lineno) from None
            seen_row = True
            if len(nums) not in (1, 2):
                raise ReferenceParseError(f"expected 1 or 2 columns, got {len(nums)}", lineno)
            if not math.isfinite(nums[-1]):
                raise ReferenceParseError("non-finite frequency", lineno)
            values.append(nums[-1])
    if not values:
        raise ReferenceParseError("no reference values", 0)
    return IfSeries(2.0 * np.array(values), NORMALIZED)


def write_reference_enf(path, series: IfSeries, sample_rate_hz: float, cfg: FrameConfig | None = None):
    """Reference file ``time,freq`` with fundamental frequencies (Hz)."""
    from .spectral import as_normalized

    s = as_normalized(series)
    cfg = cfg or s.frame_config or FrameConfig.default(sample_rate_hz)
    t = frame_centers(len(s), cfg) / sample_rate_hz
    rows = [(repr(float(ti)), repr(float(v) / 2.0)) for ti, v in zip(t, s.values_hz)]
    write_rows(path, ("time", "freq"), rows)


def write_enf_csv(path, series: IfSeries, sample_rate_hz: float, cfg: FrameConfig | None = None):
    """``frame_index,time_sec,freq_hz`` at the 2nd-harmonic scale.

    ``time_sec`` is the frame centre. Written atomically.
    """
    from .spectral import as_normalized

    s = as_normalized(series)
    cfg = cfg or s.frame_config or FrameConfig.default(sample_rate_hz)
    t = frame_centers(len(s), cfg) / sample_rate_hz

    def _write(f):
        w = csv.writer(f, lineterminator="\n")
        w.writerow(ENF_CSV_HEADER)
        for i, (ti, v) in enumerate(zip(t, s.values_hz)):
            w.writerow((i, repr(float(ti)), repr(float(v))))

    _atomic_write(path, _write)


def read_enf_csv(path) -> tuple[IfSeries, np.ndarray]:
    """Inverse of ``write_enf_csv``; returns ``(series, time_sec)``."""
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows or tuple(rows[0]) != ENF_CSV_HEADER:
        raise ValueError(f"{path}: missing header {','.join(ENF_CSV_HEADER)}")
    body = rows[1:]
    for k, r in enumerate(body):
        if len(r) != 3 or int(r[0]) != k:
            raise ValueError(f"{path}: bad row {k + 2}")
    t = np.array([float(r[1]) for r in body])
    v = np.array([float(r[2]) for r in body])
    return IfSeries(v, NORMALIZED), t


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, payload: dict):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
    _atomic_write(path, lambda f: f.write(text + "\n"))


def write_rows(path, header, rows):
    """Plain CSV table, written atomically."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    _atomic_write(path, lambda f: f.write(buf.getvalue()))


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out
