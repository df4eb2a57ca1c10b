"""Band-limited periodograms and per-harmonic IF tracking."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import CZT

from .model import NORMALIZED, FrameConfig, IfSeries, SampleBuffer, frame_centers
from .preprocess import frame

SEARCH_BAND = (49.9, 50.1)

# rows per chirp-z batch; bounds peak memory for long frames and wide bands
_CHUNK_ELEMS = 4_000_000


@dataclass(frozen=True)
class Periodogram:
    grid_hz: np.ndarray
    power: np.ndarray

    def peak_hz(self) -> float:
        return float(self.grid_hz[np.argmax(self.power)])


def dtft_power(frames: np.ndarray, fs: float, f_start: float, f_step: float, count: int) -> np.ndarray:
    """``|sum_n x[n] exp(-j 2 pi f n / fs)|^2`` at ``f_start + k f_step``.

    Evaluated with a chirp-z transform, so only the requested bins are
    computed. ``frames`` may be 1-D or ``(n_frames, n)``; the result has
    shape ``(n_frames, count)`` (or ``(count,)`` for 1-D input).
    """
    x = np.asarray(frames, dtype=np.float64)
    squeeze = x.ndim == 1
    x = np.atleast_2d(x)
    n = x.shape[-1]
    czt = _czt_plan(n, int(count), float(f_start), float(f_step), float(fs))
    out = np.empty((x.shape[0], count))
    rows = max(1, _CHUNK_ELEMS // (n + count))
    for i in range(0, x.shape[0], rows):
        out[i:i + rows] = np.abs(czt(x[i:i + rows], axis=-1)) ** 2
    return out[0] if squeeze else out


@lru_cache(maxsize=128)
def _czt_plan(n: int, count: int, f_start: float, f_step: float, fs: float) -> CZT:
    w = np.exp(-2j * np.pi * f_step / fs)
    a = np.exp(2j * np.pi * f_start / fs)
    return CZT(n, count, w, a)


def band_bins(low_hz: float, high_hz: float, resolution_hz: float) -> tuple[int, int]:
    """First and last grid index ``k`` with ``k * resolution`` inside the band."""
    k0 = math.ceil(low_hz / resolution_hz - 1e-9)
    k1 = math.floor(high_hz / resolution_hz + 1e-9)
    if k1 < k0:
        raise ValueError(f"band {low_hz}-{high_hz} Hz contains no grid point")
    return k0, k1


def periodogram(frame_samples, fs: float, resolution_hz: float, band: tuple[float, float]) -> Periodogram:
    """Zero-padded periodogram of one frame, restricted to ``band``.

    Equivalent to an ``fs / resolution_hz`` point FFT of the zero-padded
    frame read out on the bins inside ``band`` (rectangular window).
    """
    x = np.asarray(frame_samples, dtype=np.float64).ravel()
    L = fs / resolution_hz
    if abs(L - round(L)) > 1e-6 or round(L) < x.size:
        raise ValueError("resolution must give an integer transform length >= frame length")
    lo, hi = band
    if lo < 0 or hi > fs / 2 or lo > hi:
        raise ValueError(f"band {band} lies outside [0, {fs / 2}] Hz")
    k0, k1 = band_bins(lo, hi, resolution_hz)
    grid = np.arange(k0, k1 + 1) * resolution_hz
    return Periodogram(grid, dtft_power(x, fs, k0 * resolution_hz, resolution_hz, k1 - k0 + 1))


def harmonic_band_power(x, fs: float, m: int, cfg: FrameConfig,
                        band: tuple[float, float] = SEARCH_BAND) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame periodogram over ``m * band``; returns ``(grid_hz, power)``."""
    cfg.transform_length(fs)
    lo, hi = m * band[0], m * band[1]
    if hi > fs / 2:
        raise ValueError(f"harmonic {m} band exceeds Nyquist")
    k0, k1 = band_bins(lo, hi, cfg.fft_resolution_hz)
    grid = np.arange(k0, k1 + 1) * cfg.fft_resolution_hz
    power = dtft_power(frame(x, cfg), fs, k0 * cfg.fft_resolution_hz, cfg.fft_resolution_hz, k1 - k0 + 1)
    return grid, power


def track_if(signal: SampleBuffer, m: int, cfg: FrameConfig,
             search_band: tuple[float, float] = SEARCH_BAND) -> IfSeries:
    """Per-frame periodogram peak inside ``m * search_band``.

    Ties go to the lowest-frequency bin.
    """
    grid, power = harmonic_band_power(signal.samples, signal.sample_rate_hz, m, cfg, search_band)
    return IfSeries(grid[np.argmax(power, axis=1)], m, cfg)


def interpolate_if(series: IfSeries, n_samples: int) -> np.ndarray:
    """Per-sample IF by linear interpolation between frame centres.

    Values before the first centre and after the last one are held.
    """
    if len(series) == 0:
        raise ValueError("cannot interpolate an empty series")
    if series.frame_config is None:
        raise ValueError("series has no frame configuration")
    centers = frame_centers(len(series), series.frame_config)
    return np.interp(np.arange(n_samples, dtype=np.float64), centers, series.values_hz)


def normalize_to_2nd(series: IfSeries) -> IfSeries:
    """Scale a harmonic-``m`` track to the 2nd-harmonic band (``* 2/m``)."""
    if series.is_normalized:
        raise ValueError("series is already normalized; its harmonic is unknown")
    m = series.harmonic
    values = series.values_hz if m == 2 else series.values_hz * (2.0 / m)
    return IfSeries(values, NORMALIZED, series.frame_config)


def denormalize(series: IfSeries, m: int) -> IfSeries:
    """Inverse of ``normalize_to_2nd`` for harmonic ``m``."""
    if not series.is_normalized:
        raise ValueError("series is not normalized")
    values = series.values_hz if m == 2 else series.values_hz * (m / 2.0)
    return IfSeries(values, int(m), series.frame_config)


def as_normalized(series: IfSeries) -> IfSeries:
    return series if series.is_normalized else normalize_to_2nd(series)
