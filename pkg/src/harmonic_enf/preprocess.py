"""Decimation, harmonic comb filtering and framing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from .model import FrameConfig, SampleBuffer, num_frames, padded_length


@dataclass(frozen=True)
class CombFilterSpec:
    """Linear-phase FIR with one passband per harmonic."""

    taps: np.ndarray
    bands: tuple[tuple[float, float], ...]
    harmonics: tuple[int, ...]
    sample_rate_hz: float

    @property
    def length(self) -> int:
        return self.taps.size

    def response(self, freqs_hz) -> np.ndarray:
        """Magnitude response at arbitrary frequencies."""
        f = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
        n = np.arange(self.taps.size)
        return np.abs(np.exp(-2j * np.pi * np.outer(f, n) / self.sample_rate_hz) @ self.taps)


def _integer_factor(src: float, dst: float) -> int:
    k = src / dst
    ki = int(round(k))
    if ki < 1 or abs(k - ki) > 1e-9 * k:
        raise ValueError(f"{src} Hz -> {dst} Hz is not an integer decimation")
    return ki


def decimate(buffer: SampleBuffer, target_fs_hz: float, numtaps: int | None = None) -> SampleBuffer:
    """Anti-alias filter and keep every k-th sample.

    The low-pass is a Kaiser FIR with cutoff at the target Nyquist and a
    transition band of +-0.05 f_target, so everything below 0.45 f_target
    passes flat and aliases can only land in (0.45, 0.5] f_target.
    The tail is zero-padded to a multiple of k, so the output has exactly
    ``len / k`` samples. Filter delay is compensated.
    """
    k = _integer_factor(buffer.sample_rate_hz, target_fs_hz)
    if k == 1:
        return SampleBuffer(buffer.samples.copy(), buffer.sample_rate_hz)
    x = buffer.samples
    pad = (-x.size) % k
    if pad:
        x = np.concatenate((x, np.zeros(pad)))
    if numtaps is None:
        numtaps = 50 * k + 1
    numtaps |= 1
    nyq = target_fs_hz / 2.0
    taps = sps.firwin(numtaps, nyq, width=0.1 * target_fs_hz, window=("kaiser", 8.0),
                      fs=buffer.sample_rate_hz)
    y = sps.resample_poly(x, 1, k, window=taps)
    return SampleBuffer(y, target_fs_hz)


def design_comb(
    harmonics,
    sample_rate_hz: float = 800.0,
    length: int = 256,
    band_halfwidth_hz: float = 1.0,
    transition_hz: float = 2.0,
    window="blackman",
) -> CombFilterSpec:
    """Windowed-sinc comb: a sum of per-harmonic bandpass prototypes.

    Passband ``m`` spans ``m*(50 - w) .. m*(50 + w)`` with
    ``w = band_halfwidth_hz``. Each prototype is designed
    ``transition_hz`` wider on both sides so a short filter stays flat
    across the passband, then the prototype gains are solved jointly so the
    combined response is exactly 1 at every band centre.
    """
    ms = tuple(sorted(int(m) for m in harmonics))
    if not ms:
        raise ValueError("comb filter needs at least one harmonic")
    if length < 2:
        raise ValueError("filter length must be >= 2")
    fs = float(sample_rate_hz)
    bands = tuple((m * (50.0 - band_halfwidth_hz), m * (50.0 + band_halfwidth_hz)) for m in ms)
    for lo, hi in bands:
        if hi >= fs / 2 or lo <= 0:
            raise ValueError(f"band {lo}-{hi} Hz does not fit below Nyquist ({fs / 2} Hz)")
    for (_, hi), (lo, _) in zip(bands, bands[1:]):
        if lo <= hi:
            raise ValueError("harmonic passbands overlap")

    n = np.arange(length) - (length - 1) / 2.0
    win = sps.get_window(window, length, fftbins=False)
    protos = []
    for lo, hi in bands:
        lo_d = max(lo - transition_hz, 0.0)
        hi_d = min(hi + transition_hz, fs / 2)
        ideal = (2 * hi_d / fs) * np.sinc(2 * hi_d / fs * n) - (2 * lo_d / fs) * np.sinc(2 * lo_d / fs * n)
        protos.append(ideal * win)
    protos = np.array(protos)
    centers = np.array([50.0 * m for m in ms])
    basis = np.exp(-2j * np.pi * np.outer(centers, np.arange(length)) / fs)
    gain_matrix = np.abs(basis @ protos.T)
    gains = np.linalg.solve(gain_matrix, np.ones(len(ms)))
    return CombFilterSpec(gains @ protos, bands, ms, fs)


def apply_fir(buffer: SampleBuffer, filt: CombFilterSpec) -> SampleBuffer:
    """Zero-phase (forward-backward) filtering, same length as the input.

    Equivalent to one pass with the autocorrelation of the taps, whose
    magnitude response is ``|H|^2`` and whose phase is zero.
    """
    if buffer.samples.size <= filt.taps.size:
        raise ValueError("buffer must be longer than the filter")
    if abs(buffer.sample_rate_hz - filt.sample_rate_hz) > 1e-9:
        raise ValueError("filter was designed for a different sample rate")
    g = np.convolve(filt.taps, filt.taps[::-1])
    y = sps.fftconvolve(buffer.samples, g, mode="same")
    return SampleBuffer(y, buffer.sample_rate_hz)


def frame(buffer: SampleBuffer | np.ndarray, cfg: FrameConfig) -> np.ndarray:
    """Overlapping frames as a read-only ``(n_frames, frame_len)`` view.

    Frame ``l`` covers padded samples ``[l*step, l*step + frame_len)``.
    """
    x = buffer.samples if isinstance(buffer, SampleBuffer) else np.asarray(buffer, dtype=np.float64)
    L = padded_length(x.size, cfg)
    if L != x.size:
        x = np.concatenate((x, np.zeros(L - x.size)))
    frames = sliding_window_view(x, cfg.frame_len)[:: cfg.step]
    assert frames.shape[0] == num_frames(x.size, cfg)
    return frames


def preprocess(buffer: SampleBuffer, harmonics, target_fs_hz: float = 800.0,
               comb: CombFilterSpec | None = None) -> SampleBuffer:
    """Decimate to ``target_fs_hz`` (when needed) and comb filter."""
    x = buffer
    if abs(x.sample_rate_hz - target_fs_hz) > 1e-9:
        x = decimate(x, target_fs_hz)
    if comb is None:
        comb = design_comb(harmonics, target_fs_hz)
    return apply_fir(x, comb)
