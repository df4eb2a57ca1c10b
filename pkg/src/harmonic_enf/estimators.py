"""Single-tone and multi-tone ENF estimators and the ten comparison schemes."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .enhancement import EnhancedSignal, EnhancerConfig, hrfa
from .model import NORMALIZED, FrameConfig, IfSeries, SampleBuffer, num_frames
from .preprocess import frame, preprocess
from .selection import DEFAULT_KAPPA, CliqueSelection, ghsa, threshold_eta
from .spectral import SEARCH_BAND, band_bins, dtft_power, track_if, as_normalized

SIGNAL_BAND = (49.98, 50.02)
NOISE_BAND = (49.0, 51.0)
DEFAULT_HARMONICS = (2, 3, 4, 5, 6, 7)


class SchemeId(str, enum.Enum):
    SINGLE = "single"
    E_SINGLE = "e_single"
    MLE = "mle"
    WMLE = "wmle"
    E_MLE = "e_mle"
    E_WMLE = "e_wmle"
    S_MLE = "s_mle"
    S_WMLE = "s_wmle"
    P_MLE = "p_mle"
    P_WMLE = "p_wmle"

    @property
    def enhanced(self) -> bool:
        return self.value.startswith(("e_", "p_"))

    @property
    def selected(self) -> bool:
        return self.value.startswith(("s_", "p_"))

    @property
    def weighted(self) -> bool:
        return self.value.endswith("wmle")

    @property
    def single_tone(self) -> bool:
        return self.value.endswith("single")


@dataclass(frozen=True)
class WeightMatrix:
    """Local SNR weight per harmonic (rows, ascending) and frame (columns)."""

    harmonics: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != len(self.harmonics):
            raise ValueError("weights need one row per harmonic")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("weights must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "harmonics", tuple(int(m) for m in self.harmonics))

    def row(self, m: int) -> np.ndarray:
        return self.values[self.harmonics.index(m)]

    def scaled(self, c: float) -> "WeightMatrix":
        return WeightMatrix(self.harmonics, self.values * c)


def _check_harmonics(harmonics, fs: float, band) -> tuple[int, ...]:
    ms = tuple(sorted({int(m) for m in harmonics}))
    if not ms:
        raise ValueError("harmonic set is empty")
    for m in ms:
        if m < 1 or m * band[1] > fs / 2:
            raise ValueError(f"harmonic {m} band exceeds Nyquist at {fs} Hz")
    return ms


def fundamental_grid(harmonics, cfg: FrameConfig, band=SEARCH_BAND) -> np.ndarray:
    """Fundamental candidates: ``band`` with step ``resolution / max(harmonics)``."""
    step = cfg.fft_resolution_hz / max(harmonics)
    k0, k1 = band_bins(band[0], band[1], step)
    return np.arange(k0, k1 + 1) * step


def harmonic_sum_spectrum(signal: SampleBuffer, harmonics, cfg: FrameConfig,
                          weights: WeightMatrix | None = None, band=SEARCH_BAND):
    """``sum_m w[m, l] P_l(m f)`` over the fundamental grid; shape ``(frames, grid)``.

    ``P_l(m f)`` is evaluated exactly with a chirp-z transform starting at
    ``m * f_0`` with step ``m * df``.
    """
    fs = signal.sample_rate_hz
    cfg.transform_length(fs)
    ms = _check_harmonics(harmonics, fs, band)
    grid = fundamental_grid(ms, cfg, band)
    frames = frame(signal, cfg)
    total = np.zeros((frames.shape[0], grid.size))
    df = cfg.fft_resolution_hz / max(ms)
    for m in ms:
        p = dtft_power(frames, fs, m * grid[0], m * df, grid.size)
        if weights is not None:
            p *= weights.row(m)[:, None]
        total += p
    return grid, total


def mle(signal: SampleBuffer, harmonics, cfg: FrameConfig, band=SEARCH_BAND) -> IfSeries:
    """Harmonic-summation ML estimate, reported at the 2nd-harmonic scale.

    Ties go to the lowest candidate.
    """
    grid, total = harmonic_sum_spectrum(signal, harmonics, cfg, None, band)
    return IfSeries(2.0 * grid[np.argmax(total, axis=1)], NORMALIZED, cfg)


def wmle(signal: SampleBuffer, harmonics, cfg: FrameConfig, weights: WeightMatrix,
         band=SEARCH_BAND) -> IfSeries:
    """Harmonic summation with per-harmonic, per-frame weights."""
    ms = _check_harmonics(harmonics, signal.sample_rate_hz, band)
    missing = set(ms) - set(weights.harmonics)
    if missing:
        raise ValueError(f"no weights for harmonics {sorted(missing)}")
    if weights.values.shape[1] != num_frames(len(signal), cfg):
        raise ValueError("weight matrix does not match the frame count")
    grid, total = harmonic_sum_spectrum(signal, ms, cfg, weights, band)
    return IfSeries(2.0 * grid[np.argmax(total, axis=1)], NORMALIZED, cfg)


def estimate_weights(signal: SampleBuffer, harmonics, cfg: FrameConfig,
                     signal_band=SIGNAL_BAND, noise_band=NOISE_BAND) -> WeightMatrix:
    """Subband energy ratio per harmonic and frame.

    Signal energy is the periodogram summed over ``m * signal_band``
    (endpoints included); noise energy over the rest of ``m * noise_band``.
    A tiny guard proportional to the frame energy keeps silent frames at 0.
    """
    fs = signal.sample_rate_hz
    L = cfg.transform_length(fs)
    ms = _check_harmonics(harmonics, fs, noise_band)
    r = cfg.fft_resolution_hz
    frames = frame(signal, cfg)
    energy = np.einsum("ij,ij->i", frames, frames)
    eps = 1e-12 * L * energy + np.finfo(float).tiny
    rows = []
    for m in ms:
        n0, n1 = band_bins(m * noise_band[0], m * noise_band[1], r)
        s0, s1 = band_bins(m * signal_band[0], m * signal_band[1], r)
        p = dtft_power(frames, fs, n0 * r, r, n1 - n0 + 1)
        sig = p[:, s0 - n0: s1 - n0 + 1].sum(axis=1)
        noise = p.sum(axis=1) - sig
        rows.append(sig / (np.maximum(noise, 0.0) + eps))
    return WeightMatrix(ms, np.array(rows))


@dataclass(frozen=True)
class SchemeParams:
    """Everything a scheme needs besides the recording."""

    harmonics: tuple[int, ...] = DEFAULT_HARMONICS
    target_fs_hz: float = 800.0
    frame_config: FrameConfig | None = None
    enhancer: EnhancerConfig = field(default_factory=EnhancerConfig)
    kappa: float = DEFAULT_KAPPA
    n_rep: int = 10_000
    seed: int = 0
    eta: float | None = None
    preprocessed: bool = False

    @property
    def frames(self) -> FrameConfig:
        return self.frame_config or FrameConfig.default(self.target_fs_hz)


@dataclass
class SchemeResult:
    scheme: SchemeId
    estimate: IfSeries
    omega: tuple[int, ...]
    eta: float | None = None
    selection: CliqueSelection | None = None
    weights: WeightMatrix | None = None
    tracks: Mapping[int, IfSeries] | None = None


class Pipeline:
    """Runs schemes on one recording, sharing filtered/enhanced signals.

    Preprocessing, enhancement, the threshold and the selections are each
    computed at most once, so running all ten schemes costs one HRFA pass.
    """

    def __init__(self, recording: SampleBuffer, params: SchemeParams | None = None):
        self.params = params or SchemeParams()
        self.recording = recording
        self._cache: dict = {}

    def _memo(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def filtered(self) -> SampleBuffer:
        p = self.params
        if p.preprocessed:
            return self.recording
        return self._memo("filtered", lambda: preprocess(self.recording, p.harmonics, p.target_fs_hz))

    @property
    def enhanced(self) -> EnhancedSignal:
        p = self.params
        enh = replace(p.enhancer, frame_config=p.enhancer.frame_config or p.frames)
        return self._memo("enhanced", lambda: hrfa(self.filtered, p.harmonics, enh))

    @property
    def eta(self) -> float:
        p = self.params
        if p.eta is not None:
            return p.eta
        n_enf = num_frames(len(self.filtered), p.frames)
        return self._memo("eta", lambda: threshold_eta(n_enf, p.kappa, p.n_rep, p.seed))

    def selection(self, enhanced: bool) -> CliqueSelection:
        p = self.params
        src = self.enhanced if enhanced else self.filtered
        return self._memo(("sel", enhanced), lambda: ghsa(src, self.eta, p.harmonics, p.frames))

    def estimator_input(self, enhanced: bool) -> SampleBuffer:
        return self.enhanced.as_buffer() if enhanced else self.filtered

    def weights(self, enhanced: bool) -> WeightMatrix:
        p = self.params
        return self._memo(("w", enhanced),
                          lambda: estimate_weights(self.estimator_input(enhanced), p.harmonics, p.frames))

    def run(self, scheme) -> SchemeResult:
        sid = SchemeId(scheme)
        cfg = self.params.frames
        if sid.single_tone:
            src = self.enhanced.component(2) if sid.enhanced else self.filtered
            est = as_normalized(track_if(src, 2, cfg))
            return SchemeResult(sid, est, (2,))
        sel = self.selection(sid.enhanced) if sid.selected else None
        omega = sel.omega if sel else tuple(sorted(self.params.harmonics))
        x = self.estimator_input(sid.enhanced)
        w = None
        if sid.weighted:
            w = self.weights(sid.enhanced)
            est = wmle(x, omega, cfg, w)
        else:
            est = mle(x, omega, cfg)
        return SchemeResult(sid, est, omega, self.eta if sel else None, sel, w,
                            sel.tracks if sel else None)


def run_scheme(scheme, recording: SampleBuffer, params: SchemeParams | None = None) -> SchemeResult:
    return Pipeline(recording, params).run(scheme)


def run_schemes(schemes, recording: SampleBuffer, params: SchemeParams | None = None) -> dict:
    pipe = Pipeline(recording, params)
    return {SchemeId(s): pipe.run(s) for s in schemes}
