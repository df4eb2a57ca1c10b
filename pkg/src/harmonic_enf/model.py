"""Domain types, synthetic ENF generation and frame geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import signal as sps

NOMINAL_HZ = 50.0
NORMALIZED = "fundamental-normalized"

# Per-operation stream offsets used when one base seed fans out to several
# independent random streams (see ``stream_seed``).
STREAM_ENF = 0
STREAM_PHASES = 1
STREAM_NOISE = 2
STREAM_CORRUPTION = 3
STREAM_ETA = 4


def stream_seed(base_seed: int, *keys: int) -> int:
    """Derive a child seed from ``base_seed`` and integer keys.

    A Monte Carlo trial ``t`` draws its ENF from
    ``stream_seed(base, t, STREAM_ENF)``, its noise from
    ``stream_seed(base, t, STREAM_NOISE)`` and so on, so every stream is
    reproducible on its own and independent of the others.
    """
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SampleBuffer:
    """Uniformly sampled real signal."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64).ravel()
        if x.size < 1:
            raise ValueError("SampleBuffer needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("SampleBuffer samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", _readonly(x))
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True)
class FrameConfig:
    """Frame length and hop (samples) plus FFT grid resolution (Hz)."""

    frame_len: int
    step: int
    fft_resolution_hz: float = 1.0 / 4000.0

    def __post_init__(self):
        if int(self.frame_len) != self.frame_len or self.frame_len < 1:
            raise ValueError("frame_len must be a positive integer")
        if int(self.step) != self.step or self.step < 1:
            raise ValueError("step must be a positive integer")
        if self.frame_len < self.step:
            raise ValueError("frame_len must be >= step")
        if not self.fft_resolution_hz > 0:
            raise ValueError("fft_resolution_hz must be positive")
        object.__setattr__(self, "frame_len", int(self.frame_len))
        object.__setattr__(self, "step", int(self.step))

    @classmethod
    def default(cls, sample_rate_hz: float = 800.0, resolution_hz: float = 1.0 / 4000.0):
        """Conventional ENF framing: 16 s frames with a 1 s hop."""
        fs = int(round(sample_rate_hz))
        return cls(frame_len=16 * fs, step=fs, fft_resolution_hz=resolution_hz)

    def transform_length(self, sample_rate_hz: float) -> int:
        """Zero-padded FFT length ``f_S / resolution``; must be an integer."""
        L = sample_rate_hz / self.fft_resolution_hz
        Li = int(round(L))
        if abs(L - Li) > 1e-6:
            raise ValueError(
                f"resolution {self.fft_resolution_hz} Hz does not give an integer "
                f"transform length at {sample_rate_hz} Hz"
            )
        if Li < self.frame_len:
            raise ValueError("transform length is shorter than the frame")
        return Li


def padded_length(n_samples: int, cfg: FrameConfig) -> int:
    """Smallest length >= max(n, N_F) for which (L - N_F) is a multiple of the step."""
    n = max(int(n_samples), cfg.frame_len)
    extra = (n - cfg.frame_len) % cfg.step
    return n if extra == 0 else n + cfg.step - extra


def num_frames(n_samples: int, cfg: FrameConfig) -> int:
    """Number of frames ``(L - N_F) / step + 1`` on the zero-padded length."""
    return (padded_length(n_samples, cfg) - cfg.frame_len) // cfg.step + 1


def frame_centers(n_frames: int, cfg: FrameConfig) -> np.ndarray:
    """Sample position of each frame centre."""
    return np.arange(n_frames) * cfg.step + cfg.frame_len / 2.0


@dataclass(frozen=True)
class IfSeries:
    """Per-frame instantaneous frequency track.

    ``harmonic`` is the harmonic index the values live at, or
    ``NORMALIZED`` once they have been scaled to the 2nd-harmonic band.
    """

    values_hz: np.ndarray
    harmonic: int | str
    frame_config: FrameConfig | None = None

    def __post_init__(self):
        v = np.array(self.values_hz, dtype=np.float64).ravel()
        object.__setattr__(self, "values_hz", _readonly(v))
        h = self.harmonic
        if not (h == NORMALIZED or (isinstance(h, (int, np.integer)) and h >= 1)):
            raise ValueError(f"harmonic must be a positive int or {NORMALIZED!r}, got {h!r}")
        if not isinstance(h, str):
            object.__setattr__(self, "harmonic", int(h))

    def __len__(self):
        return self.values_hz.size

    @property
    def is_normalized(self) -> bool:
        return self.harmonic == NORMALIZED


@dataclass(frozen=True)
class HarmonicModelSpec:
    """Multi-tone harmonic ENF model.

    ``amplitudes`` has one row per harmonic (one value per sample);
    ``component_noise`` optionally maps a harmonic index to an additive
    noise waveform carried by that component (see ``corrupt_harmonics``).
    """

    harmonic_indices: tuple[int, ...]
    amplitudes: np.ndarray
    phases: np.ndarray
    fundamental_if_hz: np.ndarray
    component_noise: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        idx = tuple(int(m) for m in self.harmonic_indices)
        if len(idx) == 0:
            raise ValueError("at least one harmonic is required")
        if len(set(idx)) != len(idx) or min(idx) < 1:
            raise ValueError("harmonic indices must be distinct positive integers")
        f = np.array(self.fundamental_if_hz, dtype=np.float64).ravel()
        if f.size < 1 or not np.all(f > 0):
            raise ValueError("fundamental IF must be positive")
        amps = np.array(self.amplitudes, dtype=np.float64)
        if amps.ndim == 0:
            amps = np.full((len(idx), f.size), float(amps))
        elif amps.ndim == 1:
            if amps.size != len(idx):
                raise ValueError("need one amplitude per harmonic")
            amps = np.repeat(amps[:, None], f.size, axis=1)
        if amps.shape != (len(idx), f.size):
            raise ValueError(f"amplitudes shape {amps.shape} != {(len(idx), f.size)}")
        if np.any(amps < 0) or not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite and non-negative")
        ph = np.array(self.phases, dtype=np.float64).ravel()
        if ph.size == 1 and len(idx) > 1:
            ph = np.full(len(idx), ph[0])
        if ph.size != len(idx):
            raise ValueError("need one phase per harmonic")
        noise = {}
        for m, v in dict(self.component_noise).items():
            if int(m) not in idx:
                raise ValueError(f"noise given for harmonic {m} outside the model")
            v = np.array(v, dtype=np.float64).ravel()
            if v.size != f.size:
                raise ValueError("component noise length must match the IF length")
            noise[int(m)] = _readonly(v)
        object.__setattr__(self, "harmonic_indices", idx)
        object.__setattr__(self, "amplitudes", _readonly(amps))
        object.__setattr__(self, "phases", _readonly(ph))
        object.__setattr__(self, "fundamental_if_hz", _readonly(f))
        object.__setattr__(self, "component_noise", noise)

    @classmethod
    def from_fundamental(
        cls,
        fundamental_if_hz,
        harmonics: Sequence[int] = (2, 3, 4, 5, 6, 7),
        amplitude=1.0,
        phases=None,
        seed: int | None = None,
    ) -> "HarmonicModelSpec":
        """Equal-amplitude model; random phases when ``seed`` is given."""
        f = np.atleast_1d(np.asarray(fundamental_if_hz, dtype=np.float64))
        if phases is None:
            if seed is None:
                phases = np.zeros(len(harmonics))
            else:
                phases = np.random.default_rng(seed).uniform(-np.pi, np.pi, len(harmonics))
        return cls(tuple(harmonics), amplitude, phases, f)

    @property
    def n_samples(self) -> int:
        return self.fundamental_if_hz.size


def synth_enf_ar1(
    n_samples: int,
    seed: int,
    ar_coef: float = 0.99,
    target_variance: float = 4.5e-4,
    mean_hz: float = NOMINAL_HZ,
) -> np.ndarray:
    """AR(1) ENF path rescaled to a target variance and mean.

    Unit-variance innovations drive ``f[n] = a f[n-1] + e[n]``; the path is
    then scaled to ``target_variance`` (population variance) and shifted so
    its sample mean equals ``mean_hz``.
    """
    if int(n_samples) != n_samples or n_samples < 2:
        raise ValueError("n_samples must be an integer >= 2")
    if not 0 < ar_coef < 1:
        raise ValueError("ar_coef must lie in (0, 1)")
    if not target_variance > 0:
        raise ValueError("target_variance must be positive")
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(int(n_samples))
    path = sps.lfilter([1.0], [1.0, -ar_coef], e)
    path -= path.mean()
    path *= math.sqrt(target_variance) / path.std()
    return path + (mean_hz - path.mean())


def _exclusive_cycles(f: np.ndarray, m: int, fs: float) -> np.ndarray:
    """Fractional cycle count ``m * sum_{i<n} f[i] / fs`` reduced mod 1."""
    ref = f[0]
    n = np.arange(f.size, dtype=np.float64)
    drift = np.concatenate(([0.0], np.cumsum(f[:-1] - ref)))
    cycles = np.fmod(m * ref * n / fs, 1.0) + np.fmod(m * drift / fs, 1.0)
    return np.fmod(cycles, 1.0)


def synth_multitone(spec: HarmonicModelSpec, sample_rate_hz: float) -> SampleBuffer:
    """Synthesize the harmonic model, plus any per-component noise.

    The phase of harmonic ``m`` accumulates ``m * f[i]`` over the samples
    before ``n`` so that ``phases`` is the phase at ``n = 0``.
    """
    fs = float(sample_rate_hz)
    top = max(spec.harmonic_indices)
    if not fs > 2 * top * 51.0:
        raise ValueError(f"sample rate {fs} Hz is below Nyquist for harmonic {top}")
    out = np.zeros(spec.n_samples)
    for k, m in enumerate(spec.harmonic_indices):
        cyc = _exclusive_cycles(spec.fundamental_if_hz, m, fs)
        out += spec.amplitudes[k] * np.cos(2 * np.pi * cyc + spec.phases[k])
        if m in spec.component_noise:
            out += spec.component_noise[m]
    return SampleBuffer(out, fs)


def component_waveform(spec: HarmonicModelSpec, m: int, sample_rate_hz: float) -> np.ndarray:
    """Clean waveform of one harmonic (no component noise)."""
    k = spec.harmonic_indices.index(m)
    cyc = _exclusive_cycles(spec.fundamental_if_hz, m, float(sample_rate_hz))
    return spec.amplitudes[k] * np.cos(2 * np.pi * cyc + spec.phases[k])


def wgn_for_snr(clean: SampleBuffer | np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    """White Gaussian noise scaled so that sum(s^2) / sum(v^2) = 10^(snr/10)."""
    s = clean.samples if isinstance(clean, SampleBuffer) else np.asarray(clean, float)
    es = float(np.dot(s, s))
    if es == 0:
        raise ValueError("clean signal has zero energy; SNR is undefined")
    v = np.random.default_rng(seed).standard_normal(s.size)
    return v * math.sqrt(es / (10.0 ** (snr_db / 10.0)) / float(np.dot(v, v)))


def add_wgn_at_snr(clean: SampleBuffer, snr_db: float, seed: int) -> SampleBuffer:
    """Return ``clean + v`` with the energy ratio set exactly to ``snr_db``.

    ``snr_db = inf`` returns the input unchanged.
    """
    if clean.energy() == 0:
        raise ValueError("clean signal has zero energy; SNR is undefined")
    if math.isinf(snr_db) and snr_db > 0:
        return clean
    return SampleBuffer(clean.samples + wgn_for_snr(clean, snr_db, seed), clean.sample_rate_hz)


def measure_snr_db(clean, noisy) -> float:
    s = np.asarray(getattr(clean, "samples", clean), float)
    v = np.asarray(getattr(noisy, "samples", noisy), float) - s
    return 10.0 * math.log10(np.dot(s, s) / np.dot(v, v))


def bandlimited_noise(n: int, sample_rate_hz: float, band: tuple[float, float], seed: int) -> np.ndarray:
    """Unit-variance white noise with its spectrum confined to ``band``."""
    spec = np.fft.rfft(np.random.default_rng(seed).standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate_hz)
    spec[(freqs < band[0]) | (freqs > band[1])] = 0.0
    v = np.fft.irfft(spec, n)
    sd = v.std()
    if sd == 0:
        raise ValueError(f"band {band} holds no FFT bins for n={n}")
    return v / sd


def corrupt_harmonics(
    spec: HarmonicModelSpec,
    corrupt_set,
    corruption_snr_db: float,
    seed: int,
    sample_rate_hz: float = 800.0,
    band: tuple[float, float] = (49.9, 50.1),
) -> HarmonicModelSpec:
    """Attach band-limited noise to the chosen harmonics.

    Harmonic ``m`` in ``corrupt_set`` gets white noise limited to
    ``m * band`` Hz, scaled so that the clean component to noise energy
    ratio is ``corruption_snr_db``. Other components are left untouched.
    """
    chosen = sorted(int(m) for m in corrupt_set)
    if not set(chosen) <= set(spec.harmonic_indices):
        raise ValueError(f"corrupt set {chosen} is not a subset of {spec.harmonic_indices}")
    if not chosen:
        return spec
    noise = dict(spec.component_noise)
    for m in chosen:
        clean = component_waveform(spec, m, sample_rate_hz)
        v = bandlimited_noise(spec.n_samples, sample_rate_hz, (m * band[0], m * band[1]),
                              stream_seed(seed, m))
        v *= math.sqrt(np.dot(clean, clean) / 10.0 ** (corruption_snr_db / 10.0) / np.dot(v, v))
        noise[m] = noise[m] + v if m in noise else v
    return HarmonicModelSpec(spec.harmonic_indices, spec.amplitudes, spec.phases,
                             spec.fundamental_if_hz, noise)
