"""Harmonic-wise phase-averaging enhancement of ENF components.

The mixture is first encoded as a unit-modulus SFM signal
``z[n] = exp(j 2 pi T alpha cumsum(x))``. For each harmonic ``m`` a
lag-weighted kernel built from the instantaneous autocorrelation of ``z`` is
averaged over lags ``0..tau``; with a probe IF close to the truth this
reproduces the ``m``-th component while averaging noise away. The probe is
refreshed by peak tracking between iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .model import FrameConfig, IfSeries, SampleBuffer
from .spectral import SEARCH_BAND, interpolate_if, track_if

TWO_PI = 2.0 * math.pi
MAX_HARMONIC = 25
PROBE_RANGE = (49.0, 51.0)


@dataclass(frozen=True)
class EnhancerConfig:
    """Enhancer parameters.

    alpha : SFM gain; ``None`` means ``f_S / (4 max|x|)``.
    tau : number of kernel lags.
    iterations : probe refresh rounds per component.
    probe_if_hz : initial fundamental probe, scalar or per-sample.
    tau_prime : ``"harmonic"`` offsets the second lag by a quarter period
        of ``m f``; ``"fundamental"`` uses a quarter period of ``f``.
    centered_phase : integrate with the trapezoidal running sum so each
        lag window is centred on ``n``. The inclusive sum delays the output
        by half a sample.
    edge : ``"shrink"`` uses only lags that fit inside the signal on both
        sides near the edges (and renormalises); ``"clamp"`` repeats the
        edge samples and keeps all ``tau`` lags.
    """

    alpha: float | None = None
    tau: int = 3000
    iterations: int = 2
    probe_if_hz: float | np.ndarray = 50.0
    sample_rate_hz: float = 800.0
    frame_config: FrameConfig | None = None
    tau_prime: str = "harmonic"
    search_band: tuple[float, float] = SEARCH_BAND
    centered_phase: bool = True
    edge: str = "shrink"

    def __post_init__(self):
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError("tau must be a positive integer")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if self.tau_prime not in ("harmonic", "fundamental"):
            raise ValueError("tau_prime must be 'harmonic' or 'fundamental'")
        if self.edge not in ("clamp", "shrink"):
            raise ValueError("edge must be 'clamp' or 'shrink'")
        p = np.asarray(self.probe_if_hz, dtype=np.float64)
        if np.any(p < PROBE_RANGE[0]) or np.any(p > PROBE_RANGE[1]):
            raise ValueError(f"probe IF must lie in {PROBE_RANGE} Hz")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "iterations", int(self.iterations))

    @property
    def frames(self) -> FrameConfig:
        return self.frame_config or FrameConfig.default(self.sample_rate_hz)


@dataclass(frozen=True)
class EnhancedSignal:
    components: dict
    total: np.ndarray
    sample_rate_hz: float
    probes: dict = field(default_factory=dict)

    def component(self, m: int) -> SampleBuffer:
        return SampleBuffer(self.components[m], self.sample_rate_hz)

    def as_buffer(self) -> SampleBuffer:
        return SampleBuffer(self.total, self.sample_rate_hz)

    @property
    def harmonics(self) -> tuple[int, ...]:
        return tuple(sorted(self.components))


def default_alpha(x: np.ndarray, sample_rate_hz: float) -> float | None:
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    return None if peak == 0 else sample_rate_hz / (4.0 * peak)


def sfm_phase(x, alpha: float, sample_rate_hz: float, centered: bool = False) -> np.ndarray:
    """Wrapped phase of the SFM signal.

    The running sum is inclusive (``sum_{i<=n}``); with ``centered`` half of
    the current sample is removed again, i.e. trapezoidal integration.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    s = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    acc = np.cumsum(s)
    if centered:
        acc -= 0.5 * s
    ph = (TWO_PI * alpha / sample_rate_hz) * acc
    return np.angle(np.exp(1j * ph))


def sfm_encode(x: SampleBuffer, alpha: float) -> np.ndarray:
    """``z[n] = exp(j 2 pi T alpha sum_{i<=n} x[i])``."""
    return np.exp(1j * sfm_phase(x, alpha, x.sample_rate_hz))


def quarter_offset(m: int, probe_hz: float, sample_rate_hz: float, tau_prime: str = "harmonic") -> int:
    """Extra lag that turns the second autocorrelation term into quadrature."""
    f = m * probe_hz if tau_prime == "harmonic" else probe_hz
    return int(round(sample_rate_hz / (4.0 * f)))


def kernel_phase(z: np.ndarray, n: int, lag: int, m: int, probe_f: float, cfg: EnhancerConfig) -> float:
    """Phase of the component-dependent kernel at one sample and lag.

    ``theta sin(2 theta) Arg R[n, lag] + theta cos(2 theta) Arg R[n, lag']``
    with ``theta = pi T m probe_f lag`` and ``R[n, k] = z[n+k] conj(z[n-k])``.
    Indices outside the signal are clamped to the edges. Reference
    implementation; ``rfa_component`` uses a vectorised equivalent.
    """
    if lag < 0 or not probe_f > 0:
        raise ValueError("need lag >= 0 and a positive probe")
    fs = cfg.sample_rate_hz
    N = len(z)
    theta = math.pi * m * probe_f * lag / fs
    lag2 = lag + quarter_offset(m, probe_f, fs, cfg.tau_prime)

    def arg_r(k):
        a = z[min(max(n + k, 0), N - 1)]
        b = z[min(max(n - k, 0), N - 1)]
        return float(np.angle(a * np.conj(b)))

    return theta * math.sin(2 * theta) * arg_r(lag) + theta * math.cos(2 * theta) * arg_r(lag2)


@njit(cache=True, fastmath=True)
def _kernel_sum(phi_pad, omega, lim, q, tau, off, block):
    # sum_{t <= lim[n]} t * (sin(w t) d1 + cos(w t) d2), times w/2;
    # sin/cos advance by rotation
    N = omega.shape[0]
    out = np.empty(N)
    inv = 1.0 / TWO_PI
    c = np.empty(block)
    s = np.empty(block)
    cw = np.empty(block)
    sw = np.empty(block)
    acc = np.empty(block)
    for b0 in range(0, N, block):
        nb = min(block, N - b0)
        lo = tau
        for i in range(nb):
            w = omega[b0 + i]
            cw[i] = np.cos(w)
            sw[i] = np.sin(w)
            c[i] = 1.0
            s[i] = 0.0
            acc[i] = 0.0
            lo = min(lo, lim[b0 + i])
        for t in range(tau + 1):
            ft = float(t)
            p = phi_pad[b0 + off + t: b0 + off + t + nb]
            mn = phi_pad[b0 + off - t: b0 + off - t + nb]
            p2 = phi_pad[b0 + off + t + q: b0 + off + t + q + nb]
            m2 = phi_pad[b0 + off - t - q: b0 + off - t - q + nb]
            masked = t > lo
            for i in range(nb):
                d1 = p[i] - mn[i]
                d1 -= TWO_PI * np.floor(d1 * inv + 0.5)
                d2 = p2[i] - m2[i]
                d2 -= TWO_PI * np.floor(d2 * inv + 0.5)
                wt = ft
                if masked and t > lim[b0 + i]:
                    wt = 0.0
                acc[i] += wt * (s[i] * d1 + c[i] * d2)
                cn = c[i] * cw[i] - s[i] * sw[i]
                s[i] = s[i] * cw[i] + c[i] * sw[i]
                c[i] = cn
        for i in range(nb):
            out[b0 + i] = 0.5 * omega[b0 + i] * acc[i]
    return out


def lag_limits(n_samples: int, q: int, tau: int, edge: str) -> np.ndarray:
    """Largest lag used at each sample.

    ``"clamp"`` always uses all ``tau`` lags (out-of-range indices repeat the
    edge sample). ``"shrink"`` keeps only lags whose indices, including the
    quarter-period offset, fall inside the signal on both sides.
    """
    if edge == "clamp":
        return np.full(n_samples, tau, dtype=np.int64)
    n = np.arange(n_samples, dtype=np.int64)
    return np.clip(np.minimum(n, n_samples - 1 - n) - q, 0, tau)


def kernel_phase_sum(phi: np.ndarray, m: int, probe_hz: np.ndarray, cfg: EnhancerConfig,
                     with_limits: bool = False):
    """``sum_{lag=0..tau} kernel_phase`` for every sample, from the SFM phase.

    With ``with_limits`` the per-sample largest lag is returned as well.
    """
    fs = cfg.sample_rate_hz
    probe = np.broadcast_to(np.asarray(probe_hz, dtype=np.float64), phi.shape)
    omega = np.ascontiguousarray(TWO_PI * m * probe / fs)
    f_q = m * probe if cfg.tau_prime == "harmonic" else probe
    qs = np.rint(fs / (4.0 * f_q)).astype(np.int64)
    out = np.empty(phi.size)
    limits = np.empty(phi.size, dtype=np.int64)
    for q in np.unique(qs):
        q = int(q)
        off = cfg.tau + q
        phi_pad = np.concatenate((np.full(off, phi[0]), phi, np.full(off, phi[-1])))
        lim = lag_limits(phi.size, q, cfg.tau, cfg.edge)
        full = _kernel_sum(phi_pad, omega, lim, q, cfg.tau, off, 1024)
        sel = qs == q
        out[sel] = full[sel]
        limits[sel] = lim[sel]
    return (out, limits) if with_limits else out


def _check_harmonic(m: int, fs: float):
    if m > MAX_HARMONIC:
        raise ValueError(f"harmonic {m} > {MAX_HARMONIC}: neighbouring bands may overlap")
    if m < 1 or m * PROBE_RANGE[1] >= fs / 2:
        raise ValueError(f"harmonic {m} band is not inside (0, {fs / 2}) Hz")


def _decode(ksum: np.ndarray, limits: np.ndarray, alpha: float, cfg: EnhancerConfig) -> np.ndarray:
    # dividing by T as well keeps the output on the input amplitude scale
    t = limits.astype(np.float64)
    norm = (t + 1) * t * math.pi * alpha / cfg.sample_rate_hz
    out = np.zeros_like(ksum)
    np.divide(ksum, norm, out=out, where=norm > 0)
    return out


def _refresh_probe(component: np.ndarray, m: int, cfg: EnhancerConfig) -> np.ndarray:
    series = track_if(SampleBuffer(component, cfg.sample_rate_hz), m, cfg.frames, cfg.search_band)
    fund = IfSeries(series.values_hz / m, 1, series.frame_config)
    return interpolate_if(fund, component.size)


def rfa_component(z_or_phase: np.ndarray, m: int, cfg: EnhancerConfig, alpha: float | None = None,
                  probe_hz=None) -> tuple[np.ndarray, np.ndarray]:
    """Enhance harmonic ``m``; returns ``(component, refreshed fundamental probe)``.

    ``z_or_phase`` is either the complex SFM signal or its wrapped phase.
    ``alpha`` must match the encoding (defaults to ``cfg.alpha``).
    """
    fs = cfg.sample_rate_hz
    _check_harmonic(m, fs)
    a = np.asarray(z_or_phase)
    phi = np.angle(a) if np.iscomplexobj(a) else a.astype(np.float64)
    alpha = cfg.alpha if alpha is None else alpha
    if alpha is None:
        raise ValueError("alpha is required to decode the component")
    probe = np.broadcast_to(np.asarray(cfg.probe_if_hz if probe_hz is None else probe_hz, float),
                            phi.shape).copy()
    comp = np.zeros(phi.size)
    for _ in range(cfg.iterations):
        comp = _decode(*kernel_phase_sum(phi, m, probe, cfg, with_limits=True), alpha, cfg)
        if not np.any(comp):
            break
        probe = _refresh_probe(comp, m, cfg)
    return comp, probe


def hrfa(x: SampleBuffer, harmonics, cfg: EnhancerConfig | None = None) -> EnhancedSignal:
    """Enhance every harmonic in ``harmonics``, bootstrapping from the 2nd.

    The 2nd harmonic is enhanced first from the configured probe; its final
    probe then seeds every other harmonic.
    """
    ms = sorted({int(m) for m in harmonics})
    if 2 not in ms:
        raise ValueError("the 2nd harmonic is required to bootstrap the probe")
    cfg = replace(cfg or EnhancerConfig(), sample_rate_hz=x.sample_rate_hz)
    for m in ms:
        _check_harmonic(m, cfg.sample_rate_hz)
    alpha = cfg.alpha or default_alpha(x.samples, x.sample_rate_hz)
    n = len(x)
    if alpha is None:
        zeros = {m: np.zeros(n) for m in ms}
        probes = {m: np.broadcast_to(np.asarray(cfg.probe_if_hz, float), (n,)).copy() for m in ms}
        return EnhancedSignal(zeros, np.zeros(n), x.sample_rate_hz, probes)
    phi = sfm_phase(x, alpha, x.sample_rate_hz, cfg.centered_phase)
    comps, probes = {}, {}
    comps[2], probes[2] = rfa_component(phi, 2, cfg, alpha)
    for m in ms:
        if m != 2:
            comps[m], probes[m] = rfa_component(phi, m, cfg, alpha, probe_hz=probes[2])
    total = np.sum([comps[m] for m in ms], axis=0)
    return EnhancedSignal(comps, total, x.sample_rate_hz, probes)
