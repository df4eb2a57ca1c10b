"""Error metrics, the Cramer-Rao bound, Monte Carlo harnesses and oracles."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import model as mdl
from .enhancement import EnhancerConfig
from .estimators import DEFAULT_HARMONICS, Pipeline, SchemeId, SchemeParams, mle, wmle, estimate_weights
from .model import NORMALIZED, FrameConfig, HarmonicModelSpec, IfSeries, SampleBuffer
from .preprocess import frame
from .selection import _rank_key
from .spectral import as_normalized, track_if

ORACLE_MAX_DIM = 12


@dataclass(frozen=True)
class TrialReport:
    scheme: str
    snr_db: float
    mse_hz2: float
    nmse_hz2: float
    omega_size: int
    seed: int


def crlb(n_f: int, snr_linear: float, harmonics, sample_rate_hz: float = 800.0,
         n_components: int = 6) -> float:
    """Cramer-Rao bound (Hz^2) on the ENF at the 2nd-harmonic scale.

    Equal-amplitude harmonics; ``snr_linear`` is the total signal to noise
    energy ratio, shared by ``n_components`` tones, which gives the constant
    ``12 * n_components`` (72 for six harmonics).
    """
    ms = [int(m) for m in harmonics]
    if not ms:
        raise ValueError("harmonic set is empty")
    if not snr_linear > 0:
        raise ValueError("snr must be positive")
    s2 = float(sum(m * m for m in ms))
    return (12.0 * n_components / (n_f ** 3 * snr_linear) / s2
            * (sample_rate_hz / (2 * math.pi)) ** 2 * 4.0)


def _aligned(estimate, truth, offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    e = as_normalized(estimate).values_hz if isinstance(estimate, IfSeries) else np.asarray(estimate, float)
    t = as_normalized(truth).values_hz if isinstance(truth, IfSeries) else np.asarray(truth, float)
    if offset > 0:
        t = t[offset:]
    elif offset < 0:
        e = e[-offset:]
    n = min(e.size, t.size)
    if n == 0:
        raise ValueError("estimate and truth do not overlap")
    return e[:n], t[:n]


def mse(estimate, truth, offset: int = 0) -> float:
    """Mean squared difference over the start-aligned overlap.

    ``offset > 0`` drops that many leading frames of the truth, a negative
    offset drops leading frames of the estimate.
    """
    e, t = _aligned(estimate, truth, offset)
    return float(np.mean((e - t) ** 2))


def mse_nmse(estimate, truth, offset: int = 0) -> tuple[float, float]:
    """``(mse, nmse)`` of one trial; for a single trial both coincide."""
    v = mse(estimate, truth, offset)
    return v, v


def nmse(mses) -> float:
    """Mean of per-trial MSEs."""
    v = np.asarray(list(mses), dtype=np.float64)
    if v.size == 0:
        raise ValueError("no trials")
    return float(v.mean())


def phase_slope_weights(n: int) -> np.ndarray:
    """Weights turning per-sample IF into the least-squares phase slope.

    Fitting a line to the accumulated phase of ``n`` samples gives
    ``sum_i c_i f[i]`` with ``c_i`` proportional to
    ``sum_{k>i} (k - mean(k))``, a parabola that vanishes at both ends.
    This is the frequency a periodogram peak locks onto.
    """
    k = np.arange(n, dtype=np.float64)
    d = k - k.mean()
    c = np.concatenate((np.cumsum(d[::-1])[::-1][1:], [0.0]))
    tot = c.sum()
    return c / tot if tot > 0 else np.full(n, 1.0 / n)


def frame_truth(fundamental_hz: np.ndarray, cfg: FrameConfig, weighting: str = "phase") -> IfSeries:
    """Per-frame reference ENF at the 2nd-harmonic scale.

    ``weighting="phase"`` uses the least-squares phase slope over the
    samples each frame covers; ``"mean"`` uses the plain average of
    ``f[n]``. Frames running into the zero padding use their real samples.
    """
    if weighting not in ("phase", "mean"):
        raise ValueError("weighting must be 'phase' or 'mean'")
    f = np.asarray(fundamental_hz, dtype=np.float64)
    n_frames = mdl.num_frames(f.size, cfg)
    out = np.empty(n_frames)
    full_w = phase_slope_weights(cfg.frame_len) if weighting == "phase" else None
    for l in range(n_frames):
        seg = f[l * cfg.step: l * cfg.step + cfg.frame_len]
        if weighting == "mean":
            out[l] = seg.mean()
        else:
            w = full_w if seg.size == cfg.frame_len else phase_slope_weights(seg.size)
            out[l] = seg @ w
    return IfSeries(2.0 * out, NORMALIZED, cfg)


@dataclass(frozen=True)
class Scenario:
    """A synthetic experiment.

    ``enf_rate_hz`` is the rate of the AR(1) ENF process, which is linearly
    interpolated to the sample rate.
    """

    duration_s: float = 300.0
    snrs_db: tuple = (-20.0,)
    schemes: tuple = tuple(s.value for s in SchemeId)
    corrupt_set: tuple = ()
    corruption_snr_db: float = -10.0
    trials: int = 10
    seed: int = 0
    harmonics: tuple = DEFAULT_HARMONICS
    sample_rate_hz: float = 800.0
    enf_rate_hz: float = 1.0
    ar_coef: float = 0.99
    enf_variance: float = 4.5e-4
    enhancer: EnhancerConfig = field(default_factory=EnhancerConfig)
    n_rep: int = 1000
    eta: float | None = None
    track_omega: bool = False


def synth_enf(n_samples: int, sample_rate_hz: float, seed: int, rate_hz: float = 1.0,
              ar_coef: float = 0.99, variance: float = 4.5e-4) -> np.ndarray:
    """AR(1) ENF at ``rate_hz`` values per second, interpolated per sample."""
    if rate_hz >= sample_rate_hz:
        return mdl.synth_enf_ar1(n_samples, seed, ar_coef, variance)
    n_slow = int(math.ceil(n_samples / sample_rate_hz * rate_hz)) + 2
    slow = mdl.synth_enf_ar1(n_slow, seed, ar_coef, variance)
    t = np.arange(n_samples) / sample_rate_hz * rate_hz
    return np.interp(t, np.arange(n_slow), slow)


def simulate_recording(sc: Scenario, snr_db: float, trial: int):
    """Noisy multi-tone recording and its per-frame truth.

    Returns ``(recording, truth, spec)``. Noise is scaled against the clean,
    uncorrupted mixture. ENF, phases, corruption and noise come from
    separate seed streams of ``(sc.seed, trial)``.
    """
    fs = sc.sample_rate_hz
    n = int(round(sc.duration_s * fs))
    f = synth_enf(n, fs, mdl.stream_seed(sc.seed, trial, mdl.STREAM_ENF), sc.enf_rate_hz,
                  sc.ar_coef, sc.enf_variance)
    spec = HarmonicModelSpec.from_fundamental(
        f, sc.harmonics, seed=mdl.stream_seed(sc.seed, trial, mdl.STREAM_PHASES))
    clean = mdl.synth_multitone(spec, fs)
    noisy_spec = mdl.corrupt_harmonics(spec, sc.corrupt_set, sc.corruption_snr_db,
                                       mdl.stream_seed(sc.seed, trial, mdl.STREAM_CORRUPTION), fs)
    mix = mdl.synth_multitone(noisy_spec, fs)
    if not (math.isinf(snr_db) and snr_db > 0):
        v = mdl.wgn_for_snr(clean, snr_db, mdl.stream_seed(sc.seed, trial, mdl.STREAM_NOISE))
        mix = SampleBuffer(mix.samples + v, fs)
    truth = frame_truth(f, FrameConfig.default(fs))
    return mix, truth, noisy_spec


@dataclass
class MonteCarloResult:
    reports: list
    nmse_table: dict
    omega_sizes: dict

    def nmse(self, scheme, snr_db) -> float:
        return self.nmse_table[(SchemeId(scheme).value, float(snr_db))]


def run_trial(sc: Scenario, snr_db: float, trial: int):
    rec, truth, _ = simulate_recording(sc, snr_db, trial)
    params = SchemeParams(harmonics=tuple(sc.harmonics), target_fs_hz=sc.sample_rate_hz,
                          enhancer=sc.enhancer, n_rep=sc.n_rep, eta=sc.eta,
                          seed=mdl.stream_seed(sc.seed, trial, mdl.STREAM_ETA))
    pipe = Pipeline(rec, params)
    reports = []
    for s in sc.schemes:
        res = pipe.run(s)
        e = mse(res.estimate, truth)
        reports.append(TrialReport(SchemeId(s).value, float(snr_db), e, e, len(res.omega), trial))
    omega = None
    if sc.track_omega:
        omega = (len(pipe.selection(False).omega), len(pipe.selection(True).omega))
    return reports, omega


def aggregate(reports) -> dict:
    """NMSE per ``(scheme, snr)``; independent of report order."""
    groups = defaultdict(list)
    for r in reports:
        groups[(r.scheme, r.snr_db)].append((r.seed, r.mse_hz2))
    return {k: nmse(v for _, v in sorted(vals)) for k, vals in sorted(groups.items())}


def monte_carlo(sc: Scenario) -> MonteCarloResult:
    """Run every scheme on ``sc.trials`` fresh recordings per SNR."""
    reports = []
    omega = defaultdict(list)
    for snr in sc.snrs_db:
        for t in range(sc.trials):
            rep, om = run_trial(sc, snr, t)
            reports.extend(rep)
            if om is not None:
                omega[float(snr)].append(om)
    sizes = {snr: (float(np.mean([a for a, _ in v])), float(np.mean([b for _, b in v])))
             for snr, v in omega.items()}
    return MonteCarloResult(reports, aggregate(reports), sizes)


def crlb_experiment(snrs_db=(-40, -35, -10, 0, 10), trials: int = 200, n_f: int = 6400,
                    harmonics=DEFAULT_HARMONICS, sample_rate_hz: float = 800.0, seed: int = 0,
                    estimators=("single", "mle", "wmle")) -> dict:
    """Single-frame NMSE of the estimators against the bound.

    Each trial draws a constant fundamental uniformly in ``50 +- 0.05`` Hz
    and random phases. Returns ``{estimator: {snr: nmse}}`` plus a
    ``"crlb"`` entry.
    """
    fs = sample_rate_hz
    cfg = FrameConfig(n_f, n_f)
    err = {e: defaultdict(list) for e in estimators}
    for t in range(trials):
        rng = np.random.default_rng(mdl.stream_seed(seed, t, mdl.STREAM_ENF))
        f0 = rng.uniform(49.95, 50.05)
        spec = HarmonicModelSpec.from_fundamental(
            np.full(n_f, f0), harmonics, seed=mdl.stream_seed(seed, t, mdl.STREAM_PHASES))
        clean = mdl.synth_multitone(spec, fs)
        for snr in snrs_db:
            x = mdl.add_wgn_at_snr(clean, snr, mdl.stream_seed(seed, t, mdl.STREAM_NOISE))
            for e in estimators:
                if e == "single":
                    est = as_normalized(track_if(x, 2, cfg)).values_hz[0]
                elif e == "mle":
                    est = mle(x, harmonics, cfg).values_hz[0]
                else:
                    est = wmle(x, harmonics, cfg, estimate_weights(x, harmonics, cfg)).values_hz[0]
                err[e][float(snr)].append((est - 2 * f0) ** 2)
    out = {e: {s: nmse(v) for s, v in d.items()} for e, d in err.items()}
    out["crlb"] = {float(s): crlb(n_f, 10 ** (s / 10), harmonics, fs) for s in snrs_db}
    return out


def _feasible(subset, adj) -> bool:
    return all(adj[i, j] > 0 for i, j in combinations(subset, 2))


def oracle_mwc(R, eta: float, maximal_only: bool = True) -> tuple[int, ...]:
    """Exhaustive best clique (vertex indices), or ``()`` if none exists.

    Candidates are vertex subsets of size >= 2 whose pairwise entries are
    all positive and reach ``eta``. With ``maximal_only`` only subsets that cannot be
    extended by another vertex compete; otherwise every feasible subset
    does, in which case the best single edge always wins. Ranking and
    tie-breaking match ``select_mwc``.
    """
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0]
    if n > ORACLE_MAX_DIM:
        raise ValueError(f"oracle refuses matrices larger than {ORACLE_MAX_DIM}")
    adj = np.where(R >= eta, R, 0.0)
    np.fill_diagonal(adj, 0.0)
    feas = [c for k in range(2, n + 1) for c in combinations(range(n), k) if _feasible(c, adj)]
    if maximal_only:
        feas = [c for c in feas
                if not any(_feasible(c + (v,), adj) for v in range(n) if v not in c)]
    if not feas:
        return ()
    return max(feas, key=lambda c: _rank_key(c, adj))
